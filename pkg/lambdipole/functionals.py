"""
Energy, impulse, mass, Lᵖ norms, the penalized energy ℰ_λ, admissibility checks
and Steiner symmetrization in x1.

    E(ω)   = ½ ∫ ω 𝒢ω          I(ω) = ∫ x2 ω          mass = ∫ ω
    ℰ_λ(ω) = E(ω) - ‖ω‖₂² / (2λ)
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import console
from .errors import DomainError
from .field import ScalarField, apply_G, green_sup_ratio

# Frozen calibration bounds. Both follow from 𝒢ω <= ‖G‖_{L⁴} ‖ω‖_{4/3} with
# ‖G‖_{L⁴} ≈ 0.26, and carry a factor-2 margin.
GREEN_SUP_BOUND = 0.5
ENERGY_BOUND = 0.25

NEGATIVE_TOLERANCE = 1e-10

__all__ = [
    "Functionals",
    "AdmissibleSpec",
    "AdmissibilityReport",
    "compute_functionals",
    "energy_bound_check",
    "green_sup_ratio",
    "steiner_symmetrize",
    "steiner_positions",
    "steiner_decay_bound",
    "is_admissible",
    "GREEN_SUP_BOUND",
    "ENERGY_BOUND",
]


@dataclass(frozen=True)
class Functionals:
    E: float
    I: float
    mass: float
    l1: float
    l2: float
    E_lambda: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class AdmissibleSpec:
    mu: float       # target impulse
    nu: float       # mass cap
    lam: float

    def __post_init__(self):
        if not self.mu > 0.0:
            raise DomainError(f"mu must be positive, got {self.mu}")
        if not self.nu > 0.0:
            raise DomainError(f"nu must be positive, got {self.nu}")
        if not self.lam > 1.0:
            raise DomainError(f"lambda must exceed 1, got {self.lam}")


@dataclass
class AdmissibilityReport:
    min_value: float
    impulse: float
    mass: float
    reasons: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.reasons


def _sums(omega: ScalarField) -> Tuple[float, float, float, float]:
    area = omega.spec.cell_area
    data = omega.data
    x2 = omega.spec.x2[:, None]
    impulse = float((x2 * data).sum() * area)
    mass = float(data.sum() * area)
    l1 = float(np.abs(data).sum() * area)
    l2 = math.sqrt(float((data * data).sum() * area))
    return impulse, mass, l1, l2


def compute_functionals(omega: ScalarField, lam: float, method: str = "spectral",
                        psi: Optional[ScalarField] = None) -> Functionals:
    """
    Midpoint-rule functionals of ω; E uses 𝒢ω from `psi` if given, else from `method`.
    """
    if omega.data.min() < -NEGATIVE_TOLERANCE * max(np.abs(omega.data).max(), 1.0):
        console.warn(f"{omega.quantity} has negative values (min {omega.data.min():.3e})")

    impulse, mass, l1, l2 = _sums(omega)
    if psi is None:
        psi = apply_G(omega, method)
    E = 0.5 * float((omega.data * psi.data).sum() * omega.spec.cell_area)
    return Functionals(E=E, I=impulse, mass=mass, l1=l1, l2=l2,
                       E_lambda=E - l2 * l2 / (2.0 * lam))


def energy_bound_check(omega: ScalarField, method: str = "spectral") -> float:
    """E / (‖ω‖₁^{3/2} ‖ω‖₂^{1/2}); zero for the zero field."""
    _, _, l1, l2 = _sums(omega)
    if l1 == 0.0:
        return 0.0
    psi = apply_G(omega, method)
    E = 0.5 * float((omega.data * psi.data).sum() * omega.spec.cell_area)
    return E / (l1 ** 1.5 * math.sqrt(l2))


# ----------------------------
# Steiner symmetrization
# ----------------------------

def steiner_positions(nx: int) -> np.ndarray:
    """
    Column order from the centre outward: nx/2 - 1, nx/2, nx/2 - 2, nx/2 + 1, ...
    The two centre columns straddle x1 = 0.
    """
    c = nx // 2
    order = np.empty(nx, dtype=int)
    order[0::2] = c - 1 - np.arange((nx + 1) // 2)
    order[1::2] = c + np.arange(nx // 2)
    return order


def steiner_symmetrize(omega: ScalarField) -> ScalarField:
    """Replace every row by its symmetric-decreasing rearrangement about x1 = 0."""
    descending = -np.sort(-omega.data, axis=1)
    out = np.empty_like(omega.data)
    out[:, steiner_positions(omega.spec.nx)] = descending
    return omega.with_data(out)


def steiner_decay_bound(omega: ScalarField, method: str = "spectral",
                        min_distance: float = 4.0) -> float:
    """
    Max over nodes with |x1| > min_distance of
        𝒢ω(x) / (|x1|^{-3/8} ‖ω‖₁^{1/2} ‖ω‖₂^{1/2} + exp(-sqrt|x1| / 2) ‖ω‖₁),
    the far-field profile of Steiner-symmetric fields. Zero if no node qualifies.
    """
    _, _, l1, l2 = _sums(omega)
    x1 = np.abs(omega.spec.x1)
    cols = x1 > min_distance
    if l1 == 0.0 or not cols.any():
        return 0.0
    psi = apply_G(omega, method).data[:, cols]
    d = x1[cols][None, :]
    envelope = d ** (-0.375) * math.sqrt(l1 * l2) + np.exp(-0.5 * np.sqrt(d)) * l1
    return float((psi / envelope).max())


# ----------------------------
# Admissible set
# ----------------------------

def is_admissible(omega: ScalarField, spec: AdmissibleSpec,
                  tol: float = NEGATIVE_TOLERANCE) -> Tuple[bool, AdmissibilityReport]:
    """ω >= -tol, |I - μ| <= tol μ, mass <= ν (1 + tol)."""
    impulse, mass, _, _ = _sums(omega)
    report = AdmissibilityReport(min_value=float(omega.data.min()), impulse=impulse, mass=mass)
    if report.min_value < -tol:
        report.reasons.append(f"negative values (min {report.min_value:.3e})")
    if abs(impulse - spec.mu) > tol * spec.mu:
        report.reasons.append(f"impulse {impulse:.10g} differs from mu {spec.mu:.10g}")
    if mass > spec.nu * (1.0 + tol):
        report.reasons.append(f"mass {mass:.10g} exceeds nu {spec.nu:.10g}")
    return report.ok, report
