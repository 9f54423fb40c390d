"""
Constrained relaxation toward the maximizer of the penalized energy ℰ_λ over

    𝒜_{μ,ν} = { ω >= 0 : ∫ x2 ω = μ, ∫ ω <= ν }

Each step takes ψ = 𝒢ω and returns λ(ψ - W x2 - γ)_+, with the multipliers W, γ >= 0
chosen so the result is admissible. That field maximizes ⟨ψ, ·⟩ - ‖·‖₂²/(2λ) over the
admissible set, so by convexity of E the iteration does not decrease ℰ_λ. Every
iterate is Steiner-symmetrized, which pins the x1 translation.

Usage:
    spec = default_admissible_spec(2.0)
    cfg = MaximizerConfig(spec=spec, grid=grid)
    result = maximize(cfg)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import bisect, minimize_scalar
from tqdm import tqdm

from . import console
from .dipole import (
    box_for,
    impulse_unit,
    make_params,
    rho,
    sample_dipole,
    vorticity,
)
from .errors import DomainError, InfeasibleError
from .field import GridSpec, ScalarField, apply_G_spectral, shift_x1
from .functionals import AdmissibleSpec, compute_functionals, steiner_symmetrize

BISECT_XTOL_REL = 1e-14
BISECT_RTOL = 1e-15
BISECT_MAXITER = 200
BRACKET_DOUBLINGS = 60


@dataclass
class MaximizerConfig:
    spec: AdmissibleSpec
    grid: GridSpec
    max_iters: int = 2000
    tol_rel: float = 1e-7
    seed: int = 0
    initial: str = "blob"

    def __post_init__(self):
        if not self.tol_rel > 0.0:
            raise DomainError(f"tol_rel must be positive, got {self.tol_rel}")
        if self.max_iters < 1:
            raise DomainError(f"max_iters must be at least 1, got {self.max_iters}")
        if self.initial not in ("blob", "dipole"):
            raise DomainError(f"unknown initial guess {self.initial!r}")


@dataclass
class MaximizerResult:
    omega: ScalarField
    W: float
    gamma: float
    energies: List[float]
    iters: int
    converged: bool
    residual: float
    history: pd.DataFrame = field(repr=False, default=None)


def default_admissible_spec(lam: float, mu: Optional[float] = None, nu: Optional[float] = None,
                            nu_factor: float = 10.0) -> AdmissibleSpec:
    """μ defaults to the impulse of the W = 1 dipole, ν to nu_factor μ ϱ(λ)."""
    if mu is None:
        mu = impulse_unit(lam)
    if nu is None:
        nu = nu_factor * mu * rho(lam)
    if mu * rho(lam) > nu:
        raise InfeasibleError(
            f"mu * rho(lambda) = {mu * rho(lam):.6g} exceeds the mass cap nu = {nu:.6g}"
        )
    return AdmissibleSpec(mu=mu, nu=nu, lam=lam)


# ----------------------------
# Multiplier solves
# ----------------------------

class _Moments:
    """Impulse and mass of λ(ψ - W x2 - γ)_+ as functions of (W, γ)."""

    def __init__(self, psi: np.ndarray, grid: GridSpec, lam: float):
        self.psi = psi
        self.x2 = grid.x2[:, None]
        self.lam = lam
        self.area = grid.cell_area

    def field(self, W: float, gamma: float) -> np.ndarray:
        return self.lam * np.maximum(self.psi - W * self.x2 - gamma, 0.0)

    def impulse(self, W: float, gamma: float = 0.0) -> float:
        return float((self.x2 * self.field(W, gamma)).sum() * self.area)

    def mass(self, W: float, gamma: float = 0.0) -> float:
        return float(self.field(W, gamma).sum() * self.area)


def _upper_W(m: _Moments, mu: float, gamma: float) -> float:
    # above max(ψ)/min(x2) the positive part vanishes everywhere
    W_hi = 2.0 * max(float(m.psi.max()), 0.0) / float(m.x2.min())
    W_hi = max(W_hi, 1e-300)
    for _ in range(BRACKET_DOUBLINGS):
        if m.impulse(W_hi, gamma) < mu:
            return W_hi
        W_hi *= 2.0
    raise InfeasibleError("could not bracket W: impulse does not fall below mu")


def _solve_W(m: _Moments, mu: float, gamma: float) -> float:
    if m.impulse(0.0, gamma) < mu:
        raise InfeasibleError(
            f"impulse of lambda*(psi - gamma)_+ is {m.impulse(0.0, gamma):.6g} < mu = {mu:.6g}; "
            f"grid or lambda cannot carry the impulse"
        )
    W_hi = _upper_W(m, mu, gamma)
    return float(bisect(lambda W: m.impulse(W, gamma) - mu, 0.0, W_hi,
                        xtol=BISECT_XTOL_REL * W_hi, rtol=BISECT_RTOL,
                        maxiter=BISECT_MAXITER))


def _solve_W_gamma(m: _Moments, mu: float, nu: float) -> Tuple[float, float]:
    """Nested solve of {I = μ, mass = ν}: outer bisection on γ, inner on W."""
    # largest γ that still carries the impulse with W = 0
    g_hi = max(float(m.psi.max()), 0.0)
    gamma_max = float(bisect(lambda g: m.impulse(0.0, g) - mu, 0.0, g_hi,
                             xtol=BISECT_XTOL_REL * max(g_hi, 1e-300), rtol=BISECT_RTOL,
                             maxiter=BISECT_MAXITER))
    if m.mass(0.0, gamma_max) > nu:
        raise InfeasibleError(
            f"mass cap nu = {nu:.6g} unreachable at impulse mu = {mu:.6g}"
        )

    def excess(gamma: float) -> float:
        W = _solve_W(m, mu, gamma) if m.impulse(0.0, gamma) > mu else 0.0
        return m.mass(W, gamma) - nu

    gamma = float(bisect(excess, 0.0, gamma_max,
                         xtol=BISECT_XTOL_REL * max(gamma_max, 1e-300), rtol=BISECT_RTOL,
                         maxiter=BISECT_MAXITER))
    W = _solve_W(m, mu, gamma) if m.impulse(0.0, gamma) > mu else 0.0
    return W, gamma


def impulse_profile(psi: ScalarField, lam: float, W_values, gamma: float = 0.0) -> np.ndarray:
    """I(λ(ψ - W x2 - γ)_+) for each W in W_values; the curve the W bisection walks."""
    m = _Moments(psi.data, psi.spec, lam)
    return np.array([m.impulse(float(W), gamma) for W in W_values])


def relax_step(omega: ScalarField, spec: AdmissibleSpec,
               psi: Optional[ScalarField] = None) -> Tuple[ScalarField, float, float]:
    """
    One fixed-point update ω -> λ(𝒢ω - W x2 - γ)_+ with W, γ >= 0 making the
    result admissible. γ stays 0 unless the mass cap binds.
    """
    if psi is None:
        psi = apply_G_spectral(omega, warn_decay=False)
    m = _Moments(psi.data, omega.spec, spec.lam)

    gamma = 0.0
    W = _solve_W(m, spec.mu, gamma)
    if m.mass(W, gamma) > spec.nu:
        W, gamma = _solve_W_gamma(m, spec.mu, spec.nu)

    data = m.field(W, gamma)
    impulse = float((m.x2 * data).sum() * m.area)
    # bisection leaves a relative impulse error near rounding; remove it
    data *= spec.mu / impulse
    return omega.with_data(data, quantity="vorticity"), W, gamma


# ----------------------------
# Initial guesses and distances
# ----------------------------

def _impulse(data: np.ndarray, grid: GridSpec) -> float:
    return float((grid.x2[:, None] * data).sum() * grid.cell_area)


def normalize_impulse(omega: ScalarField, mu: float) -> ScalarField:
    impulse = _impulse(omega.data, omega.spec)
    if not impulse > 0.0:
        raise DomainError("cannot normalize a field with nonpositive impulse")
    return omega.with_data(omega.data * (mu / impulse))


def initial_guess(config: MaximizerConfig) -> ScalarField:
    """
    'blob': indicator of a disc of random radius in [0.7a, 1.3a], random x1 offset.
    'dipole': the analytic dipole rescaled by a random factor in [0.9, 1.1], random offset.
    Both normalized to impulse μ.
    """
    spec = config.spec
    grid = config.grid
    rng = np.random.default_rng(config.seed)
    params = make_params(spec.lam, spec.mu / impulse_unit(spec.lam))
    a = params.a
    X1, X2 = grid.mesh()
    offset = a * rng.uniform(-0.5, 0.5)

    if config.initial == "blob":
        radius = a * rng.uniform(0.7, 1.3)
        centre = 1.1 * radius
        data = ((X1 - offset) ** 2 + (X2 - centre) ** 2 < radius ** 2).astype(np.float64)
    else:
        scale = rng.uniform(0.9, 1.1)
        data = np.asarray(vorticity(params, (X1 - offset) / scale, X2 / scale))

    return normalize_impulse(ScalarField(grid, data, "vorticity"), spec.mu)


def orbit_norm(omega: ScalarField) -> float:
    """‖ω‖₁ + ‖ω‖₂ + ‖x2 ω‖₁."""
    return orbit_metric(omega.data, omega.spec)


def orbit_metric(diff: np.ndarray, grid: GridSpec) -> float:
    """‖d‖₁ + ‖d‖₂ + ‖x2 d‖₁ of a difference field d (the stability norm)."""
    area = grid.cell_area
    l1 = np.abs(diff).sum() * area
    l2 = math.sqrt((diff * diff).sum() * area)
    weighted = (grid.x2[:, None] * np.abs(diff)).sum() * area
    return float(l1 + l2 + weighted)


def _l2_metric(diff: np.ndarray, grid: GridSpec) -> float:
    return math.sqrt(float((diff * diff).sum() * grid.cell_area))


def _shift_order(nx: int) -> np.ndarray:
    """0, 1, -1, 2, -2, ...: the first minimum found has the smallest |c|."""
    half = nx // 2
    order = [0]
    for c in range(1, half + 1):
        order.append(c)
        if c < half:
            order.append(-c)
    return np.array(order)


def aligned_distance(data: np.ndarray, reference: np.ndarray, grid: GridSpec,
                     metric=orbit_metric) -> Tuple[float, float]:
    """
    inf over x1 translations c of metric(data(· + c) - reference).

    Integer cell shifts are scanned first (periodic index rotation); the best one
    is refined by a bounded continuous search over spectrally translated fields.
    Returns (distance, shift in cells).
    """
    shifts = _shift_order(grid.nx)
    values = np.array([metric(np.roll(data, int(c), axis=1) - reference, grid) for c in shifts])
    best = int(np.argmin(values))
    c0 = int(shifts[best])
    distance = float(values[best])
    if distance == 0.0:
        return 0.0, float(c0)

    rolled = np.roll(data, c0, axis=1)

    def shifted(s: float) -> float:
        return metric(shift_x1(rolled, s * grid.hx, grid.hx) - reference, grid)

    refined = minimize_scalar(shifted, bounds=(-1.0, 1.0), method="bounded",
                              options={"xatol": 1e-4})
    if refined.fun < distance:
        return float(refined.fun), c0 + float(refined.x)
    return distance, float(c0)


def orbit_distance(omega: ScalarField, lam: float, W_ref: float,
                   reference: Optional[ScalarField] = None) -> float:
    """
    inf_c ‖ω(· + c e1) - ω_L‖_{L¹∩L²} + ‖x2 (ω(· + c e1) - ω_L)‖_{L¹},
    ω_L the analytic dipole (λ, W_ref) centred at x1 = 0.
    """
    if reference is None:
        reference = sample_dipole(make_params(lam, W_ref), omega.spec, "vorticity")
    distance, _ = aligned_distance(omega.data, reference.data, omega.spec)
    return distance


def aligned_l2_distance(omega: ScalarField, reference: ScalarField) -> float:
    """Relative L² distance after the best x1 translation."""
    distance, _ = aligned_distance(omega.data, reference.data, omega.spec, _l2_metric)
    norm = _l2_metric(reference.data, reference.spec)
    return distance / norm if norm > 0.0 else distance


def fixed_point_residual(omega: ScalarField, spec: AdmissibleSpec) -> float:
    """‖ω - λ(𝒢ω - W x2 - γ)_+‖₂ / ‖ω‖₂ with W, γ solved for ω itself."""
    relaxed, _, _ = relax_step(omega, spec)
    norm = _l2_metric(omega.data, omega.spec)
    return _l2_metric(relaxed.data - omega.data, omega.spec) / norm


# ----------------------------
# Driver
# ----------------------------

def maximize(config: MaximizerConfig, initial: Optional[ScalarField] = None,
             verbose: bool = False, progress: bool = True) -> MaximizerResult:
    """
    Iterate relax -> Steiner -> impulse renormalization until the fixed-point
    residual drops below tol_rel or max_iters is reached.
    """
    spec = config.spec
    omega = initial if initial is not None else initial_guess(config)
    omega = normalize_impulse(steiner_symmetrize(omega), spec.mu)

    rows = []
    energies: List[float] = []
    best = None
    previous_energy = -math.inf
    decreases = 0
    converged = False
    last = None

    bar = tqdm(range(config.max_iters + 1), desc="Relaxing", unit=" it", disable=not progress)
    for it in bar:
        psi = apply_G_spectral(omega, warn_decay=False)
        fun = compute_functionals(omega, spec.lam, psi=psi)
        relaxed, W, gamma = relax_step(omega, spec, psi=psi)
        residual = _l2_metric(relaxed.data - omega.data, omega.spec) / fun.l2

        rows.append({
            "iter": it, "E": fun.E, "E_lambda": fun.E_lambda, "W": W, "gamma": gamma,
            "mass": fun.mass, "impulse": fun.I, "residual": residual,
        })
        energies.append(fun.E_lambda)
        bar.set_postfix(residual=f"{residual:.2e}", E_lambda=f"{fun.E_lambda:.6g}")

        if it > 0:
            if fun.E_lambda < previous_energy:
                decreases += 1
                if verbose:
                    console.info("maximize", f"iter {it}: E_lambda decreased by "
                                             f"{previous_energy - fun.E_lambda:.3e}")
            if best is None or fun.E_lambda > best[0]:
                best = (fun.E_lambda, omega, W, gamma, residual, it)
        previous_energy = fun.E_lambda
        last = (fun.E_lambda, omega, W, gamma, residual, it)

        if it > 0 and residual <= config.tol_rel:
            converged = True
            break
        if it == config.max_iters:
            break
        omega = normalize_impulse(steiner_symmetrize(relaxed), spec.mu)
    bar.close()

    if decreases:
        console.warn(f"E_lambda decreased on {decreases} of {len(energies) - 1} steps")

    # the converged iterate wins unless an earlier one is clearly better
    chosen = last
    if best is not None and best[0] > last[0] + 1e-10 * abs(last[0]):
        chosen = best
    E_lambda, omega, W, gamma, residual, it = chosen

    if verbose:
        state = "converged" if converged else "not converged"
        console.info("maximize", f"{state} after {last[5]} iterations, "
                                 f"W={W:.8g}, gamma={gamma:.3g}, residual={residual:.2e}")

    return MaximizerResult(
        omega=omega, W=W, gamma=gamma, energies=energies, iters=last[5],
        converged=converged, residual=residual, history=pd.DataFrame(rows),
    )


def compare_with_dipole(result: MaximizerResult, spec: AdmissibleSpec) -> dict:
    """Distances between the relaxed field and the analytic dipole with impulse μ."""
    W_analytic = spec.mu / impulse_unit(spec.lam)
    params = make_params(spec.lam, W_analytic)
    reference = sample_dipole(params, result.omega.spec, "vorticity")
    analytic = compute_functionals(reference, spec.lam)
    relaxed = compute_functionals(result.omega, spec.lam)
    return {
        "W": result.W,
        "W_analytic": W_analytic,
        "W_rel_error": abs(result.W - W_analytic) / W_analytic,
        "gamma": result.gamma,
        "l2_distance": aligned_l2_distance(result.omega, reference),
        "E_lambda": relaxed.E_lambda,
        "E_lambda_analytic": analytic.E_lambda,
        "E_lambda_rel_gap": (analytic.E_lambda - relaxed.E_lambda) / abs(analytic.E_lambda),
        "converged": result.converged,
        "iters": result.iters,
        "residual": result.residual,
    }


def grid_for(lam: float, box_factor: float, nx: int, ny: int) -> GridSpec:
    """Box sized by the dipole radius, which does not depend on W."""
    return box_for(make_params(lam, 1.0), box_factor, nx, ny)
