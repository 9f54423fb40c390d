"""
Pseudo-spectral time integration of potential-vorticity transport

    ∂_t q + v·∇q = 0,   v = ∇⊥ψ = (∂2ψ, -∂1ψ),   ψ = (-Δ + 1)^{-1} q

on the half-plane grid, through the odd extension in x2 and a periodic box.
The advection product is dealiased with the 2/3 rule; time stepping is
classical RK4 with a CFL guard.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd
from scipy import ndimage
from scipy.optimize import bisect
from tqdm import tqdm

from . import console
from .dipole import make_params, sample_dipole
from .errors import CFLViolation, DomainError, NumericalAbort
from .field import GridSpec, ScalarField, odd_extend, shift_x1, spectral_wavenumbers
from .maximizer import aligned_distance, orbit_metric, orbit_norm

CFL_LIMIT = 0.5
PERTURBATION_KINDS = ("smooth-noise", "shift", "dilate")


@dataclass
class EvolutionState:
    q: ScalarField
    t: float = 0.0

    @property
    def spec(self) -> GridSpec:
        return self.q.spec


class SpectralOperators:
    """Wavenumber tables for one grid, built once per run."""

    def __init__(self, spec: GridSpec, hyperviscosity: float = 0.0):
        self.spec = spec
        k1, k2 = spectral_wavenumbers(spec)
        self.ik1 = 1j * k1
        self.ik2 = 1j * k2
        self.k_sq = k1 ** 2 + k2 ** 2
        self.inv_helmholtz = 1.0 / (self.k_sq + 1.0)
        self.damping = hyperviscosity * self.k_sq ** 4

        n1 = np.round(np.abs(k1) * spec.hx * spec.nx / (2.0 * math.pi))
        n2 = np.round(np.abs(k2) * spec.hy * 2 * spec.ny / (2.0 * math.pi))
        self.mask = (n1 < spec.nx / 3.0) & (n2 < 2 * spec.ny / 3.0)
        self.shape = (2 * spec.ny, spec.nx)

    def forward(self, data: np.ndarray) -> np.ndarray:
        return np.fft.rfft2(odd_extend(data))

    def backward(self, spectrum: np.ndarray) -> np.ndarray:
        return np.fft.irfft2(spectrum, s=self.shape)[self.spec.ny:]

    def velocity(self, q_hat: np.ndarray):
        """Velocity on the extended box: (∂2ψ, -∂1ψ)."""
        psi_hat = q_hat * self.inv_helmholtz
        u = np.fft.irfft2(self.ik2 * psi_hat, s=self.shape)
        v = np.fft.irfft2(-self.ik1 * psi_hat, s=self.shape)
        return u, v

    def tendency(self, data: np.ndarray) -> np.ndarray:
        q_hat = self.forward(data)
        u, v = self.velocity(q_hat)
        qx = np.fft.irfft2(self.ik1 * q_hat, s=self.shape)
        qy = np.fft.irfft2(self.ik2 * q_hat, s=self.shape)
        product_hat = np.fft.rfft2(u * qx + v * qy) * self.mask
        out_hat = -product_hat
        if np.any(self.damping):
            out_hat = out_hat - self.damping * q_hat
        return self.backward(out_hat)

    def max_speed(self, data: np.ndarray) -> float:
        u, v = self.velocity(self.forward(data))
        return float(np.sqrt(u * u + v * v).max())


def rhs(q: ScalarField, ops: Optional[SpectralOperators] = None) -> ScalarField:
    """-(∇⊥ψ)·∇q with the 2/3-rule on the product."""
    ops = ops or SpectralOperators(q.spec)
    return q.with_data(ops.tendency(q.data), quantity="tendency")


def dealias(q: ScalarField) -> ScalarField:
    """Project onto the modes the 2/3 rule keeps."""
    ops = SpectralOperators(q.spec)
    return q.with_data(ops.backward(ops.forward(q.data) * ops.mask))


SMOOTHING_CELLS = 1.5


def smooth_project(q: ScalarField, width_cells: float = SMOOTHING_CELLS) -> ScalarField:
    """
    Gaussian filter of standard deviation width_cells * max(hx, hy), then the
    2/3 projection.

    The filter is a convolution with a positive periodic kernel, so with the
    mirrored sign of the odd extension a nonnegative q stays nonnegative up to
    the truncated Gaussian tail, which is below exp(-(π w / 1.5)² / 2) of the
    signal at the cutoff for w = width_cells.
    """
    if width_cells < 0.0:
        raise DomainError(f"smoothing width must be nonnegative, got {width_cells}")
    ops = SpectralOperators(q.spec)
    sigma = width_cells * max(q.spec.hx, q.spec.hy)
    kernel = np.exp(-0.5 * sigma * sigma * ops.k_sq) * ops.mask
    return q.with_data(ops.backward(ops.forward(q.data) * kernel))


def x1_derivative(q: ScalarField) -> ScalarField:
    """Spectral ∂1 q."""
    ops = SpectralOperators(q.spec)
    return q.with_data(ops.backward(ops.ik1 * ops.forward(q.data)), quantity="d1")


def translation_residual(q: ScalarField, W: float) -> float:
    """‖rhs(q) + W ∂1 q‖₂ / ‖W ∂1 q‖₂: zero for a profile translating at speed W in +x1."""
    ops = SpectralOperators(q.spec)
    q_hat = ops.forward(q.data)
    d1 = W * ops.backward(ops.ik1 * q_hat)
    tendency = ops.tendency(q.data)
    return float(np.linalg.norm(tendency + d1) / np.linalg.norm(d1))


def cfl_timestep(state: EvolutionState, cfl: float = 0.25,
                 ops: Optional[SpectralOperators] = None) -> float:
    """dt with dt max|v| / min(hx, hy) = cfl; infinite for a fluid at rest."""
    ops = ops or SpectralOperators(state.spec)
    speed = ops.max_speed(state.q.data)
    if speed == 0.0:
        return math.inf
    return cfl * min(state.spec.hx, state.spec.hy) / speed


def step_rk4(state: EvolutionState, dt: float, ops: Optional[SpectralOperators] = None,
             cfl_limit: float = CFL_LIMIT) -> EvolutionState:
    spec = state.spec
    ops = ops or SpectralOperators(spec)
    q = state.q.data

    ratio = dt * ops.max_speed(q) / min(spec.hx, spec.hy)
    if ratio > cfl_limit:
        raise CFLViolation(ratio, cfl_limit)

    k1 = ops.tendency(q)
    k2 = ops.tendency(q + 0.5 * dt * k1)
    k3 = ops.tendency(q + 0.5 * dt * k2)
    k4 = ops.tendency(q + dt * k3)
    new = q + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    if not np.all(np.isfinite(new)):
        raise NumericalAbort(f"non-finite potential vorticity at t={state.t + dt:.6g}",
                             last_good=state)
    return EvolutionState(ScalarField(spec, new, state.q.quantity, state.t + dt), state.t + dt)


# ----------------------------
# Diagnostics
# ----------------------------

DIAGNOSTIC_COLUMNS = ["t", "E", "I", "L1", "L2", "Linf", "orbit_dist", "centroid_x1"]


@dataclass
class DiagnosticSeries:
    times: List[float] = field(default_factory=list)
    E: List[float] = field(default_factory=list)
    I: List[float] = field(default_factory=list)
    l1: List[float] = field(default_factory=list)
    l2: List[float] = field(default_factory=list)
    linf: List[float] = field(default_factory=list)
    orbit_dist: List[float] = field(default_factory=list)
    centroid_x1: List[float] = field(default_factory=list)
    # pointwise minimum; kept out of the CSV columns
    q_min: List[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.times)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "t": self.times, "E": self.E, "I": self.I, "L1": self.l1, "L2": self.l2,
            "Linf": self.linf, "orbit_dist": self.orbit_dist, "centroid_x1": self.centroid_x1,
        }, columns=DIAGNOSTIC_COLUMNS)

    def max_relative_drift(self, name: str) -> float:
        values = np.asarray(getattr(self, name))
        if values.size == 0 or values[0] == 0.0:
            return 0.0
        return float(np.abs(values - values[0]).max() / abs(values[0]))


def record(series: DiagnosticSeries, state: EvolutionState, ops: SpectralOperators,
           reference: Optional[ScalarField] = None) -> None:
    spec = state.spec
    q = state.q.data
    area = spec.cell_area
    psi = ops.backward(ops.forward(q) * ops.inv_helmholtz)
    mass = q.sum()

    series.times.append(state.t)
    series.E.append(0.5 * float((q * psi).sum() * area))
    series.I.append(float((spec.x2[:, None] * q).sum() * area))
    series.l1.append(float(np.abs(q).sum() * area))
    series.l2.append(math.sqrt(float((q * q).sum() * area)))
    series.linf.append(float(np.abs(q).max()))
    series.q_min.append(float(q.min()))
    series.centroid_x1.append(float((spec.x1[None, :] * q).sum() / mass) if mass != 0 else 0.0)
    if reference is not None:
        distance, _ = aligned_distance(q, reference.data, spec)
        series.orbit_dist.append(distance)
    else:
        series.orbit_dist.append(math.nan)


def run(state0: EvolutionState, t_end: float, dt: float, diag_every: int = 10,
        reference: Optional[ScalarField] = None, hyperviscosity: float = 0.0,
        checkpoint_every: int = 0, checkpoint_dir: Optional[Path] = None,
        progress: bool = True) -> DiagnosticSeries:
    """
    Integrate from state0 to t_end with fixed steps no larger than dt.

    Diagnostics are recorded at t0, every diag_every steps and at t_end; orbit
    distances are measured against `reference` (the analytic dipole at the
    origin) when given. Non-finite values abort with NumericalAbort; the last
    good state is written to checkpoint_dir/last_good when a directory is given.
    """
    if t_end < 0.0:
        raise DomainError(f"t_end must be nonnegative, got {t_end}")
    if diag_every < 1:
        raise DomainError(f"diag_every must be at least 1, got {diag_every}")

    ops = SpectralOperators(state0.spec, hyperviscosity)
    series = DiagnosticSeries()
    state = EvolutionState(state0.q.copy(), state0.t)
    record(series, state, ops, reference)

    if t_end == 0.0:
        n_steps = 0
    elif math.isfinite(dt):
        n_steps = max(int(math.ceil(t_end / dt - 1e-9)), 1)
    else:
        n_steps = 1
    if n_steps == 0:
        return series
    h = t_end / n_steps

    bar = tqdm(range(1, n_steps + 1), desc="Evolving", unit=" steps", disable=not progress)
    for n in bar:
        try:
            state = step_rk4(state, h, ops)
        except NumericalAbort as abort:
            if checkpoint_dir is not None and abort.last_good is not None:
                abort.last_good.q.save(checkpoint_dir, "last_good")
            raise
        state.t = state0.t + n * h
        state.q.time = state.t

        if n % diag_every == 0 or n == n_steps:
            record(series, state, ops, reference)
            bar.set_postfix(t=f"{state.t:.3f}", E=f"{series.E[-1]:.6g}")
        if checkpoint_every and checkpoint_dir is not None and n % checkpoint_every == 0:
            state.q.save(checkpoint_dir, f"q_{n:06d}")
    bar.close()
    return series


# ----------------------------
# Perturbations
# ----------------------------

NOISE_SMOOTHING_CELLS = 4.0
SUPPORT_DILATION_CELLS = 3
SUPPORT_THRESHOLD = 1e-3


def _smooth_noise(q: ScalarField, amplitude: float, rng: np.random.Generator) -> np.ndarray:
    grid = q.spec
    # spectral ringing may leave small negative values; perturb the positive part
    data = np.maximum(q.data, 0.0)
    peak = data.max()
    if peak == 0.0:
        raise DomainError("smooth-noise needs a field with positive values")
    noise = ndimage.gaussian_filter(rng.standard_normal(data.shape), NOISE_SMOOTHING_CELLS)

    support = data > SUPPORT_THRESHOLD * peak
    support = ndimage.binary_dilation(support, iterations=SUPPORT_DILATION_CELLS)
    noise = np.where(support, noise, 0.0)

    target = amplitude * orbit_norm(q.with_data(data))

    def excess(s: float) -> float:
        return orbit_metric(np.maximum(s * noise, -data), grid) - target

    s_hi = target / max(orbit_metric(noise, grid), 1e-300)
    for _ in range(60):
        if excess(s_hi) >= 0.0:
            break
        s_hi *= 2.0
    try:
        s = bisect(excess, 0.0, s_hi, xtol=1e-12 * s_hi, maxiter=200)
    except (ValueError, RuntimeError) as exc:
        raise NumericalAbort(f"could not scale smooth noise to amplitude {amplitude}: {exc}") from exc
    return data + np.maximum(s * noise, -data)


def _dilate(q: ScalarField, amplitude: float) -> np.ndarray:
    grid = q.spec
    data = q.data
    mass = data.sum()
    x1c = float((grid.x1[None, :] * data).sum() / mass) if mass != 0 else 0.0
    scale = 1.0 + amplitude

    X1, X2 = grid.mesh()
    src_x1 = x1c + (X1 - x1c) / scale
    src_x2 = X2 / scale
    # indices into the odd extension, whose rows start at x2 = -Ly + hy/2
    col = (src_x1 + grid.Lx) / grid.hx - 0.5
    row = (src_x2 + grid.Ly) / grid.hy - 0.5
    out = ndimage.map_coordinates(odd_extend(data), [row, col], order=3, mode="constant")
    return np.maximum(out, 0.0)


def perturb(q: ScalarField, kind: str, amplitude: float, seed: int = 0) -> ScalarField:
    """
    smooth-noise  band-limited noise on the dilated support of q's positive part q+,
                  added to q+ and clipped so the sum stays nonnegative; its
                  orbit-metric size is amplitude * orbit_norm(q+)
    shift         x1 translation by `amplitude` cells through a spectral phase
    dilate        radial rescale about the x1 centroid by 1 + amplitude
    """
    if kind not in PERTURBATION_KINDS:
        raise DomainError(f"unknown perturbation kind {kind!r}; expected one of "
                          f"{', '.join(PERTURBATION_KINDS)}")
    if amplitude < 0.0:
        raise DomainError(f"amplitude must be nonnegative, got {amplitude}")
    if amplitude == 0.0:
        return q.copy()

    if kind == "smooth-noise":
        data = _smooth_noise(q, amplitude, np.random.default_rng(seed))
    elif kind == "shift":
        data = np.maximum(shift_x1(q.data, amplitude * q.spec.hx, q.spec.hx), 0.0)
    else:
        data = _dilate(q, amplitude)
    return q.with_data(data)


# ----------------------------
# Standard setups
# ----------------------------

CELL_AVERAGE_POINTS = 4


def projected_dipole(lam: float, W: float, grid: GridSpec, center: float = 0.0) -> ScalarField:
    """
    The dipole as the spectral scheme carries it: cell averages of ω_L, then
    smooth_project. Point samples of the rim kink, once dealiased, ring with
    negative values that transport turns into L1 and impulse drift.
    """
    q = sample_dipole(make_params(lam, W), grid, "vorticity", center=center,
                      oversample=CELL_AVERAGE_POINTS)
    return smooth_project(q)


def dipole_initial_state(lam: float, W: float, grid: GridSpec, start_offset: float = -2.5) -> EvolutionState:
    """Projected dipole centred at x1 = start_offset * a."""
    a = make_params(lam, W).a
    return EvolutionState(projected_dipole(lam, W, grid, center=start_offset * a), 0.0)


def reference_dipole(lam: float, W: float, grid: GridSpec) -> ScalarField:
    """Orbit reference: the projected dipole at the origin."""
    return projected_dipole(lam, W, grid)


def report_drifts(series: DiagnosticSeries) -> dict:
    drifts = {name: series.max_relative_drift(name) for name in ("E", "I", "l1", "l2")}
    for name, value in drifts.items():
        if value > 1e-3:
            console.warn(f"relative drift of {name} is {value:.2e}")
    return drifts
