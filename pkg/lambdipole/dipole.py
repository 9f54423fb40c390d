"""
The explicit Lamb dipole of the quasi-geostrophic shallow-water equations
(deformation parameter fixed to 1) and its verification utilities.

For λ > 1, W > 0 and k = sqrt(λ - 1), with polar coordinates r = |x|, sinθ = x2/r:

    Ψ_L = (A_L J1(k r) + W λ r / (λ - 1)) sinθ        r <= a
    Ψ_L = (W a / K1(a)) K1(r) sinθ                    r >  a
    ω_L = λ (Ψ_L - W x2)_+ ,   u_L = ∇⊥Ψ_L - W e1

A_L = -W a / ((λ - 1) J1(k a)) makes Ψ_L continuous at r = a, and the radius a is
the smallest positive root of the matching condition that makes ∂_r Ψ_L continuous:

    a (K1'(a)/K1(a) + J1'(k a) / (k J1(k a))) = λ / (λ - 1)

A general deformation parameter ε is reached by rescaling x -> ε x, W -> W / ε.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Tuple, Union

import numpy as np
from scipy.optimize import bisect

from . import console
from .errors import DomainError, NoRootError
from .field import GridSpec, ScalarField
from .specfun import (
    bessel_j0,
    bessel_j1,
    bessel_j1_over_x,
    bessel_j1_prime,
    bessel_k0_over_k1,
    bessel_k1,
    bessel_k1_prime,
    log_bessel_k1,
)

ArrayLike = Union[float, np.ndarray]

# Root scan for the matching condition, in units of 1/k
SCAN_START = 1e-6
SCAN_STEP = 1e-3
SCAN_RANGE = 100.0
SCAN_CHUNK = 4096

BISECT_XTOL = 1e-14
BISECT_RTOL = 1e-15

# Radial quadrature
GAUSS_ORDER = 32
MAX_PANELS = 256
QUAD_RTOL = 1e-13


def _check_lambda(lam: float) -> None:
    if not lam > 1.0:
        raise DomainError(f"lambda must exceed 1, got {lam}")


def _scalar_or_array(out: np.ndarray, like) -> ArrayLike:
    if np.ndim(like) == 0 and np.ndim(out) == 0:
        return float(out)
    return out


# ----------------------------
# Matching condition
# ----------------------------

def matching_function(t: ArrayLike, lam: float) -> ArrayLike:
    """
    Left side minus right side of the matching condition at radius t.

    Tends to -2 as t -> 0+ and diverges at the zeros of J1(k t).
    """
    _check_lambda(lam)
    k = math.sqrt(lam - 1.0)
    t_arr = np.asarray(t, dtype=np.float64)
    kt = k * t_arr
    with np.errstate(divide="ignore", invalid="ignore"):
        # t J1'(kt) / (k J1(kt)) written with J1(z)/z so t -> 0 stays finite
        bessel_part = np.asarray(bessel_j1_prime(kt)) / (k * k * np.asarray(bessel_j1_over_x(kt)))
        out = (
            -t_arr * np.asarray(bessel_k0_over_k1(t_arr))
            - 1.0
            + bessel_part
            - lam / (lam - 1.0)
        )
    return _scalar_or_array(out, t)


def matching_potential(t: ArrayLike, lam: float) -> ArrayLike:
    """
    ln( K1(t) |J1(k t)|^{1/(λ-1)} / t^{λ/(λ-1)} ).

    Its derivative is matching_function(t) / t, so matching roots are its
    critical points.
    """
    _check_lambda(lam)
    k = math.sqrt(lam - 1.0)
    t_arr = np.asarray(t, dtype=np.float64)
    with np.errstate(divide="ignore"):
        out = (
            np.asarray(log_bessel_k1(t_arr))
            + np.log(np.abs(np.asarray(bessel_j1(k * t_arr)))) / (lam - 1.0)
            - lam / (lam - 1.0) * np.log(t_arr)
        )
    return _scalar_or_array(out, t)


def _matching_brackets(lam: float) -> Iterator[Tuple[float, float, str]]:
    """
    Walk t upward and yield (lo, hi, kind) for every sign change:
    kind 'pole' where J1(k t) changes sign, 'root' where the matching function does.
    """
    k = math.sqrt(lam - 1.0)
    step = SCAN_STEP / k
    stop = SCAN_RANGE / k
    n_total = int(math.ceil((stop - SCAN_START) / step)) + 1

    prev = None
    for begin in range(0, n_total, SCAN_CHUNK):
        ts = SCAN_START + step * np.arange(begin, min(begin + SCAN_CHUNK, n_total))
        js = np.asarray(bessel_j1(k * ts))
        fs = np.asarray(matching_function(ts, lam))
        if prev is not None:
            ts = np.concatenate([[prev[0]], ts])
            js = np.concatenate([[prev[1]], js])
            fs = np.concatenate([[prev[2]], fs])

        pole = (js[:-1] > 0.0) != (js[1:] > 0.0)
        finite = np.isfinite(fs[:-1]) & np.isfinite(fs[1:])
        root = ~pole & finite & ((fs[:-1] < 0.0) != (fs[1:] < 0.0))
        for idx in np.flatnonzero(pole | root):
            yield float(ts[idx]), float(ts[idx + 1]), "pole" if pole[idx] else "root"

        prev = (ts[-1], js[-1], fs[-1])


@dataclass(frozen=True)
class RadiusSolution:
    a: float
    interval: int        # 1 for (0, x1), i + 1 for (x_i, x_{i+1}), x_i zeros of J1(k t)
    extra_roots: int     # further sign changes in the same interval
    residual: float


@lru_cache(maxsize=64)
def locate_radius(lam: float, verbose: bool = False) -> RadiusSolution:
    """Smallest matching root together with where the scan found it."""
    _check_lambda(lam)

    interval = 1
    bracket = None
    extra = 0
    for lo, hi, kind in _matching_brackets(lam):
        if kind == "pole":
            if bracket is not None:
                break
            interval += 1
        elif bracket is None:
            bracket = (lo, hi)
        else:
            extra += 1

    if bracket is None:
        k = math.sqrt(lam - 1.0)
        raise NoRootError(
            f"no matching root for lambda={lam} with t <= {SCAN_RANGE / k:.6g}"
        )

    a = bisect(lambda t: matching_function(t, lam), bracket[0], bracket[1],
               xtol=BISECT_XTOL, rtol=BISECT_RTOL, maxiter=200)
    residual = abs(matching_function(a, lam))

    if verbose:
        console.info("radius", f"lambda={lam}: a={a:.12f} in J1 interval {interval}, "
                               f"residual {residual:.2e}")
    if extra:
        console.warn(f"lambda={lam}: {extra} further matching root(s) in J1 interval "
                     f"{interval}; keeping the smallest")
    return RadiusSolution(a=float(a), interval=interval, extra_roots=extra, residual=residual)


def solve_radius(lam: float) -> float:
    """Smallest positive root of the matching condition."""
    return locate_radius(lam).a


@lru_cache(maxsize=1)
def first_j1_zero() -> float:
    """c0 = 3.8317..., the first positive zero of J1, by scan and bisection."""
    ts = np.arange(0.5, 10.0, SCAN_STEP)
    js = np.asarray(bessel_j1(ts))
    idx = int(np.flatnonzero((js[:-1] > 0.0) != (js[1:] > 0.0))[0])
    return float(bisect(bessel_j1, ts[idx], ts[idx + 1], xtol=1e-15, rtol=BISECT_RTOL))


def euler_radius(lam: float) -> float:
    """Radius c0 / sqrt(λ) of the classical Lamb dipole."""
    if not lam > 0.0:
        raise DomainError(f"lambda must be positive, got {lam}")
    return first_j1_zero() / math.sqrt(lam)


# ----------------------------
# Parameters and radial profiles
# ----------------------------

@dataclass(frozen=True)
class DipoleParams:
    lam: float
    W: float
    a: float
    A_L: float

    @property
    def k(self) -> float:
        return math.sqrt(self.lam - 1.0)

    @property
    def exterior_amplitude(self) -> float:
        """W a / K1(a)."""
        return self.W * self.a / bessel_k1(self.a)

    def matching_residual(self) -> float:
        return abs(matching_function(self.a, self.lam))

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "W": self.W, "a": self.a, "A_L": self.A_L}


def make_params(lam: float, W: float) -> DipoleParams:
    _check_lambda(lam)
    if not W > 0.0:
        raise DomainError(f"W must be positive, got {W}")
    a = solve_radius(lam)
    k = math.sqrt(lam - 1.0)
    A_L = -W * a / ((lam - 1.0) * bessel_j1(k * a))
    return DipoleParams(lam=float(lam), W=float(W), a=a, A_L=A_L)


class RadialProfiles:
    """
    Radial factors of the dipole; each quantity q satisfies Q(x) = q(r) sinθ.

    stream_profile  η_L, the lab-frame stream function
    eta             η = η_L - W r, the co-moving profile (Ψ_L - W x2 = η sinθ)
    eta0            η - W r / (λ - 1) = A_L J1(k r) on r <= a
    eta1            η + W r = (W a / K1(a)) K1(r) on r > a
    """

    def __init__(self, params: DipoleParams):
        self.params = params
        self._slope = params.W * params.lam / (params.lam - 1.0)
        self._outer = params.exterior_amplitude

    def _piecewise(self, r, inner, outer) -> ArrayLike:
        r_arr = np.asarray(r, dtype=np.float64)
        if np.any(r_arr < 0.0):
            raise DomainError("radius must be nonnegative")
        out = np.empty_like(r_arr)
        inside = r_arr <= self.params.a
        out[inside] = inner(r_arr[inside])
        out[~inside] = outer(r_arr[~inside])
        return _scalar_or_array(out, r)

    def stream_profile(self, r: ArrayLike) -> ArrayLike:
        p = self.params
        return self._piecewise(
            r,
            lambda s: p.A_L * np.asarray(bessel_j1(p.k * s)) + self._slope * s,
            lambda s: self._outer * np.asarray(bessel_k1(s)),
        )

    def stream_over_r(self, r: ArrayLike) -> ArrayLike:
        """η_L(r) / r, finite at r = 0."""
        p = self.params
        return self._piecewise(
            r,
            lambda s: p.A_L * p.k * np.asarray(bessel_j1_over_x(p.k * s)) + self._slope,
            lambda s: self._outer * np.asarray(bessel_k1(s)) / s,
        )

    def stream_profile_prime(self, r: ArrayLike) -> ArrayLike:
        p = self.params
        return self._piecewise(
            r,
            lambda s: p.A_L * p.k * np.asarray(bessel_j1_prime(p.k * s)) + self._slope,
            lambda s: self._outer * np.asarray(bessel_k1_prime(s)),
        )

    def eta(self, r: ArrayLike) -> ArrayLike:
        out = np.asarray(self.stream_profile(r)) - self.params.W * np.asarray(r, dtype=np.float64)
        return _scalar_or_array(out, r)

    def eta0(self, r: ArrayLike) -> ArrayLike:
        p = self.params
        out = np.asarray(self.eta(r)) - p.W * np.asarray(r, dtype=np.float64) / (p.lam - 1.0)
        return _scalar_or_array(out, r)

    def eta1(self, r: ArrayLike) -> ArrayLike:
        out = np.asarray(self.eta(r)) + self.params.W * np.asarray(r, dtype=np.float64)
        return _scalar_or_array(out, r)


# ----------------------------
# Pointwise fields
# ----------------------------

def _polar(x1, x2) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if np.any(x2 < 0.0):
        raise DomainError("points must lie in the closed upper half-plane (x2 >= 0)")
    x1, x2 = np.broadcast_arrays(x1, x2)
    return x1, x2, np.hypot(x1, x2)


def stream(params: DipoleParams, x1, x2) -> ArrayLike:
    """Ψ_L at (x1, x2), written as x2 · η_L(r)/r so the origin needs no special case."""
    x1, x2, r = _polar(x1, x2)
    out = x2 * np.asarray(RadialProfiles(params).stream_over_r(r))
    return _scalar_or_array(out, x1)


def vorticity(params: DipoleParams, x1, x2) -> ArrayLike:
    """
    ω_L = λ (Ψ_L - W x2)_+.

    The co-moving profile η is already negative for r > a, so the positive part
    vanishes there; the explicit zero outside r <= a only removes roundoff at the
    rim and is part of the contract (support is the closed half-disc).
    """
    x1, x2, r = _polar(x1, x2)
    psi = x2 * np.asarray(RadialProfiles(params).stream_over_r(r))
    out = params.lam * np.maximum(psi - params.W * x2, 0.0)
    out = np.where(r > params.a, 0.0, out)
    return _scalar_or_array(out, x1)


def velocity(params: DipoleParams, x1, x2) -> Tuple[ArrayLike, ArrayLike]:
    """u_L = (∂2Ψ_L - W, -∂1Ψ_L), chain rule in polar coordinates."""
    x1, x2, r = _polar(x1, x2)
    prof = RadialProfiles(params)
    g = np.asarray(prof.stream_over_r(r))
    dg = np.asarray(prof.stream_profile_prime(r))

    safe = np.where(r > 0.0, r, 1.0)
    cos_t = np.where(r > 0.0, x1 / safe, 1.0)
    sin_t = np.where(r > 0.0, x2 / safe, 0.0)

    d1 = sin_t * cos_t * (dg - g)
    d2 = dg * sin_t ** 2 + g * cos_t ** 2
    u1 = d2 - params.W
    u2 = -d1
    return _scalar_or_array(u1, x1), _scalar_or_array(u2, x1)


def euler_stream(lam: float, W: float, x1, x2) -> ArrayLike:
    """
    Classical Lamb dipole of the Euler equations (no deformation term):
    interior (A_C J1(sqrt(λ) r) + W r) sinθ, exterior W a² / r sinθ,
    A_C = -2W / (sqrt(λ) J0(c0)), a = c0 / sqrt(λ).
    """
    a = euler_radius(lam)
    s = math.sqrt(lam)
    c0 = first_j1_zero()
    A_C = -2.0 * W / (s * bessel_j0(c0))
    x1, x2, r = _polar(x1, x2)
    out = np.empty_like(r)
    inside = r <= a
    out[inside] = x2[inside] * (A_C * s * np.asarray(bessel_j1_over_x(s * r[inside])) + W)
    out[~inside] = x2[~inside] * W * a * a / r[~inside] ** 2
    return _scalar_or_array(out, x1)


# ----------------------------
# Verification
# ----------------------------

def interface_jump(params: DipoleParams, n_angles: int = 64) -> Tuple[float, float]:
    """
    Max over angles of |Ψ(a-) - Ψ(a+)| and |∂_rΨ(a-) - ∂_rΨ(a+)|, with both
    branch formulas evaluated exactly at r = a.
    """
    p = params
    slope = p.W * p.lam / (p.lam - 1.0)
    ka = p.k * p.a
    inner = p.A_L * bessel_j1(ka) + slope * p.a
    inner_dr = p.A_L * p.k * bessel_j1_prime(ka) + slope
    outer = p.exterior_amplitude * bessel_k1(p.a)
    outer_dr = p.exterior_amplitude * bessel_k1_prime(p.a)

    theta = (np.arange(n_angles) + 0.5) * math.pi / n_angles
    sin_max = float(np.abs(np.sin(theta)).max())
    return abs(inner - outer) * sin_max, abs(inner_dr - outer_dr) * sin_max


def pde_residual(params: DipoleParams, h: float, region: str = "all") -> float:
    """
    Max of |-Δ_h Ψ + Ψ - λ(Ψ - W x2)_+| over nodes (i h, j h) of [-2a, 2a] x (0, 2a],
    5-point Laplacian, skipping nodes within 2h of r = a.

    region: 'all', 'interior' (r < a) or 'exterior' (r > a).
    """
    if not h > 0.0:
        raise DomainError(f"grid spacing must be positive, got {h}")
    if region not in ("all", "interior", "exterior"):
        raise DomainError(f"unknown region {region!r}")

    n = int(math.ceil(2.0 * params.a / h))
    i = np.arange(-n - 1, n + 2)
    j = np.arange(0, n + 2)
    X1, X2 = np.meshgrid(i * h, j * h)
    psi = np.asarray(stream(params, X1, X2))

    lap = (
        psi[1:-1, :-2] + psi[1:-1, 2:] + psi[:-2, 1:-1] + psi[2:, 1:-1]
        - 4.0 * psi[1:-1, 1:-1]
    ) / (h * h)
    x1c = X1[1:-1, 1:-1]
    x2c = X2[1:-1, 1:-1]
    residual = np.abs(-lap + psi[1:-1, 1:-1] - np.asarray(vorticity(params, x1c, x2c)))

    r = np.hypot(x1c, x2c)
    mask = np.abs(r - params.a) >= 2.0 * h
    if region == "interior":
        mask &= r < params.a
    elif region == "exterior":
        mask &= r > params.a
    return float(residual[mask].max())


# ----------------------------
# Integrals over the half-disc
# ----------------------------

def _gauss_panels(func, a: float, panels: int) -> float:
    nodes, weights = np.polynomial.legendre.leggauss(GAUSS_ORDER)
    edges = np.linspace(0.0, a, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    r = mid + half * nodes[None, :]
    return float((func(r) * weights[None, :] * half).sum())


def _radial_integral(func, a: float) -> float:
    """Composite Gauss-Legendre on [0, a], panels doubled until stable."""
    panels = 1
    value = _gauss_panels(func, a, panels)
    while panels < MAX_PANELS:
        panels *= 2
        refined = _gauss_panels(func, a, panels)
        if abs(refined - value) <= QUAD_RTOL * max(abs(refined), 1e-300):
            return refined
        value = refined
    return value


def dipole_integrals(params: DipoleParams) -> dict:
    """
    Impulse, mass, energy, L² norm and penalized energy of ω_L.

    With ω = λ f(r) sinθ on r < a, f = η_+, the angular integrals are exact:
        I = (π/2) λ ∫ f r² dr        mass = 2 λ ∫ f r dr
        E = (π/4) λ ∫ f η_L r dr     ‖ω‖₂² = (π/2) λ² ∫ f² r dr
    """
    prof = RadialProfiles(params)
    lam = params.lam

    def f(r):
        return np.maximum(np.asarray(prof.eta(r)), 0.0)

    impulse = 0.5 * math.pi * lam * _radial_integral(lambda r: f(r) * r * r, params.a)
    mass = 2.0 * lam * _radial_integral(lambda r: f(r) * r, params.a)
    energy = 0.25 * math.pi * lam * _radial_integral(
        lambda r: f(r) * np.asarray(prof.stream_profile(r)) * r, params.a
    )
    l2_sq = 0.5 * math.pi * lam * lam * _radial_integral(lambda r: f(r) ** 2 * r, params.a)
    return {
        "impulse": impulse,
        "mass": mass,
        "E": energy,
        "l2": math.sqrt(l2_sq),
        "E_lambda": energy - l2_sq / (2.0 * lam),
    }


@lru_cache(maxsize=64)
def _unit_integrals(lam: float) -> dict:
    return dipole_integrals(make_params(lam, 1.0))


def impulse_unit(lam: float) -> float:
    """I(ω_L) for W = 1; I scales linearly in W."""
    return _unit_integrals(lam)["impulse"]


def mass_unit(lam: float) -> float:
    return _unit_integrals(lam)["mass"]


def rho(lam: float) -> float:
    """Mass per unit impulse of the dipole family, independent of W."""
    return mass_unit(lam) / impulse_unit(lam)


def energy_unit(lam: float) -> float:
    """E(ω_L) for W = 1; E scales with W²."""
    return _unit_integrals(lam)["E"]


def penalized_energy_unit(lam: float) -> float:
    """E(ω_L) - ‖ω_L‖₂² / (2λ) for W = 1; scales with W²."""
    return _unit_integrals(lam)["E_lambda"]


def W_for_impulse(lam: float, mu: float) -> float:
    """Translation speed of the dipole with impulse μ: W = μ / I(ω_L^{λ,1})."""
    return mu / impulse_unit(lam)


# ----------------------------
# Sampling on grids
# ----------------------------

def box_for(params: DipoleParams, factor: float = 6.0, nx: int = 256, ny: int = 128) -> GridSpec:
    """Truncation box of half-width and height factor * a."""
    return GridSpec(Lx=factor * params.a, Ly=factor * params.a, nx=nx, ny=ny)


def _cell_offsets(h: float, points: int) -> np.ndarray:
    """Midpoints of `points` equal sub-intervals of a cell of width h, relative to its centre."""
    return ((np.arange(points) + 0.5) / points - 0.5) * h


def _cell_average(func, params: DipoleParams, X1: np.ndarray, X2: np.ndarray,
                  grid: GridSpec, points: int) -> np.ndarray:
    out = np.zeros(grid.shape)
    for d2 in _cell_offsets(grid.hy, points):
        for d1 in _cell_offsets(grid.hx, points):
            out += np.asarray(func(params, X1 + d1, X2 + d2))
    return out / (points * points)


def sample_dipole(params: DipoleParams, grid: GridSpec, quantity: str = "vorticity",
                  center: float = 0.0, oversample: int = 1):
    """
    Sample the dipole centred at (center, 0) on the cell centres of grid.

    quantity: 'stream', 'vorticity' or 'velocity' (returns a pair of fields).
    oversample > 1 returns cell averages of stream or vorticity from an
    oversample x oversample midpoint rule inside each cell; the kink of ω_L at
    r = a then enters through the fraction of each rim cell it covers.
    """
    if int(oversample) != oversample or oversample < 1:
        raise DomainError(f"oversample must be a positive integer, got {oversample}")
    oversample = int(oversample)
    X1, X2 = grid.mesh()
    X1 = X1 - center
    if quantity in ("stream", "vorticity"):
        func = stream if quantity == "stream" else vorticity
        if oversample == 1:
            data = np.asarray(func(params, X1, X2))
        else:
            data = _cell_average(func, params, X1, X2, grid, oversample)
        return ScalarField(grid, data, quantity)
    if oversample != 1:
        raise DomainError("cell averages are available for 'stream' and 'vorticity' only")
    if quantity == "velocity":
        u1, u2 = velocity(params, X1, X2)
        return (ScalarField(grid, np.asarray(u1), "velocity_x1"),
                ScalarField(grid, np.asarray(u2), "velocity_x2"))
    raise DomainError(f"unknown dipole quantity {quantity!r}")
