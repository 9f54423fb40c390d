"""
Bessel functions J0, J1 (first kind) and K0, K1 (modified, second kind), their
derivatives, and the free-space fundamental solution of -Δ + Id in the plane.

Every function accepts a float or a numpy array and returns the same shape.

Evaluation strategy:
- J0, J1: ascending power series below x = 14, Hankel asymptotic expansion above.
  Both branches are accurate to ~1e-11 absolute at the crossover.
- K0, K1: ascending series (with the logarithmic part) for x <= 2, trapezoidal
  quadrature of K_n(x) = ∫_0^∞ exp(-x cosh t) cosh(n t) dt on (2, 30], asymptotic
  expansion above 30. The quadrature converges geometrically because the
  integrand is analytic in a strip, so the middle range is accurate to machine
  precision relative to K_n itself.
"""

from __future__ import annotations

import math
from typing import Union

import numpy as np

from .errors import DomainError

ArrayLike = Union[float, np.ndarray]

EULER_GAMMA = 0.57721566490153286061

# Branch crossovers
J_SERIES_MAX = 14.0
K_SERIES_MAX = 2.0
K_ASYMPTOTIC_MIN = 30.0

SERIES_TERMS = 40
ASYMPTOTIC_TERMS = 60

# Trapezoid rule for the cosh integral representation
K_QUAD_STEP = 0.1
K_QUAD_TMAX = 5.0


# ----------------------------
# Argument handling
# ----------------------------

def _prepare(x: ArrayLike, name: str, strictly_positive: bool) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name}: argument must be finite")
    if strictly_positive and np.any(arr <= 0.0):
        raise DomainError(f"{name}: argument must be > 0, got min {arr.min()!r}")
    if not strictly_positive and np.any(arr < 0.0):
        raise DomainError(f"{name}: argument must be >= 0, got min {arr.min()!r}")
    return arr


def _finish(out: np.ndarray, like: ArrayLike) -> ArrayLike:
    if np.ndim(like) == 0:
        return float(out)
    return out


# ----------------------------
# First kind: series and Hankel expansion
# ----------------------------

def _j0_series(x: np.ndarray) -> np.ndarray:
    z = 0.25 * x * x
    term = np.ones_like(x)
    total = term.copy()
    for k in range(1, SERIES_TERMS):
        term = term * (-z) / (k * k)
        total += term
    return total


def _j1x_series(x: np.ndarray) -> np.ndarray:
    """Series for J1(x)/x; equals 1/2 at the origin."""
    z = 0.25 * x * x
    term = np.full_like(x, 0.5)
    total = term.copy()
    for k in range(1, SERIES_TERMS):
        term = term * (-z) / (k * (k + 1))
        total += term
    return total


def _hankel_pq(x: np.ndarray, order: int):
    """Asymptotic P and Q for J_order, summed until terms stop decreasing."""
    mu = 4.0 * order * order
    p = np.ones_like(x)
    q = np.zeros_like(x)
    term = np.ones_like(x)
    prev = np.full_like(x, np.inf)
    active = np.ones(x.shape, dtype=bool)
    for k in range(1, ASYMPTOTIC_TERMS):
        term = term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        mag = np.abs(term)
        active &= mag < prev
        prev = mag
        contrib = np.where(active, term, 0.0)
        # P takes the even terms, Q the odd ones, with alternating signs
        if k % 2 == 0:
            p += contrib if (k // 2) % 2 == 0 else -contrib
        else:
            q += contrib if ((k - 1) // 2) % 2 == 0 else -contrib
        if not active.any():
            break
    return p, q


def _j_asymptotic(x: np.ndarray, order: int) -> np.ndarray:
    p, q = _hankel_pq(x, order)
    chi = x - (2 * order + 1) * math.pi / 4.0
    return np.sqrt(2.0 / (math.pi * x)) * (p * np.cos(chi) - q * np.sin(chi))


def _split(x: np.ndarray, crossover: float):
    small = x < crossover
    return small, ~small


def bessel_j0(x: ArrayLike) -> ArrayLike:
    """J0(x) for x >= 0."""
    arr = _prepare(x, "bessel_j0", strictly_positive=False)
    out = np.empty_like(arr)
    small, large = _split(arr, J_SERIES_MAX)
    out[small] = _j0_series(arr[small])
    out[large] = _j_asymptotic(arr[large], 0)
    return _finish(out, x)


def bessel_j1_over_x(x: ArrayLike) -> ArrayLike:
    """J1(x)/x for x >= 0, with the limit 1/2 at x = 0."""
    arr = _prepare(x, "bessel_j1_over_x", strictly_positive=False)
    out = np.empty_like(arr)
    small, large = _split(arr, J_SERIES_MAX)
    out[small] = _j1x_series(arr[small])
    xl = arr[large]
    out[large] = _j_asymptotic(xl, 1) / xl
    return _finish(out, x)


def bessel_j1(x: ArrayLike) -> ArrayLike:
    """J1(x) for x >= 0."""
    arr = _prepare(x, "bessel_j1", strictly_positive=False)
    out = np.empty_like(arr)
    small, large = _split(arr, J_SERIES_MAX)
    xs = arr[small]
    out[small] = xs * _j1x_series(xs)
    out[large] = _j_asymptotic(arr[large], 1)
    return _finish(out, x)


def bessel_j1_prime(x: ArrayLike) -> ArrayLike:
    """J1'(x) = J0(x) - J1(x)/x; equals 1/2 at x = 0."""
    arr = _prepare(x, "bessel_j1_prime", strictly_positive=False)
    out = np.asarray(bessel_j0(arr)) - np.asarray(bessel_j1_over_x(arr))
    return _finish(out, x)


# ----------------------------
# Modified, second kind
# ----------------------------

def _k_series(x: np.ndarray, order: int) -> np.ndarray:
    z = 0.25 * x * x
    log_half = np.log(0.5 * x)
    if order == 0:
        term = np.ones_like(x)
        i0 = term.copy()
        tail = np.zeros_like(x)
        harmonic = 0.0
        for k in range(1, SERIES_TERMS // 2):
            term = term * z / (k * k)
            harmonic += 1.0 / k
            i0 += term
            tail += term * harmonic
        return -(log_half + EULER_GAMMA) * i0 + tail

    # order 1: K1 = 1/x + ln(x/2) I1(x) - (x/4) Σ (ψ(k+1)+ψ(k+2)) z^k / (k!(k+1)!)
    term = np.ones_like(x)
    i1_sum = term.copy()
    digamma_k1 = -EULER_GAMMA          # ψ(1)
    digamma_k2 = 1.0 - EULER_GAMMA     # ψ(2)
    tail = (digamma_k1 + digamma_k2) * term
    for k in range(1, SERIES_TERMS // 2):
        term = term * z / (k * (k + 1))
        digamma_k1 = digamma_k2
        digamma_k2 = digamma_k2 + 1.0 / (k + 1)
        i1_sum += term
        tail += (digamma_k1 + digamma_k2) * term
    i1 = 0.5 * x * i1_sum
    return 1.0 / x + log_half * i1 - 0.25 * x * tail


def _k_quadrature(x: np.ndarray, order: int) -> np.ndarray:
    nodes = np.arange(0.0, K_QUAD_TMAX + 0.5 * K_QUAD_STEP, K_QUAD_STEP)
    weights = np.full(nodes.shape, K_QUAD_STEP)
    weights[0] *= 0.5
    total = np.zeros_like(x)
    for t, w in zip(nodes, weights):
        total += w * np.exp(-x * math.cosh(t)) * math.cosh(order * t)
    return total


def _k_asymptotic(x: np.ndarray, order: int, scaled: bool = False) -> np.ndarray:
    """Asymptotic K_order(x); with scaled=True returns exp(x) * K_order(x)."""
    mu = 4.0 * order * order
    term = np.ones_like(x)
    total = term.copy()
    prev = np.full_like(x, np.inf)
    active = np.ones(x.shape, dtype=bool)
    for k in range(1, ASYMPTOTIC_TERMS):
        term = term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        mag = np.abs(term)
        active &= mag < prev
        prev = mag
        total += np.where(active, term, 0.0)
        if not active.any():
            break
    out = np.sqrt(math.pi / (2.0 * x)) * total
    if scaled:
        return out
    return out * np.exp(-x)


def _bessel_k(x: ArrayLike, order: int, name: str) -> ArrayLike:
    arr = _prepare(x, name, strictly_positive=True)
    out = np.empty_like(arr)
    small = arr <= K_SERIES_MAX
    large = arr > K_ASYMPTOTIC_MIN
    middle = ~(small | large)
    out[small] = _k_series(arr[small], order)
    out[middle] = _k_quadrature(arr[middle], order)
    out[large] = _k_asymptotic(arr[large], order)
    return _finish(out, x)


def bessel_k0(x: ArrayLike) -> ArrayLike:
    """K0(x) for x > 0."""
    return _bessel_k(x, 0, "bessel_k0")


def bessel_k1(x: ArrayLike) -> ArrayLike:
    """K1(x) for x > 0."""
    return _bessel_k(x, 1, "bessel_k1")


def bessel_k0_prime(x: ArrayLike) -> ArrayLike:
    """K0'(x) = -K1(x)."""
    out = -np.asarray(bessel_k1(x))
    return _finish(out, x)


def bessel_k1_prime(x: ArrayLike) -> ArrayLike:
    """K1'(x) = -K0(x) - K1(x)/x."""
    arr = _prepare(x, "bessel_k1_prime", strictly_positive=True)
    out = -np.asarray(bessel_k0(arr)) - np.asarray(bessel_k1(arr)) / arr
    return _finish(out, x)


def bessel_k0_over_k1(x: ArrayLike) -> ArrayLike:
    """K0(x)/K1(x), finite for arguments where both factors underflow."""
    arr = _prepare(x, "bessel_k0_over_k1", strictly_positive=True)
    out = np.empty_like(arr)
    large = arr > K_ASYMPTOTIC_MIN
    xs = arr[~large]
    out[~large] = np.asarray(bessel_k0(xs)) / np.asarray(bessel_k1(xs))
    xl = arr[large]
    out[large] = _k_asymptotic(xl, 0, scaled=True) / _k_asymptotic(xl, 1, scaled=True)
    return _finish(out, x)


def log_bessel_k1(x: ArrayLike) -> ArrayLike:
    """ln K1(x), finite for arguments where K1 itself underflows."""
    arr = _prepare(x, "log_bessel_k1", strictly_positive=True)
    out = np.empty_like(arr)
    large = arr > K_ASYMPTOTIC_MIN
    out[~large] = np.log(np.asarray(bessel_k1(arr[~large])))
    xl = arr[large]
    out[large] = np.log(_k_asymptotic(xl, 1, scaled=True)) - xl
    return _finish(out, x)


# ----------------------------
# Fundamental solution
# ----------------------------

def green_free(r: ArrayLike) -> ArrayLike:
    """
    Fundamental solution of -Δ + Id in R^2 at distance r: K0(r) / 2π.

    Near the origin it behaves like (1/2π) ln(2/r) - γ/2π; for large r it
    decays like exp(-r) / sqrt(r).
    """
    arr = _prepare(r, "green_free", strictly_positive=True)
    out = np.asarray(bessel_k0(arr)) / (2.0 * math.pi)
    return _finish(out, r)
