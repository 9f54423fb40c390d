"""
Half-plane grids, scalar fields, the image-kernel Green's function G_Π and the
inverse Helmholtz operator 𝒢 = (-Δ + Id)^{-1} with odd symmetry in x2.

Grid convention:
- cell-centred nodes x1 = -Lx + (i + 1/2) hx, x2 = (j + 1/2) hy
- data arrays have shape (ny, nx): row j is the line x2 = (j + 1/2) hy
- the field is identified with its odd extension across x2 = 0

Field dump format (shared by every command):
    name.f64   little-endian float64, row-major (ny, nx)
    name.json  {"nx", "ny", "Lx", "Ly", "quantity", "time"}
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from . import console
from .errors import DomainError, SingularityError
from .specfun import green_free

DIRECT_MAX_NODES = 2 ** 14
GATHER_LIMIT = 2 ** 22      # elements of the per-row kernel gather in apply_G_direct
DECAY_TOLERANCE = 1e-10


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


# ----------------------------
# Grid and field types
# ----------------------------

@dataclass(frozen=True)
class GridSpec:
    Lx: float
    Ly: float
    nx: int
    ny: int

    def __post_init__(self):
        if not (self.Lx > 0 and self.Ly > 0):
            raise DomainError(f"box sizes must be positive, got Lx={self.Lx}, Ly={self.Ly}")
        if not (_is_power_of_two(self.nx) and _is_power_of_two(self.ny)):
            raise DomainError(f"nx, ny must be powers of two, got {self.nx}, {self.ny}")

    @property
    def hx(self) -> float:
        return 2.0 * self.Lx / self.nx

    @property
    def hy(self) -> float:
        return self.Ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def x1(self) -> np.ndarray:
        return -self.Lx + (np.arange(self.nx) + 0.5) * self.hx

    @property
    def x2(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.hy

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        """(X1, X2), each of shape (ny, nx)."""
        return np.meshgrid(self.x1, self.x2)

    def to_dict(self) -> dict:
        return {"nx": self.nx, "ny": self.ny, "Lx": self.Lx, "Ly": self.Ly}


@dataclass
class ScalarField:
    spec: GridSpec
    data: np.ndarray
    quantity: str = "vorticity"
    time: float = 0.0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 1 and data.size == self.spec.nx * self.spec.ny:
            data = data.reshape(self.spec.shape)
        if data.shape != self.spec.shape:
            raise DomainError(
                f"field shape {data.shape} does not match grid {self.spec.shape}"
            )
        if not np.all(np.isfinite(data)):
            raise DomainError(f"{self.quantity} field has non-finite entries")
        self.data = data

    def with_data(self, data: np.ndarray, quantity: Optional[str] = None) -> "ScalarField":
        return ScalarField(self.spec, data, quantity or self.quantity, self.time)

    def copy(self) -> "ScalarField":
        return ScalarField(self.spec, self.data.copy(), self.quantity, self.time)

    def integral(self) -> float:
        return float(self.data.sum() * self.spec.cell_area)

    def save(self, directory: Path, name: str) -> Path:
        """Write name.f64 + name.json into directory; returns the .f64 path."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        payload = directory / f"{name}.f64"
        self.data.astype("<f8").tofile(payload)

        meta = dict(self.spec.to_dict(), quantity=self.quantity, time=self.time)
        with open(directory / f"{name}.json", "w", encoding="utf-8") as f:
            json.dump(meta, f, indent=2)
        return payload

    @staticmethod
    def load(directory: Path, name: str) -> "ScalarField":
        directory = Path(directory)
        with open(directory / f"{name}.json", "r", encoding="utf-8") as f:
            meta = json.load(f)
        spec = GridSpec(Lx=meta["Lx"], Ly=meta["Ly"], nx=meta["nx"], ny=meta["ny"])
        data = np.fromfile(directory / f"{name}.f64", dtype="<f8")
        if data.size != spec.nx * spec.ny:
            raise DomainError(
                f"{name}.f64 holds {data.size} values, expected {spec.nx * spec.ny}"
            )
        return ScalarField(spec, data.reshape(spec.shape), meta["quantity"], meta["time"])


# ----------------------------
# Kernel
# ----------------------------

def gp_kernel(x, y) -> np.ndarray:
    """
    Half-plane Green's function G_Π(x, y) = G(|x - y|) - G(|x̄ - y|), x̄ = (x1, -x2).

    x and y are points (or arrays of points with a trailing axis of length 2).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    d1 = x[..., 0] - y[..., 0]
    direct = np.sqrt(d1 * d1 + (x[..., 1] - y[..., 1]) ** 2)
    mirrored = np.sqrt(d1 * d1 + (-x[..., 1] - y[..., 1]) ** 2)
    if np.any(direct == 0.0):
        raise SingularityError("gp_kernel evaluated at x = y")
    out = np.asarray(green_free(direct)) - np.asarray(green_free(mirrored))
    return float(out) if out.ndim == 0 else out


def self_cell_value(hx: float, hy: float) -> float:
    """
    Average of G over a cell, using a disc of equal area R = sqrt(hx hy / π):
    the logarithm is averaged exactly and the bounded remainder is taken at R/2.
    """
    R = math.sqrt(hx * hy / math.pi)
    log_average = (math.log(2.0 / R) + 0.5) / (2.0 * math.pi)
    remainder = green_free(0.5 * R) - math.log(4.0 / R) / (2.0 * math.pi)
    return log_average + remainder


def _kernel_tables(spec: GridSpec) -> Tuple[np.ndarray, np.ndarray]:
    """
    free[dj, di]  = G at offset (di hx, dj hy), with the self-cell average at (0, 0)
    image[s, di]  = G at offset (di hx, (s + 1) hy), s = j + j' (mirrored source)
    """
    di = np.arange(spec.nx) * spec.hx
    dj = np.arange(spec.ny) * spec.hy

    r_free = np.hypot(di[None, :], dj[:, None])
    r_free[0, 0] = 1.0
    free = np.asarray(green_free(r_free))
    free[0, 0] = self_cell_value(spec.hx, spec.hy)

    ds = (np.arange(2 * spec.ny - 1) + 1.0) * spec.hy
    image = np.asarray(green_free(np.hypot(di[None, :], ds[:, None])))
    return free, image


# ----------------------------
# Inverse Helmholtz operator
# ----------------------------

def apply_G_direct(omega: ScalarField) -> ScalarField:
    """
    𝒢ω by midpoint quadrature of G_Π over every cell; O(n²), oracle use only.
    """
    spec = omega.spec
    n_nodes = spec.nx * spec.ny
    if n_nodes > DIRECT_MAX_NODES:
        raise DomainError(
            f"direct quadrature limited to {DIRECT_MAX_NODES} nodes, grid has {n_nodes}"
        )

    free, image = _kernel_tables(spec)
    rows = np.arange(spec.ny)
    nx = spec.nx
    gather = spec.ny * nx * nx <= GATHER_LIMIT
    if gather:
        i = np.arange(nx)
        offsets = np.abs(i[:, None] - i[None, :])       # (target i, source i')

    out = np.empty(spec.shape)
    for j in range(spec.ny):
        # kernel between target row j and every source row, as a function of |i - i'|
        row_kernel = free[np.abs(j - rows)] - image[j + rows]      # (ny, nx)
        if gather:
            out[j] = np.einsum("pab,pb->a", row_kernel[:, offsets], omega.data)
            continue
        acc = np.zeros(nx)
        for p in range(spec.ny):
            full = np.concatenate([row_kernel[p][:0:-1], row_kernel[p]])
            acc += np.convolve(full, omega.data[p])[nx - 1:2 * nx - 1]
        out[j] = acc
    out *= spec.cell_area
    return omega.with_data(out, quantity="stream")


def odd_extend(data: np.ndarray) -> np.ndarray:
    """Stack the mirrored, negated field below the half-plane rows: shape (2 ny, nx)."""
    return np.concatenate([-data[::-1], data], axis=0)


def spectral_wavenumbers(spec: GridSpec) -> Tuple[np.ndarray, np.ndarray]:
    """
    (k1, k2) broadcastable to the rfft2 layout of the odd-extended field:
    k2 has shape (2 ny, 1), k1 has shape (1, nx // 2 + 1).
    """
    k1 = 2.0 * math.pi * np.fft.rfftfreq(spec.nx, d=spec.hx)
    k2 = 2.0 * math.pi * np.fft.fftfreq(2 * spec.ny, d=spec.hy)
    return k1[None, :], k2[:, None]


def shift_x1(data: np.ndarray, shift: float, hx: float) -> np.ndarray:
    """
    Translate rows by `shift` (a length, any real) in +x1 through a spectral phase.
    The Nyquist mode is dropped so the result stays real.
    """
    n = data.shape[1]
    k1 = 2.0 * math.pi * np.fft.rfftfreq(n, d=hx)
    spectrum = np.fft.rfft(data, axis=1) * np.exp(-1j * k1 * shift)[None, :]
    if n % 2 == 0:
        spectrum[:, -1] = 0.0
    return np.fft.irfft(spectrum, n=n, axis=1)


def edge_ratio(data: np.ndarray) -> float:
    """Max |value| on the truncation boundary (side columns, top row) over the field max."""
    peak = np.abs(data).max()
    if peak == 0.0:
        return 0.0
    ring = max(np.abs(data[:, 0]).max(), np.abs(data[:, -1]).max(), np.abs(data[-1, :]).max())
    return float(ring / peak)


def apply_G_spectral(omega: ScalarField, warn_decay: bool = True) -> ScalarField:
    """
    𝒢ω on the odd-extended periodic box [-Lx, Lx] x [-Ly, Ly]: divide each mode
    by |k|² + 1 and keep the upper half.
    """
    spec = omega.spec
    if warn_decay and edge_ratio(omega.data) > DECAY_TOLERANCE:
        console.warn(
            f"{omega.quantity} does not decay to the box edge "
            f"(edge/max = {edge_ratio(omega.data):.2e}); periodic wrap-around may matter"
        )
    k1, k2 = spectral_wavenumbers(spec)
    q_hat = np.fft.rfft2(odd_extend(omega.data))
    psi = np.fft.irfft2(q_hat / (k1 ** 2 + k2 ** 2 + 1.0), s=(2 * spec.ny, spec.nx))
    return omega.with_data(psi[spec.ny:], quantity="stream")


def apply_G(omega: ScalarField, method: str = "spectral") -> ScalarField:
    if method == "spectral":
        return apply_G_spectral(omega, warn_decay=False)
    if method == "direct":
        return apply_G_direct(omega)
    raise DomainError(f"unknown Green operator method: {method!r}")


# ----------------------------
# Diagnostics
# ----------------------------

def decay_check(omega: ScalarField, method: str = "spectral") -> float:
    """Max |𝒢ω| over the outermost ring (side columns and top row)."""
    psi = apply_G(omega, method).data
    ring = max(np.abs(psi[:, 0]).max(), np.abs(psi[:, -1]).max(), np.abs(psi[-1, :]).max())
    return float(ring)


def green_sup_ratio(omega: ScalarField, method: str = "spectral") -> float:
    """‖𝒢ω‖_∞ / (‖ω‖₁^{1/2} ‖ω‖₂^{1/2}); zero for the zero field."""
    area = omega.spec.cell_area
    l1 = np.abs(omega.data).sum() * area
    l2 = math.sqrt((omega.data ** 2).sum() * area)
    if l1 == 0.0:
        return 0.0
    psi = apply_G(omega, method).data
    return float(np.abs(psi).max() / math.sqrt(l1 * l2))
