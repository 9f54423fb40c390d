"""
Run configuration for every subcommand.

Each subcommand has one dataclass. Values come from DEFAULTS, then from an
optional JSON file (`--config run.json`), then from explicit command-line flags.

Usage:
    cfg = load_run_config(MaximizeRunConfig, Path("run.json"), {"seed": 3})
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Type, TypeVar

from .errors import DomainError, UsageError


# ============================================================================
# CONFIGURATION: defaults shared by the library, the CLI and the scripts
# ============================================================================

DEFAULTS = {
    'lambda': 2.0,              # vortex-strength parameter, must exceed 1
    'W': 1.0,                   # translation speed
    'box_factor': 6.0,          # truncation box half-width / height in units of a
    'nx': 256,                  # half-plane grid, x1 nodes (power of two)
    'ny': 128,                  # half-plane grid, x2 nodes (power of two)
    'verify_divisions': [32, 64, 128],   # grid spacings a/32, a/64, a/128
    'interface_angles': 64,
    'min_order': 1.7,           # observed residual order required by `verify`
    'nu_factor': 10.0,          # default mass cap ν = nu_factor * μ * ϱ(λ)
    'max_iters': 2000,
    'tol_rel': 1e-7,
    'initial_guess': 'blob',    # 'blob' or 'dipole'
    'cfl': 0.25,
    'cfl_limit': 0.5,
    't_end_units': 5.0,         # evolution horizon in units of a/W
    'start_offset': -2.5,       # initial dipole centre x1, in units of a
    'diag_every': 10,
    'checkpoint_every': 0,      # 0 disables checkpoints
    'hyperviscosity': 0.0,      # coefficient of the Δ⁴ damping, off by default
    'amplitudes': [0.005, 0.01, 0.02],
    'perturbation': 'smooth-noise',
    'envelope_factor': 5.0,     # stability passes when max orbit distance <= factor * δ
    'seed': 0,
    'output_root': 'runs',
}

# ============================================================================


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def _check_common(lam: float, W: float, nx: int, ny: int, box_factor: float) -> None:
    if not lam > 1.0:
        raise DomainError(f"lambda must exceed 1, got {lam}")
    if not W > 0.0:
        raise DomainError(f"W must be positive, got {W}")
    if not (_is_power_of_two(nx) and _is_power_of_two(ny)):
        raise DomainError(f"grid sizes must be powers of two, got nx={nx}, ny={ny}")
    if not box_factor > 0.0:
        raise DomainError(f"box_factor must be positive, got {box_factor}")


@dataclass
class DipoleRunConfig:
    lam: float = DEFAULTS['lambda']
    W: float = DEFAULTS['W']
    nx: int = DEFAULTS['nx']
    ny: int = DEFAULTS['ny']
    box_factor: float = DEFAULTS['box_factor']
    out: str = DEFAULTS['output_root'] + "/dipole"

    def __post_init__(self):
        _check_common(self.lam, self.W, self.nx, self.ny, self.box_factor)


@dataclass
class VerifyRunConfig:
    lam: float = DEFAULTS['lambda']
    W: float = DEFAULTS['W']
    divisions: List[int] = field(default_factory=lambda: list(DEFAULTS['verify_divisions']))
    n_angles: int = DEFAULTS['interface_angles']
    min_order: float = DEFAULTS['min_order']
    out: str = DEFAULTS['output_root'] + "/verify"

    def __post_init__(self):
        if not self.lam > 1.0:
            raise DomainError(f"lambda must exceed 1, got {self.lam}")
        if not self.W > 0.0:
            raise DomainError(f"W must be positive, got {self.W}")
        if len(self.divisions) < 2:
            raise UsageError("verify needs at least two resolutions")
        if any(d <= 0 for d in self.divisions):
            raise DomainError(f"resolutions must be positive, got {self.divisions}")


@dataclass
class MaximizeRunConfig:
    lam: float = DEFAULTS['lambda']
    mu: Optional[float] = None          # None: impulse of the W = 1 dipole
    nu: Optional[float] = None          # None: nu_factor * mu * rho(lambda)
    nu_factor: float = DEFAULTS['nu_factor']
    nx: int = DEFAULTS['nx']
    ny: int = DEFAULTS['ny']
    box_factor: float = DEFAULTS['box_factor']
    max_iters: int = DEFAULTS['max_iters']
    tol_rel: float = DEFAULTS['tol_rel']
    initial_guess: str = DEFAULTS['initial_guess']
    seed: int = DEFAULTS['seed']
    out: str = DEFAULTS['output_root'] + "/maximize"

    def __post_init__(self):
        _check_common(self.lam, 1.0, self.nx, self.ny, self.box_factor)
        if self.mu is not None and not self.mu > 0.0:
            raise DomainError(f"mu must be positive, got {self.mu}")
        if self.nu is not None and not self.nu > 0.0:
            raise DomainError(f"nu must be positive, got {self.nu}")
        if not self.tol_rel > 0.0:
            raise DomainError(f"tol_rel must be positive, got {self.tol_rel}")
        if self.max_iters < 1:
            raise DomainError(f"max_iters must be at least 1, got {self.max_iters}")
        if self.initial_guess not in ("blob", "dipole"):
            raise DomainError(f"initial_guess must be 'blob' or 'dipole', got {self.initial_guess!r}")


@dataclass
class EvolveRunConfig:
    lam: float = DEFAULTS['lambda']
    W: float = DEFAULTS['W']
    nx: int = DEFAULTS['nx']
    ny: int = DEFAULTS['ny']
    box_factor: float = DEFAULTS['box_factor']
    t_end: Optional[float] = None       # None: t_end_units * a / W
    t_end_units: float = DEFAULTS['t_end_units']
    dt: Optional[float] = None          # None: chosen from cfl
    cfl: float = DEFAULTS['cfl']
    start_offset: float = DEFAULTS['start_offset']
    diag_every: int = DEFAULTS['diag_every']
    checkpoint_every: int = DEFAULTS['checkpoint_every']
    hyperviscosity: float = DEFAULTS['hyperviscosity']
    perturbation: Optional[str] = None
    amplitude: float = 0.0
    seed: int = DEFAULTS['seed']
    out: str = DEFAULTS['output_root'] + "/evolve"

    def __post_init__(self):
        _check_common(self.lam, self.W, self.nx, self.ny, self.box_factor)
        if self.t_end is not None and self.t_end < 0.0:
            raise DomainError(f"t_end must be nonnegative, got {self.t_end}")
        if self.dt is not None and not self.dt > 0.0:
            raise DomainError(f"dt must be positive, got {self.dt}")
        if not 0.0 < self.cfl <= DEFAULTS['cfl_limit']:
            raise DomainError(f"cfl must lie in (0, {DEFAULTS['cfl_limit']}], got {self.cfl}")
        if self.diag_every < 1:
            raise DomainError(f"diag_every must be at least 1, got {self.diag_every}")
        if self.amplitude < 0.0:
            raise DomainError(f"amplitude must be nonnegative, got {self.amplitude}")


@dataclass
class StabilityRunConfig:
    lam: float = DEFAULTS['lambda']
    W: float = DEFAULTS['W']
    nx: int = DEFAULTS['nx']
    ny: int = DEFAULTS['ny']
    box_factor: float = DEFAULTS['box_factor']
    amplitudes: List[float] = field(default_factory=lambda: list(DEFAULTS['amplitudes']))
    perturbation: str = DEFAULTS['perturbation']
    t_end_units: float = DEFAULTS['t_end_units']
    envelope_factor: float = DEFAULTS['envelope_factor']
    cfl: float = DEFAULTS['cfl']
    start_offset: float = DEFAULTS['start_offset']
    diag_every: int = DEFAULTS['diag_every']
    seed: int = DEFAULTS['seed']
    out: str = DEFAULTS['output_root'] + "/stability"

    def __post_init__(self):
        _check_common(self.lam, self.W, self.nx, self.ny, self.box_factor)
        if not self.amplitudes:
            raise UsageError("stability needs at least one amplitude")
        if any(a < 0.0 for a in self.amplitudes):
            raise DomainError(f"amplitudes must be nonnegative, got {self.amplitudes}")
        if not self.envelope_factor > 0.0:
            raise DomainError(f"envelope_factor must be positive, got {self.envelope_factor}")
        if not 0.0 < self.cfl <= DEFAULTS['cfl_limit']:
            raise DomainError(f"cfl must lie in (0, {DEFAULTS['cfl_limit']}], got {self.cfl}")
        if self.diag_every < 1:
            raise DomainError(f"diag_every must be at least 1, got {self.diag_every}")


C = TypeVar("C")


def load_run_config(cls: Type[C], path: Optional[Path], overrides: Dict[str, Any]) -> C:
    """
    Build a run config: defaults < JSON file < explicit overrides.

    Unknown keys (in the file or the overrides) raise UsageError.
    Overrides whose value is None are ignored, so argparse defaults of None
    never mask file values.
    """
    known = {f.name for f in fields(cls)}
    values: Dict[str, Any] = {}

    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as f:
                loaded = json.load(f)
        except json.JSONDecodeError as e:
            raise UsageError(f"config file {path} is not valid JSON: {e}") from e
        if not isinstance(loaded, dict):
            raise UsageError(f"config file {path} must hold a JSON object")
        # "lambda" is the natural key in a file; the field is named lam
        if "lambda" in loaded:
            loaded["lam"] = loaded.pop("lambda")
        values.update(loaded)

    values.update({k: v for k, v in overrides.items() if v is not None})

    unknown = sorted(set(values) - known)
    if unknown:
        raise UsageError(f"unknown config keys for {cls.__name__}: {', '.join(unknown)}")

    return cls(**values)


def config_to_dict(cfg: Any) -> Dict[str, Any]:
    d = asdict(cfg)
    if "lam" in d:
        d["lambda"] = d.pop("lam")
    return d
