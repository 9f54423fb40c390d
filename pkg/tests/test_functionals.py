import numpy as np
import pytest
from conftest import random_blobs

from lambdipole.dipole import box_for, impulse_unit, make_params, sample_dipole
from lambdipole.errors import DomainError
from lambdipole.field import GridSpec, ScalarField
from lambdipole.functionals import (
    ENERGY_BOUND,
    GREEN_SUP_BOUND,
    AdmissibleSpec,
    compute_functionals,
    energy_bound_check,
    green_sup_ratio,
    is_admissible,
    steiner_decay_bound,
    steiner_positions,
    steiner_symmetrize,
)


def _random_rows(grid, rng):
    """Nonnegative field with unsorted rows, compactly supported away from the edges."""
    data = np.zeros(grid.shape)
    j = slice(grid.ny // 4, 3 * grid.ny // 4)
    i = slice(grid.nx // 4, 3 * grid.nx // 4)
    block = rng.uniform(0.0, 1.0, data[j, i].shape) * (rng.uniform(size=data[j, i].shape) < 0.6)
    data[j, i] = block
    return ScalarField(grid, data)


@pytest.fixture(scope="module")
def dipole_field():
    params = make_params(2.0, 1.0)
    grid = box_for(params, 6.0, 256, 128)
    return params, sample_dipole(params, grid, "vorticity")


# ----------------------------
# Functionals
# ----------------------------

def test_zero_field(small_grid):
    f = compute_functionals(ScalarField(small_grid, np.zeros(small_grid.shape)), 2.0)
    assert (f.E, f.I, f.mass, f.l1, f.l2, f.E_lambda) == (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    assert energy_bound_check(ScalarField(small_grid, np.zeros(small_grid.shape))) == 0.0


def test_dipole_functionals(dipole_field):
    params, omega = dipole_field
    f = compute_functionals(omega, params.lam)
    assert f.E > 0.0
    assert f.E_lambda > 0.0
    assert f.E_lambda == pytest.approx(f.E - f.l2 ** 2 / (2.0 * params.lam))
    assert f.I == pytest.approx(impulse_unit(2.0) * params.W, rel=5e-3)
    assert f.to_dict()["mass"] == f.mass


def test_penalized_energy_increases_with_impulse(dipole_field):
    params, omega = dipole_field
    values = [compute_functionals(omega.with_data(W * omega.data), params.lam).E_lambda
              for W in (0.5, 1.0, 2.0)]
    assert values[0] < values[1] < values[2]


def test_negative_input_warns(blob, capsys):
    compute_functionals(blob.with_data(-blob.data), 2.0)
    assert "negative values" in capsys.readouterr().err


def test_energy_direct_and_spectral_agree(small_grid, rng):
    for _ in range(5):
        omega = random_blobs(small_grid, rng)
        spectral = compute_functionals(omega, 2.0, "spectral").E
        direct = compute_functionals(omega, 2.0, "direct").E
        assert spectral == pytest.approx(direct, rel=0.02)


def test_energy_translation_invariant(blob):
    E = compute_functionals(blob, 2.0).E
    for shift in (1, 7, -12):
        moved = blob.with_data(np.roll(blob.data, shift, axis=1))
        assert compute_functionals(moved, 2.0).E == pytest.approx(E, rel=1e-12)


# ----------------------------
# Estimate suites
# ----------------------------

def test_energy_ratio_is_scale_invariant(blob):
    base = energy_bound_check(blob)
    assert energy_bound_check(blob.with_data(2.0 * blob.data)) == pytest.approx(base, rel=1e-10)


def test_estimates_below_frozen_bounds(small_grid, rng):
    ratios_E, ratios_G = [], []
    for n in range(100):
        omega = random_blobs(small_grid, rng, n_bumps=1 + n % 4) if n % 2 else _random_rows(small_grid, rng)
        ratios_E.append(energy_bound_check(omega))
        ratios_G.append(green_sup_ratio(omega))
    assert max(ratios_E) <= ENERGY_BOUND
    assert max(ratios_G) <= GREEN_SUP_BOUND
    assert min(ratios_E) > 0.0


def test_steiner_far_field_envelope():
    grid = GridSpec(Lx=16.0, Ly=8.0, nx=128, ny=32)
    X1, X2 = grid.mesh()
    omega = ScalarField(grid, np.exp(-(X1 ** 2 + (X2 - 3.0) ** 2)))
    assert steiner_decay_bound(omega) <= 10.0
    assert steiner_decay_bound(omega, min_distance=100.0) == 0.0


# ----------------------------
# Steiner symmetrization
# ----------------------------

def test_positions_fill_row_from_centre():
    order = steiner_positions(8)
    assert list(order) == [3, 4, 2, 5, 1, 6, 0, 7]
    assert sorted(order) == list(range(8))


def test_symmetrized_rows_are_symmetric_decreasing(small_grid, rng):
    star = steiner_symmetrize(_random_rows(small_grid, rng)).data
    c = small_grid.nx // 2
    right = star[:, c:]
    assert np.all(np.diff(right, axis=1) <= 0.0)
    assert np.all(star[:, :c][:, ::-1] >= right)


def test_steiner_preserves_norms_and_raises_energy(small_grid, rng):
    x2 = small_grid.x2[:, None]
    area = small_grid.cell_area
    for n in range(100):
        omega = _random_rows(small_grid, rng) if n % 2 else random_blobs(small_grid, rng)
        star = steiner_symmetrize(omega)
        for p in (1, 2):
            before = (np.abs(omega.data) ** p).sum() * area
            after = (np.abs(star.data) ** p).sum() * area
            assert after == pytest.approx(before, rel=1e-13)
        assert (x2 * star.data).sum() == pytest.approx((x2 * omega.data).sum(), rel=1e-13)

        E = compute_functionals(omega, 2.0, "direct").E
        E_star = compute_functionals(star, 2.0, "direct").E
        assert E_star >= E * (1.0 - 1e-9)


def test_steiner_idempotent_and_fixes_symmetric_rows(small_grid, rng):
    star = steiner_symmetrize(_random_rows(small_grid, rng))
    assert np.array_equal(steiner_symmetrize(star).data, star.data)


# ----------------------------
# Admissible set
# ----------------------------

def test_dipole_admissibility(dipole_field):
    params, omega = dipole_field
    f = compute_functionals(omega, params.lam)
    spec = AdmissibleSpec(mu=f.I, nu=2.0 * f.mass, lam=params.lam)

    ok, report = is_admissible(omega, spec)
    assert ok and report.ok

    ok, report = is_admissible(omega.with_data(-omega.data), spec)
    assert not ok
    assert any("negative" in r for r in report.reasons)

    ok, report = is_admissible(omega, AdmissibleSpec(mu=0.5 * f.I, nu=2.0 * f.mass, lam=params.lam))
    assert not ok
    assert any("impulse" in r for r in report.reasons)

    ok, report = is_admissible(omega, AdmissibleSpec(mu=f.I, nu=0.5 * f.mass, lam=params.lam))
    assert not ok
    assert any("mass" in r for r in report.reasons)


@pytest.mark.parametrize("mu, nu, lam", [(0.0, 1.0, 2.0), (1.0, -1.0, 2.0), (1.0, 1.0, 1.0)])
def test_admissible_spec_validation(mu, nu, lam):
    with pytest.raises(DomainError):
        AdmissibleSpec(mu=mu, nu=nu, lam=lam)
