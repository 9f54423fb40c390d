import math

import numpy as np
import pytest
from scipy import special
from scipy.optimize import brentq

from lambdipole import dipole
from lambdipole.dipole import (
    RadialProfiles,
    W_for_impulse,
    dipole_integrals,
    energy_unit,
    euler_radius,
    euler_stream,
    first_j1_zero,
    impulse_unit,
    interface_jump,
    locate_radius,
    make_params,
    mass_unit,
    matching_function,
    matching_potential,
    pde_residual,
    penalized_energy_unit,
    rho,
    sample_dipole,
    solve_radius,
    stream,
    velocity,
    vorticity,
)
from lambdipole.errors import DomainError, NoRootError
from lambdipole.field import GridSpec

LAMBDAS = [1.5, 2.0, 5.0, 10.0]


def _oracle_radius(lam):
    """First matching root from a scipy-based scan, skipping the poles of J1(k t)."""
    k = math.sqrt(lam - 1.0)

    def g(t):
        return (t * (special.kvp(1, t) / special.kv(1, t) + special.jvp(1, k * t) / (k * special.j1(k * t)))
                - lam / (lam - 1.0))

    step = 1e-3 / k
    t = 1e-6 + step * np.arange(int(100.0 / k / step))
    js = special.j1(k * t)
    with np.errstate(divide="ignore", invalid="ignore"):
        gs = g(t)
    for i in range(len(t) - 1):
        if (js[i] > 0) != (js[i + 1] > 0):
            continue
        if np.isfinite(gs[i]) and np.isfinite(gs[i + 1]) and (gs[i] < 0) != (gs[i + 1] < 0):
            return brentq(g, t[i], t[i + 1], xtol=1e-15, rtol=1e-15)
    raise AssertionError("oracle found no root")


# ----------------------------
# Matching condition
# ----------------------------

@pytest.mark.parametrize("lam", LAMBDAS)
def test_radius_matches_oracle(lam):
    a = solve_radius(lam)
    assert abs(matching_function(a, lam)) <= 1e-10
    assert a == pytest.approx(_oracle_radius(lam), abs=1e-12)


def test_matching_function_limit_at_origin():
    for lam in LAMBDAS:
        assert matching_function(1e-8, lam) == pytest.approx(-2.0, abs=1e-6)


def test_potential_derivative_is_matching_function():
    lam = 2.0
    t = np.array([0.3, 1.1, 2.0])
    h = 1e-6
    fd = (matching_potential(t + h, lam) - matching_potential(t - h, lam)) / (2.0 * h)
    np.testing.assert_allclose(fd, matching_function(t, lam) / t, rtol=1e-6, atol=1e-7)


def test_root_interval_reported():
    solution = locate_radius(2.0)
    k = math.sqrt(2.0 - 1.0)
    zeros = special.jn_zeros(1, solution.interval) / k
    lower = 0.0 if solution.interval == 1 else zeros[solution.interval - 2]
    assert lower < solution.a < zeros[solution.interval - 1]
    assert solution.residual <= 1e-10


def test_no_root_when_scan_is_too_short(monkeypatch):
    monkeypatch.setattr(dipole, "SCAN_RANGE", 1e-3)
    with pytest.raises(NoRootError):
        locate_radius(2.345)


def test_lambda_must_exceed_one():
    with pytest.raises(DomainError, match="lambda must exceed 1"):
        make_params(1.0, 1.0)
    with pytest.raises(DomainError):
        make_params(2.0, 0.0)


# ----------------------------
# Euler limit
# ----------------------------

def test_first_j1_zero():
    c0 = first_j1_zero()
    assert abs(c0 - 3.8317) <= 5e-4
    assert c0 == pytest.approx(special.jn_zeros(1, 1)[0], abs=1e-12)
    assert special.j0(c0) < 0.0


def test_euler_radius_scaling():
    c0 = first_j1_zero()
    assert euler_radius(1.0) == pytest.approx(c0)
    assert euler_radius(4.0) == pytest.approx(c0 / 2.0)
    assert euler_radius(2.0) == pytest.approx(c0 / math.sqrt(2.0))


def test_euler_stream_continuous_at_radius():
    lam, W = 2.0, 1.0
    a = euler_radius(lam)
    theta = np.linspace(0.1, math.pi - 0.1, 16)
    inner = euler_stream(lam, W, a * (1 - 1e-12) * np.cos(theta), a * (1 - 1e-12) * np.sin(theta))
    outer = euler_stream(lam, W, a * (1 + 1e-12) * np.cos(theta), a * (1 + 1e-12) * np.sin(theta))
    np.testing.assert_allclose(inner, outer, atol=1e-9)


# ----------------------------
# Parameters and profiles
# ----------------------------

def test_params_invariants(params2):
    assert params2.matching_residual() <= 1e-10
    ka = params2.k * params2.a
    expected = -params2.W * params2.a / ((params2.lam - 1.0) * special.j1(ka))
    assert params2.A_L == pytest.approx(expected, rel=1e-12)

    # interior vorticity at r = a/2 on the symmetry line from scipy's J1; a wrong
    # sign of A_L would make the half-disc a negative patch
    lam, W, a, k = params2.lam, params2.W, params2.a, params2.k
    slope = W * lam / (lam - 1.0)
    half = lam * (params2.A_L * special.j1(k * a / 2) + slope * a / 2 - W * a / 2)
    assert half > 0.0


def test_params_linear_in_W(params2):
    doubled = make_params(2.0, 2.0)
    assert doubled.a == params2.a
    assert doubled.A_L == pytest.approx(2.0 * params2.A_L, rel=1e-14)


def test_profile_identities(params2):
    prof = RadialProfiles(params2)
    W, lam, a = params2.W, params2.lam, params2.a
    inner = np.linspace(0.01, 0.99, 20) * a
    outer = np.linspace(1.01, 3.0, 20) * a
    np.testing.assert_allclose(prof.eta0(inner), params2.A_L * special.j1(params2.k * inner), atol=1e-12)
    np.testing.assert_allclose(prof.eta1(outer), params2.exterior_amplitude * special.k1(outer), rtol=1e-10)
    assert prof.eta0(a) == pytest.approx(-W * a / (lam - 1.0), rel=1e-10)
    assert isinstance(prof.eta(0.5), float)


# ----------------------------
# Pointwise fields
# ----------------------------

def test_stream_vanishes_on_axis(params2):
    x1 = np.linspace(-3 * params2.a, 3 * params2.a, 101)
    assert np.all(stream(params2, x1, 0.0) == 0.0)
    assert np.all(vorticity(params2, x1, 0.0) == 0.0)
    assert stream(params2, 0.0, 0.0) == 0.0


def test_stream_continuous_at_radius(params2):
    theta = (np.arange(32) + 0.5) * math.pi / 32
    a = params2.a
    inner = stream(params2, a * (1 - 1e-13) * np.cos(theta), a * (1 - 1e-13) * np.sin(theta))
    outer = stream(params2, a * (1 + 1e-13) * np.cos(theta), a * (1 + 1e-13) * np.sin(theta))
    np.testing.assert_allclose(inner, outer, atol=1e-9)


def test_stream_exterior_value(params2):
    a = params2.a
    expected = params2.W * a / special.k1(a) * special.k1(2 * a)
    assert stream(params2, 0.0, 2 * a) == pytest.approx(expected, rel=1e-10)


def test_stream_exterior_decays_like_k1(params2):
    R = np.linspace(2.0, 5.0, 20) * params2.a
    ratio = stream(params2, 0.0, R) / special.k1(R)
    np.testing.assert_allclose(ratio, ratio[0], rtol=1e-6)


def test_stream_linear_in_W(params2):
    doubled = make_params(2.0, 2.0)
    x1 = np.linspace(-2, 2, 41) * params2.a
    x2 = np.linspace(0, 2, 41) * params2.a
    X1, X2 = np.meshgrid(x1, x2)
    np.testing.assert_allclose(stream(doubled, X1, X2), 2.0 * stream(params2, X1, X2),
                               rtol=1e-12, atol=1e-14)


def test_vorticity_support_and_sign(params2, rng):
    a = params2.a
    r = rng.uniform(1.0, 4.0, 10_000) * a
    theta = rng.uniform(0.0, math.pi, 10_000)
    outside = vorticity(params2, r * np.cos(theta), r * np.sin(theta))
    assert np.all(outside == 0.0)

    X1, X2 = np.meshgrid(np.linspace(-2 * a, 2 * a, 201), np.linspace(0, 2 * a, 101))
    assert vorticity(params2, X1, X2).min() >= 0.0


def test_comoving_profile_changes_sign_only_at_radius(params2):
    # support of ω_L from the raw profile, without the rim clamp in vorticity()
    prof = RadialProfiles(params2)
    a = params2.a
    inner = np.linspace(0.01, 0.999, 400) * a
    outer = np.linspace(1.001, 6.0, 400) * a
    assert np.all(np.asarray(prof.eta(inner)) > 0.0)
    assert np.all(np.asarray(prof.eta(outer)) < 0.0)


def test_vorticity_at_half_radius(params2):
    prof = RadialProfiles(params2)
    a = params2.a
    expected = params2.lam * (prof.stream_profile(a / 2) - params2.W * a / 2)
    assert vorticity(params2, 0.0, a / 2) == pytest.approx(expected, rel=1e-12)
    assert expected > 0.0


def test_velocity_far_field(params2):
    R = params2.a + 20.0
    u1, u2 = velocity(params2, 0.3 * R, math.sqrt(1 - 0.09) * R)
    assert math.hypot(u1 + params2.W, u2) <= 1e-6 * params2.W


def test_velocity_matches_finite_differences(params2, rng):
    a = params2.a
    h = 1e-4 * a
    r = np.concatenate([rng.uniform(0.05, 0.95, 100), rng.uniform(1.05, 3.0, 100)]) * a
    theta = rng.uniform(0.1, math.pi - 0.1, 200)
    x1, x2 = r * np.cos(theta), r * np.sin(theta)

    d1 = (stream(params2, x1 + h, x2) - stream(params2, x1 - h, x2)) / (2 * h)
    d2 = (stream(params2, x1, x2 + h) - stream(params2, x1, x2 - h)) / (2 * h)
    u1, u2 = velocity(params2, x1, x2)
    np.testing.assert_allclose(u1, d2 - params2.W, atol=1e-6)
    np.testing.assert_allclose(u2, -d1, atol=1e-6)


def test_velocity_tangent_on_axis(params2):
    _, u2 = velocity(params2, np.linspace(-3, 3, 31) * params2.a, 0.0)
    assert np.all(u2 == 0.0)


def test_points_below_axis_rejected(params2):
    with pytest.raises(DomainError):
        stream(params2, 0.0, -1e-3)


# ----------------------------
# Verification
# ----------------------------

@pytest.mark.parametrize("lam", LAMBDAS)
def test_interface_jumps(lam):
    params = make_params(lam, 1.0)
    jump_psi, jump_dr = interface_jump(params, 64)
    assert jump_psi <= 1e-8
    assert jump_dr <= 1e-8


def test_pde_residual_second_order(params2):
    a = params2.a
    coarse, fine = pde_residual(params2, a / 32), pde_residual(params2, a / 64)
    assert 3.5 <= coarse / fine <= 4.5

    ext_coarse = pde_residual(params2, a / 32, region="exterior")
    ext_fine = pde_residual(params2, a / 64, region="exterior")
    assert 3.0 <= ext_coarse / ext_fine <= 5.0


def test_pde_residual_at_fine_spacings(params2):
    a = params2.a
    at_64 = pde_residual(params2, a / 64)
    at_128 = pde_residual(params2, a / 128)
    assert 3.5 <= at_64 / at_128 <= 4.5
    # repeat evaluation is bit-identical
    assert pde_residual(params2, a / 64) == at_64
    assert at_64 <= pde_residual(params2, a / 32) / 3.5


def test_pde_residual_rejects_bad_input(params2):
    with pytest.raises(DomainError):
        pde_residual(params2, 0.0)
    with pytest.raises(DomainError):
        pde_residual(params2, 0.1, region="boundary")


# ----------------------------
# Integrals
# ----------------------------

@pytest.mark.parametrize("lam", LAMBDAS)
def test_rho_positive(lam):
    assert rho(lam) > 0.0
    assert penalized_energy_unit(lam) > 0.0


def test_impulse_linear_in_W():
    assert dipole_integrals(make_params(2.0, 3.0))["impulse"] == pytest.approx(3.0 * impulse_unit(2.0), rel=1e-10)
    assert W_for_impulse(2.0, 3.0 * impulse_unit(2.0)) == pytest.approx(3.0)


def test_integrals_match_brute_force_midpoint(params2):
    a = params2.a
    n = 2048
    h = 2 * a / n
    x1 = -a + (np.arange(n) + 0.5) * h
    x2 = (np.arange(n // 2) + 0.5) * h
    X1, X2 = np.meshgrid(x1, x2)
    omega = vorticity(params2, X1, X2)
    psi = stream(params2, X1, X2)
    area = h * h

    assert impulse_unit(2.0) == pytest.approx((X2 * omega).sum() * area, rel=1e-5)
    assert mass_unit(2.0) == pytest.approx(omega.sum() * area, rel=1e-5)
    assert energy_unit(2.0) == pytest.approx(0.5 * (omega * psi).sum() * area, rel=1e-5)
    l2_sq = (omega ** 2).sum() * area
    assert penalized_energy_unit(2.0) == pytest.approx(energy_unit(2.0) - l2_sq / 4.0, rel=1e-4)


# ----------------------------
# Sampling
# ----------------------------

def test_sample_dipole_quantities(params2):
    grid = GridSpec(Lx=3 * params2.a, Ly=3 * params2.a, nx=32, ny=16)
    assert sample_dipole(params2, grid, "stream").quantity == "stream"
    u1, u2 = sample_dipole(params2, grid, "velocity")
    assert (u1.quantity, u2.quantity) == ("velocity_x1", "velocity_x2")
    shifted = sample_dipole(params2, grid, "vorticity", center=grid.hx * 4)
    base = sample_dipole(params2, grid, "vorticity")
    np.testing.assert_allclose(shifted.data[:, 4:], base.data[:, :-4], atol=1e-12)
    with pytest.raises(DomainError):
        sample_dipole(params2, grid, "pressure")
