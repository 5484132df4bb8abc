import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from darkbeam import (
    StokesProfile,
    SystemParams,
    VelocityClass,
    VelocityDistribution,
    check_feasibility,
    delay_tau,
    group_velocity,
    group_velocity_at,
    mixing_angle,
)
from darkbeam.errors import InvariantError, NonPositiveVelocity, NonTransportingChannel
from darkbeam.model import adiabaticity_integral, mixing_angle_derivative

from oracles import romberg


def const(w):
    return StokesProfile(kind="Constant", omega_max=w, omega_min=min(w, 1e-3))


def test_coupling_is_alpha_times_gamma():
    p = SystemParams(alpha=7.5, r=0.1, gamma_tilde=12.0)
    assert p.coupling_G == pytest.approx(90.0, rel=1e-15)


@pytest.mark.parametrize("kw", [dict(alpha=0.0), dict(gamma_tilde=-1.0), dict(length_L=2.0),
                                dict(x=math.nan)])
def test_params_reject_invalid(kw):
    base = dict(alpha=1.0, r=0.1, gamma_tilde=1.0)
    with pytest.raises(InvariantError):
        SystemParams(**{**base, **kw})


@pytest.mark.parametrize("w, expected", [(1.0, math.pi / 4), (1 / math.sqrt(3), math.pi / 3)])
def test_mixing_angle_special_values(params, w, expected):
    assert mixing_angle(params, const(w), 0.3) == pytest.approx(expected, abs=1e-14)


def test_mixing_angle_vanishes_for_strong_stokes(params):
    assert mixing_angle(params, const(1e8), 0.0) < 1e-7


@pytest.mark.parametrize("r", [0.0, -0.05])
def test_mixing_angle_requires_forward_beam(r):
    p = SystemParams(alpha=1.0, r=r, gamma_tilde=1.0)
    with pytest.raises(NonPositiveVelocity):
        mixing_angle(p, StokesProfile(), 0.5)


@settings(max_examples=60, deadline=None)
@given(alpha=st.floats(0.5, 80), r=st.floats(0.005, 0.5), z=st.floats(0, 1),
       width=st.floats(0.02, 0.4))
def test_mixing_angle_identity(alpha, r, z, width):
    p = SystemParams(alpha=alpha, r=r, gamma_tilde=30.0)
    prof = StokesProfile(width=width)
    th = float(mixing_angle(p, prof, z))
    om = float(prof.omega_abs(p, z))
    assert math.tan(th) ** 2 * om**2 == pytest.approx(p.coupling_G * r, rel=1e-12)
    assert math.cos(th) ** 2 + math.sin(th) ** 2 == pytest.approx(1.0, abs=1e-15)
    assert 0 < th < math.pi / 2


def test_mixing_angle_derivative_matches_difference(params, ramp):
    z = np.linspace(0.3, 0.7, 9)
    h = 1e-6
    fd = (mixing_angle(params, ramp, z + h) - mixing_angle(params, ramp, z - h)) / (2 * h)
    np.testing.assert_allclose(mixing_angle_derivative(params, ramp, z), fd, rtol=1e-6, atol=1e-8)


def test_group_velocity_limits(params):
    assert group_velocity_at(params, 1e9) == pytest.approx(1.0, rel=1e-12)
    assert group_velocity_at(params, 1e-9) == pytest.approx(params.r, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(r=st.floats(0.001, 0.9), a=st.floats(1e-3, 1e3), b=st.floats(1e-3, 1e3))
def test_group_velocity_monotone_and_bounded(r, a, b):
    p = SystemParams(alpha=10.0, r=r, gamma_tilde=5.0)
    lo, hi = sorted((a, b))
    v_lo, v_hi = group_velocity_at(p, lo), group_velocity_at(p, hi)
    assert v_lo <= v_hi + 1e-15
    assert r - 1e-15 <= v_lo <= 1.0 + 1e-15


def test_group_velocity_root_for_counter_propagating_beam():
    p = SystemParams(alpha=10.0, r=-0.05, gamma_tilde=5.0)
    om = brentq(lambda o: group_velocity_at(p, o), 1e-3, 1e3, xtol=1e-15, rtol=1e-15)
    # numerator vanishes where g^2 n / Omega0^2 = c / |v0|
    assert p.coupling_G / om**2 == pytest.approx(1 / abs(p.r), rel=1e-12)


def test_group_velocity_profile_form(params, ramp):
    z = np.linspace(0, 1, 11)
    om2 = ramp.omega_abs(params, z) ** 2
    G = params.coupling_G
    expected = (1 + G / om2 * params.r) / (1 + G / om2)
    np.testing.assert_allclose(group_velocity(params, ramp, z), expected, rtol=1e-14)


def test_delay_constant_profile(params):
    prof = const(2.0)
    v = float(group_velocity(params, prof, 0.0))
    assert delay_tau(params, prof, 0.7) == pytest.approx(0.7 / v, rel=1e-12)
    assert delay_tau(params, prof, 0.0) == 0.0


def test_delay_matches_romberg_oracle():
    p = SystemParams(alpha=10.0, r=0.05, gamma_tilde=50.0)
    prof = StokesProfile()
    oracle = romberg(lambda s: 1.0 / group_velocity(p, prof, s), 0.0, 1.0, levels=16)
    assert delay_tau(p, prof, 1.0) == pytest.approx(oracle, rel=1e-6)


def test_delay_additive_and_increasing(params, ramp):
    z = np.linspace(0, 1, 23)
    tau = delay_tau(params, ramp, z)
    assert np.all(np.diff(tau) > 0)
    z1, z2 = 0.37, 0.81
    inc = romberg(lambda s: 1.0 / group_velocity(params, ramp, s), z1, z2, levels=14)
    assert delay_tau(params, ramp, z1) + inc == pytest.approx(delay_tau(params, ramp, z2), rel=1e-8)


def test_delay_rejects_stalled_channel():
    p = SystemParams(alpha=10.0, r=-0.05, gamma_tilde=5.0)
    with pytest.raises(NonTransportingChannel):
        delay_tau(p, StokesProfile(), 1.0)


def test_profile_floor_and_monotone():
    for kind in ("TanhRampDown", "CosSquaredRamp"):
        prof = StokesProfile(kind=kind, omega_max=50, omega_min=1e-2, width=0.2)
        w = prof.omega(np.linspace(0, 1, 2001))
        assert np.all(w >= 1e-2)
        assert np.all(np.diff(w) <= 1e-12)


def test_profile_derivative():
    for kind in ("TanhRampDown", "CosSquaredRamp"):
        prof = StokesProfile(kind=kind, width=0.2)
        z = np.array([0.42, 0.5, 0.55])
        h = 1e-6
        fd = (prof.omega(z + h) - prof.omega(z - h)) / (2 * h)
        np.testing.assert_allclose(prof.domega(z), fd, rtol=1e-6)


def test_tabulated_profile():
    z = np.linspace(0, 1, 41)
    ref = StokesProfile()
    tab = StokesProfile.tabulate(z, ref.omega(z))
    np.testing.assert_allclose(tab.omega(z), ref.omega(z), rtol=1e-12)
    with pytest.raises(InvariantError):
        StokesProfile.tabulate([0.0, 0.5], [1.0, 1.0])
    with pytest.raises(InvariantError):
        StokesProfile.tabulate([0.0, 1.0], [1.0, 0.0])


@pytest.mark.parametrize("kw", [dict(omega_min=0.0), dict(omega_max=1e-4), dict(width=0.0)])
def test_profile_rejects_invalid(kw):
    with pytest.raises(InvariantError):
        StokesProfile(**kw)


def test_velocity_weights_must_sum_to_one():
    with pytest.raises(InvariantError):
        VelocityDistribution((VelocityClass(0.1, 0.6), VelocityClass(0.1, 0.3)))
    with pytest.raises(InvariantError):
        VelocityDistribution((VelocityClass(0.1, 1.0),), dispersion_factor=0.7)


def test_velocity_mean_matches_r(params):
    for factor in (0.5, 1.0):
        vd = VelocityDistribution.gaussian(params, spread=0.005, n_classes=7,
                                           dispersion_factor=factor)
        assert abs(vd.xi.sum() - 1.0) < 1e-15
        vd.check_against(params)
    wrong = VelocityDistribution((VelocityClass(0.2, 1.0),))
    with pytest.raises(InvariantError):
        wrong.check_against(params)


def test_feasibility_defaults(params, ramp):
    rep = check_feasibility(params, ramp)
    assert rep.two_photon.value == 0.0 and rep.two_photon.passed
    assert rep.all_passed


def test_opacity_margin():
    p = SystemParams(alpha=100 * 0.05, r=0.05, gamma_tilde=1.0)
    rep = check_feasibility(p, StokesProfile())
    assert rep.opacity.value == pytest.approx(100.0)
    assert rep.opacity.passed


def test_adiabaticity_diverges_for_sharp_ramp(params):
    values = [check_feasibility(params, StokesProfile(width=w)).adiabaticity
              for w in (0.1, 1e-2, 1e-4)]
    assert values[0].passed and not values[-1].passed
    assert values[-1].value > 100 * values[0].value


def test_adiabaticity_scales_inverse_width(params):
    # theta' ~ 1/width over a region of length ~ width
    a = adiabaticity_integral(params, StokesProfile(width=0.02))
    b = adiabaticity_integral(params, StokesProfile(width=0.01))
    assert b / a == pytest.approx(2.0, rel=1e-3)


def test_doppler_check():
    p = SystemParams(alpha=10, r=0.05, gamma_tilde=10)
    vd = VelocityDistribution.gaussian(p, spread=0.005, n_classes=3, beat_k=5.0)
    rep = check_feasibility(p, StokesProfile(), vd)
    dv = np.max(np.abs(vd.velocities - 0.05))
    assert rep.doppler.value == pytest.approx(dv / 0.05 * 5.0)


def test_feasibility_report_json(params, ramp):
    import json
    d = json.loads(check_feasibility(params, ramp).to_json())
    assert set(d) >= {"two_photon", "doppler", "adiabaticity", "opacity", "all_passed"}
