import math

import numpy as np
import pytest

from fluxpiston.model import (EngineParams, bath_at_angle, detuning, hot_contact, occupation_slope,
                              occupations_at_detuning, rotor_drift, steady_state_occupations)


def _params(**kw):
    base = dict(kappa_H=10.0, Delta0=-4.0, g=1.0, E_c=1e-5, E_J=400.0, n_H=10.0, n_C=1.0, alpha=1.0)
    base.update(kw)
    return EngineParams(**base)


def test_alpha_and_J_are_consistent():
    p = _params()
    q = EngineParams(kappa_H=10.0, Delta0=-4.0, g=1.0, E_c=1e-5, E_J=400.0, n_H=10.0, n_C=1.0, J=p.J)
    assert q.alpha == pytest.approx(1.0, rel=1e-15)
    with pytest.raises(ValueError):
        EngineParams(kappa_H=1, Delta0=0, g=0, E_c=0, E_J=0, n_H=1, n_C=0)
    with pytest.raises(ValueError):
        _params(n_C=20.0)


def test_replace_keeps_alpha():
    p = _params().replace(kappa_H=100.0)
    assert p.alpha == 1.0
    assert p.J == pytest.approx(0.5 * math.sqrt(100.0))


def test_detuning_examples():
    p = _params(Delta0=-4.0, g=1.0)
    assert detuning(math.pi / 2, p) == pytest.approx(-4.0)
    assert detuning(0.0, p) == pytest.approx(-3.0)
    assert detuning(math.pi, _params(Delta0=-10.0, g=1.0)) == pytest.approx(-11.0)


def test_hot_contact_examples():
    p = _params(Delta0=0.0, g=0.0)
    assert hot_contact(0.0, p) == 1.0
    assert hot_contact(0.0, _params(Delta0=5.0, g=0.0)) == pytest.approx(0.5)
    assert hot_contact(0.0, _params(Delta0=-1e8, g=0.0)) < 1e-12


def test_bath_at_angle_limits_and_arithmetic():
    b = bath_at_angle(0.0, _params(Delta0=0.0, g=0.0))
    assert b.n_bar == pytest.approx(5.5) and b.kappa == pytest.approx(2.0)
    b = bath_at_angle(0.0, _params(alpha=0.0))
    assert b.n_bar == 1.0 and b.kappa == 1.0
    b = bath_at_angle(0.0, _params(Delta0=-4.0, g=1.0))
    f = 1.0 / (1.0 + 4.0 * 9.0 / 100.0)
    assert b.f_H == pytest.approx(0.7352941176470589, rel=1e-15)
    assert b.n_bar == pytest.approx((1.0 + 10.0 * f) / (1.0 + f), rel=1e-15)
    assert b.kappa == pytest.approx(1.0 + f, rel=1e-15)


def test_steady_state_reference_point():
    # alpha = 1, kappa_H = 10, n_C = 0.1 n_H, Delta = -kappa_H
    p = _params(n_H=1.0, n_C=0.1)
    n_a, _ = occupations_at_detuning(-10.0, p)
    assert n_a == pytest.approx(0.254, abs=1e-3)


def test_steady_state_trivial_limits():
    phi = np.linspace(0, 2 * np.pi, 17)
    n_a, n_b = steady_state_occupations(phi, _params(alpha=0.0))
    assert np.all(n_a == 1.0) and np.all(n_b == 10.0)
    n_a, n_b = steady_state_occupations(phi, _params(n_C=10.0))
    assert np.allclose(n_a, 10.0, rtol=0, atol=1e-14) and np.allclose(n_b, 10.0, rtol=0, atol=1e-14)


def test_steady_state_bounds_and_monotonicity():
    p = _params()
    D = np.linspace(0.0, 60.0, 601)
    for kH in (0.1, 1.0, 10.0, 100.0):
        n_a, n_b = occupations_at_detuning(D, p.replace(kappa_H=kH))
        assert np.all((n_a >= p.n_C) & (n_a <= p.n_H))
        assert np.all((n_b >= p.n_C) & (n_b <= p.n_H))
        assert np.all(np.diff(n_a) < 0)
        n_neg, _ = occupations_at_detuning(-D, p.replace(kappa_H=kH))
        assert np.all(np.diff(n_neg) < 0)


def test_large_kappa_H_limit_matches_eliminated_bath():
    p = _params(kappa_H=1e4, Delta0=-4e3, g=1e3)
    phi = np.linspace(0, 2 * np.pi, 73)
    n_a, _ = steady_state_occupations(phi, p)
    n_bar = bath_at_angle(phi, p).n_bar
    assert np.max(np.abs(n_a - n_bar) / n_bar) < 1e-3


def test_periodicity():
    p = _params()
    phi = np.linspace(-3, 3, 11)
    for f in (lambda x: detuning(x, p), lambda x: hot_contact(x, p),
              lambda x: bath_at_angle(x, p).n_bar, lambda x: steady_state_occupations(x, p)[0]):
        assert np.allclose(f(phi), f(phi + 2 * np.pi), rtol=1e-14, atol=0)


def test_occupation_slope_matches_finite_difference():
    p = _params()
    for D in (-10.0, -4.0, -0.5, 3.0):
        h = 1e-6 * p.kappa_H
        fd = (occupations_at_detuning(D + h, p)[0] - occupations_at_detuning(D - h, p)[0]) / (2 * h)
        assert occupation_slope(D, p) == pytest.approx(fd, rel=1e-6)


def test_rotor_drift_examples():
    p = _params(g=1.0, E_J=400.0, E_c=1e-5)
    for phi in (0.0, math.pi):
        assert rotor_drift(phi, 1.0, 3.0, p)[1] == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(rotor_drift(np.linspace(0, 6, 7), 0.0, p.E_J / p.hbar_g, p)[1], 0.0)
    dphi, dQ = rotor_drift(math.pi / 2, 2.0, 0.0, p)
    assert dphi == pytest.approx(2e-5)
    assert p.E_c * dQ == pytest.approx(-0.004)
