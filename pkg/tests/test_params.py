import math

import pytest
from hypothesis import given, strategies as st

from spinexchange.params import (MU_B_OVER_HBAR, PhysicalParams, cooperativity,
                                 optimal_detuning, quadratic_zeeman, raman_detunings, two_pi,
                                 zeeman_splitting)


def make(**kw):
    base = dict(kappa=two_pi(200e3), g=two_pi(1.5e6), gamma_atom=two_pi(6e6),
                delta_atom=two_pi(-10e9), delta_c=0.0, n_bar=1.0, n_atoms=1e5, b_field=1.0)
    base.update(kw)
    return PhysicalParams(**base)


def test_cooperativity_operating_point():
    assert cooperativity(make()) == pytest.approx(7.5, rel=1e-12)


def test_cooperativity_zero_and_arithmetic():
    assert cooperativity(make(g=0.0)) == 0.0
    p = make(g=two_pi(1e6), kappa=two_pi(100e3), gamma_atom=two_pi(10e6))
    assert cooperativity(p) == pytest.approx(4.0, rel=1e-12)


def test_raman_detunings_examples():
    wz = two_pi(1e6)
    dp, dm = raman_detunings(make(b_field=None, omega_z=wz, delta_c=0.0))
    assert (dp, dm) == pytest.approx((-wz, wz), rel=1e-12)
    dp, dm = raman_detunings(make(b_field=None, omega_z=wz, delta_c=wz))
    assert dp == 0.0 and dm == pytest.approx(2 * wz)
    dp, dm = raman_detunings(make(b_field=None, omega_z=two_pi(0.8e6), delta_c=two_pi(2.5e6)))
    assert dp == pytest.approx(two_pi(1.7e6), rel=1e-12)
    assert dm == pytest.approx(two_pi(3.3e6), rel=1e-12)


def test_quadratic_zeeman_examples():
    assert quadratic_zeeman(make(b_field=0.0)) == 0.0
    assert quadratic_zeeman(make(b_field=1.0, q_over_b2=two_pi(144))) == pytest.approx(two_pi(144))
    assert quadratic_zeeman(make(b_field=1.14, q_over_b2=two_pi(144))) == pytest.approx(
        two_pi(187.1), rel=1e-3)


def test_optimal_detuning_examples():
    p = make()
    assert optimal_detuning(p) / two_pi(1e6) == pytest.approx(173.2, rel=1e-3)
    # eta = 1 requires 4 g^2 = kappa Gamma
    kappa, gam = 2.0, 8.0
    one = make(kappa=kappa, gamma_atom=gam, g=2.0, n_atoms=1)
    assert optimal_detuning(one) == pytest.approx(kappa, rel=1e-12)
    four = make(kappa=1.0, gamma_atom=1.0, g=1.0, n_atoms=100)
    assert optimal_detuning(four) == pytest.approx(20.0, rel=1e-12)


def test_zeeman_from_b_field():
    p = make(b_field=4.0)
    assert p.omega_z == pytest.approx(MU_B_OVER_HBAR * 4.0 / 2, rel=1e-15)
    q = make(b_field=None, omega_z=p.omega_z)
    assert q.b_field == pytest.approx(4.0, rel=1e-12)


@pytest.mark.parametrize("kw", [dict(kappa=0.0), dict(gamma_atom=-1.0), dict(g=-1.0),
                                dict(n_bar=-1.0), dict(n_atoms=0.5), dict(kappa=math.nan),
                                dict(b_field=None), dict(b_field=-1.0)])
def test_invalid_params_rejected(kw):
    with pytest.raises(ValueError):
        make(**kw)


def test_inconsistent_zeeman_rejected():
    with pytest.raises(ValueError, match="inconsistent"):
        make(b_field=1.0, omega_z=zeeman_splitting(1.0) * (1 + 1e-6))
    make(b_field=1.0, omega_z=zeeman_splitting(1.0) * (1 + 1e-11))


@given(st.floats(1e-3, 1e3), st.floats(-1e7, 1e7), st.floats(0.0, 1e8))
def test_detunings_symmetric_about_drive(b, dc, _):
    p = make(b_field=b, delta_c=dc)
    dp, dm = raman_detunings(p)
    assert 0.5 * (dp + dm) == pytest.approx(dc, abs=1e-6 * (abs(dc) + p.omega_z))
    assert dm - dp == pytest.approx(2 * p.omega_z, rel=1e-12)
