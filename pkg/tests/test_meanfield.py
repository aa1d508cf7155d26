import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from spinexchange.coupling import CouplingGraph, build_coupling_graph, gaussian_mode_profile
from spinexchange.exact import ManyBodyState, build_flipflop_hamiltonian, site_operator
from spinexchange.meanfield import (EnsembleState, QuenchProtocol, Region, bipartite_xy_protocol,
                                    estimated_period, evolve, excitation_density,
                                    extract_couplings, fit_initial_slope, hop_protocol,
                                    initial_fz_slopes, initialize, level_vector, pulse_unitary,
                                    sample_times, spin1_matrices, spin_expectations)
from spinexchange.params import quadratic_zeeman, two_pi

FX, FY, FZ, FP, FM = spin1_matrices()


def pure(v):
    v = np.asarray(v, complex)
    return np.outer(v, v.conj())


def xy_states():
    return (pulse_unitary("y", 3 * math.pi / 2) @ level_vector(-1),
            pulse_unitary("x", math.pi / 2) @ level_vector(-1))


# -- spin algebra ----------------------------------------------------------------

def test_spin1_matrices():
    assert np.array_equal(FZ, np.diag([1, 0, -1]))
    assert np.allclose(FP @ level_vector(-1), math.sqrt(2) * level_vector(0))
    assert np.allclose(FX @ FX + FY @ FY + FZ @ FZ, 2 * np.eye(3), atol=1e-15)
    assert np.allclose(FX @ FY - FY @ FX, 1j * FZ, atol=1e-15)


def test_pulse_two_level_vs_spin1():
    u = pulse_unitary("y", math.pi / 2, "-1,0")
    psi = u @ level_vector(-1)
    assert np.allclose(np.abs(psi) ** 2, [0, 0.5, 0.5])
    u1 = pulse_unitary("y", math.pi / 2)
    assert np.allclose(np.abs(u1 @ level_vector(-1)) ** 2, [0.25, 0.5, 0.25])
    with pytest.raises(ValueError):
        pulse_unitary("w", 1.0)
    with pytest.raises(ValueError):
        pulse_unitary("x", 1.0, "+1,-1")


# -- initialization ----------------------------------------------------------------

@pytest.fixture
def profile():
    return gaussian_mode_profile(16.0, 2000.0, 150.0, (1625.0, 2375.0, 32),
                                 omega_peak=two_pi(3000.0))


def test_hop_initialization(profile):
    proto = hop_protocol(1625.0, 2376.0, 2000.0, 2376.0)
    st_ = initialize(proto, profile)
    st_.check()
    fx, fy, fz = spin_expectations(st_.sites)
    inside = profile.grid >= 2000.0
    # oracle: direct 2x2 rotation exp(-i pi/4 sigma_y) of the lower level
    c, s = math.cos(math.pi / 4), math.sin(math.pi / 4)
    expect = abs(s) ** 2 * 0 + abs(c) ** 2 * -1  # weight on m=0 contributes 0
    assert np.allclose(fz[inside], expect, atol=1e-15)
    assert np.allclose(fz[~inside], -1.0)


def test_hop_spin1_pulse_option(profile):
    proto = hop_protocol(1625.0, 2376.0, 2000.0, 2376.0, transition=None)
    _, _, fz = spin_expectations(initialize(proto, profile).sites)
    psi = expm(-1j * math.pi / 2 * FY) @ level_vector(-1)
    assert np.allclose(fz[profile.grid >= 2000.0], np.vdot(psi, FZ @ psi).real)


def test_no_pulse_initialization(profile):
    proto = QuenchProtocol("custom", (Region("all", 1000.0, 3000.0),))
    st_ = initialize(proto, profile)
    assert np.allclose(spin_expectations(st_.sites)[2], -1.0)
    assert np.all(excitation_density(st_) == 0.0)


def test_bipartite_initialization(profile):
    proto = bipartite_xy_protocol(1625.0, 2376.0, 2000.0)
    st_ = initialize(proto, profile)
    fx, fy, fz = spin_expectations(st_.sites)
    a = profile.grid >= 2000.0
    assert np.allclose(fz, 0.0, atol=1e-15)
    assert np.allclose(fx[a], 1.0) and np.allclose(fy[a], 0.0, atol=1e-15)
    assert np.allclose(fy[~a], 1.0) and np.allclose(fx[~a], 0.0, atol=1e-15)


def test_smoothed_pulse_edges(profile):
    proto = replace(hop_protocol(1625.0, 2376.0, 2000.0, 2376.0), smoothing_width=20.0)
    _, _, fz = spin_expectations(initialize(proto, profile).sites)
    assert np.all(np.diff(fz) >= -1e-12)
    assert fz[0] == pytest.approx(-1.0) and fz[-1] == pytest.approx(-0.5)
    near = np.abs(profile.grid - 2000.0) < 15.0
    assert np.all((fz[near] > -0.99) & (fz[near] < -0.51))


def test_protocol_validation(profile):
    with pytest.raises(ValueError):
        Region("A", 1.0, 0.0)
    with pytest.raises(ValueError):
        Region("A", 0.0, 1.0, "x", 7.0)
    with pytest.raises(ValueError):
        QuenchProtocol("custom", (Region("A", 0, 2), Region("B", 1, 3)))
    with pytest.raises(ValueError):
        QuenchProtocol("custom", (Region("A", 0, 1),), initial_level=2)
    gap = QuenchProtocol("custom", (Region("A", 1625.0, 1900.0), Region("B", 2000.0, 2400.0)))
    with pytest.raises(ValueError, match="cover"):
        initialize(gap, profile)


def test_excitation_density_examples():
    w = np.array([0.2, 0.5, 1.0])
    for m, factor in ((-1, 0.0), (1, 2.0), (0, 1.0)):
        rho = np.repeat(pure(level_vector(m))[None], 3, axis=0)
        assert np.allclose(excitation_density(EnsembleState(rho, w)), factor * w)


def test_state_check_rejects_invalid():
    rho = np.repeat(pure(level_vector(0))[None], 2, axis=0)
    EnsembleState(rho, np.ones(2)).check()
    bad = rho.copy()
    bad[0, 0, 1] = 0.1
    with pytest.raises(ValueError, match="Hermiticity"):
        EnsembleState(bad, np.ones(2)).check()
    with pytest.raises(ValueError, match="trace"):
        EnsembleState(2 * rho, np.ones(2)).check()
    neg = np.repeat(np.diag([1.5, -0.5, 0.0]).astype(complex)[None], 2, axis=0)
    with pytest.raises(ValueError, match="eigenvalue"):
        EnsembleState(neg, np.ones(2)).check()


# -- dynamics ------------------------------------------------------------------

def two_site_graph(chi, gamma=(0.0, 0.0)):
    m = np.full((2, 2), chi / 2)
    return CouplingGraph.from_matrices(m, m, gamma)


def test_uncoupled_state_constant(rng):
    vx, vy = xy_states()
    st_ = EnsembleState(np.array([pure(vx), pure(vy)]), np.ones(2))
    g = CouplingGraph.from_matrices(np.zeros((2, 2)), np.zeros((2, 2)))
    s = evolve(st_, g, 0.0, 1.0, 11)
    assert np.array_equal(s.rho, np.repeat(st_.sites[None], 11, axis=0))


@pytest.mark.parametrize("chi", [0.8, -0.8])
def test_two_site_slope_signs_match_commutator(chi):
    vx, vy = xy_states()
    g = two_site_graph(chi)
    slopes = initial_fz_slopes(EnsembleState(np.array([pure(vx), pure(vy)]), np.ones(2)), g)
    # oracle: i <[H, f_z^(k)]> in the exact two-atom model
    H = build_flipflop_hamiltonian(g)
    psi = ManyBodyState.product([vx, vy]).amplitudes
    for k in range(2):
        fz = site_operator(FZ, k, 2)
        ref = np.vdot(psi, 1j * (H @ fz - fz @ H) @ psi).real
        assert slopes[k] == pytest.approx(ref, rel=1e-12)
    assert np.sign(slopes[0]) == -np.sign(chi)
    assert np.sign(slopes[1]) == np.sign(chi)


def test_sign_reversal_antisymmetry(profile, paper_params):
    g = build_coupling_graph(profile, paper_params)
    g0 = CouplingGraph.from_matrices(g.chi_plus, g.chi_minus)
    st_ = initialize(bipartite_xy_protocol(1625.0, 2376.0, 2000.0), profile)
    s_plus = initial_fz_slopes(st_, g0, onsite=False)
    s_minus = initial_fz_slopes(st_, g0.scaled(-1.0), onsite=False)
    assert np.any(s_plus != 0)
    assert np.array_equal(s_minus, -s_plus)


def test_two_site_spin_length_conserved(rng):
    vx, vy = xy_states()
    m = rng.uniform(0.5, 1.5, (2, 2))
    m = m + m.T
    g = CouplingGraph.from_matrices(m, 0.3 * m)
    st_ = EnsembleState(np.array([pure(vx), pure(vy)]), np.array([1.0, 0.7]))
    s = evolve(st_, g, 0.0, 3 * estimated_period(g, st_.weights), 301, onsite=False)
    fx, fy, fz = s.expectations()
    length = np.sqrt(fx ** 2 + fy ** 2 + fz ** 2)
    assert np.max(np.abs(length - 1.0)) < 1e-7


def test_magnetization_conserved_without_dissipation(profile, paper_params):
    g = build_coupling_graph(profile, paper_params, dissipation_scale=0.0)
    st_ = initialize(hop_protocol(1625.0, 2376.0, 2000.0, 2376.0), profile)
    T = estimated_period(g, profile.density)
    s = evolve(st_, g, 0.0, T, 101)
    mag = s.total_magnetization()
    assert np.max(np.abs(mag - mag[0])) / abs(mag[0]) < 1e-6


def test_evolution_keeps_valid_density_matrices(profile, paper_params):
    g = build_coupling_graph(profile, paper_params, dissipation_scale=3.0)
    st_ = initialize(hop_protocol(1625.0, 2376.0, 2000.0, 2376.0), profile)
    s = evolve(st_, g, quadratic_zeeman(paper_params), 2e-3, 41)
    for state in s.states:
        state.check()


def test_dissipation_pumps_toward_plus_one():
    g = CouplingGraph.from_matrices(np.zeros((1, 1)), np.zeros((1, 1)), [10.0])
    st_ = EnsembleState(pure(level_vector(-1))[None], np.ones(1))
    s = evolve(st_, g, 0.0, 1.0, 21)
    assert np.all(np.diff(s.fz[:, 0]) > 0)
    assert s.fz[-1, 0] == pytest.approx(1.0, abs=1e-6)


def test_hop_zero_drive_static(profile, paper_params):
    g = build_coupling_graph(profile, replace(paper_params, n_bar=0.0))
    st_ = initialize(hop_protocol(1625.0, 2376.0, 2000.0, 2376.0), profile)
    s = evolve(st_, g, quadratic_zeeman(paper_params), 1e-3, 11)
    exc = s.excitation_density()
    assert np.allclose(exc, exc[0], rtol=0, atol=1e-9)


def test_sample_times_specs():
    assert sample_times(1.0).size == 201
    assert np.allclose(sample_times(1.0, 5), [0, 0.25, 0.5, 0.75, 1.0])
    assert np.allclose(sample_times(1.0, 0.5), [0, 0.5, 1.0])
    with pytest.raises(ValueError):
        sample_times(1.0, 1)
    with pytest.raises(ValueError):
        sample_times(1.0, np.array([0.0, 0.5, 0.4]))


def test_mismatched_graph_rejected(profile):
    st_ = initialize(hop_protocol(1625.0, 2376.0, 2000.0, 2376.0), profile)
    with pytest.raises(ValueError):
        evolve(st_, two_site_graph(1.0), 0.0, 1.0)


# -- slope analysis --------------------------------------------------------------

@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
@settings(max_examples=30)
def test_slope_fit_exact_for_cubic(a, b, c):
    t = np.linspace(0.0, 0.2, 21)
    assert fit_initial_slope(t, 1 + a * t + b * t ** 2 + c * t ** 3, 0.2) == pytest.approx(
        a, abs=1e-9)


def sweep_setup(profile, p, dissipation_scale):
    g = build_coupling_graph(profile, p, dissipation_scale)
    proto = bipartite_xy_protocol(1625.0, 2376.0, 2000.0)
    st_ = initialize(proto, profile)
    q = quadratic_zeeman(p)
    window = 0.1 * estimated_period(g, profile.density, q)
    s = evolve(st_, g, q, window, 41)
    masks = proto.masks(profile.grid)
    return g, masks, extract_couplings(s, masks, profile.omega, window)


def region_mean(v, w, mask):
    return float(np.sum(v * w * mask) / np.sum(w * mask))


def test_extract_recovers_coherent_coupling(profile, paper_params):
    g, masks, ext = sweep_setup(profile, paper_params, 0.0)
    tot = g.chi @ profile.density
    for name, val in (("A", ext.chi_A), ("B", ext.chi_B)):
        ref = region_mean(tot, profile.density, masks[name])
        assert val == pytest.approx(ref, rel=0.02)
    assert abs(ext.gamma_A) < 0.02 * abs(ext.chi_A)


def test_extract_recovers_relaxation(profile, paper_params):
    g, masks, ext = sweep_setup(profile, replace(paper_params, delta_c=0.0), 1.0)
    for name, val in (("A", ext.gamma_A), ("B", ext.gamma_B)):
        assert val == pytest.approx(region_mean(g.gamma, profile.density, masks[name]), rel=0.02)
    assert abs(ext.chi_A) < 0.02 * ext.gamma_A
