import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spinexchange.coupling import (CouplingGraph, ModeProfile, absorptive_response,
                                   build_coupling_graph, dispersive_response,
                                   gaussian_mode_profile, read_profile, tabulated_mode_profile,
                                   write_profile)
from spinexchange.params import two_pi

KAPPA = two_pi(200e3)


def lorentz(delta, kappa):
    # independent oracle: kappa / (16 (delta - i kappa/2)) = A + i B
    return kappa / (16.0 * (delta - 0.5j * kappa))


def test_dispersive_examples():
    assert dispersive_response(0.0, KAPPA) == 0.0
    assert dispersive_response(KAPPA / 2, KAPPA) == pytest.approx(1 / 16, abs=1e-15)
    assert dispersive_response(-KAPPA / 2, KAPPA) == pytest.approx(-1 / 16, abs=1e-15)


def test_absorptive_examples():
    assert absorptive_response(0.0, KAPPA) == pytest.approx(1 / 8, abs=1e-15)
    assert absorptive_response(1e12 * KAPPA, KAPPA) < 1e-20
    a, b = dispersive_response(KAPPA, KAPPA), absorptive_response(KAPPA, KAPPA)
    assert a ** 2 + b ** 2 == pytest.approx((KAPPA ** 2 / 256) / (KAPPA ** 2 * 1.25), rel=1e-12)


@given(st.floats(-1e3, 1e3), st.floats(1e-3, 1e3))
def test_responses_match_complex_lorentzian(x, k):
    z = lorentz(x * k, k)
    assert dispersive_response(x * k, k) == pytest.approx(z.real, rel=1e-12, abs=1e-300)
    assert absorptive_response(x * k, k) == pytest.approx(z.imag, rel=1e-12)


def test_response_rejects_bad_kappa():
    with pytest.raises(ValueError):
        dispersive_response(1.0, 0.0)
    with pytest.raises(ValueError):
        absorptive_response(1.0, -1.0)


def test_centered_profile_symmetric():
    prof = gaussian_mode_profile(16.0, 0.0, 150.0, (-450.0, 450.0, 65), omega_peak=2.0)
    assert np.allclose(prof.omega, prof.omega[::-1], rtol=0, atol=1e-15)
    assert np.allclose(prof.density, prof.density[::-1], rtol=0, atol=1e-15)


def test_displaced_profile_monotone():
    prof = gaussian_mode_profile(16.0, 2000.0, 150.0, (1550.0, 2450.0, 128))
    assert np.all(np.diff(prof.omega) < 0)


def test_infinite_waist_uniform():
    prof = gaussian_mode_profile(math.inf, 0.0, 10.0, (-30.0, 30.0, 11), omega_peak=3.0)
    assert np.all(prof.omega == 3.0)


def test_default_grid():
    prof = gaussian_mode_profile(16.0, 100.0, 10.0)
    assert prof.n_sites == 128
    assert prof.grid[0] == pytest.approx(70.0) and prof.grid[-1] == pytest.approx(130.0)
    assert prof.density.max() == 1.0


def test_transverse_dispersion_seeded():
    a = gaussian_mode_profile(16.0, 0.0, 10.0, (-30, 30, 21), transverse_rms=5.0, seed=3)
    b = gaussian_mode_profile(16.0, 0.0, 10.0, (-30, 30, 21), transverse_rms=5.0, seed=3)
    c = gaussian_mode_profile(16.0, 0.0, 10.0, (-30, 30, 21))
    assert np.array_equal(a.omega, b.omega)
    assert np.all(a.omega <= c.omega) and np.any(a.omega < c.omega)


def test_tabulated_single_site():
    prof = tabulated_mode_profile([(1.0, 2.0, 0.3)])
    assert prof.n_sites == 1 and prof.density.tolist() == [1.0]


@pytest.mark.parametrize("rows", [[(0.0, 1.0, 1.0), (0.0, 1.0, 1.0)],
                                  [(1.0, 1.0, 1.0), (0.0, 1.0, 1.0)],
                                  [(0.0, 1.0, -1.0)], [(0.0, 1.0, 0.0)], [],
                                  [(0.0, math.nan, 1.0)]])
def test_tabulated_invalid(rows):
    with pytest.raises(ValueError):
        tabulated_mode_profile(rows)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.floats(-1e4, 1e4), st.floats(-1e6, 1e6), st.floats(0.01, 1.0)),
                min_size=1, max_size=20, unique_by=lambda r: r[0]))
def test_tabulated_roundtrip(tmp_path_factory, rows):
    rows = sorted(rows)
    prof = tabulated_mode_profile(rows)
    path = tmp_path_factory.mktemp("prof") / "p.txt"
    write_profile(prof, path)
    back = read_profile(path)
    assert np.array_equal(back.grid, prof.grid)
    assert np.array_equal(back.omega, prof.omega)
    assert np.array_equal(back.density, prof.density)


def test_read_profile_reports_line(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("# header\n0 1 1\n1 2\n")
    with pytest.raises(ValueError, match=":3:"):
        read_profile(path)


def test_graph_invariants(paper_params):
    prof = gaussian_mode_profile(16.0, 2000.0, 150.0, (1625.0, 2375.0, 16), omega_peak=1e3)
    g = build_coupling_graph(prof, paper_params)
    for m in (g.chi_plus, g.chi_minus, g.chi):
        assert np.array_equal(m, m.T)
    assert np.array_equal(g.chi, g.chi_plus + g.chi_minus)
    assert np.all(g.gamma >= 0)
    assert np.array_equal(g.h, np.diag(g.chi_plus) - np.diag(g.chi_minus))


def test_graph_matches_direct_formula(paper_params):
    p = paper_params
    prof = tabulated_mode_profile([(0.0, 3.0, 1.0), (1.0, 5.0, 0.5)])
    g = build_coupling_graph(prof, p, dissipation_scale=2.0)
    dp, dm = p.delta_c - p.omega_z, p.delta_c + p.omega_z
    zp, zm = lorentz(dp, p.kappa), lorentz(dm, p.kappa)
    om = np.array([3.0, 5.0])
    assert np.allclose(g.chi_plus, p.n_bar * np.outer(om, om) * zp.real / p.kappa, rtol=1e-12)
    assert np.allclose(g.chi_minus, p.n_bar * np.outer(om, om) * zm.real / p.kappa, rtol=1e-12)
    assert np.allclose(g.gamma, 2.0 * p.n_bar * om ** 2 * (zp.imag + zm.imag) / p.kappa,
                       rtol=1e-12)


def test_zero_drive_graph(paper_params):
    from dataclasses import replace
    prof = tabulated_mode_profile([(0.0, 3.0, 1.0), (1.0, 5.0, 0.5)])
    g = build_coupling_graph(prof, replace(paper_params, n_bar=0.0))
    assert not np.any(g.chi) and not np.any(g.gamma) and not np.any(g.h)


def test_cavity_resonance_cancels_chi(paper_params):
    from dataclasses import replace
    prof = tabulated_mode_profile([(0.0, 3.0, 1.0), (1.0, 5.0, 0.5), (2.0, 1.0, 0.2)])
    g = build_coupling_graph(prof, replace(paper_params, delta_c=0.0))
    assert np.allclose(g.chi_plus, -g.chi_minus, rtol=0, atol=1e-15 * np.abs(g.chi_plus).max())
    assert np.max(np.abs(g.chi)) <= 1e-15 * np.abs(g.chi_plus).max()


def test_two_site_rank_one(paper_params):
    from dataclasses import replace
    prof = tabulated_mode_profile([(0.0, 2.0, 1.0), (1.0, 7.0, 1.0)])
    g = build_coupling_graph(prof, replace(paper_params, n_bar=1.0))
    assert np.linalg.matrix_rank(g.chi_plus) == 1
    assert g.chi_plus[0, 1] / g.chi_plus[0, 0] == pytest.approx(3.5, rel=1e-12)


def test_graph_validation():
    with pytest.raises(ValueError):
        CouplingGraph.from_matrices([[0, 1], [2, 0]], np.zeros((2, 2)))
    with pytest.raises(ValueError):
        CouplingGraph.from_matrices(np.eye(2), np.eye(2), gamma=[-1.0, 0.0])
    with pytest.raises(ValueError):
        ModeProfile(np.array([0.0, 1.0]), np.ones(2), np.array([0.5, 1.5]))
