import math
import warnings

import numpy as np
import pytest

from oracles import bspline_cardinal, triple_convolution_indicator
from fracnls.bspline import cardinal_bspline
from fracnls.illposedness_lab import (
    IllConfig,
    IntervalIN,
    QuadratureWarning,
    RegimeError,
    RegressionError,
    ResolutionError,
    WindowVariant,
    band_grid,
    F_integral,
    growth_experiment,
    h_closed_form,
    h_quadrature,
    h_window_slope,
    layer_counts,
    leading_order_prediction,
    make_f_N,
    optimal_scaling,
    predicted_slope,
    scaled_threshold,
    second_iterate,
    symmetry_checks,
    two_sided_mesh,
    u1_approx,
    u1_exact,
)
from fracnls.spectral_field import FracParams, SpectralField

P = FracParams(1.75, 0.875)


@pytest.mark.parametrize("p", [2, 3, 4, 5, 7])
def test_bspline_matches_truncated_powers(p):
    xs = np.linspace(0.013, p - 0.013, 57)
    got = cardinal_bspline(p, xs)
    want = np.array([bspline_cardinal(p, x) for x in xs])
    assert np.max(np.abs(got - want)) < 1e-13


def test_bspline_partition_of_unity_and_support():
    x = np.linspace(0.0, 1.0, 11)
    total = sum(cardinal_bspline(3, x + j) for j in range(3))
    assert np.allclose(total, 1.0)
    assert cardinal_bspline(3, np.array([-0.1, 3.0, 3.5])).tolist() == [0.0, 0.0, 0.0]


def test_F_integral_values():
    # F(lam) = 2 pi B_p(lam); B_3(3/2) = 3/4 from the direct triple convolution
    val, err = F_integral(3, 1.5)
    assert val == pytest.approx(3 * math.pi / 2, rel=1e-10)
    assert triple_convolution_indicator(1.5) == pytest.approx(0.75, abs=1e-3)
    assert err < 1e-9


@pytest.mark.parametrize("p", [3, 5])
def test_h_quadrature_vs_closed_form(p):
    N, eps = 64.0, 0.6
    w = N ** (-2 * eps)
    peak = float(h_closed_form(p, N, eps, N - 0.5 * p * w))
    for lam in np.linspace(-0.3, p + 0.3, 13):
        xi = N - lam * w
        q = h_quadrature(p, N, eps, xi)
        assert abs(q - float(h_closed_form(p, N, eps, xi))) <= 1e-8 * peak


def test_h_quadrature_info_and_validation():
    _, info = h_quadrature(3, 64.0, 0.6, 63.9, return_info=True)
    assert info["ok"] and info["abs_err"] >= 0
    with pytest.raises(ValueError):
        h_closed_form(4, 64.0, 0.6, 63.9)
    with warnings.catch_warnings():
        warnings.simplefilter("error", QuadratureWarning)
        h_quadrature(3, 64.0, 0.6, 63.9)


def test_symmetry():
    d = symmetry_checks(3, np.linspace(0.1, 2.9, 15))
    assert d["reflect_p"] < 1e-14
    assert d["reflect_1"] > 0.1


def test_h_window_slope_both_routes():
    Ns = [2**k for k in range(6, 13)]
    for method in ("closed", "quadrature"):
        out = h_window_slope(3, 0.6, Ns, method=method)
        assert out["slope"] == pytest.approx(2 * 0.6 * (1 - 3), abs=1e-6)


def test_interval_variants():
    a = IntervalIN.make(64.0, 0.6, 0.61, WindowVariant.INTERIOR)
    b = IntervalIN.make(64.0, 0.6, 0.61, "edge")
    w = 64.0**-1.2
    assert a.lo == pytest.approx(64 - w) and a.hi == pytest.approx(64 - w / 2)
    assert b.width == pytest.approx(64.0**-1.22)
    assert a.contains(np.array([64 - 0.75 * w]))[0]
    with pytest.raises(ValueError):
        IntervalIN(1.0, 1.0, WindowVariant.EDGE)


def test_f_N_resolution_and_norm():
    f, norm = make_f_N(256.0, 0.6, 0.2)
    assert norm == pytest.approx(1.0, abs=1e-3)
    with pytest.raises(ResolutionError):
        make_f_N(256.0, 0.6, 0.2, grid=band_grid(256.0, 0.6, band_modes=8))


def test_u1_approx_error_decays():
    errs = []
    Ns = [64.0, 128.0, 256.0]
    for N in Ns:
        g = band_grid(N, 0.9, 16, 256)
        f, _ = make_f_N(N, 0.9, 0.0, g)
        ue = u1_exact(f, 0.5, P)
        ua = u1_approx(N, 0.9, 0.0, 0.5, P, g)
        errs.append(np.linalg.norm(ue.spec - ua.spec) / np.linalg.norm(ue.spec))
    assert errs[0] / errs[1] >= 1.5 and errs[1] / errs[2] >= 1.5
    assert math.log(errs[0] / errs[2]) / math.log(4) == pytest.approx(2 * 0.9 - (P.sigma - 1), abs=0.05)


def test_u1_approx_regime_guard():
    g = band_grid(4.0, 0.6)
    with pytest.raises(RegimeError):
        u1_approx(4.0, 0.6, 0.0, 1e-3, P, g)


def test_two_sided_mesh_and_layers():
    m = two_sided_mesh(0.25, 64)
    assert m.T == 0.25 and m.m == 64
    gaps = np.diff(m.nodes)
    assert gaps[0] < gaps[32] and gaps[-1] < gaps[32]
    j1, j3 = layer_counts(m, 256.0, P)
    assert j1 == j3 > 0
    with pytest.raises(ValueError):
        two_sided_mesh(0.25, 63)


def test_second_iterate_zero_data():
    g = band_grid(64.0, 0.6)
    up = second_iterate(SpectralField.zeros(g), 0.25, P, two_sided_mesh(0.25, 16))
    assert not np.any(up.spec)


def test_second_iterate_matches_leading_order():
    N, eps, s, T = 256.0, 0.6, P.s_c - 0.2, 0.25
    g = band_grid(N, eps, 32)
    f, _ = make_f_N(N, eps, s, g)
    up = second_iterate(f, T, P, two_sided_mesh(T, 2048))
    w = N ** (-2 * eps)
    sel = (g.xi > N - 1.5 * w) & (g.xi < N - 0.5 * w)
    pred = leading_order_prediction(N, eps, s, T, P, g.xi[sel])
    assert np.max(np.abs(np.abs(up.spec[sel]) - pred) / pred) < 5e-3


def test_predicted_slopes_and_scaling():
    cfg = IllConfig(P, s=P.s_c - 0.2)
    assert predicted_slope(cfg) == pytest.approx(0.2)
    b, eps = optimal_scaling(P, 0.02)
    assert b == pytest.approx(1 / P.beta - 0.02)
    assert scaled_threshold(P, b, eps) == pytest.approx(P.s_c - 0.02)
    with pytest.raises(ValueError):
        IllConfig(P, s=0.0, N_list=(128, 64, 256))
    with pytest.raises(ValueError):
        IllConfig(P, s=0.0, b=3.0)


def test_growth_experiment_small(tmp_path):
    cfg = IllConfig(P, s=P.s_c - 0.2, N_list=(64, 128, 256, 512), m_nodes=1024)
    rep = growth_experiment(cfg)
    assert rep.measured_slope == pytest.approx(rep.predicted_slope, abs=0.05)
    assert rep.sign_test
    rep.write_csv(tmp_path / "g.csv")
    rep.write_json(tmp_path / "g.json")
    assert len((tmp_path / "g.csv").read_text().splitlines()) == 5
    with pytest.raises(RegressionError):
        growth_experiment(IllConfig(P, s=0.0, N_list=(64, 128)))
