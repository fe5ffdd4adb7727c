"""Acceptance criteria, one PASS/FAIL line each.

Run with pytest (lines appear in the terminal summary) or directly:
    python tests/test_acceptance.py
"""

import cmath
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from oracles import ml_reference, riemann_liouville_power  # noqa: E402
from fracnls.duhamel_solver import (  # noqa: E402
    KernelCache,
    SolverConfig,
    TimeMesh,
    pde_residual,
    picard_solve,
    riemann_liouville_J,
    scale_data,
    scaling_transport,
)
from fracnls.illposedness_lab import (  # noqa: E402
    IllConfig,
    growth_experiment,
    h_closed_form,
    h_quadrature,
    h_window_slope,
    optimal_scaling,
)
from fracnls.linear_propagator import evolve_linear, l2_ratio, remainder_decomposition  # noqa: E402
from fracnls.mittag_leffler import MLOrder, ml_eval, ml_eval_many, ray_table  # noqa: E402
from fracnls.norm_lab import TrialSpec, smoothing_ratio  # noqa: E402
from fracnls.spectral_field import FracParams, Grid, SpectralField, sobolev_norm  # noqa: E402

RESULTS: list[str] = []
THM = FracParams(1.75, 0.875, 3, 1.0)


def record(cid: str, title: str, ok: bool, detail: str) -> bool:
    RESULTS.append(f"{'PASS' if ok else 'FAIL'}  {cid:<4} {title}: {detail}")
    print(RESULTS[-1])
    return ok


def info(cid: str, detail: str) -> None:
    RESULTS.append(f"INFO  {cid:<4} {detail}")
    print(RESULTS[-1])


def rel(a, b):
    return abs(a - b) / abs(b)


# ----------------------------------------------------------------- 1


def test_c1_mittag_leffler_accuracy():
    small, large, times = 0.0, 0.0, []
    for beta in (0.6, 0.75, 0.875):
        o = MLOrder(beta)
        for r in (0.05, 0.5, 1.0, 2.5, 4.0, 5.0):
            for th in np.linspace(-math.pi, math.pi, 9):
                z = r * cmath.exp(1j * th)
                small = max(small, rel(ml_eval(o, z).value, ml_reference(beta, 1.0, z)))
        ray = cmath.exp(-0.5j * beta * math.pi)
        for r in (30.0, 45.0, 60.0, 80.0, 100.0):
            large = max(large, rel(ml_eval(o, r * ray).value, ml_reference(beta, 1.0, r * ray)))
        zs = np.linspace(0.0, 100.0, 10_000) * ray
        ray_table.cache_clear()
        t0 = time.perf_counter()
        ml_eval_many(o, zs)  # includes the one-off table build for this order
        times.append(time.perf_counter() - t0)
    ok = small <= 1e-10 and large <= 1e-6 and max(times) < 5.0
    record("C1", "Mittag-Leffler accuracy", ok,
           f"max rel err |z|<=5: {small:.2e} (<=1e-10); ray |z| in [30,100]: {large:.2e} (<=1e-6); "
           f"1e4 vectorised evals incl. table build: {max(times):.2f}s (<5s)")
    o = MLOrder(0.875)
    zs = np.linspace(0.0, 100.0, 2000) * cmath.exp(-0.4375j * math.pi)
    t0 = time.perf_counter()
    for z in zs:
        ml_eval(o, z)
    info("C1", f"scalar dispatcher, extrapolated to 1e4 calls: {5 * (time.perf_counter() - t0):.1f}s")
    assert ok


# ----------------------------------------------------------------- 2


def test_c2_classical_reduction():
    P = FracParams(2.0, 1.0)
    g = Grid(256, 32 * math.pi)
    f = SpectralField.from_function(g, lambda x: np.exp(-(x**2)) * (1 + 1j * x))
    mode, mass = 0.0, 0.0
    live = np.abs(f.spec) > 1e-300
    for t in np.linspace(0.0, 10.0, 41):
        u = evolve_linear(f, t, P)
        want = np.exp(-1j * t * np.abs(g.xi) ** 2) * f.spec
        mode = max(mode, float(np.max(np.abs(u.spec[live] - want[live]) / np.abs(f.spec[live]))))
        mass = max(mass, abs(l2_ratio(u, f, exclude_zero=False) - 1.0))
    ok = mode <= 1e-12 and mass <= 1e-12
    record("C2", "Classical reduction", ok, f"per-mode rel err {mode:.2e}, mass drift {mass:.2e} over t in [0,10] (both <=1e-12)")
    assert ok


# ----------------------------------------------------------------- 3


def test_c3_mass_limit():
    P = THM
    g = Grid(1024, 64 * math.pi)
    f = SpectralField(g, spec=((np.abs(g.xi) >= 4) & (np.abs(g.xi) <= 16)).astype(complex))
    t_min = (1e3 / 4**P.alpha) ** (1 / P.beta)
    t0 = time.perf_counter()
    ratios = [l2_ratio(evolve_linear(f, t, P), f) for t in np.geomspace(t_min, 1e3 * t_min, 31)]
    dt = time.perf_counter() - t0
    dev = max(abs(r - 8 / 7) for r in ratios)
    ok = dev <= 0.02 and dt < 10
    record("C3", "Mass limit", ok, f"max |ratio - 8/7| = {dev:.2e} (<=0.02) for t^beta 4^alpha in [1e3, 1e3 * 1e3^beta]; {dt:.2f}s")
    assert ok


# ----------------------------------------------------------------- 4


def _remainder_band(leading_coeff):
    P = THM
    g = Grid(2048, 64 * math.pi)
    f = SpectralField.from_function(g, lambda x: np.exp(-(x**2) / 8))
    vals, zs = [], []
    for z0 in np.geomspace(50.0, 800.0, 9):
        t = (z0 / 8.0**P.alpha) ** (1 / P.beta)
        _, rep = remainder_decomposition(f, t, P, leading_coeff=leading_coeff)
        sel = (rep.z >= 50) & (rep.z <= 800)
        vals.append(rep.scaled[sel])
        zs.append(rep.z[sel])
    v = np.concatenate(vals)
    return v.max() / v.min(), v.min(), v.max()


def test_c4_remainder_decomposition():
    band, lo, hi = _remainder_band(None)
    ok = band <= 1.5
    record("C4", "Remainder decomposition", ok,
           f"(|R|/|f|) t^beta|xi|^alpha in [{lo:.4f}, {hi:.4f}], band factor {band:.3f} (<=1.5) over z in [50, 800]; oscillatory weight 1/beta")
    lit, _, _ = _remainder_band(1.0)
    info("C4", f"literal splitting (weight 1): band factor {lit:.1f}; the remainder then keeps an O(1) oscillatory part")
    assert ok


# ----------------------------------------------------------------- 5


def test_c5_nonlinear_solver():
    n, L = 512, 32 * math.pi
    g = Grid(n, L)
    f = SpectralField.from_function(g, lambda x: np.exp(-(x**2) / 2) * (1 + 0.5j * np.sin(x)))
    f = f * (0.1 / sobolev_norm(f, 0.25))
    sols, lams, res, secs = {}, {}, {}, {}
    for m in (64, 128, 256):
        cfg = SolverConfig(TimeMesh.graded(0.5, m, 2.0), tol_fixed_point=1e-10, s=0.25, delta=0.74)
        t0 = time.perf_counter()
        u = picard_solve(f, THM, cfg, KernelCache(THM, cfg.mesh, g))
        secs[m] = time.perf_counter() - t0
        sols[m], lams[m], res[m] = u, u.history[-1]["lambda_T"], u.residual
    e1 = sobolev_norm(SpectralField(g, spec=sols[64].specs[-1] - sols[128].specs[-1]), 0.25)
    e2 = sobolev_norm(SpectralField(g, spec=sols[128].specs[-1] - sols[256].specs[-1]), 0.25)
    order = math.log2(e1 / e2)
    drift = max(abs(lams[64] - lams[256]), abs(lams[128] - lams[256])) / lams[256]
    ok = max(res.values()) <= 1e-6 and order >= 1.5 and math.isfinite(lams[256]) and drift <= 0.02 and secs[256] < 120
    record("C5", "Nonlinear solver", ok,
           f"residual {max(res.values()):.1e} (<=1e-6), self-convergence order {order:.2f} (>=1.5), "
           f"Lambda_T {lams[256]:.8f} drift {drift:.1e} (<=2%), m=256 in {secs[256]:.1f}s (<120s)")
    info("C5", f"PDE residual (L1 Caputo, t >= 0.1 T) at m=256: {pde_residual(sols[256], THM, 0.25):.2e}")
    assert ok


# ----------------------------------------------------------------- 6


def test_c6_scaling_symmetry():
    g = Grid(256, 16 * math.pi)
    f = SpectralField.from_function(g, lambda x: 0.1 * np.exp(-(x**2) / 2) * (1 + 0.5j * np.sin(x)))
    mesh = TimeMesh.graded(0.5, 64, 2.0)
    u = picard_solve(f, THM, SolverConfig(mesh, tol_fixed_point=1e-13))
    sym, crit = 0.0, 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        c0 = sobolev_norm(f, THM.s_c, True)
        for lam in (0.5, 2**0.5, 2.0):
            fl = scale_data(f, lam, THM)
            crit = max(crit, rel(sobolev_norm(fl, THM.s_c, True), c0))
            ul = picard_solve(fl, THM, SolverConfig(mesh.scaled(lam**-THM.alpha), tol_fixed_point=1e-13))
            ut = scaling_transport(u, lam, THM)
            sym = max(sym, max(sobolev_norm(ul.field(j) - ut.field(j), 0.25) / sobolev_norm(ut.field(j), 0.25) for j in range(1, 65)))
    ok = sym <= 1e-4 and crit <= 1e-10
    record("C6", "Scaling symmetry", ok, f"solve/rescale H^s rel diff {sym:.1e} (<=1e-4), critical norm drift {crit:.1e} (<=1e-10)")
    assert ok


# ----------------------------------------------------------------- 7


def _J_exact(nu, t):
    # g = cos(3t) + i t^2, term by term through the power rule
    out = 1j * riemann_liouville_power(nu, 2, t)
    for k in range(40):
        out = out + (-9.0) ** k / math.factorial(2 * k) * riemann_liouville_power(nu, 2 * k, t)
    return out


def test_c7_j_calculus():
    rows = []
    for m in (64, 128, 256):
        mesh = TimeMesh.graded(1.0, m, 2.0)
        t = mesh.nodes
        g = np.cos(3 * t) + 1j * t**2
        comp = riemann_liouville_J(0.3, riemann_liouville_J(0.5, g, mesh), mesh)
        single = riemann_liouville_J(0.8, g, mesh)
        rows.append((m, np.max(np.abs(comp - single)), np.max(np.abs(single - _J_exact(0.8, t)))))
    mesh = TimeMesh.graded(1.0, 128, 2.0)
    t = mesh.nodes
    power = {k: float(np.max(np.abs(riemann_liouville_J(0.5, t**k, mesh) - riemann_liouville_power(0.5, k, t)))) for k in (0, 1, 2)}
    ok = all(c <= 10 * s for _, c, s in rows) and power[0] < 1e-12 and power[1] < 1e-12 and power[2] < 1e-4
    worst = max(c / s for _, c, s in rows)
    record("C7", "J-calculus", ok,
           f"composition/single error ratio <= {worst:.2f} (<=10) at m=64..256; power rule err k=0,1,2: "
           f"{power[0]:.0e}, {power[1]:.0e}, {power[2]:.1e} (m=128)")
    assert ok


# ----------------------------------------------------------------- 8


def test_c8_smoothing_ratios():
    P = FracParams(2.0, 1.0)
    spec = TrialSpec(scales=(3, 4, 5, 6, 7, 8, 9), n_trials=100)
    at = smoothing_ratio(P, P.gamma, 1.0, spec)
    above = smoothing_ratio(P, P.gamma + 0.25, 1.0, spec)
    ok = at.trend_slope <= 0.05 and above.trend_slope >= 0.2
    record("C8", "Smoothing-effect ratios", ok,
           f"slope at gamma {at.trend_slope:+.4f} (<=0.05), at gamma+0.25 {above.trend_slope:+.4f} (>=0.2); "
           f"scales 2^3..2^9, 100 trials, x-refinement delta {at.meta['refinement_delta']:.1e}")
    Q = THM
    fa = smoothing_ratio(Q, Q.gamma, 1.0, spec)
    fb = smoothing_ratio(Q, Q.gamma + 0.25, 1.0, spec)
    info("C8", f"alpha=7/4, beta=7/8 oscillatory flow: slopes {fa.trend_slope:+.4f} / {fb.trend_slope:+.4f} "
               f"(same sigma=2 as the beta=1 case, so the flow coincides)")
    pieces = TrialSpec(scales=(2, 3, 4, 5, 6), n_trials=5)
    sl = {k: smoothing_ratio(Q, 0.5 * Q.gamma, 0.5, pieces, kind=k).trend_slope for k in ("S", "T", "U")}
    info("C8", "operator pieces S/T/U at gamma/2: slopes " + ", ".join(f"{k} {v:+.3f}" for k, v in sl.items()))
    assert ok


# ----------------------------------------------------------------- 9


def test_c9_h_law():
    p, eps, N = 3, 0.6, 64.0
    w = N ** (-2 * eps)
    peak = float(h_closed_form(p, N, eps, N - 1.5 * w))
    err = 0.0
    t0 = time.perf_counter()
    for lam in np.linspace(-0.5, 3.5, 33):
        xi = N - lam * w
        err = max(err, abs(h_quadrature(p, N, eps, xi) - float(h_closed_form(p, N, eps, xi))) / peak)
    Ns = [2**k for k in range(6, 13)]
    sq = h_window_slope(p, eps, Ns, method="quadrature")
    sc = h_window_slope(p, eps, Ns, method="closed")
    dt = time.perf_counter() - t0
    pred = 2 * eps * (1 - p)
    ok = err <= 1e-8 and abs(sq["slope"] - pred) <= 0.05 and abs(sc["slope"] - pred) <= 0.05
    record("C9", "h_{p,N} law", ok,
           f"quadrature vs B-spline rel err {err:.1e} (<=1e-8); window slope {sq['slope']:.4f} (quadrature), "
           f"{sc['slope']:.4f} (closed form) vs {pred:.2f} +- 0.05; {dt:.1f}s")
    assert ok


# ----------------------------------------------------------------- 10


def test_c10_illposedness_exponent():
    P = THM
    t0 = time.perf_counter()
    lo = IllConfig(P, s=P.s_c - 0.2, eps=0.6, T=0.25)
    hi = IllConfig(P, s=P.s_c + 0.2, eps=0.6, T=0.25)
    rl, rh = growth_experiment(lo), growth_experiment(hi)
    dt = time.perf_counter() - t0
    target = -2 * lo.s - lo.eps + P.sigma - P.alpha - lo.delta_I
    diff = rl.measured_slope - rh.measured_slope
    ok = abs(rl.measured_slope - target) <= 0.15 and abs(diff - 0.8) <= 0.1 and dt < 600
    record("C10", "Ill-posedness exponent", ok,
           f"slope at s_c-0.2: {rl.measured_slope:.4f} vs {target:.4f} +- 0.15; slope difference {diff:.4f} (0.8 +- 0.1); "
           f"{dt:.1f}s for both sweeps")
    layers = min(min(r["layer_J1"], r["layer_J3"]) for r in rl.rows)
    info("C10", f"endpoint layers hold >= {layers} mesh nodes at every N; window-width slope (eps) model: {rl.predicted_slope:.4f}")
    pw = growth_experiment(IllConfig(P, s=P.s_c - 0.2, eps=0.6, T=0.25, window="edge"))
    corr = [a["norm"] / b["norm"] for a, b in zip(pw.rows, rl.rows)]
    info("C10", f"edge window [N - N^(-2 delta_I), N]: slope {pw.measured_slope:.4f} (predicted {pw.predicted_slope:.4f}); "
                f"norm ratio to interior window {corr[0]:.3f} .. {corr[-1]:.3f}")
    b, e = optimal_scaling(P, 0.02)
    sc = growth_experiment(IllConfig(P, s=P.s_c - 0.2, eps=e, b=b, T=0.25))
    info("C10", f"scaled run b={b:.4f}, eps={e:.4f}: measured {sc.measured_slope:.4f}, predicted {sc.predicted_slope:.4f}, "
                f"sign test {'ok' if sc.sign_test else 'failed'} (pre-asymptotic: mesh lies inside the endpoint layers)")
    assert ok


if __name__ == "__main__":
    failed = 0
    for name, fn in list(globals().items()):
        if name.startswith("test_c") and callable(fn):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
