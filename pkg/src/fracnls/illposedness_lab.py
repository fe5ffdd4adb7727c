"""Second Picard iterate for narrow-band data near frequency N and its growth in N.

Data: f_N_hat = N^{eps - s} on the band [N - N^{-2 eps}, N]. The band is
resolved on a modulated grid centred at N so that a few dozen modes suffice
for any N; the torus length grows like N^{2 eps}.
"""

from __future__ import annotations

import csv
import enum
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate

from .bspline import cardinal_bspline
from .duhamel_solver import TimeMesh, product_weights
from .linear_propagator import evolve_linear
from .mittag_leffler import ray_table
from .spectral_field import FracParams, Grid, SpectralField, power_nonlinearity_spec


class ResolutionError(ValueError):
    pass


class RegimeError(ValueError):
    pass


class RegressionError(ValueError):
    pass


class QuadratureWarning(RuntimeWarning):
    pass


class WindowVariant(str, enum.Enum):
    EDGE = "edge"
    INTERIOR = "interior"


@dataclass
class IllConfig:
    params: FracParams
    s: float
    eps: float = 0.6
    margin: float = 0.01
    T: float = 0.25
    b: float = 0.0
    N_list: tuple = tuple(2**k for k in range(6, 13))
    M_cut: float = 10.0
    window: WindowVariant = WindowVariant.INTERIOR
    band_modes: int = 16
    n_points: int = 128
    m_nodes: int = 2048
    grading: float = 3.0

    def __post_init__(self):
        self.window = WindowVariant(self.window)
        if self.margin <= 0:
            raise ValueError("margin must be positive")
        if self.b != 0.0:
            a, sig = self.params.alpha, self.params.sigma
            if not sig > self.b * a:
                raise ValueError("scaled run needs sigma > b alpha")
            if not sig - 2 * self.eps - 1 < a * self.b:
                raise ValueError("scaled run needs sigma - 2 eps - 1 < alpha b")
        if list(self.N_list) != sorted(self.N_list):
            raise ValueError("N_list must be increasing")

    @property
    def delta_I(self) -> float:
        return self.eps + self.margin

    def as_dict(self) -> dict:
        d = asdict(self)
        d["params"] = self.params.as_dict()
        d["window"] = self.window.value
        d["N_list"] = list(self.N_list)
        return d


@dataclass(frozen=True)
class IntervalIN:
    lo: float
    hi: float
    variant: WindowVariant

    @classmethod
    def make(cls, N: float, eps: float, delta_I: float, variant=WindowVariant.INTERIOR) -> "IntervalIN":
        variant = WindowVariant(variant)
        if variant is WindowVariant.EDGE:
            return cls(N - N ** (-2 * delta_I), N, variant)
        w = N ** (-2 * eps)
        return cls(N - w, N - 0.5 * w, variant)

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("empty interval")

    def contains(self, xi) -> np.ndarray:
        xi = np.asarray(xi)
        return (xi >= self.lo) & (xi <= self.hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo


# ------------------------------------------------------------------- data


def band_grid(N: float, eps: float, band_modes: int = 16, n_points: int = 128) -> Grid:
    """Modulated grid with exactly ``band_modes`` midpoint modes in [N - N^{-2 eps}, N]."""
    w = N ** (-2 * eps)
    dxi = w / band_modes
    return Grid(n_points, 2 * math.pi / dxi, N - 0.5 * dxi)


def _band_mask(grid: Grid, N: float, eps: float) -> np.ndarray:
    w = N ** (-2 * eps)
    return (grid.xi > N - w) & (grid.xi < N)


def hs_norm_continuum(f: SpectralField, s: float, mask=None) -> float:
    """(int |xi|^{2s} |f_hat|^2 dxi)^{1/2} by the mode sum; sqrt(2 pi) times the homogeneous H^s norm."""
    xi = np.abs(f.grid.xi)
    sel = np.ones(xi.shape, bool) if mask is None else mask
    sel = sel & (xi > 0)
    return float(math.sqrt(np.sum(xi[sel] ** (2 * s) * np.abs(f.spec[sel]) ** 2) * f.grid.dxi))


def make_f_N(N: float, eps: float, s: float, grid: Grid | None = None, band_modes: int = 16):
    """f_N_hat = N^{eps - s} on [N - N^{-2 eps}, N]; returns (field, achieved norm)."""
    grid = grid or band_grid(N, eps, band_modes)
    mask = _band_mask(grid, N, eps)
    if mask.sum() < 16:
        raise ResolutionError(f"only {int(mask.sum())} modes in the band; need >= 16")
    spec = np.where(mask, N ** (eps - s), 0.0).astype(complex)
    f = SpectralField(grid, spec=spec)
    return f, hs_norm_continuum(f, s)


# --------------------------------------------------------------- linear part


def u1_exact(fN: SpectralField, t: float, params: FracParams) -> SpectralField:
    return evolve_linear(fN, t, params)


def u1_approx(
    N: float,
    eps: float,
    s: float,
    t: float,
    params: FracParams,
    grid: Grid,
    M_cut: float = 10.0,
    literal: bool = False,
    periodic: bool = True,
) -> SpectralField:
    """Large-time closed form of the linear flow of f_N, sampled on ``grid``.

    u1 ~ (c1 e^{-i t N^sigma} + c2 t^{-beta} N^{-alpha}) N^{eps-s} (1 - e^{-i x w})/(2 pi i x) e^{i x N},
    w = N^{-2 eps}. The asymptotics of E_beta give c1 = 1/beta and
    c2 = -i^beta / Gamma(1 - beta); ``literal`` uses c1 = c2 = 1.
    With ``periodic`` the band profile is the torus version of
    (1 - e^{-ixw})/(2 pi i x), i.e. the inverse transform of the band indicator
    on the grid's own modes; otherwise the line profile is sampled directly.
    """
    b, a = params.beta, params.alpha
    if t**b * N**a < M_cut:
        raise RegimeError(f"t^beta N^alpha = {t**b * N**a:.3g} below M_cut = {M_cut}")
    if literal:
        c1, c2 = 1.0, 1.0
    else:
        c1 = 1.0 / b
        c2 = -params.phase.i_pow_beta / math.gamma(1.0 - b) if b < 1 else 0.0
    amp = N ** (eps - s) * (c1 * np.exp(-1j * t * N**params.sigma) + c2 * t ** (-b) * N ** (-a))
    if periodic:
        spec = np.where(_band_mask(grid, N, eps), amp, 0.0)
        return SpectralField(grid, spec=spec)
    w = N ** (-2 * eps)
    x = grid.x
    with np.errstate(invalid="ignore", divide="ignore"):
        prof = np.where(x == 0, w, -np.expm1(-1j * x * w) / (1j * x))
    # the modulated grid stores exp(-i center x) u
    v = amp * prof * np.exp(1j * x * (N - grid.center)) / (2 * math.pi)
    return SpectralField(grid, phys=v)


# --------------------------------------------------------------- h_{p,N}


def h_closed_form(p: int, N: float, eps: float, xi) -> np.ndarray:
    """2 pi N^{-2 eps (p-1)} B_p(N^{2 eps} (N - xi))."""
    _check_p(p)
    w = N ** (-2 * eps)
    return 2 * math.pi * w ** (p - 1) * cardinal_bspline(p, (N - np.asarray(xi, dtype=float)) / w)


def _check_p(p):
    if int(p) != p or p < 3 or p % 2 != 1:
        raise ValueError("p must be an odd integer >= 3")


def _F_kernel(p: int, y: np.ndarray) -> np.ndarray:
    small = np.abs(y) < 1e-6
    out = np.empty(y.shape, dtype=complex)
    ys = y[~small]
    out[~small] = (-np.expm1(-1j * ys) / (1j * ys)) ** p
    z = y[small]
    out[small] = (1.0 - 0.5j * z - z * z / 6.0) ** p
    return out


def F_integral(p: int, lam: float, tol: float = 1e-12, y_split: float = 4.0):
    """F(lam) = int_R ((1 - e^{-iy})/(iy))^p e^{i lam y} dy with an error estimate.

    F(-y) is the conjugate of F(y), so F(lam) = 2 int_0^inf Re(...). On [0, y_split]
    adaptive Gauss-Kronrod; beyond it the binomial expansion turns the integrand
    into terms y^{-p} e^{i (lam - k) y}, integrated by the Fourier-weighted QAWF rule.
    """
    core, e1 = integrate.quad(
        lambda y: (_F_kernel(p, np.array([y]))[0] * np.exp(1j * lam * y)).real, 0.0, y_split, epsabs=tol, epsrel=tol, limit=400
    )
    tail, e2 = 0.0, 0.0
    ip = (1j) ** (-p)
    for k in range(p + 1):
        ck = math.comb(p, k) * (-1) ** k * ip
        a = lam - k
        # Re(ck e^{i a y}) / y^p = (Re ck cos(a y) - Im ck sin(a y)) / y^p
        for wt, coef in (("cos", ck.real), ("sin", -ck.imag)):
            if coef == 0.0:
                continue
            if a == 0.0:
                if wt == "sin":
                    continue
                val = y_split ** (1 - p) / (p - 1)
                err = 0.0
            else:
                val, err = integrate.quad(lambda y: y ** (-p), y_split, np.inf, weight=wt, wvar=abs(a), epsabs=tol * 1e-2)
                if wt == "sin" and a < 0:
                    val = -val
            tail += coef * val
            e2 += abs(coef) * err
    return 2.0 * (core + tail), 2.0 * (e1 + e2)


def h_quadrature(p: int, N: float, eps: float, xi: float, tol: float = 1e-10, return_info: bool = False):
    """h_{p,N}(xi) = N^{-2 eps (p-1)} F(N^{2 eps}(N - xi)) by numerical quadrature.

    With y = x N^{-2 eps} the defining integral becomes w^{p-1} F(lam). A
    QuadratureWarning is emitted when the error estimate exceeds tol relative to
    the peak value 2 pi w^{p-1} max B_p.
    """
    _check_p(p)
    w = N ** (-2 * eps)
    lam = (N - xi) / w
    val, err = F_integral(p, lam)
    scale = 2 * math.pi * float(cardinal_bspline(p, p / 2.0))
    ok = err <= tol * scale
    if not ok:
        warnings.warn(f"h quadrature error {err:.2e} above tolerance", QuadratureWarning, stacklevel=2)
    out = w ** (p - 1) * val
    if return_info:
        return out, {"abs_err": w ** (p - 1) * err, "ok": bool(ok), "lam": lam}
    return out


def symmetry_checks(p: int, lams) -> dict:
    """Max deviations |F(l) - F(p - l)| and |F(l) - F(1 - l)| over the sample."""
    lams = np.asarray(lams, dtype=float)
    F = lambda x: 2 * math.pi * cardinal_bspline(p, x)  # noqa: E731
    return {
        "reflect_p": float(np.max(np.abs(F(lams) - F(p - lams)))),
        "reflect_1": float(np.max(np.abs(F(lams) - F(1 - lams)))),
    }


def h_window_slope(p: int, eps: float, N_list, method: str = "closed", n_samples: int = 9, margin: float = 0.01,
                   variant=WindowVariant.INTERIOR) -> dict:
    """Log-log slope of sup_{xi in I_N} |h_{p,N}(xi)| against N."""
    rows = []
    for N in N_list:
        win = IntervalIN.make(N, eps, eps + margin, variant)
        xs = np.linspace(win.lo, win.hi, n_samples)
        if method == "closed":
            vals = h_closed_form(p, N, eps, xs)
        elif method == "quadrature":
            vals = np.array([h_quadrature(p, N, eps, x) for x in xs])
        else:
            raise ValueError(f"unknown method {method!r}")
        rows.append({"N": N, "sup_h": float(np.max(np.abs(vals)))})
    slope = float(np.polyfit(np.log([r["N"] for r in rows]), np.log([r["sup_h"] for r in rows]), 1)[0])
    return {"rows": rows, "slope": slope, "predicted": 2 * eps * (1 - p), "method": method}


# --------------------------------------------------------- second iterate


def two_sided_mesh(T: float, m: int, q: float = 3.0) -> TimeMesh:
    """Nodes clustered like (j/m)^q at both ends of [0, T]."""
    if m % 2:
        raise ValueError("m must be even")
    u = np.arange(m + 1) / m
    half = 2.0 ** (q - 1)
    phi = np.where(u <= 0.5, half * u**q, 1.0 - half * (1.0 - u) ** q)
    t = T * phi
    t[0], t[-1] = 0.0, T
    return TimeMesh(t, q)


def layer_counts(mesh: TimeMesh, N: float, params: FracParams, M_cut: float = 10.0) -> tuple[int, int]:
    """Nodes inside the endpoint layers where t^beta N^alpha < M_cut or (T - t)^beta N^alpha < M_cut."""
    tau = (M_cut / N**params.alpha) ** (1.0 / params.beta)
    t = mesh.nodes
    return int(np.sum(t < tau)), int(np.sum(mesh.T - t < tau))


def linear_flow_nodes(f: SpectralField, params: FracParams, nodes: np.ndarray) -> np.ndarray:
    xa = np.abs(f.grid.xi) ** params.alpha
    table = ray_table(params.beta, 1.0)
    out = np.empty((nodes.size, f.grid.n_points), dtype=complex)
    for j, t in enumerate(nodes):
        out[j] = f.spec if t == 0 else table(t**params.beta * xa) * f.spec
    return out


def second_iterate(fN: SpectralField, T: float, params: FracParams, mesh: TimeMesh | None = None, padding=None) -> SpectralField:
    """u_p(T) = i^{-beta} int_0^T (T - tau)^{beta-1} E_{beta,beta}(...) g_hat(u_1(tau)) dtau.

    g = mu |u_1|^{p-1} u_1 at every node, u_1 the exact linear flow; the
    quadrature is the product-integration row of the Duhamel solver at t = T.
    """
    mesh = mesh or two_sided_mesh(T, 2048)
    if not math.isclose(mesh.T, T, rel_tol=1e-14):
        raise ValueError("mesh does not end at T")
    grid = fN.grid
    if not np.any(fN.spec):
        return SpectralField(grid, spec=np.zeros(grid.n_points, dtype=complex))
    t = mesh.nodes
    U1 = linear_flow_nodes(fN, params, t)
    G = power_nonlinearity_spec(U1, grid, params.p, params.mu, padding)
    W = product_weights(t, params.beta, rows=[mesh.m])[0]
    xa = np.abs(grid.xi) ** params.alpha
    table = ray_table(params.beta, params.beta)
    E = table(((T - t) ** params.beta)[:, None] * xa[None, :])
    acc = np.einsum("l,lk,lk->k", W, E, G)
    return SpectralField(grid, spec=params.phase.i_pow_neg_beta * acc)


def leading_order_prediction(N: float, eps: float, s: float, T: float, params: FracParams, xi) -> np.ndarray:
    """Modulus of the leading term of u_p(T, xi) for the cubic case with the true |u|^2 u profile.

    |u_p| ~ N^{3(eps-s)} |xi|^{sigma-alpha} T w^2 B_3(N^{2 eps}(N + w - xi)) / (beta^4 (2 pi)^2),
    w = N^{-2 eps}; the B-spline is that of f*f*conj(f(-.)), supported on [N - 2w, N + w].
    """
    if params.p != 3:
        raise ValueError("leading-order prediction implemented for p = 3")
    w = N ** (-2 * eps)
    xi = np.asarray(xi, dtype=float)
    B = cardinal_bspline(3, (N + w - xi) / w)
    b = params.beta
    return N ** (3 * (eps - s)) * np.abs(xi) ** (params.sigma - params.alpha) * T * w**2 * B / (b**4 * (2 * math.pi) ** 2)


# --------------------------------------------------------- growth experiment


@dataclass
class GrowthReport:
    rows: list = field(default_factory=list)
    measured_slope: float = float("nan")
    predicted_slope: float = float("nan")
    window: str = "interior"
    config: dict = field(default_factory=dict)

    @property
    def sign_test(self) -> bool:
        """Measured and predicted slopes have the same sign."""
        return bool(np.sign(self.measured_slope) == np.sign(self.predicted_slope))

    def summary(self) -> dict:
        return {
            "measured_slope": self.measured_slope,
            "predicted_slope": self.predicted_slope,
            "sign_test": self.sign_test,
            "window": self.window,
            "config": self.config,
        }

    def write_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["N", "norm", "window", "achieved_fN_norm", "layer_J1", "layer_J3"])
            for r in self.rows:
                w.writerow([r["N"], repr(r["norm"]), r["window"], repr(r["achieved_fN_norm"]), r["layer_J1"], r["layer_J3"]])

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=2) + "\n")


def predicted_slope(cfg: IllConfig) -> float:
    P = cfg.params
    a, sig, p = P.alpha, P.sigma, P.p
    d = cfg.delta_I if cfg.window is WindowVariant.EDGE else cfg.eps
    if cfg.b == 0.0:
        return p * (cfg.eps - cfg.s) + 2 * cfg.eps * (1 - p) + cfg.s + sig - a - d
    return -a * cfg.b + p * (cfg.eps - cfg.s) + 2 * cfg.eps * (1 - p) + cfg.s + sig - a - d


def scaled_threshold(params: FracParams, b: float, eps: float) -> float:
    """Largest s with -alpha b + (1-p) eps + sigma - alpha > (p-1) s."""
    p = params.p
    return (-params.alpha * b + (1 - p) * eps + params.sigma - params.alpha) / (p - 1)


def optimal_scaling(params: FracParams, margin: float = 0.02) -> tuple[float, float]:
    """b = 1/beta - margin and eps = (sigma - 1 - alpha b)/2 + margin."""
    b = 1.0 / params.beta - margin
    return b, 0.5 * (params.sigma - 1.0 - params.alpha * b) + margin


def window_norm(up: SpectralField, s: float, window: IntervalIN) -> float:
    """(int_window |xi|^{2s} |u_hat|^2 dxi)^{1/2} by the mode sum."""
    return hs_norm_continuum(up, s, window.contains(up.grid.xi))


def growth_point(cfg: IllConfig, N: float) -> dict:
    P = cfg.params
    T_eff = cfg.T * N ** (-P.alpha * cfg.b) if cfg.b else cfg.T
    grid = band_grid(N, cfg.eps, cfg.band_modes, cfg.n_points)
    fN, achieved = make_f_N(N, cfg.eps, cfg.s, grid)
    mesh = two_sided_mesh(T_eff, cfg.m_nodes, cfg.grading)
    up = second_iterate(fN, T_eff, P, mesh)
    win = IntervalIN.make(N, cfg.eps, cfg.delta_I, cfg.window)
    j1, j3 = layer_counts(mesh, N, P, cfg.M_cut)
    return {
        "N": N,
        "norm": window_norm(up, cfg.s, win),
        "window": cfg.window.value,
        "achieved_fN_norm": achieved,
        "layer_J1": j1,
        "layer_J3": j3,
        "T_eff": T_eff,
    }


def growth_experiment(cfg: IllConfig, jobs: int = 1) -> GrowthReport:
    """Regress log ||<.>^s u_p_hat(T)||_{L^2(window)} against log N."""
    Ns = list(cfg.N_list)
    if len(Ns) < 3:
        raise RegressionError("need at least 3 values of N")
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(growth_point, [cfg] * len(Ns), Ns))
    else:
        rows = [growth_point(cfg, N) for N in Ns]
    valid = [r for r in rows if r["norm"] > 0 and np.isfinite(r["norm"])]
    if len(valid) < 3:
        raise RegressionError("fewer than 3 valid N")
    x = np.log([r["N"] for r in valid])
    y = np.log([r["norm"] for r in valid])
    slope = float(np.polyfit(x, y, 1)[0])
    return GrowthReport(rows, slope, predicted_slope(cfg), cfg.window.value, cfg.as_dict())
