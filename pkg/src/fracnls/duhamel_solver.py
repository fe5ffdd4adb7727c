"""Picard iteration for the fractional Duhamel formula on a graded time mesh.

u_hat(t) = E_beta(i^{-beta} t^beta |xi|^alpha) f_hat
         + i^{-beta} int_0^t (t-tau)^{beta-1} E_{beta,beta}(i^{-beta} (t-tau)^beta |xi|^alpha) g_hat(tau) dtau

The weakly singular factor (t-tau)^{beta-1} is integrated exactly against the
piecewise-linear interpolant of everything else (product integration).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .mittag_leffler import PhaseConvention, ray_table
from .spectral_field import FracParams, Grid, SpectralField, power_nonlinearity_spec

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_CLOSED_FORM_MIN_RATIO = 0.25


class NonConvergence(RuntimeError):
    """Picard iteration failed; ``history`` holds per-iteration residual and Lambda_T."""

    def __init__(self, message: str, history: list[dict]):
        super().__init__(message)
        self.history = history


class IncommensurateScaling(ValueError):
    pass


@dataclass
class TimeMesh:
    nodes: np.ndarray
    q: float = 1.0

    def __post_init__(self):
        t = np.asarray(self.nodes, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("mesh needs at least two nodes")
        if t[0] != 0.0:
            raise ValueError("mesh must start at t = 0")
        if np.any(np.diff(t) <= 0):
            raise ValueError("mesh nodes must be strictly increasing")
        self.nodes = t

    @classmethod
    def graded(cls, T: float, m: int, q: float = 2.0) -> "TimeMesh":
        if not T > 0:
            raise ValueError("T must be positive")
        if m < 1 or q < 1:
            raise ValueError("need m >= 1 and q >= 1")
        t = T * (np.arange(m + 1) / m) ** q
        t[-1] = T
        return cls(t, q)

    @property
    def T(self) -> float:
        return float(self.nodes[-1])

    @property
    def m(self) -> int:
        return self.nodes.size - 1

    def refined(self) -> "TimeMesh":
        """Twice as many intervals; the old nodes are every second new node."""
        return TimeMesh.graded(self.T, 2 * self.m, self.q)

    def scaled(self, c: float) -> "TimeMesh":
        return TimeMesh(self.nodes * c, self.q)


def _interval_weights(a: np.ndarray, b: np.ndarray, nu: float):
    """Moments A = int_a^b u^{nu-1} (u - a)/h du and B = int_a^b u^{nu-1} (b - u)/h du.

    Closed form unless the interval is short relative to its distance from the
    singularity, where the difference of powers cancels; then Gauss-Legendre.
    """
    h = b - a
    A = np.empty_like(h)
    B = np.empty_like(h)
    closed = (a == 0) | (h > _CLOSED_FORM_MIN_RATIO * a)
    if closed.any():
        ac, bc, hc = a[closed], b[closed], h[closed]
        I0 = (bc**nu - ac**nu) / nu
        I1 = (bc ** (nu + 1) - ac ** (nu + 1)) / (nu + 1)
        A[closed] = (I1 - ac * I0) / hc
        B[closed] = (bc * I0 - I1) / hc
    gl = ~closed
    if gl.any():
        ag, bg, hg = a[gl, None], b[gl, None], h[gl, None]
        u = ag + 0.5 * hg * (1.0 + _GL_X)
        f = u ** (nu - 1.0) * _GL_W
        A[gl] = 0.5 * np.sum(f * (u - ag), axis=1)
        B[gl] = 0.5 * np.sum(f * (bg - u), axis=1)
    return A, B


def product_weights(nodes, nu: float, rows=None) -> np.ndarray:
    """W[j, l] with sum_l W[j, l] F(t_l) ~ int_0^{t_j} (t_j - tau)^{nu-1} F(tau) dtau.

    Exact for piecewise-linear F. ``rows`` restricts to selected j.
    """
    t = np.asarray(nodes, dtype=float)
    m = t.size - 1
    rows = np.arange(m + 1) if rows is None else np.atleast_1d(rows)
    W = np.zeros((rows.size, m + 1))
    for i, j in enumerate(rows):
        if j == 0:
            continue
        b = t[j] - t[:j]
        a = t[j] - t[1 : j + 1]
        A, B = _interval_weights(a, b, nu)
        # hat of t_l is (u - a)/h on interval l, hat of t_{l+1} is (b - u)/h
        W[i, :j] += A
        W[i, 1 : j + 1] += B
    return W


def _abs_index(grid: Grid):
    return np.unique(np.abs(grid.xi), return_inverse=True)


class KernelCache:
    """Per-node blocks W[j, l] * E_{beta,beta}(i^{-beta} (t_j - t_l)^beta |xi|^alpha) on distinct |xi|."""

    def __init__(self, params: FracParams, mesh: TimeMesh, grid: Grid):
        self.params = params
        self.mesh = mesh
        self.grid = grid
        b, a = params.beta, params.alpha
        self.absxi, self.inv = _abs_index(grid)
        t = mesh.nodes
        W = product_weights(t, b)
        table = ray_table(b, b)
        xa = self.absxi**a
        self.blocks = []
        for j in range(mesh.m + 1):
            r = ((t[j] - t[: j + 1]) ** b)[:, None] * xa[None, :]
            self.blocks.append(W[j, : j + 1, None] * table(r))

    def weights(self, j: int) -> np.ndarray:
        """Full-width weights w_{j,l}(xi_k), shape (j+1, n)."""
        return self.blocks[j][:, self.inv]

    def apply(self, G: np.ndarray) -> np.ndarray:
        out = np.zeros_like(G)
        for j in range(1, self.mesh.m + 1):
            out[j] = np.einsum("lk,lk->k", self.blocks[j][:, self.inv], G[: j + 1])
        return out


def kernel_weights(params: FracParams, mesh: TimeMesh, xi: float) -> np.ndarray:
    """Lower-triangular (m+1, m+1) complex weights for a single frequency xi."""
    b, a = params.beta, params.alpha
    t = mesh.nodes
    W = product_weights(t, b)
    dt = np.maximum(t[:, None] - t[None, :], 0.0)
    K = ray_table(b, b)(dt**b * abs(xi) ** a)
    return np.tril(W * K)


@dataclass
class SolverConfig:
    mesh: TimeMesh
    tol_fixed_point: float = 1e-10
    max_iter: int = 60
    s: float = 0.25
    delta: float = 0.74
    padding: float | None = None
    blowup_factor: float = 1e6

    def validate(self, params: FracParams) -> None:
        if self.tol_fixed_point <= 0 or self.max_iter < 1:
            raise ValueError("need tol_fixed_point > 0 and max_iter >= 1")
        if params.smoothing_ok:
            lo = self.s + params.sigma - params.alpha
            hi = 0.5 * params.sigma - 0.5 / (params.p - 1)
            if not lo <= self.delta < hi:
                raise ValueError(f"delta={self.delta} outside [{lo:.6g}, {hi:.6g})")


@dataclass
class Trajectory:
    mesh: TimeMesh
    grid: Grid
    specs: np.ndarray  # (m+1, n) spectral coefficients per node
    iterations_used: int = 0
    residual: float = 0.0
    history: list = field(default_factory=list)

    def __post_init__(self):
        if self.specs.shape != (self.mesh.m + 1, self.grid.n_points):
            raise ValueError("specs shape does not match mesh and grid")

    def field(self, j: int) -> SpectralField:
        return SpectralField(self.grid, spec=self.specs[j])

    @property
    def fields(self) -> list[SpectralField]:
        return [self.field(j) for j in range(self.mesh.m + 1)]

    def phys(self) -> np.ndarray:
        g = self.grid
        return np.fft.ifft(self.specs * g._shift(), axis=1) / g.dx

    def hs_norms(self, s: float) -> np.ndarray:
        w = (1.0 + np.abs(self.grid.xi)) ** (2.0 * s)
        return np.sqrt(np.sum(w * np.abs(self.specs) ** 2, axis=1) / self.grid.length)


def _hs_rows(spec: np.ndarray, grid: Grid, s: float) -> np.ndarray:
    w = (1.0 + np.abs(grid.xi)) ** (2.0 * s)
    return np.sqrt(np.sum(w * np.abs(spec) ** 2, axis=-1) / grid.length)


def linear_trajectory(f: SpectralField, params: FracParams, mesh: TimeMesh) -> np.ndarray:
    uniq, inv = _abs_index(f.grid)
    table = ray_table(params.beta, 1.0)
    xa = uniq**params.alpha
    out = np.empty((mesh.m + 1, f.grid.n_points), dtype=complex)
    out[0] = f.spec
    for j in range(1, mesh.m + 1):
        out[j] = table(mesh.nodes[j] ** params.beta * xa)[inv] * f.spec
    return out


def _phi(lin: np.ndarray, V: np.ndarray, cache: KernelCache, params: FracParams, padding) -> np.ndarray:
    G = power_nonlinearity_spec(V, cache.grid, params.p, params.mu, padding)
    return lin + params.phase.i_pow_neg_beta * cache.apply(G)


def apply_phi(v: Trajectory, f: SpectralField, params: FracParams, config: SolverConfig, cache: KernelCache | None = None) -> Trajectory:
    if v.mesh.m != config.mesh.m or not np.array_equal(v.mesh.nodes, config.mesh.nodes):
        raise ValueError("trajectory is not defined on config.mesh")
    cache = cache or KernelCache(params, config.mesh, f.grid)
    lin = linear_trajectory(f, params, config.mesh)
    return Trajectory(config.mesh, f.grid, _phi(lin, v.specs, cache, params, config.padding))


def picard_solve(f: SpectralField, params: FracParams, config: SolverConfig, cache: KernelCache | None = None) -> Trajectory:
    """Iterate u <- Phi(u) from the linear flow until sup_j ||u - Phi(u)||_{H^s} <= tol."""
    from .norm_lab import eta_norms

    config.validate(params)
    mesh, grid = config.mesh, f.grid
    lin = linear_trajectory(f, params, mesh)
    U = lin
    history: list[dict] = []
    if not np.any(f.spec):
        return Trajectory(mesh, grid, np.zeros_like(lin), 1, 0.0, [{"iteration": 1, "residual": 0.0, "lambda_T": 0.0}])
    cache = cache or KernelCache(params, mesh, grid)
    scale0 = float(_hs_rows(lin, grid, config.s).max())
    for it in range(1, config.max_iter + 1):
        new = _phi(lin, U, cache, params, config.padding)
        res = float(_hs_rows(new - U, grid, config.s).max())
        U = new
        traj = Trajectory(mesh, grid, U)
        lam = eta_norms(traj, config.s, config.delta, params.p).lambda_T if np.isfinite(res) else math.inf
        history.append({"iteration": it, "residual": res, "lambda_T": lam})
        if not np.isfinite(res) or res > config.blowup_factor * max(scale0, 1.0):
            raise NonConvergence(f"Picard iteration diverged at iteration {it}", history)
        if res <= config.tol_fixed_point:
            traj.iterations_used = it
            traj.residual = res
            traj.history = history
            return traj
    raise NonConvergence(f"no convergence in {config.max_iter} iterations (residual {res:.3e})", history)


def caputo_l1(specs: np.ndarray, mesh: TimeMesh, beta: float) -> np.ndarray:
    """L1 discrete Caputo derivative of order beta at every node (row 0 is zero)."""
    t = mesh.nodes
    m = mesh.m
    h = np.diff(t)
    dU = np.diff(specs, axis=0) / h[:, None]
    out = np.zeros_like(specs)
    c0 = 1.0 / math.gamma(2.0 - beta)
    for j in range(1, m + 1):
        w = (t[j] - t[:j]) ** (1.0 - beta) - (t[j] - t[1 : j + 1]) ** (1.0 - beta)
        out[j] = c0 * (w @ dU[:j])
    return out


def pde_residual(
    u: Trajectory,
    params: FracParams,
    s: float = 0.0,
    g: np.ndarray | None = None,
    padding=None,
    skip_fraction: float = 0.1,
) -> float:
    """sup over nodes t_j >= skip_fraction * T of the H^{s-alpha} norm of i^beta D^beta u - |xi|^alpha u - g.

    The L1 truncation error is O(1) on the first few nodes because u - f ~ t^beta
    there, so an initial layer is left out of the sup. ``g`` overrides the
    nonlinearity with given spectral rows (shape of u.specs).
    """
    grid = u.grid
    if g is None:
        g = power_nonlinearity_spec(u.specs, grid, params.p, params.mu, padding)
    D = caputo_l1(u.specs, u.mesh, params.beta)
    defect = params.phase.i_pow_beta * D - np.abs(grid.xi) ** params.alpha * u.specs - g
    keep = (u.mesh.nodes >= skip_fraction * u.mesh.T) & (np.arange(u.mesh.m + 1) > 0)
    return float(_hs_rows(defect[keep], grid, s - params.alpha).max())


def riemann_liouville_J(nu: float, series, mesh: TimeMesh) -> np.ndarray:
    """(J_nu g)(t_j) = 1/Gamma(nu) int_0^{t_j} (t_j - tau)^{nu-1} g(tau) dtau, product-integrated."""
    if not nu > 0:
        raise ValueError("nu must be positive")
    g = np.asarray(series)
    if g.shape[0] != mesh.m + 1:
        raise ValueError("series length does not match mesh")
    W = product_weights(mesh.nodes, nu) / math.gamma(nu)
    return np.tensordot(W, g, axes=(1, 0))


def scaling_transport(u: Trajectory, lam: float, params: FracParams, grid: Grid | None = None) -> Trajectory:
    """u_lam(t, x) = lam^{alpha beta/(p-1)} u(lam^alpha t, lam^beta x).

    The rescaled torus has length L / lam^beta and the same mode indices, so
    u_lam_hat(xi_k') = lam^{alpha beta/(p-1) - beta} u_hat(xi_k) mode by mode.
    A target ``grid`` must coincide with that rescaled grid.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    a, b = params.alpha, params.beta
    new_grid = Grid(u.grid.n_points, u.grid.length / lam**b, u.grid.center * lam**b)
    if grid is not None:
        ok = grid.n_points == new_grid.n_points and math.isclose(grid.length, new_grid.length, rel_tol=1e-12) and math.isclose(
            grid.center, new_grid.center, rel_tol=1e-12, abs_tol=1e-12
        )
        if not ok:
            raise IncommensurateScaling(f"lambda={lam} does not map the grid onto the requested grid")
        new_grid = grid
    factor = lam ** (a * b / (params.p - 1) - b)
    mesh = u.mesh.scaled(lam ** (-a))
    return Trajectory(mesh, new_grid, u.specs * factor, u.iterations_used, u.residual, list(u.history))


def scale_data(f: SpectralField, lam: float, params: FracParams) -> SpectralField:
    """Initial datum f_lam(x) = lam^{alpha beta/(p-1)} f(lam^beta x) on the rescaled grid."""
    a, b = params.alpha, params.beta
    g = Grid(f.grid.n_points, f.grid.length / lam**b, f.grid.center * lam**b)
    return SpectralField(g, spec=f.spec * lam ** (a * b / (params.p - 1) - b))


# ---------------------------------------------------------- serialisation


def write_trajectory(path, u: Trajectory, params: FracParams | None = None) -> None:
    g = u.grid
    head = {
        "n": g.n_points,
        "L": g.length,
        "center": g.center,
        "q": u.mesh.q,
        "nodes": [float(x) for x in u.mesh.nodes],
        "iterations_used": u.iterations_used,
        "residual": u.residual,
        "params": params.as_dict() if params else None,
    }
    order = np.argsort(g.k)
    lines = ["# trajectory " + json.dumps(head)]
    for j in range(u.mesh.m + 1):
        lines.append(f"## node {j} t={float(u.mesh.nodes[j])!r}")
        spec = u.specs[j]
        lines.extend(f"{g.k[i]:d} {float(spec[i].real)!r} {float(spec[i].imag)!r}" for i in order)
    Path(path).write_text("\n".join(lines) + "\n")


def read_trajectory(path) -> tuple[Trajectory, FracParams | None]:
    text = Path(path).read_text().splitlines()
    head = json.loads(text[0].split(" ", 2)[2])
    g = Grid(int(head["n"]), float(head["L"]), float(head["center"]))
    mesh = TimeMesh(np.array(head["nodes"]), head["q"])
    specs = np.empty((mesh.m + 1, g.n_points), dtype=complex)
    j = -1
    for ln in text[1:]:
        if ln.startswith("## node"):
            j += 1
            continue
        k, re, im = ln.split()
        k = int(k)
        specs[j, k if k >= 0 else k + g.n_points] = complex(float(re), float(im))
    params = FracParams(**head["params"]) if head["params"] else None
    return Trajectory(mesh, g, specs, head["iterations_used"], head["residual"]), params
