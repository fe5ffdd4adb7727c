"""Mixed space-time norms and empirical LHS/RHS ratio tests for the linear estimates."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class NormReport:
    eta1: float  # || <D>^delta v ||_{L^inf_x L^2_T}
    eta2: float  # || <D>^s v ||_{L^inf_T L^2_x}
    eta3: float  # || v ||_{L^{2(p-1)}_x L^inf_T}
    hs_at_T: float

    @property
    def lambda_T(self) -> float:
        return max(self.eta1, self.eta2, self.eta3)

    def as_dict(self) -> dict:
        return {"eta1": self.eta1, "eta2": self.eta2, "eta3": self.eta3, "lambda_T": self.lambda_T, "hs_at_T": self.hs_at_T}


def _to_phys(specs: np.ndarray, grid) -> np.ndarray:
    return np.fft.ifft(specs * grid._shift(), axis=-1) / grid.dx


def eta_norms(u, s: float, delta: float, p: int) -> NormReport:
    """Discrete mixed norms of a trajectory: trapezoid in t, max or Riemann sum over grid x."""
    grid = u.grid
    t = u.mesh.nodes
    jap = 1.0 + np.abs(grid.xi)
    specs = u.specs
    if not np.any(specs):
        return NormReport(0.0, 0.0, 0.0, 0.0)
    wd = _to_phys(specs * jap**delta, grid)
    l2t = np.sqrt(np.trapezoid(np.abs(wd) ** 2, t, axis=0))
    eta1 = float(l2t.max())
    hs = np.sqrt(np.sum(jap ** (2 * s) * np.abs(specs) ** 2, axis=1) / grid.length)
    eta2 = float(hs.max())
    q = 2 * (p - 1)
    sup_t = np.abs(_to_phys(specs, grid)).max(axis=0)
    eta3 = float((grid.dx * np.sum(sup_t**q)) ** (1.0 / q))
    return NormReport(eta1, eta2, eta3, float(hs[-1]))


# ------------------------------------------------------------ ratio tests


@dataclass(frozen=True)
class TrialSpec:
    """Random band-limited data on dyadic shells [2^k, 2^{k+1}).

    Each trial draws ``n_modes`` distinct torus frequencies in the shell with
    complex Gaussian amplitudes; ``coherent`` adds one phase-aligned packet per
    scale as an extremal candidate.
    """

    scales: tuple = (3, 4, 5, 6, 7, 8, 9)
    n_trials: int = 100
    n_modes: int = 64
    seed: int = 20240611
    coherent: bool = True
    x_points: int = 4096

    def rng(self, trial: int, k: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, trial, k])


@dataclass
class RatioSample:
    trial_id: int
    scale: float
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs


@dataclass
class RatioStat:
    estimate_id: str
    samples: list = field(default_factory=list)
    skipped: int = 0
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def max_ratio(self) -> float:
        return max((s.ratio for s in self.samples), default=float("nan"))

    def envelope(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct scales and the largest ratio observed at each."""
        sc = np.array(sorted({s.scale for s in self.samples}))
        env = np.array([max(s.ratio for s in self.samples if s.scale == c) for c in sc])
        return sc, env

    @property
    def trend_slope(self) -> float:
        """Least-squares slope of log(max ratio per scale) against log(scale)."""
        sc, env = self.envelope()
        if sc.size < 2:
            return float("nan")
        return float(np.polyfit(np.log(sc), np.log(env), 1)[0])

    def summary(self) -> dict:
        return {
            "estimate_id": self.estimate_id,
            "max_ratio": self.max_ratio,
            "trend_slope": self.trend_slope,
            "n_samples": len(self.samples),
            "skipped": self.skipped,
            "seed": self.seed,
            **self.meta,
        }

    def write_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["trial_id", "scale", "lhs", "rhs", "ratio"])
            for s in self.samples:
                w.writerow([s.trial_id, repr(float(s.scale)), repr(s.lhs), repr(s.rhs), repr(s.ratio)])

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=2, default=float) + "\n")


def _shell_modes(spec: TrialSpec, trial: int, k: int, L: float):
    """Torus mode indices j (xi = 2 pi j / L) in [2^k, 2^{k+1}) and amplitudes."""
    N = 2.0**k
    j0 = int(math.ceil(N * L / (2 * math.pi)))
    j1 = int(math.ceil(2 * N * L / (2 * math.pi)))
    avail = np.arange(j0, j1)
    n = min(spec.n_modes, avail.size)
    if trial < 0:
        j = avail[(avail.size - n) // 2 : (avail.size - n) // 2 + n]
        return j, np.ones(n, dtype=complex)
    rng = spec.rng(trial, k)
    j = np.sort(rng.choice(avail, size=n, replace=False))
    a = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2.0)
    return j, a


def _trials(spec: TrialSpec):
    ids = list(range(spec.n_trials))
    return ([-1] if spec.coherent else []) + ids


def _sup_quadratic_form(j: np.ndarray, c: np.ndarray, M: np.ndarray, nx: int) -> float:
    """sup over x_m = m L / nx of sum_{k,l} c_k conj(c_l) M_kl exp(2 pi i (j_k - j_l) m / nx)."""
    roots = np.exp(2j * np.pi * np.arange(nx) / nx)
    V = roots[np.outer(np.arange(nx), j) % nx] * c[None, :]
    vals = np.sum((V @ M) * np.conj(V), axis=1).real
    return float(math.sqrt(max(vals.max(), 0.0)))


def _time_kernel(omega: np.ndarray, T: float) -> np.ndarray:
    """int_0^T exp(-i t (w_k - w_l)) dt."""
    dw = omega[:, None] - omega[None, :]
    out = np.full(dw.shape, T, dtype=complex)
    nz = dw != 0
    out[nz] = (1.0 - np.exp(-1j * T * dw[nz])) / (1j * dw[nz])
    return out


def _log_time_grid(T: float, n: int = 1200, decades: float = 10.0) -> np.ndarray:
    return np.concatenate([[0.0], T * np.logspace(-decades, 0.0, n)])


def smoothing_ratio(params, gamma_prime: float, T: float, trial_spec: TrialSpec | None = None, kind: str = "Osc", chi=None) -> RatioStat:
    """|| <D>^{gamma'} A_t f ||_{L^inf_x L^2_T} / (B(T) ||f||_2) over random shell data.

    kind "Osc" is the flow exp(-i t |D|^sigma) with B = 1 + T^{1/2}; its L^2_T
    norm is integrated exactly. "S", "T", "U" use the operator pieces of the
    linear propagator with B = T^{(gamma - gamma')/sigma} + T^{1/2} and a
    logarithmic time grid. The torus length at scale N is at least twice the
    distance travelled at the largest group velocity during [0, T], so the
    periodic problem does not see its own wrap-around.
    """
    from .linear_propagator import CutoffChi, OperatorKind, operator_symbol

    spec = trial_spec or TrialSpec()
    kind = OperatorKind(kind)
    if kind not in (OperatorKind.OSC, OperatorKind.S, OperatorKind.T, OperatorKind.U):
        raise ValueError("smoothing_ratio supports Osc, S, T, U")
    sig = params.sigma
    gam = params.gamma
    if kind is OperatorKind.OSC:
        B = 1.0 + math.sqrt(T)
    else:
        B = T ** ((gam - gamma_prime) / sig) + math.sqrt(T)
    chi = chi or CutoffChi()
    tgrid = _log_time_grid(T)
    stat = RatioStat(f"smoothing:{kind.value}", seed=spec.seed)
    stat.meta.update({"gamma_prime": gamma_prime, "gamma": gam, "T": T, "kind": kind.value})
    delta = 0.0
    for k in spec.scales:
        N = 2.0**k
        vmax = sig * (2 * N) ** (sig - 1.0)
        L = max(2.0 * vmax * T, 2 * math.pi * 2 * spec.n_modes / N)
        for trial in _trials(spec):
            j, a = _shell_modes(spec, trial, k, L)
            xi = 2 * math.pi * j / L
            c = (1.0 + xi) ** gamma_prime * a
            if kind is OperatorKind.OSC:
                M = _time_kernel(xi**sig, T)
            else:
                m = np.array([operator_symbol(kind, t, xi, params, chi) if t > 0 else _at_zero(kind, xi, params, chi) for t in tgrid])
                w = np.diff(tgrid)
                # trapezoid Gram matrix int m_k conj(m_l) dt
                prod = m[:, :, None] * np.conj(m)[:, None, :]
                M = np.tensordot(0.5 * w, prod[1:] + prod[:-1], axes=(0, 0))
            lhs = _sup_quadratic_form(j, c, M, spec.x_points)
            if trial == (-1 if spec.coherent else 0):
                fine = _sup_quadratic_form(j, c, M, 2 * spec.x_points)
                delta = max(delta, abs(fine - lhs) / fine)
            rhs = B * math.sqrt(L * np.sum(np.abs(a) ** 2))
            stat.samples.append(RatioSample(trial, N, lhs, rhs))
    stat.meta.update({"x_points": spec.x_points, "refinement_delta": delta})
    return stat


def _at_zero(kind, xi, params, chi):
    from .linear_propagator import OperatorKind, operator_symbol

    if kind is OperatorKind.T:
        return np.zeros(xi.shape, dtype=complex)
    return operator_symbol(kind, 0.0, xi, params, chi)


def maximal_ratio(
    params,
    p_exponent: float,
    trial_spec: TrialSpec | None = None,
    s: float | None = None,
    T: float | None = None,
    n_box: int | None = None,
) -> RatioStat:
    """|| exp(-i t |D|^sigma) f ||_{L^p_x L^inf_t([0,T])} / || |D|^s f ||_2 over random shell data.

    By default each scale N gets a box of length 2 pi n_box / N and the
    horizon T_N = L / (2 sigma (2N)^{sigma-1}), the time for the fastest
    packet to cross half the box. Box and horizon then scale like the
    symmetry x -> x/N, t -> t/N^sigma, so the trend slope isolates the
    exponent balance s = 1/2 - 1/p. T = 0 freezes time (Sobolev quotient).
    """
    if p_exponent < 2:
        raise ValueError("p_exponent must be >= 2")
    spec = trial_spec or TrialSpec(scales=(3, 4, 5, 6, 7), n_trials=20)
    s = 0.5 - 1.0 / p_exponent if s is None else float(s)
    sig = params.sigma
    n_box = n_box or 2 * spec.n_modes
    stat = RatioStat("maximal", seed=spec.seed)
    stat.meta.update({"p": p_exponent, "s": s, "n_box": n_box})
    for k in spec.scales:
        N = 2.0**k
        L = 2 * math.pi * n_box / N
        Tk = L / (2 * sig * (2 * N) ** (sig - 1.0)) if T is None else float(T)
        nx = 1 << int(math.ceil(math.log2(8 * n_box)))
        x = L * np.arange(nx) / nx
        dom = (2 * N) ** sig
        nt = 1 if Tk == 0 else max(64, int(math.ceil(16 * Tk * dom / (2 * math.pi))))
        t = np.linspace(0.0, Tk, nt)
        for trial in _trials(spec):
            j, a = _shell_modes(spec, trial, k, L)
            xi = 2 * math.pi * j / L
            ex = np.exp(1j * xi[:, None] * x[None, :]) * a[:, None]
            sup = np.zeros(nx)
            for c0 in range(0, nt, 512):
                ph = np.exp(-1j * t[c0 : c0 + 512, None] * xi[None, :] ** sig)
                sup = np.maximum(sup, np.abs(ph @ ex).max(axis=0))
            lhs = float((L / nx * np.sum(sup**p_exponent)) ** (1.0 / p_exponent))
            rhs = math.sqrt(L * np.sum(xi ** (2 * s) * np.abs(a) ** 2))
            stat.samples.append(RatioSample(trial, N, lhs, rhs))
    return stat


def leibniz_bound_ratio(v, s: float, p: int, padding: float | None = None) -> RatioStat:
    """|| <D>^s(|v|^{p-1} v) ||_{L^2_{T,x}} / (|| <D>^s v ||_{L^inf_x L^2_T} || v ||^{p-1}_{L^{2(p-1)}_x L^inf_T}).

    ``v`` is a trajectory or a list of them; identically zero inputs are skipped.
    """
    from .spectral_field import power_nonlinearity_spec

    if p % 2 != 1:
        raise ValueError("p must be odd")
    trajs = v if isinstance(v, (list, tuple)) else [v]
    stat = RatioStat("leibniz")
    stat.meta.update({"s": s, "p": p})
    for i, u in enumerate(trajs):
        if not np.any(u.specs):
            stat.skipped += 1
            continue
        grid = u.grid
        G = power_nonlinearity_spec(u.specs, grid, p, 1.0, padding)
        jap = (1.0 + np.abs(grid.xi)) ** (2 * s)
        per_t = np.sum(jap * np.abs(G) ** 2, axis=1) / grid.length
        lhs = float(math.sqrt(np.trapezoid(per_t, u.mesh.nodes)))
        rep = eta_norms(u, s, s, p)
        rhs = rep.eta1 * rep.eta3 ** (p - 1)
        stat.samples.append(RatioSample(i, float(grid.n_points), lhs, rhs))
    return stat
