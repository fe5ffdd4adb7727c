"""Linear flow u_hat(t) = E_beta(i^{-beta} t^beta |xi|^alpha) f_hat and its operator pieces."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .mittag_leffler import kernel_array, linear_multiplier, ray_table
from .spectral_field import FracParams, SpectralField, sobolev_norm


@dataclass(frozen=True)
class CutoffChi:
    """Smooth cutoff in tau = t |xi|^sigma: 1 for tau <= M, 0 for tau >= 2M.

    The transition is the exp(-1/x) partition of unity in y = log2(tau / M).
    """

    M: float = 10.0

    def __post_init__(self):
        if not self.M > 0:
            raise ValueError("M must be positive")

    def __call__(self, t: float, absxi, sigma: float) -> np.ndarray:
        tau = t * np.abs(np.asarray(absxi, dtype=float)) ** sigma
        with np.errstate(divide="ignore"):
            y = np.log2(tau / self.M)
        return _smooth_step_down(y)


def _psi(x):
    out = np.zeros_like(x, dtype=float)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def _smooth_step_down(y):
    y = np.asarray(y, dtype=float)
    a = _psi(1.0 - y)
    b = _psi(y)
    out = np.ones_like(y)
    mid = (y > 0) & (y < 1)
    out[mid] = a[mid] / (a[mid] + b[mid])
    out[y >= 1] = 0.0
    return out


class OperatorKind(str, enum.Enum):
    OSC = "Osc"
    S = "S"
    T = "T"
    U = "U"
    OSC_NL = "OscNL"
    S_TILDE = "STilde"
    T_TILDE = "TTilde"
    U_TILDE = "UTilde"
    FULL = "Full"
    FULL_KERNEL = "FullKernel"


_NEEDS_POSITIVE_T = {OperatorKind.T, OperatorKind.T_TILDE, OperatorKind.U_TILDE, OperatorKind.FULL_KERNEL}


def operator_symbol(kind: OperatorKind, t: float, absxi, params: FracParams, chi: CutoffChi | None = None) -> np.ndarray:
    kind = OperatorKind(kind)
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0 and kind in _NEEDS_POSITIVE_T:
        raise ValueError(f"operator {kind.value} needs t > 0")
    chi = chi or CutoffChi()
    a, b, s = params.alpha, params.beta, params.sigma
    ax = np.abs(np.asarray(absxi, dtype=float))
    osc = np.exp(-1j * t * ax**s)
    if kind is OperatorKind.OSC:
        return osc
    if kind is OperatorKind.FULL:
        return linear_multiplier(b, a, t, ax)
    if kind is OperatorKind.FULL_KERNEL:
        return kernel_array(b, a, t, ax)
    c = chi(t, ax, s)
    nz = ax > 0
    if kind is OperatorKind.S:
        return osc * c
    if kind is OperatorKind.U:
        return linear_multiplier(b, a, t, ax) * c
    if kind is OperatorKind.T:
        out = np.zeros(ax.shape, dtype=complex)
        out[nz] = t ** (-b) * ax[nz] ** (-a) * (1.0 - c[nz])
        return out
    if kind is OperatorKind.OSC_NL:
        return np.where(nz, ax ** (s - a), 0.0) * osc
    if kind is OperatorKind.S_TILDE:
        return np.where(nz, ax ** (s - a), 0.0) * osc * c
    if kind is OperatorKind.T_TILDE:
        out = np.zeros(ax.shape, dtype=complex)
        out[nz] = t ** (-1.0 - b) * ax[nz] ** (-2.0 * a) * (1.0 - c[nz])
        return out
    if kind is OperatorKind.U_TILDE:
        return kernel_array(b, a, t, ax) * c
    raise ValueError(kind)


def apply_operator(kind, f: SpectralField, t: float, params: FracParams, chi: CutoffChi | None = None) -> SpectralField:
    m = operator_symbol(kind, t, f.grid.xi, params, chi)
    return SpectralField(f.grid, spec=f.spec * m)


def evolve_linear(f: SpectralField, t: float, params: FracParams, return_error: bool = False):
    """u_hat(t, xi) = E_beta(i^{-beta} t^beta |xi|^alpha) f_hat(xi); t = 0 returns f exactly."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        out = SpectralField(f.grid, spec=f.spec.copy())
        return (out, 0.0) if return_error else out
    m = linear_multiplier(params.beta, params.alpha, t, np.abs(f.grid.xi))
    out = SpectralField(f.grid, spec=f.spec * m)
    if return_error:
        err = ray_table(params.beta, 1.0).max_err
        return out, float(err * math.sqrt(np.sum(np.abs(f.spec) ** 2) / f.grid.length))
    return out


@dataclass
class RemainderReport:
    z: np.ndarray  # t^beta |xi|^alpha on the 1 - chi support
    ratio: np.ndarray  # |R_hat| / |f_hat|
    scaled: np.ndarray  # ratio * z
    leading_coeff: float

    @property
    def sup(self) -> float:
        return float(self.ratio.max()) if self.ratio.size else 0.0


def remainder_decomposition(
    f: SpectralField,
    t: float,
    params: FracParams,
    chi: CutoffChi | None = None,
    leading_coeff: float | None = None,
):
    """R = Full - U - c*Osc + c*S applied to f, with c the oscillatory weight.

    c = 1 is the literal splitting; the asymptotics of E_beta on the ray give
    leading term (1/beta) exp(-i t |xi|^sigma), so the default c = 1/beta is the
    weight for which R decays like 1/(t^beta |xi|^alpha).
    """
    if not t > 0:
        raise ValueError("t must be positive")
    chi = chi or CutoffChi()
    c = 1.0 / params.beta if leading_coeff is None else float(leading_coeff)
    ax = np.abs(f.grid.xi)
    full = operator_symbol(OperatorKind.FULL, t, ax, params, chi)
    u = operator_symbol(OperatorKind.U, t, ax, params, chi)
    osc = operator_symbol(OperatorKind.OSC, t, ax, params, chi)
    s = operator_symbol(OperatorKind.S, t, ax, params, chi)
    sym = full - u - c * osc + c * s
    R = SpectralField(f.grid, spec=f.spec * sym)
    ch = chi(t, ax, params.sigma)
    support = (ch < 1.0) & (np.abs(f.spec) > 0)
    z = t**params.beta * ax[support] ** params.alpha
    ratio = np.abs(R.spec[support]) / np.abs(f.spec[support])
    return R, RemainderReport(z, ratio, ratio * z, c)


def l2_ratio(u: SpectralField, f: SpectralField, exclude_zero: bool = True) -> float:
    """||u||_2 / ||f||_2 computed spectrally, optionally without the xi = 0 mode."""
    keep = u.grid.xi != 0 if exclude_zero else np.ones(u.grid.n_points, bool)
    return float(math.sqrt(np.sum(np.abs(u.spec[keep]) ** 2) / np.sum(np.abs(f.spec[keep]) ** 2)))


def time_sweep(f: SpectralField, times, params: FracParams, s: float = 0.0, chi: CutoffChi | None = None) -> list[dict]:
    rows = []
    for t in times:
        u = evolve_linear(f, float(t), params)
        rem = 0.0
        if t > 0:
            _, rep = remainder_decomposition(f, float(t), params, chi)
            rem = rep.sup
        rows.append({"t": float(t), "L2_ratio": l2_ratio(u, f), "Hs_norm": sobolev_norm(u, s), "remainder_sup": rem})
    return rows


def write_sweep_csv(path, rows: list[dict]) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["t", "L2_ratio", "Hs_norm", "remainder_sup"])
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(float(v)) for k, v in r.items()})
