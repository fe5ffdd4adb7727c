"""Periodic grid, paired physical/spectral fields, equation parameters.

Fourier convention: f_hat(xi) = int f(x) exp(-i x xi) dx, approximated on the
torus [-L/2, L/2) by dx * sum_j f(x_j) exp(-i x_j xi_k). Frequencies are
xi_k = center + 2 pi k / L, k in [-n/2, n/2). A nonzero ``center`` stores the
modulated samples v = exp(-i center x) u, which lets a narrow band around a
large frequency be resolved with few points; odd power nonlinearities
commute with the modulation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .mittag_leffler import PhaseConvention


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    n_points: int
    length: float
    center: float = 0.0

    def __post_init__(self):
        if not (isinstance(self.n_points, (int, np.integer)) and self.n_points >= 8 and _is_pow2(int(self.n_points))):
            raise ValueError(f"n_points must be a power of two >= 8, got {self.n_points}")
        if not self.length > 0:
            raise ValueError("length must be positive")

    @property
    def dx(self) -> float:
        return self.length / self.n_points

    @property
    def dxi(self) -> float:
        return 2.0 * math.pi / self.length

    @property
    def x(self) -> np.ndarray:
        return -0.5 * self.length + self.dx * np.arange(self.n_points)

    @property
    def k(self) -> np.ndarray:
        """Signed integer mode indices in FFT order."""
        return np.fft.fftfreq(self.n_points, d=1.0 / self.n_points).astype(int)

    @property
    def xi(self) -> np.ndarray:
        return self.center + self.dxi * self.k

    def _shift(self) -> np.ndarray:
        # exp(-i x_0 eta_k) with x_0 = -L/2
        return np.where(self.k % 2 == 0, 1.0, -1.0)

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.n_points * factor, self.length, self.center)


class SpectralField:
    """Complex field with lazily synchronised physical and spectral arrays."""

    __slots__ = ("grid", "_phys", "_spec")

    def __init__(self, grid: Grid, phys=None, spec=None):
        if phys is None and spec is None:
            raise ValueError("need phys or spec")
        self.grid = grid
        self._phys = None if phys is None else np.array(phys, dtype=complex)
        self._spec = None if spec is None else np.array(spec, dtype=complex)
        for a in (self._phys, self._spec):
            if a is not None and a.shape != (grid.n_points,):
                raise ValueError(f"array shape {a.shape} does not match grid n={grid.n_points}")

    @classmethod
    def from_function(cls, grid: Grid, f) -> "SpectralField":
        return cls(grid, phys=f(grid.x))

    @classmethod
    def zeros(cls, grid: Grid) -> "SpectralField":
        return cls(grid, spec=np.zeros(grid.n_points, dtype=complex))

    @property
    def phys_current(self) -> bool:
        return self._phys is not None

    @property
    def spec_current(self) -> bool:
        return self._spec is not None

    @property
    def phys(self) -> np.ndarray:
        if self._phys is None:
            g = self.grid
            self._phys = np.fft.ifft(self._spec * g._shift()) / g.dx
        return self._phys

    @property
    def spec(self) -> np.ndarray:
        if self._spec is None:
            g = self.grid
            self._spec = g.dx * g._shift() * np.fft.fft(self._phys)
        return self._spec

    def values(self) -> np.ndarray:
        """Samples of u itself (undoing the modulation when center != 0)."""
        if self.grid.center == 0.0:
            return self.phys
        return self.phys * np.exp(1j * self.grid.center * self.grid.x)

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, spec=self.spec.copy())

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _same_grid(self, other)
        return SpectralField(self.grid, spec=self.spec + other.spec)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _same_grid(self, other)
        return SpectralField(self.grid, spec=self.spec - other.spec)

    def __mul__(self, c) -> "SpectralField":
        return SpectralField(self.grid, spec=self.spec * c)

    __rmul__ = __mul__

    def l2_physical(self) -> float:
        return float(math.sqrt(self.grid.dx * np.sum(np.abs(self.phys) ** 2)))


def _same_grid(a: SpectralField, b: SpectralField) -> None:
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")


def to_spectral(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, spec=f.spec)


def to_physical(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, phys=f.phys)


def apply_symbol(f: SpectralField, m) -> SpectralField:
    """Multiply spectral coefficients by m(xi_k); m may be a callable or an array."""
    mult = m(f.grid.xi) if callable(m) else np.asarray(m)
    return SpectralField(f.grid, spec=f.spec * mult)


def japanese(xi) -> np.ndarray:
    """<xi> = 1 + |xi|."""
    return 1.0 + np.abs(xi)


def sobolev_weight(xi, s: float, homogeneous: bool = False) -> np.ndarray:
    a = np.abs(xi)
    if homogeneous:
        with np.errstate(divide="ignore"):
            w = np.where(a > 0, a ** float(s), 0.0)
        return w
    return (1.0 + a) ** s


def sobolev_norm(f: SpectralField, s: float, homogeneous: bool = False) -> float:
    """(sum_k w(xi_k)^{2s} |u_hat_k|^2 / L)^{1/2}, w = |xi| or 1 + |xi|.

    The 1/L factor is (1/2pi) * (2pi/L): continuum Plancherel with the mode spacing.
    """
    spec = f.spec
    xi = f.grid.xi
    if homogeneous:
        zero = xi == 0
        if np.any(zero) and np.any(np.abs(spec[zero]) > 0):
            warnings.warn("homogeneous norm: zero mode excluded", RuntimeWarning, stacklevel=2)
    w = sobolev_weight(xi, 2.0 * s, homogeneous)
    return float(math.sqrt(np.sum(w * np.abs(spec) ** 2) / f.grid.length))


def _pad_size(n: int, padding: float) -> int:
    m = int(math.ceil(padding * n))
    return m + (m % 2)


def power_nonlinearity(f: SpectralField, p: int, mu: float = 1.0, padding: float | None = None) -> SpectralField:
    """mu |u|^{p-1} u evaluated on a zero-padded grid and truncated back."""
    if p % 2 != 1 or p < 1:
        raise ValueError("p must be an odd positive integer")
    if padding is None:
        padding = 0.5 * (p + 1)
    if padding < 0.5 * (p + 1):
        raise ValueError(f"padding {padding} below (p+1)/2 = {(p + 1) / 2}")
    g = f.grid
    n = g.n_points
    M = _pad_size(n, padding)
    k = g.k
    idx = np.where(k >= 0, k, k + M)
    # FFT-normalised coefficients of v (modulated samples)
    c = np.fft.fft(f.phys) / n
    big = np.zeros(M, dtype=complex)
    big[idx] = c
    v = np.fft.ifft(big) * M
    q = (p - 1) // 2
    w = mu * (v * np.conj(v)) ** q * v if q else mu * v
    cc = np.fft.fft(w) / M
    return SpectralField(g, phys=np.fft.ifft(cc[idx]) * n)


def power_nonlinearity_spec(spec: np.ndarray, grid: Grid, p: int, mu: float = 1.0, padding: float | None = None) -> np.ndarray:
    """Batched version on spectral rows: spec has shape (..., n); returns the same shape."""
    if padding is None:
        padding = 0.5 * (p + 1)
    if padding < 0.5 * (p + 1):
        raise ValueError(f"padding {padding} below (p+1)/2 = {(p + 1) / 2}")
    n = grid.n_points
    M = _pad_size(n, padding)
    k = grid.k
    idx = np.where(k >= 0, k, k + M)
    shift = grid._shift()
    spec = np.asarray(spec, dtype=complex)
    big = np.zeros(spec.shape[:-1] + (M,), dtype=complex)
    big[..., idx] = spec * shift / grid.length
    v = np.fft.ifft(big, axis=-1) * M
    q = (p - 1) // 2
    w = mu * (v.real**2 + v.imag**2) ** q * v
    cc = np.fft.fft(w, axis=-1) / M
    return grid.length * shift * cc[..., idx]


@dataclass(frozen=True)
class FracParams:
    """Parameters of i^beta d_t^beta u = |D|^alpha u + mu |u|^{p-1} u."""

    alpha: float
    beta: float
    p: int = 3
    mu: float = 1.0
    phase: PhaseConvention = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not (0 < self.beta <= 1):
            raise ValueError("beta must lie in (0, 1]")
        if int(self.p) != self.p or self.p < 3 or self.p % 2 != 1:
            raise ValueError("p must be an odd integer >= 3")
        if self.mu not in (1, -1, 1.0, -1.0):
            raise ValueError("mu must be +1 or -1")
        object.__setattr__(self, "phase", PhaseConvention(self.beta))

    @property
    def sigma(self) -> float:
        return self.alpha / self.beta

    @property
    def gamma(self) -> float:
        return 0.5 * (self.sigma - 1.0)

    @property
    def gamma_tilde(self) -> float:
        return self.alpha - 0.5 * (self.sigma + 1.0)

    @property
    def s_c(self) -> float:
        return 0.5 - self.alpha / (self.p - 1)

    @property
    def s_g(self) -> float:
        return 0.5 - self.alpha / 4.0

    @property
    def smoothing_ok(self) -> bool:
        return self.alpha > 0.5 * (self.sigma + 1.0)

    def as_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "p": int(self.p), "mu": float(self.mu)}


# ---------------------------------------------------------- serialisation


def write_field(path, f: SpectralField, header: str | None = None) -> None:
    """Columnar text: k, Re u_hat, Im u_hat (ascending k)."""
    g = f.grid
    order = np.argsort(g.k)
    lines = [f"# n={g.n_points} L={g.length!r} center={g.center!r}"]
    if header:
        lines.extend("# " + h for h in header.splitlines())
    spec = f.spec
    for i in order:
        lines.append(f"{g.k[i]:d} {float(spec[i].real)!r} {float(spec[i].imag)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_field(path) -> SpectralField:
    text = Path(path).read_text().splitlines()
    meta = dict(kv.split("=", 1) for kv in text[0][1:].split())
    g = Grid(int(meta["n"]), float(meta["L"]), float(meta["center"]))
    rows = [ln.split() for ln in text if ln and not ln.startswith("#")]
    k = np.array([int(r[0]) for r in rows])
    vals = np.array([complex(float(r[1]), float(r[2])) for r in rows])
    spec = np.empty(g.n_points, dtype=complex)
    spec[np.where(k >= 0, k, k + g.n_points)] = vals
    return SpectralField(g, spec=spec)
