"""Real Gamma function via the Lanczos approximation (g=7, n=9).

Only real arguments are needed by the Mittag-Leffler code: the series
coefficients 1/Gamma(beta*k + rho) and the asymptotic coefficients
1/Gamma(rho - beta*k), which may sit at or near the poles.
"""

from __future__ import annotations

import math

import numpy as np

_G = 7.0
_COEF = np.array(
    [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ]
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _lanczos_lgamma_pos(x: np.ndarray) -> np.ndarray:
    # valid for x >= 0.5
    xm = x - 1.0
    a = np.full_like(xm, _COEF[0])
    for k in range(1, _COEF.size):
        a = a + _COEF[k] / (xm + k)
    t = xm + _G + 0.5
    return _HALF_LOG_2PI + (xm + 0.5) * np.log(t) - t + np.log(a)


def _sinpi(x: np.ndarray) -> np.ndarray:
    # sin(pi x) with the argument reduced first so that integers give exact zeros
    n = np.round(x)
    r = x - n
    sign = np.where(np.mod(n, 2.0) == 0.0, 1.0, -1.0)
    return sign * np.sin(np.pi * r)


def lgamma(x):
    """Return (log|Gamma(x)|, sign Gamma(x)) for real x.

    Poles (non-positive integers) give (inf, 0).
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.empty_like(x)
    sign = np.ones_like(x)

    pole = (x <= 0) & (x == np.round(x))
    pos = (x >= 0.5) & ~pole
    neg = (x < 0.5) & ~pole

    if pos.any():
        out[pos] = _lanczos_lgamma_pos(x[pos])
    if neg.any():
        # reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        xn = x[neg]
        s = _sinpi(xn)
        out[neg] = math.log(math.pi) - np.log(np.abs(s)) - _lanczos_lgamma_pos(1.0 - xn)
        sign[neg] = np.sign(s)
    out[pole] = np.inf
    sign[pole] = 0.0

    if scalar:
        return float(out[0]), float(sign[0])
    return out, sign


def _exact_integer(x, out, invert: bool):
    # (n-1)! is exactly representable up to n = 23; keeps Gamma(1) = 1 bit-exact
    xa = np.asarray(x, dtype=float)
    hit = (xa >= 1) & (xa <= 23) & (xa == np.round(xa))
    if not np.any(hit):
        return out
    out = np.array(out, dtype=float)
    fac = np.array([float(math.factorial(int(v) - 1)) for v in xa[hit].ravel()])
    out[hit] = 1.0 / fac if invert else fac
    return out if out.ndim else float(out)


def gamma(x):
    lg, sg = lgamma(x)
    return _exact_integer(x, sg * np.exp(lg), False)


def rgamma(x):
    """1/Gamma(x), exactly zero at the poles."""
    lg, sg = lgamma(x)
    return _exact_integer(x, sg * np.exp(-lg), True)
