"""Special functions behind the detection-probability expressions.

The non-central chi-squared right tail is evaluated as a Poisson mixture of
central tails.  For the even degrees of freedom used here (``dof = 2L``) each
central tail is a regularized upper incomplete gamma function, so the whole
sum is carried out in log space and never touches a Bessel function.  This
keeps ``dof`` up to 8192 and non-centralities far beyond ``1e12`` finite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

__all__ = [
    "ChiSqTail",
    "ConvergenceError",
    "PROB_EPS",
    "chi2_tail",
    "chi2_tail_inv",
    "clamp_prob",
    "gauss_q",
    "gauss_q_inv",
    "log_chi2_tail",
]

PROB_EPS = 1e-300

# Poisson window is mode +/- (_WINDOW_SIGMAS * sd + _WINDOW_PAD); mass outside < 1e-30.
_WINDOW_SIGMAS = 12.0
_WINDOW_PAD = 30.0
_TRUNC_REL = 1e-12
# Above this Poisson sd the mixture is summed on a stride of sd / _STRIDE_DIV.
# The summand is smooth on the scale of sd, so the strided sum is exact up to
# terms of order exp(-2 pi^2 _STRIDE_DIV^2).
_STRIDE_MIN_SD = 64.0
_STRIDE_DIV = 8.0


class ConvergenceError(RuntimeError):
    """Root finding failed to bracket or converge."""


@dataclass(frozen=True)
class ChiSqTail:
    """Non-central chi-squared law with even degrees of freedom.

    Parameters
    ----------
    dof : int
        Degrees of freedom, a positive even integer.
    noncentrality : float
        Non-centrality parameter, ``>= 0``.
    """

    dof: int
    noncentrality: float = 0.0

    def __post_init__(self):
        if int(self.dof) != self.dof or self.dof < 2 or self.dof % 2:
            raise ValueError(f"dof must be a positive even integer, got {self.dof!r}")
        if not np.isfinite(self.noncentrality) or self.noncentrality < 0:
            raise ValueError(f"noncentrality must be finite and >= 0, got {self.noncentrality!r}")

    @property
    def mean(self) -> float:
        return self.dof + self.noncentrality

    @property
    def var(self) -> float:
        return 2.0 * self.dof + 4.0 * self.noncentrality

    def sf(self, x):
        """Right-tail probability ``Pr{X >= x}``."""
        return chi2_tail(self.dof, self.noncentrality, x)

    def isf(self, p):
        """Inverse of :meth:`sf`."""
        return chi2_tail_inv(self.dof, self.noncentrality, p)


def clamp_prob(p):
    """Clamp probabilities to ``[PROB_EPS, 1 - PROB_EPS]``."""
    return np.clip(p, PROB_EPS, 1.0 - PROB_EPS)


def _check_args(dof, nc):
    if int(dof) != dof or dof < 2 or dof % 2:
        raise ValueError(f"dof must be a positive even integer, got {dof!r}")
    if not np.isfinite(nc) or nc < 0:
        raise ValueError(f"noncentrality must be finite and >= 0, got {nc!r}")


def _stirling_remainder(k):
    # lgamma(k + 1) - (k + 1/2) log k + k - log(2 pi) / 2
    k = np.asarray(k, dtype=float)
    out = np.empty_like(k)
    small = k <= 15.0
    ks = k[small]
    out[small] = special.gammaln(ks + 1.0) - (ks + 0.5) * np.log(ks) + ks - 0.5 * np.log(2 * np.pi)
    kl = k[~small]
    inv2 = 1.0 / (kl * kl)
    out[~small] = (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0))) / kl
    return out


def _log_poisson(k, mu):
    """Log Poisson weights in deviance form, stable for ``mu`` up to ~1e15."""
    k = np.asarray(k, dtype=float)
    if mu < 1.0:
        # direct form is exact here; (k - mu) / mu would overflow for tiny mu
        return k * np.log(mu) - special.gammaln(k + 1.0) - mu
    out = np.full_like(k, -mu)
    pos = k > 0
    kp = k[pos]
    e = (kp - mu) / mu
    deviance = mu * ((1.0 + e) * np.log1p(e) - e)
    out[pos] = -0.5 * np.log(2 * np.pi * kp) - _stirling_remainder(kp) - deviance
    return out


def _log_gammaincc_cf(a: float, x: float) -> float:
    """``log Q(a, x)`` from the Legendre continued fraction (modified Lentz), for ``x > a + 1``."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        d = tiny if abs(d) < tiny else d
        c = b + an / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    return -x + a * np.log(x) - special.gammaln(a) + np.log(h)


def _log_central_tail(m, half_x):
    # log Pr{chi2_{2m} >= 2 half_x} = log Q(m, half_x); m may be non-integer on the stride grid
    m = np.asarray(m, dtype=float)
    scalar = m.ndim == 0
    m = np.atleast_1d(m)
    q = special.gammaincc(m, half_x)
    out = np.log(np.maximum(q, 1e-300))
    # below ~1e-300 gammaincc loses precision and then underflows; only x > m + 1 gets there
    for i in np.flatnonzero(q < 1e-290):
        out[i] = _log_gammaincc_cf(float(m[i]), float(half_x)) if half_x > m[i] + 1 else -np.inf
    return out[0] if scalar else out


def _log_tail_scalar(dof: int, nc: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if np.isinf(x):
        return -np.inf
    m = dof // 2
    half_x = 0.5 * x
    mu = 0.5 * nc
    if mu == 0.0:
        return float(_log_central_tail(m, half_x))

    sd = np.sqrt(mu)
    width = _WINDOW_SIGMAS * sd + _WINDOW_PAD
    while True:
        lo = max(0.0, np.floor(mu - width))
        hi = np.ceil(mu + width)
        if sd >= _STRIDE_MIN_SD:
            step = np.floor(sd / _STRIDE_DIV)
            k = np.arange(lo, hi + step, step)
            log_step = np.log(step)
        else:
            k = np.arange(lo, hi + 1.0)
            log_step = 0.0
        log_w = _log_poisson(k, mu)
        terms = log_w + _log_central_tail(m + k, half_x)
        total = special.logsumexp(terms)
        if not np.isfinite(total):
            return float(total)
        # Upper edge dominates the truncation error; lower edge only matters when lo > 0.
        edge = terms[-1] if lo == 0 else max(terms[0], terms[-1])
        if edge - total < np.log(_TRUNC_REL) or width > 1e3 * (sd + 1.0):
            return float(min(0.0, total + log_step))
        width *= 2.0


def log_chi2_tail(dof: int, nc: float, x):
    """Natural log of :func:`chi2_tail`, accurate deep into the tail."""
    _check_args(dof, nc)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("x must be non-negative")
    out = np.vectorize(lambda xi: _log_tail_scalar(int(dof), float(nc), xi), otypes=[float])(x)
    return out[()] if out.ndim == 0 else out


def chi2_tail(dof: int, nc: float, x):
    """Right-tail probability of a non-central chi-squared variable.

    Parameters
    ----------
    dof : int
        Even degrees of freedom ``2L``.
    nc : float
        Non-centrality ``lambda >= 0``.
    x : float or array_like
        Non-negative abscissa.

    Returns
    -------
    float or ndarray
        ``Pr{X >= x}`` for ``X ~ chi2_dof(nc)``.
    """
    return np.exp(log_chi2_tail(dof, nc, x))


def chi2_tail_inv(dof: int, nc: float, p: float) -> float:
    """Solve ``chi2_tail(dof, nc, x) = p`` for ``x``.

    The tail is monotone, so a bracket is grown around the mean and the root
    is polished with Brent's method on the log-probability.
    """
    _check_args(dof, nc)
    if not (0.0 < p < 1.0):
        raise ValueError(f"p must lie in (0, 1), got {p!r}")
    p = float(clamp_prob(p))
    log_p = np.log(p)
    mean = dof + nc
    sd = np.sqrt(2.0 * dof + 4.0 * nc)
    lo = max(0.0, mean - 10.0 * sd)
    hi = mean + 10.0 * sd

    def f(x):
        return _log_tail_scalar(int(dof), float(nc), x) - log_p

    for _ in range(200):
        if f(lo) >= 0.0:
            break
        lo = max(0.0, lo - 10.0 * sd)
        if lo == 0.0:
            break
    if f(lo) < 0.0:
        raise ConvergenceError(f"cannot bracket p={p} from below (dof={dof}, nc={nc})")
    for _ in range(200):
        if f(hi) <= 0.0:
            break
        hi += 10.0 * sd
    else:
        raise ConvergenceError(f"cannot bracket p={p} from above (dof={dof}, nc={nc})")
    if f(hi) == 0.0:
        return float(hi)
    try:
        root, info = optimize.brentq(
            f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500, full_output=True
        )
    except (ValueError, RuntimeError) as exc:
        raise ConvergenceError(str(exc)) from exc
    if not info.converged:
        raise ConvergenceError(f"brentq did not converge: {info.flag}")
    return float(root)


def gauss_q(x):
    """Gaussian Q-function, ``Pr{N(0, 1) >= x}``."""
    return special.ndtr(-np.asarray(x, dtype=float))[()]


def gauss_q_inv(p):
    """Inverse Gaussian Q-function."""
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0.0) | (p >= 1.0)):
        raise ValueError("p must lie in (0, 1)")
    return (-special.ndtri(clamp_prob(p)))[()]
