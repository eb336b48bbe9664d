"""Closed-form detection theory for the joint NP detector.

All functions take received SNRs in linear units.  The normalized statistic
under H0 is ``chi2_{2L}(lam1)`` with ``lam1 = 2 L gs / gc^2``; under H1 it is
``chi2_{2L}(lam2)`` with ``lam2 = lam1 (1 + gc)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .specfun import chi2_tail, chi2_tail_inv, clamp_prob, gauss_q, gauss_q_inv

__all__ = [
    "OperatingPoint",
    "DegenerateOperatingPoint",
    "noncentralities",
    "threshold_for_pfa",
    "pfa_at_threshold",
    "pd_at_threshold",
    "pd_exact",
    "pd_gaussian_only",
    "pd_deterministic_limit",
    "pd_approx_full",
    "pd_approx_simple",
    "pfa_clt",
    "pd_clt",
    "min_l_for_pd",
]

# Below this the joint formulas are replaced by their gc -> 0+ limit.
GAMMA_C_FLOOR = 1e-300
# Above this noncentrality double-precision round-off in the chi-squared
# quantile exceeds the O(gc) error of the gc -> 0+ limit.
LAMBDA_SWITCH = 1e15


class DegenerateOperatingPoint(ValueError):
    """Joint-detector formula requested with ``gamma_c == 0``."""


@dataclass(frozen=True)
class OperatingPoint:
    """Sensing SNR pair, sensing duration and target false-alarm probability."""

    gamma_c: float
    gamma_s: float
    l_symbols: int
    pfa: float = 1e-3

    def __post_init__(self):
        if self.gamma_c < 0 or self.gamma_s < 0:
            raise ValueError("SNRs must be non-negative")
        if int(self.l_symbols) != self.l_symbols or self.l_symbols < 1:
            raise ValueError("l_symbols must be a positive integer")
        if not 0.0 < self.pfa < 1.0:
            raise ValueError("pfa must lie in (0, 1)")

    @property
    def lam1(self) -> float:
        return noncentralities(self)[0]

    @property
    def lam2(self) -> float:
        return noncentralities(self)[1]


def _require_joint(op: OperatingPoint):
    if op.gamma_c <= 0:
        raise DegenerateOperatingPoint("gamma_c must be > 0 for the joint NP detector")


def noncentralities(op: OperatingPoint):
    """``(lam1, lam2)`` of the normalized statistic under H0 and H1."""
    _require_joint(op)
    lam1 = 2.0 * op.l_symbols * op.gamma_s / op.gamma_c**2
    return lam1, lam1 * (1.0 + op.gamma_c)


def threshold_for_pfa(op: OperatingPoint) -> float:
    """Detection threshold ``delta'`` meeting ``op.pfa`` exactly."""
    lam1, _ = noncentralities(op)
    gc, L = op.gamma_c, op.l_symbols
    x = chi2_tail_inv(2 * L, lam1, op.pfa)
    return gc / (2.0 * (1.0 + gc)) * (x - lam1)


def pfa_at_threshold(op: OperatingPoint, delta) -> float:
    lam1, _ = noncentralities(op)
    gc = op.gamma_c
    x = 2.0 * (1.0 + gc) * np.asarray(delta, dtype=float) / gc + lam1
    return chi2_tail(2 * op.l_symbols, lam1, np.maximum(x, 0.0))


def pd_at_threshold(op: OperatingPoint, delta) -> float:
    lam1, lam2 = noncentralities(op)
    gc = op.gamma_c
    x = 2.0 * np.asarray(delta, dtype=float) / gc + lam1 / (1.0 + gc)
    return chi2_tail(2 * op.l_symbols, lam2, np.maximum(x, 0.0))


def pd_exact(op: OperatingPoint) -> float:
    """Detection probability at the prescribed false-alarm probability.

    ``Q_{chi2_2L(lam1 (1+gc))}( Q^-1_{chi2_2L(lam1)}(pfa) / (1+gc) )``.
    For ``lam1 > LAMBDA_SWITCH`` the ``gc -> 0+`` limit is returned instead.
    """
    lam1, lam2 = noncentralities(op)
    if lam1 > LAMBDA_SWITCH:
        return pd_deterministic_limit(op.gamma_s, op.l_symbols, op.pfa)
    x = chi2_tail_inv(2 * op.l_symbols, lam1, op.pfa)
    return float(chi2_tail(2 * op.l_symbols, lam2, x / (1.0 + op.gamma_c)))


def pd_gaussian_only(gamma_c: float, l_symbols: int, pfa: float) -> float:
    """Energy-detector probability when only Gaussian signals are sent."""
    if gamma_c < 0:
        raise ValueError("gamma_c must be >= 0")
    x = chi2_tail_inv(2 * l_symbols, 0.0, pfa)
    return float(chi2_tail(2 * l_symbols, 0.0, x / (1.0 + gamma_c)))


def pd_deterministic_limit(gamma_s: float, l_symbols: int, pfa: float) -> float:
    """Limit of :func:`pd_exact` as ``gamma_c -> 0+``.

    With no random component the NP test is a matched filter on a known
    signal in white noise, giving ``Q(Q^-1(pfa) - sqrt(2 L gamma_s))``.
    """
    return float(gauss_q(gauss_q_inv(pfa) - np.sqrt(2.0 * l_symbols * gamma_s)))


def pd_min_safe(gamma_c: float, gamma_s: float, l_symbols: int, pfa: float) -> float:
    """:func:`pd_exact` that falls back to the ``gamma_c -> 0+`` limit at ``gamma_c = 0``."""
    if gamma_c <= GAMMA_C_FLOOR:
        return pd_deterministic_limit(gamma_s, l_symbols, pfa)
    return pd_exact(OperatingPoint(gamma_c, gamma_s, l_symbols, pfa))


def pd_approx_full(op: OperatingPoint) -> float:
    """Large-L Gaussian approximation of :func:`pd_exact` keeping all SNR terms."""
    gc, gs, L = op.gamma_c, op.gamma_s, op.l_symbols
    num = gauss_q_inv(op.pfa) * np.sqrt(gc**2 + 2 * gs) - np.sqrt(L) * (gc**2 + gs * (2 + gc))
    den = (1 + gc) * np.sqrt(gc**2 + 2 * gs * (1 + gc))
    if den == 0.0:
        return float(op.pfa)
    return float(gauss_q(num / den))


def pd_approx_simple(op: OperatingPoint) -> float:
    """``Q(Q^-1(pfa) - sqrt(L) sqrt(gc^2 + 2 gs))``, the beamforming metric."""
    metric = op.gamma_c**2 + 2 * op.gamma_s
    return float(gauss_q(gauss_q_inv(op.pfa) - np.sqrt(op.l_symbols * metric)))


def pfa_clt(op: OperatingPoint, delta: float) -> float:
    """CLT approximation of :func:`pfa_at_threshold`."""
    lam1, _ = noncentralities(op)
    gc, L = op.gamma_c, op.l_symbols
    return float(gauss_q(((1 + gc) * delta / gc - L) / np.sqrt(L + lam1)))


def pd_clt(op: OperatingPoint, delta: float) -> float:
    """CLT approximation of :func:`pd_at_threshold`."""
    _, lam2 = noncentralities(op)
    gc, gs, L = op.gamma_c, op.gamma_s, op.l_symbols
    z = (((1 + gc) * delta - L * gs * (gc + 2)) / (gc * (1 + gc)) - L) / np.sqrt(L + lam2)
    return float(gauss_q(z))


def min_l_for_pd(gamma_c: float, pfa: float, target: float = 0.99, l_max: int = 1 << 20) -> int:
    """Smallest sensing duration at which the energy detector reaches ``target``.

    ``pd_gaussian_only`` is non-decreasing in ``L`` at fixed SNR, so an
    exponential search followed by bisection on integers is exact.
    """
    def ok(L):
        return pd_gaussian_only(gamma_c, L, pfa) >= target

    hi = 1
    while not ok(hi):
        hi *= 2
        if hi > l_max:
            raise ValueError(f"target {target} not reached for L <= {l_max}")
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi
