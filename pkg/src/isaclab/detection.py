"""Echo simulation, the NP test statistic and Monte-Carlo detection rates.

Notation: ``c(l) = alpha a^T x0(l)`` is the known deterministic echo
coefficient and ``z(l) = b^H y(l)`` the receive-beamformed sample.  The
statistic depends on the echoes only through ``z``, so the fast Monte-Carlo
path draws ``z`` directly; its law is identical to projecting full echoes.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np
from scipy import stats

from .analysis import LAMBDA_SWITCH, OperatingPoint, threshold_for_pfa
from .scenario import GridPoint, ScenarioConfig, make_rng, sensing_snrs
from .specfun import gauss_q_inv

__all__ = [
    "DegenerateContextError",
    "DetectorContext",
    "EchoBatch",
    "MCResult",
    "completed_square_statistic",
    "covariance_inverse_direct",
    "covariance_inverse_woodbury",
    "energy_statistic",
    "llr_offset",
    "llr_statistic",
    "matched_filter_statistic",
    "mc_detect",
    "np_statistic",
    "simulate_echoes",
    "synth_deterministic_waveform",
    "threshold_for_pfa",
    "wilson_interval",
]

H0, H1 = 0, 1
MC_BLOCK = 1000


class DegenerateContextError(ValueError):
    """The joint statistic is undefined because ``gamma_c == 0``."""


def synth_deterministic_waveform(r0, l_symbols: int, seed: int = 0, tol: float = 1e-12) -> np.ndarray:
    """Deterministic sensing waveform with sample covariance exactly ``r0``.

    Each eigen-direction of ``r0`` is assigned its own DFT sequence (orthogonal
    over ``L`` slots), with random frequency choice and phase drawn from
    ``seed``.

    Returns
    -------
    ndarray, shape (Mt, L)
        Column ``l`` is ``x0(l)``.
    """
    r0 = np.asarray(r0, dtype=complex)
    r0 = 0.5 * (r0 + r0.conj().T)
    mt = r0.shape[0]
    lam, u = np.linalg.eigh(r0)
    scale = max(1.0, float(np.max(np.abs(lam)))) if lam.size else 1.0
    keep = lam > tol * scale
    rank = int(np.count_nonzero(keep))
    if rank > l_symbols:
        raise ValueError(f"need L >= rank(R0) = {rank} slots, got L = {l_symbols}")
    if rank == 0:
        return np.zeros((mt, l_symbols), dtype=complex)
    rng = make_rng(seed, 0xD1F7)
    freqs = rng.permutation(l_symbols)[:rank]
    phases = np.exp(2j * np.pi * rng.random(rank))
    l = np.arange(l_symbols)
    seq = phases[:, None] * np.exp(2j * np.pi * np.outer(freqs, l) / l_symbols)
    return (u[:, keep] * np.sqrt(lam[keep])) @ seq


@dataclass
class DetectorContext:
    """Everything the receiver knows for grid point ``g``.

    Build with :meth:`from_design`; ``threshold`` is filled from ``pfa`` via
    the closed-form false-alarm law when the joint statistic is defined.
    """

    g: GridPoint
    w: np.ndarray
    x0: np.ndarray
    sigma2_s: float
    mr: int
    pfa: float = 1e-3
    gamma_c: float = field(init=False)
    gamma_s: float = field(init=False)
    threshold: Optional[float] = field(init=False, default=None)

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=complex)
        self.x0 = np.asarray(self.x0, dtype=complex)
        a = self.g.a_tx
        scale = self.g.alpha2 * self.mr / self.sigma2_s
        self.gamma_c = float(scale * abs(a @ self.w) ** 2)
        c = self.det_coeffs
        self.gamma_s = float(self.mr * np.mean(np.abs(c) ** 2) / self.sigma2_s)
        # past LAMBDA_SWITCH the joint statistic is numerically the matched filter
        if self.gamma_c > 0 and self.operating_point.lam1 <= LAMBDA_SWITCH:
            self.threshold = threshold_for_pfa(self.operating_point)

    @classmethod
    def from_design(cls, g: GridPoint, w, r0, cfg: ScenarioConfig, seed: int = 0):
        x0 = synth_deterministic_waveform(r0, cfg.l_symbols, seed)
        return cls(g, w, x0, cfg.sigma2_s, cfg.mr, cfg.pfa)

    @classmethod
    def for_snrs(cls, gamma_c: float, gamma_s: float, l_symbols: int, pfa: float = 1e-3,
                 mt: int = 4, mr: int = 4, sigma2_s: float = 1.0, seed: int = 0):
        """Context hitting prescribed SNRs with broadside beams and unit cascade gain."""
        a = np.ones(mt, dtype=complex)
        b = np.ones(mr, dtype=complex)
        g = GridPoint(0, 0.0, 0.0, 1.0, a, b)
        w = np.sqrt(gamma_c * sigma2_s / (mr * mt)) * a.conj() / np.sqrt(mt)
        r0 = gamma_s * sigma2_s / (mr * mt) * np.outer(a.conj(), a) / mt
        x0 = synth_deterministic_waveform(r0, l_symbols, seed)
        return cls(g, w, x0, sigma2_s, mr, pfa)

    @property
    def l_symbols(self) -> int:
        return self.x0.shape[1]

    @property
    def det_coeffs(self) -> np.ndarray:
        """``c(l) = alpha a^T x0(l)`` for every slot."""
        return self.g.alpha * (self.g.a_tx @ self.x0)

    @property
    def gain_w(self) -> complex:
        """``alpha a^T w``, the random-echo gain."""
        return self.g.alpha * (self.g.a_tx @ self.w)

    @property
    def operating_point(self) -> OperatingPoint:
        return OperatingPoint(self.gamma_c, self.gamma_s, self.l_symbols, self.pfa)

    def sample_covariance(self) -> np.ndarray:
        return self.x0 @ self.x0.conj().T / self.l_symbols

    def mf_threshold(self) -> float:
        """Matched-filter threshold for ``pfa`` under noise-only echoes."""
        energy = float(np.sum(np.abs(self.det_coeffs) ** 2))
        sd = np.sqrt(0.5 * self.mr * self.sigma2_s * energy)
        return float(gauss_q_inv(self.pfa) * sd)


@dataclass(frozen=True)
class EchoBatch:
    """``L`` received echo vectors (rows) under one hypothesis."""

    samples: np.ndarray
    hypothesis: int
    seed: tuple


def _cn(rng, shape, power=1.0):
    return np.sqrt(power / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def simulate_echoes(ctx: DetectorContext, hypothesis: int, trials: int, seed: int = 0) -> Iterator[EchoBatch]:
    """Yield ``trials`` full-array echo batches, each seeded by ``(seed, hypothesis, trial)``."""
    if ctx.sigma2_s <= 0:
        raise ValueError("noise power must be positive")
    g, L, mr = ctx.g, ctx.l_symbols, ctx.mr
    for t in range(trials):
        rng = make_rng(seed, hypothesis, t)
        y = _cn(rng, (L, mr), ctx.sigma2_s)
        if hypothesis == H1:
            s = _cn(rng, L)
            # alpha b a^T (w s(l) + x0(l)) for every slot l
            amp = ctx.gain_w * s + ctx.det_coeffs
            y = y + np.outer(amp, g.b_rx)
        yield EchoBatch(y, hypothesis, (seed, hypothesis, t))


def _project(ctx, batch):
    y = batch.samples if isinstance(batch, EchoBatch) else np.asarray(batch)
    return y @ ctx.g.b_rx.conj()


def _require_gc(ctx):
    if ctx.gamma_c <= 0:
        raise DegenerateContextError("gamma_c = 0: use matched_filter_statistic")


def _np_from_z(ctx, z):
    gc, s2, mr = ctx.gamma_c, ctx.sigma2_s, ctx.mr
    c = ctx.det_coeffs
    energy = np.sum(np.abs(z) ** 2, axis=-1)
    corr = np.real(np.sum(c.conj() * z, axis=-1))
    return gc / (mr * s2 * (1 + gc)) * energy + 2.0 / (s2 * (1 + gc)) * corr


def np_statistic(ctx: DetectorContext, batch) -> float:
    """Joint NP statistic: weighted echo energy plus matched-filter correlation."""
    _require_gc(ctx)
    return float(_np_from_z(ctx, _project(ctx, batch)))


def energy_statistic(ctx: DetectorContext, batch) -> float:
    """Energy-only statistic used when no deterministic signal is sent."""
    _require_gc(ctx)
    z = _project(ctx, batch)
    gc = ctx.gamma_c
    return float(gc / (ctx.mr * ctx.sigma2_s * (1 + gc)) * np.sum(np.abs(z) ** 2))


def completed_square_statistic(ctx: DetectorContext, batch) -> float:
    """Same statistic written as a shifted energy minus a constant offset."""
    _require_gc(ctx)
    z = _project(ctx, batch)
    gc, gs, s2, mr, L = ctx.gamma_c, ctx.gamma_s, ctx.sigma2_s, ctx.mr, ctx.l_symbols
    shifted = np.sum(np.abs(z + mr / gc * ctx.det_coeffs) ** 2)
    return float(gc / (mr * s2 * (1 + gc)) * shifted - L * gs / ((1 + gc) * gc))


def matched_filter_statistic(ctx: DetectorContext, batch) -> float:
    """``Re sum c(l)^* b^H y(l)``: correlates only with the known waveform."""
    z = _project(ctx, batch)
    return float(np.real(np.sum(ctx.det_coeffs.conj() * z)))


def _slot_covariance(ctx):
    # per-slot covariance of the H1 echo: |alpha a^T w|^2 b b^H + sigma^2 I
    b = ctx.g.b_rx
    return abs(ctx.gain_w) ** 2 * np.outer(b, b.conj()) + ctx.sigma2_s * np.eye(ctx.mr)


def covariance_inverse_direct(ctx: DetectorContext) -> np.ndarray:
    """Dense inverse of ``C_q + sigma^2 I`` over all ``Mr L`` samples."""
    big = np.kron(np.eye(ctx.l_symbols), _slot_covariance(ctx) - ctx.sigma2_s * np.eye(ctx.mr))
    big += ctx.sigma2_s * np.eye(ctx.mr * ctx.l_symbols)
    return np.linalg.inv(big)


def covariance_inverse_woodbury(ctx: DetectorContext) -> np.ndarray:
    """Rank-one (Sherman-Morrison-Woodbury) form of the same inverse."""
    b = ctx.g.b_rx
    s2 = ctx.sigma2_s
    block = (np.eye(ctx.mr) - abs(ctx.gain_w) ** 2 * np.outer(b, b.conj()) / s2 / (1 + ctx.gamma_c)) / s2
    return np.kron(np.eye(ctx.l_symbols), block)


def _llr_parts(ctx):
    k = _slot_covariance(ctx)
    k_inv = np.linalg.inv(k)
    sign, logdet = np.linalg.slogdet(k)
    if sign <= 0:
        raise np.linalg.LinAlgError("echo covariance is not positive definite")
    u2 = np.outer(ctx.det_coeffs, ctx.g.b_rx)  # row l: alpha b a^T x0(l)
    return k_inv, logdet, u2


def llr_statistic(ctx: DetectorContext, batch) -> float:
    """Log-likelihood ratio ``ln p(y; H1) - ln p(y; H0)`` from the Gaussian densities.

    The stacked covariance is block diagonal (one ``Mr x Mr`` block per slot),
    so the quadratic forms and log-determinant are accumulated slot by slot.
    """
    y = batch.samples if isinstance(batch, EchoBatch) else np.asarray(batch)
    k_inv, logdet, u2 = _llr_parts(ctx)
    L, mr, s2 = ctx.l_symbols, ctx.mr, ctx.sigma2_s
    d = y - u2
    quad1 = np.real(np.einsum("li,ij,lj->", d.conj(), k_inv, d))
    quad0 = np.real(np.vdot(y, y)) / s2
    return float(-quad1 - L * logdet + quad0 + mr * L * np.log(s2))


def llr_offset(ctx: DetectorContext) -> float:
    """Constant ``c`` with ``np_statistic = llr_statistic + c`` (so ``ln delta = delta' - c``)."""
    k_inv, logdet, u2 = _llr_parts(ctx)
    quad = np.real(np.einsum("li,ij,lj->", u2.conj(), k_inv, u2))
    L, mr = ctx.l_symbols, ctx.mr
    return float(quad + L * logdet - mr * L * np.log(ctx.sigma2_s))


def wilson_interval(k: int, n: int, confidence: float = 0.95):
    ci = stats.binomtest(int(k), int(n)).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class MCResult:
    """Monte-Carlo exceedance rates with Wilson confidence intervals."""

    pfa_hat: float
    pd_hat: float
    pfa_ci: tuple
    pd_ci: tuple
    trials: int
    threshold: float
    detector: str

    @property
    def pfa_se(self) -> float:
        return float(np.sqrt(max(self.pfa_hat * (1 - self.pfa_hat), 1.0 / self.trials) / self.trials))

    @property
    def pd_se(self) -> float:
        return float(np.sqrt(max(self.pd_hat * (1 - self.pd_hat), 1.0 / self.trials) / self.trials))


def _projected_block(ctx, hypothesis, n, rng):
    L, mr, s2 = ctx.l_symbols, ctx.mr, ctx.sigma2_s
    # b^H n(l) ~ CN(0, Mr sigma^2) since ||b||^2 = Mr
    z = _cn(rng, (n, L), mr * s2)
    if hypothesis == H1:
        s = _cn(rng, (n, L))
        z += mr * (ctx.gain_w * s + ctx.det_coeffs)
    return z


def _count_block(ctx, detector, threshold, hypothesis, n, seed, block):
    rng = make_rng(seed, hypothesis, block, 0x3C)
    z = _projected_block(ctx, hypothesis, n, rng)
    if detector == "np":
        t = _np_from_z(ctx, z)
    else:
        t = np.real(z @ ctx.det_coeffs.conj())
    return int(np.count_nonzero(t >= threshold))


def mc_detect(ctx: DetectorContext, trials: int = 10_000, seed: int = 0, detector: str = "auto",
              threshold: Optional[float] = None, workers: int = 1, confidence: float = 0.95) -> MCResult:
    """Empirical false-alarm and detection rates of a detector.

    Parameters
    ----------
    detector : {"auto", "np", "mf"}
        ``"np"`` is the joint statistic at ``ctx.threshold``; ``"mf"`` the
        matched filter with its noise-only threshold.  ``"auto"`` picks
        ``"np"`` whenever ``ctx.threshold`` is defined.
    threshold : float, optional
        Override the decision threshold.
    workers : int
        Thread count; blocks are seeded by index so the counts do not depend on it.
    """
    if trials < 1000:
        raise ValueError("mc_detect needs at least 1000 trials")
    if detector == "auto":
        detector = "np" if ctx.threshold is not None else "mf"
    if detector not in ("np", "mf"):
        raise ValueError(f"unknown detector {detector!r}")
    if detector == "np":
        _require_gc(ctx)
    if threshold is None:
        threshold = ctx.threshold if detector == "np" else ctx.mf_threshold()
        if threshold is None:
            raise DegenerateContextError("no NP threshold at this operating point; use detector='mf'")

    sizes = [MC_BLOCK] * (trials // MC_BLOCK)
    if trials % MC_BLOCK:
        sizes.append(trials % MC_BLOCK)
    jobs = [(h, n, b) for h in (H0, H1) for b, n in enumerate(sizes)]

    def run(job):
        h, n, b = job
        return h, _count_block(ctx, detector, threshold, h, n, seed, b)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    k0 = sum(k for h, k in results if h == H0)
    k1 = sum(k for h, k in results if h == H1)
    return MCResult(k0 / trials, k1 / trials, wilson_interval(k0, trials, confidence),
                    wilson_interval(k1, trials, confidence), trials, float(threshold), detector)
