"""Transmit designs for joint UAV detection and downlink communication.

Every design returns a :class:`BeamformingSolution` holding the information
beam ``w`` (the Gaussian stream), the deterministic-signal covariance ``r0``
and per-grid-point sensing SNRs.  Internally the SDPs are posed on
power-normalized matrices ``W / P`` and ``R0 / P`` with grid weights
``kappa_q = Mr |alpha_q|^2 P / sigma_s^2``, so that the P2 epigraph variable
is directly ``min_q (gamma_c^2 + 2 gamma_s)``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import sdp
from .analysis import pd_min_safe
from .detection import DetectorContext, mc_detect
from .scenario import GridPoint, ScenarioConfig, cascade_gain, grid_points, make_rng, steering

__all__ = [
    "AffineFunctional",
    "BeamformingError",
    "BeamformingSolution",
    "DegenerateReconstructionWarning",
    "InfeasibleSinrError",
    "NoFeasibleRandomization",
    "SolverFailure",
    "benchmark_beampattern_gain",
    "benchmark_deterministic_only",
    "benchmark_mc_pd",
    "benchmark_time_switching",
    "closed_form_q1",
    "comm_sinr",
    "max_comm_snr",
    "rank_one_reconstruct",
    "sca_surrogate",
    "solution_from_json",
    "solution_to_json",
    "solve_p2",
    "solve_p3",
    "spectral_factor",
    "autocorrelation",
]

SDP_TOL = 1e-10
FEAS_TOL = 1e-9
RANK_TOL = 1e-6
# stalled solves up to this KKT score are used (flagged "loose-sdp"); thin feasible
# sets near the full-power SINR make the dual multiplier, and the residual floor, large
SDP_LOOSE = 1e-5


class BeamformingError(RuntimeError):
    pass


class InfeasibleSinrError(BeamformingError, ValueError):
    """The SINR target cannot be met even with all power on the UE."""


class SolverFailure(BeamformingError):
    def __init__(self, msg, trace=None, status=None):
        super().__init__(msg)
        self.trace = list(trace or [])
        self.status = status


class NoFeasibleRandomization(BeamformingError):
    def __init__(self, msg, upper_bound):
        super().__init__(msg)
        self.upper_bound = upper_bound


class DegenerateReconstructionWarning(RuntimeWarning):
    pass


@dataclass
class BeamformingSolution:
    """Transmit design and its sensing figures of merit.

    ``per_q`` rows are ``(gamma_c, gamma_s, term)`` where ``term`` is the
    scheme's own objective at that grid point; ``objective`` is its minimum.
    """

    w: np.ndarray
    r0: np.ndarray
    achieved_sinr: float
    per_q: list
    objective: float
    scheme: str
    gamma0: float = 0.0
    iterations: int = 0
    converged: bool = True
    trace: list = field(default_factory=list)
    active: list = field(default_factory=list)
    relaxation_bound: Optional[float] = None
    l_sense: Optional[int] = None
    flags: list = field(default_factory=list)

    @property
    def power_w(self) -> float:
        return float(np.real(np.vdot(self.w, self.w)))

    @property
    def power_r0(self) -> float:
        return float(np.real(np.trace(self.r0)))

    @property
    def gamma_c(self) -> np.ndarray:
        return np.array([r[0] for r in self.per_q])

    @property
    def gamma_s(self) -> np.ndarray:
        return np.array([r[1] for r in self.per_q])

    def pd_values(self, cfg: ScenarioConfig, l_symbols=None, pfa=None) -> np.ndarray:
        """Exact NP detection probability at every grid point."""
        L = self.l_sense if l_symbols is None and self.l_sense is not None else (l_symbols or cfg.l_symbols)
        pfa = cfg.pfa if pfa is None else pfa
        if L == 0:
            return np.full(len(self.per_q), pfa)
        return np.array([pd_min_safe(gc, gs, L, pfa) for gc, gs, _ in self.per_q])

    def min_pd(self, cfg: ScenarioConfig, l_symbols=None, pfa=None) -> float:
        return float(np.min(self.pd_values(cfg, l_symbols, pfa)))


# ---------------------------------------------------------------------------
# helpers

def comm_sinr(h, w, r0, sigma2_c: float) -> float:
    """``|h^H w|^2 / (h^H R0 h + sigma_c^2)``."""
    h = np.asarray(h)
    sig = abs(np.vdot(h, w)) ** 2
    intf = max(0.0, float(np.real(np.vdot(h, np.asarray(r0) @ h))))
    return float(sig / (intf + sigma2_c))


def max_comm_snr(cfg: ScenarioConfig, h) -> float:
    """SNR with all power beamformed at the UE, the largest feasible SINR target."""
    return float(cfg.p_max * np.real(np.vdot(h, h)) / cfg.sigma2_c)


def _check_sinr(cfg, h, gamma0):
    if gamma0 < 0:
        raise InfeasibleSinrError("SINR target must be non-negative")
    if gamma0 > max_comm_snr(cfg, h) * (1 + FEAS_TOL):
        raise InfeasibleSinrError(
            f"SINR target {gamma0:.6g} exceeds the full-power SNR {max_comm_snr(cfg, h):.6g}")


def _pinned_beam(cfg, h, gamma0):
    """Full-power beam on ``h`` when ``gamma0`` is the full-power SNR.

    There the feasible set is this single beam (up to phase) with ``R0 = 0``;
    it has no interior, so it is returned directly instead of solved for.
    """
    if gamma0 < max_comm_snr(cfg, h) * (1 - FEAS_TOL):
        return None
    return np.sqrt(cfg.p_max) * h / np.linalg.norm(h)


def _proj(a):
    # coefficient matrix a^* a^T, so that tr(W a^* a^T) = |a^T w|^2 for W = w w^H
    return np.outer(a.conj(), a)


def _kappa(cfg, grid):
    return np.array([cfg.mr * g.alpha2 * cfg.p_max / cfg.sigma2_s for g in grid])


def _quad(a, m):
    return float(np.real(a @ m @ a.conj()))


def _p2_terms(cfg, grid, w, r0):
    rows = []
    for g in grid:
        s = g.alpha2 * cfg.mr / cfg.sigma2_s
        gc = s * abs(g.a_tx @ w) ** 2
        gs = s * max(0.0, _quad(g.a_tx, r0))
        rows.append((float(gc), float(gs), float(gc**2 + 2 * gs)))
    return rows


def _p2_value_matrices(cfg, grid, W, R0):
    """``min_q gamma_c^2 + 2 gamma_s`` for matrix-valued (W, R0)."""
    vals = []
    for g in grid:
        s = g.alpha2 * cfg.mr / cfg.sigma2_s
        gc = s * _quad(g.a_tx, W)
        gs = s * _quad(g.a_tx, R0)
        vals.append(gc**2 + 2 * gs)
    return float(min(vals))


def _active(terms, rel=1e-6):
    lo = min(terms)
    return [i for i, t in enumerate(terms) if t <= lo + rel * max(abs(lo), 1e-300)]


def _grid(cfg, grid):
    return grid_points(cfg) if grid is None else list(grid)


def _kkt_score(sol):
    k = sol.kkt
    return max(k.primal_residual, k.dual_residual, min(k.gap, k.complementarity))


def _solve_sdp(p, what, trace=None):
    sol = sdp.solve(p, tol=SDP_TOL, max_iter=150)
    # a stalled solve is used when nearly feasible and complementary; _repair
    # removes the residual infeasibility
    if sol.status != "optimal" and not (sol.status == "max-iter" and _kkt_score(sol) <= SDP_LOOSE):
        raise SolverFailure(f"{what}: SDP status {sol.status}", trace, sol.status)
    return sol


def _loose(sol):
    return sol.status != "optimal" and _kkt_score(sol) > 1e-8


def _repair_tol(score):
    # near a vertex of a thin feasible set the beam error scales like sqrt(residual);
    # the target was already checked feasible, so this cannot mask infeasibility
    return 1e-6 if score <= 1e-8 else max(1e-6, float(np.sqrt(score)))


def _repair(cfg, h, gamma0, w, r0, max_rel=1e-6):
    """Remove round-off level power and SINR violations left by the SDP solver.

    Power is recovered from ``r0`` first (which only helps the SINR), then
    the UE interference ``h^H r0 h`` is trimmed, and finally ``w`` is
    rotated toward ``h``.  Violations larger than
    ``max_rel`` are left alone so that real infeasibility stays visible.
    """
    P = cfg.p_max
    pw, pr = float(np.real(np.vdot(w, w))), float(np.real(np.trace(r0)))
    excess = pw + pr - P
    if 0 < excess <= max_rel * P:
        if pr >= excess:
            r0 = r0 * ((pr - excess) / pr)
        else:
            r0 = np.zeros_like(r0)
            w = w * np.sqrt(P / pw)
    if gamma0 > 0:
        sig = abs(np.vdot(h, w)) ** 2
        intf = float(np.real(np.vdot(h, r0 @ h)))
        allowed = sig / gamma0 - cfg.sigma2_c
        if 0 < intf and allowed < intf and intf - allowed <= max_rel * (intf + cfg.sigma2_c):
            r0 = r0 * (max(allowed, 0.0) / intf)
            intf = float(np.real(np.vdot(h, r0 @ h)))
        need = np.sqrt(gamma0 * (max(intf, 0.0) + cfg.sigma2_c))
        have = abs(np.vdot(h, w))
        if need * (1 - max_rel) <= have < need:
            # what is left sits in w itself; turn it slightly toward h at fixed power
            rot = _rotate_toward(h, w, need)
            if rot is not None:
                w = rot
    return w, r0


def _rotate_toward(h, w, target):
    """``w`` turned inside ``span{w, h}`` at fixed norm until ``|h^H w| = target``, or None."""
    nw = np.linalg.norm(w)
    c1 = abs(np.vdot(h, w)) / nw if nw > 0 else 0.0
    if nw == 0 or c1 == 0:
        return None
    u = w / nw * (np.vdot(h, w).conj() / abs(np.vdot(h, w)))
    perp = h - np.vdot(u, h) * u
    c2 = np.linalg.norm(perp)
    if c2 == 0:
        return None
    e = perp / c2
    r = np.hypot(c1, c2)
    if target / nw > r:
        return None
    t = np.arctan2(c2, c1) - np.arccos(target / nw / r)
    # aim a hair past the target so round-off cannot leave it short
    t = min(np.arctan2(c2, c1), t + 1e-12)
    return nw * (np.cos(t) * u + np.sin(t) * e)


def _psd_part(m):
    m = 0.5 * (m + m.conj().T)
    e, v = np.linalg.eigh(m)
    return (v * np.maximum(e, 0.0)) @ v.conj().T


# ---------------------------------------------------------------------------
# surrogate and reconstruction

@dataclass(frozen=True)
class AffineFunctional:
    """``W -> Re tr(coeff W) + const``."""

    coeff: np.ndarray
    const: float

    def __call__(self, W) -> float:
        return float(np.real(np.trace(self.coeff @ np.asarray(W)))) + self.const


def sca_surrogate(Wk, a) -> AffineFunctional:
    """First-order lower bound of ``f(W) = tr^2(W a^* a^T)`` around ``Wk``.

    ``f~(W) = 2 tr(Wk A) tr(W A) - tr^2(Wk A)`` with ``A = a^* a^T``.
    """
    A = _proj(np.asarray(a))
    c = float(np.real(np.trace(np.asarray(Wk) @ A)))
    return AffineFunctional(2.0 * c * A, -c * c)


def rank_one_reconstruct(W, R0, h):
    """Rank-one information beam from a relaxed ``(W, R0)`` pair.

    ``w = W h / sqrt(h^H W h)`` and ``r0 = R0 + W - w w^H``; the useful
    signal power ``|h^H w|^2 = h^H W h``, the UE interference and the total
    power are all preserved.  If ``h^H W h`` vanishes the dominant
    eigenvector of ``W`` is used instead and a
    :class:`DegenerateReconstructionWarning` is issued.
    """
    W = 0.5 * (np.asarray(W) + np.asarray(W).conj().T)
    R0 = np.asarray(R0)
    h = np.asarray(h)
    hwh = float(np.real(np.vdot(h, W @ h)))
    scale = max(float(np.real(np.trace(W))), 1e-300) * float(np.real(np.vdot(h, h)))
    if hwh > 1e-14 * scale:
        w = W @ h / np.sqrt(hwh)
    else:
        warnings.warn("h^H W h vanishes; using the dominant eigenvector", DegenerateReconstructionWarning,
                      stacklevel=2)
        e, v = np.linalg.eigh(W)
        w = np.sqrt(max(e[-1], 0.0)) * v[:, -1]
    rest = W - np.outer(w, w.conj())
    r0 = R0 + _psd_part(rest)
    return w, 0.5 * (r0 + r0.conj().T)


# ---------------------------------------------------------------------------
# P2: superimposed signals, successive convex approximation

def _p2k_problem(cfg, h, grid, gamma0, Wk_hat):
    n = cfg.mt
    kap = _kappa(cfg, grid)
    hh = np.outer(h, h.conj()) / np.real(np.vdot(h, h))
    p = sdp.SdpProblem().add_block("W", n).add_block("R0", n).add_scalar("t")
    p.set_objective(scalars={"t": 1.0}, sense="max")
    for k, g in zip(kap, grid):
        sur = sca_surrogate(Wk_hat, g.a_tx)
        A = _proj(g.a_tx)
        # kappa^2 f~(W) + 2 kappa tr(R0 A) - t >= 0
        p.add_constraint({"W": k**2 * sur.coeff, "R0": 2 * k * A}, ">=", -(k**2) * sur.const,
                         scalars={"t": -1.0}, label=f"q{g.index}")
    _add_comm_constraints(p, cfg, h, hh, gamma0)
    return p


def _add_comm_constraints(p, cfg, h, hh, gamma0, with_r0=True):
    coeffs = {"W": hh}
    if with_r0:
        coeffs["R0"] = -gamma0 * hh
    rhs = gamma0 * cfg.sigma2_c / (cfg.p_max * np.real(np.vdot(h, h)))
    p.add_constraint(coeffs, ">=", rhs, label="sinr")
    n = cfg.mt
    power = {"W": np.eye(n)}
    if with_r0:
        power["R0"] = np.eye(n)
    p.add_constraint(power, "<=", 1.0, label="power")


def _init_matrix(cfg, h, grid, init):
    if isinstance(init, np.ndarray):
        v = init if init.ndim == 1 else np.linalg.eigh(init)[1][:, -1]
    elif init == "midpoint":
        phi, _ = _grid_mid(grid)
        v = steering(cfg.mt, cfg.spacing_over_lambda, phi).conj()
    elif init == "channel":
        v = np.asarray(h)
    else:
        raise ValueError(f"unknown init {init!r}")
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


def _grid_mid(grid):
    phis = np.array([g.phi for g in grid])
    thetas = np.array([g.theta for g in grid])
    return 0.5 * (phis.min() + phis.max()), 0.5 * (thetas.min() + thetas.max())


def _sca_run(cfg, h, grid, gamma0, W1, tol, max_outer):
    Wk = W1
    trace = []
    best = None
    converged = False
    worst = 0.0
    it = 0
    for it in range(1, max_outer + 1):
        sol = _solve_sdp(_p2k_problem(cfg, h, grid, gamma0, Wk), f"SCA iteration {it}", trace)
        if _loose(sol):
            worst = max(worst, _kkt_score(sol))
        W_hat, R_hat = sol.blocks["W"], sol.blocks["R0"]
        val = _p2_value_matrices(cfg, grid, cfg.p_max * W_hat, cfg.p_max * R_hat)
        if trace and val < trace[-1]:
            # a decrease can only come from solver round-off; stop at the previous point
            converged = (trace[-1] - val) <= 1e-7 * abs(trace[-1])
            break
        prev = trace[-1] if trace else None
        trace.append(val)
        best = (W_hat, R_hat)
        Wk = W_hat
        if prev is not None and abs(val - prev) <= tol * max(abs(prev), 1e-300):
            converged = True
            break
    return best, trace, converged, it, worst


def solve_p2(cfg: ScenarioConfig, h, grid=None, init="both", tol: float = 1e-6, max_outer: int = 50,
             gamma0: Optional[float] = None) -> BeamformingSolution:
    """Maximize ``min_q gamma_c^2 + 2 gamma_s`` under the SINR and power limits.

    Parameters
    ----------
    init : {"both", "midpoint", "channel"} or ndarray
        Starting beam of the SCA.  ``"both"`` runs from the grid-midpoint
        steering vector and from ``h`` and keeps the better design.
    tol : float
        Relative objective change that ends the SCA.
    gamma0 : float, optional
        Linear SINR target; defaults to ``cfg.gamma0``.
    """
    grid = _grid(cfg, grid)
    h = np.asarray(h, dtype=complex)
    gamma0 = cfg.gamma0 if gamma0 is None else float(gamma0)
    _check_sinr(cfg, h, gamma0)
    pinned = _pinned_beam(cfg, h, gamma0)
    if pinned is not None:
        r0 = np.zeros((cfg.mt, cfg.mt), dtype=complex)
        terms = _p2_terms(cfg, grid, pinned, r0)
        return BeamformingSolution(pinned, r0, comm_sinr(h, pinned, r0, cfg.sigma2_c), terms,
                                   min(t for *_, t in terms), "proposed", gamma0, 0, True, [],
                                   _active([t for *_, t in terms]), None, None, ["pinned"])
    starts = ["midpoint", "channel"] if isinstance(init, str) and init == "both" else [init]
    results = []
    for s in starts:
        W1 = _init_matrix(cfg, h, grid, s)
        (W_hat, R_hat), trace, conv, it, worst = _sca_run(cfg, h, grid, gamma0, W1, tol, max_outer)
        flags = ["loose-sdp"] if worst else []
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", DegenerateReconstructionWarning)
            w, r0 = rank_one_reconstruct(cfg.p_max * W_hat, cfg.p_max * R_hat, h)
        w, r0 = _repair(cfg, h, gamma0, w, r0, _repair_tol(worst))
        if caught:
            flags.append("degenerate-reconstruction")
        # with (almost) no power in W the rank only measures solver noise
        if np.real(np.trace(W_hat)) > RANK_TOL and sdp.numerical_rank(W_hat, RANK_TOL) > 1:
            flags.append("reconstructed")
        terms = _p2_terms(cfg, grid, w, r0)
        obj = min(t for _, _, t in terms)
        sol = BeamformingSolution(w, r0, comm_sinr(h, w, r0, cfg.sigma2_c), terms, obj, "proposed",
                                  gamma0, it, conv, trace, _active([t for *_, t in terms]), None, None,
                                  flags + [f"init={s if isinstance(s, str) else 'custom'}"])
        results.append(sol)
    return max(results, key=lambda s: s.objective)


# ---------------------------------------------------------------------------
# P3: Gaussian signals only

def _p3_problem(cfg, h, grid, gamma0):
    n = cfg.mt
    a2 = np.array([g.alpha2 for g in grid])
    ref = a2.max()
    hh = np.outer(h, h.conj()) / np.real(np.vdot(h, h))
    p = sdp.SdpProblem().add_block("W", n).add_scalar("u")
    p.set_objective(scalars={"u": 1.0}, sense="max")
    for g in grid:
        p.add_constraint({"W": (g.alpha2 / ref) * _proj(g.a_tx)}, ">=", 0.0, scalars={"u": -1.0},
                         label=f"q{g.index}")
    _add_comm_constraints(p, cfg, h, hh, gamma0, with_r0=False)
    return p, ref * cfg.p_max


def _p3_value(grid, w):
    return [g.alpha2 * abs(g.a_tx @ w) ** 2 for g in grid]


def _p3_candidate(cfg, h, gamma0, v, max_rel=1e-6):
    """Best feasible beam along direction ``v``, or None.

    The SNR-tight rescaling ``sqrt(sigma_c^2 gamma0 / |h^H v|^2) v`` is
    feasible iff it fits in the power budget; the objective grows with
    ``||w||``, so the best feasible scaling uses all of ``P``.  A shortfall
    below ``max_rel`` (solver round-off) is closed by :func:`_rotate_toward`.
    """
    nv = np.linalg.norm(v)
    if nv == 0:
        return None
    P = cfg.p_max
    u = v / nv
    target = np.sqrt(gamma0 * cfg.sigma2_c / P)  # required |h^H u|
    c1 = abs(np.vdot(h, u))
    if c1 >= target * (1 - FEAS_TOL):
        return np.sqrt(P) * u
    if c1 < target * (1 - max_rel):
        return None
    w = _rotate_toward(h, np.sqrt(P) * u, np.sqrt(P) * target)
    if w is None:
        return None
    return w if abs(np.vdot(h, w)) ** 2 >= gamma0 * cfg.sigma2_c * (1 - FEAS_TOL) else None


def autocorrelation(W) -> np.ndarray:
    """Diagonal sums ``r_d = sum_{k-l=d} W_kl`` for ``d = 0 .. n-1``."""
    W = np.asarray(W)
    n = W.shape[0]
    return np.array([np.trace(W, offset=-d) for d in range(n)])


def spectral_factor(W) -> np.ndarray:
    """Vector ``w`` whose ``w w^H`` has the same diagonal sums as PSD ``W``.

    For a uniform linear array every quadratic form ``a^T W a^*`` with a
    steering vector ``a`` depends on ``W`` only through these sums, which
    are the coefficients of the non-negative trigonometric polynomial
    ``a(omega)^T W a(omega)^*``.  Its Fejer-Riesz factor is a rank-one
    matrix with identical constraint values.
    """
    r = autocorrelation(W)
    n = len(r)
    if n == 1:
        return np.array([np.sqrt(max(r[0].real, 0.0))], dtype=complex)
    # z^(n-1) R(z), coefficients from the highest power: r_{n-1}, ..., r_0, ..., conj(r_{n-1})
    coeffs = np.concatenate([r[::-1], r[1:].conj()])
    roots = np.roots(coeffs)
    mod = np.abs(roots)
    off = np.abs(np.log(np.maximum(mod, 1e-300))) > 1e-4
    inside = list(roots[off & (mod < 1)])
    ring = roots[~off]
    ring = ring[np.argsort(np.angle(ring))]
    # roots on the unit circle are double; keep one of each neighbouring pair
    inside += list(ring[0::2][: n - 1 - len(inside)])
    if len(inside) != n - 1:
        raise ValueError("spectral factorization failed")
    w = np.poly(inside)[::-1]  # coefficient of z^k at index k
    w = w * np.sqrt(max(r[0].real, 0.0) / np.sum(np.abs(w) ** 2))
    return w


def _p3_solution(cfg, h, grid, gamma0, w, scheme, bound, flags, it=0):
    r0 = np.zeros((cfg.mt, cfg.mt), dtype=complex)
    vals = _p3_value(grid, w)
    per_q = []
    for g, t in zip(grid, vals):
        s = cfg.mr / cfg.sigma2_s
        per_q.append((float(s * t), 0.0, float(t)))
    return BeamformingSolution(w, r0, comm_sinr(h, w, r0, cfg.sigma2_c), per_q, float(min(vals)), scheme,
                               gamma0, it, True, [], _active(vals), bound, None, flags)


def solve_p3(cfg: ScenarioConfig, h, grid=None, n_randomizations: int = 1000,
             gamma0: Optional[float] = None, rng=None) -> BeamformingSolution:
    """Gaussian-only design: maximize ``min_q |alpha_q|^2 |a_q^T w|^2``.

    The relaxed SDP is solved first; its optimum is stored as
    ``relaxation_bound``.  A numerically rank-one optimum yields the beam
    directly.  Otherwise the interior-point method has returned a
    higher-rank point of the optimal face; the spectral factor of ``W``
    (exact when the channel is line-of-sight) and Gaussian randomization
    supply further candidates.  The dominant eigenvector is always one.
    """
    grid = _grid(cfg, grid)
    h = np.asarray(h, dtype=complex)
    gamma0 = cfg.gamma0 if gamma0 is None else float(gamma0)
    _check_sinr(cfg, h, gamma0)
    pinned = _pinned_beam(cfg, h, gamma0)
    if pinned is not None:
        return _p3_solution(cfg, h, grid, gamma0, pinned, "gaussian-only",
                            float(min(_p3_value(grid, pinned))), ["pinned"])
    p, scale = _p3_problem(cfg, h, grid, gamma0)
    sol = _solve_sdp(p, "P3 relaxation")
    bound = sol.scalars["u"] * scale
    W = sol.blocks["W"]
    e, v = np.linalg.eigh(W)
    tol = _repair_tol(_kkt_score(sol))
    cands = []
    c = _p3_candidate(cfg, h, gamma0, v[:, -1], tol)
    if c is not None:
        cands.append(c)
    flags = ["loose-sdp"] if _loose(sol) else []
    spectral = None
    if sdp.numerical_rank(W, RANK_TOL) > 1:
        try:
            spectral = _p3_candidate(cfg, h, gamma0, spectral_factor(W), tol)
        except (ValueError, np.linalg.LinAlgError):
            spectral = None
        if spectral is not None:
            cands.append(spectral)
        rng = make_rng(cfg.rng_seed, 0x93) if rng is None else rng
        root = v * np.sqrt(np.maximum(e, 0.0))
        z = (rng.standard_normal((n_randomizations, cfg.mt))
             + 1j * rng.standard_normal((n_randomizations, cfg.mt))) / np.sqrt(2)
        for vv in z @ root.T:
            c = _p3_candidate(cfg, h, gamma0, vv, tol)
            if c is not None:
                cands.append(c)
    if not cands:
        raise NoFeasibleRandomization("no feasible rank-one candidate", bound)
    best = max(cands, key=lambda w: min(_p3_value(grid, w)))
    if len(cands) > 1:
        flags.append("spectral-factor" if best is spectral else "randomized")
    return _p3_solution(cfg, h, grid, gamma0, best, "gaussian-only", bound, flags, sol.iterations)


def closed_form_q1(cfg: ScenarioConfig, h, a1, gamma0: Optional[float] = None) -> BeamformingSolution:
    """KKT solution of the Gaussian-only design for a single grid point.

    ``a1`` is a :class:`GridPoint` or a transmit steering vector (then the
    config's cascade gain is used).
    """
    h = np.asarray(h, dtype=complex)
    if isinstance(a1, GridPoint):
        g = a1
    else:
        a1 = np.asarray(a1, dtype=complex)
        g = GridPoint(0, 0.0, 0.0, cascade_gain(cfg, 0), a1, np.ones(cfg.mr, dtype=complex))
    gamma0 = cfg.gamma0 if gamma0 is None else float(gamma0)
    _check_sinr(cfg, h, gamma0)
    P, s2, mt = cfg.p_max, cfg.sigma2_c, len(g.a_tx)
    ac = g.a_tx.conj()
    hn2 = float(np.real(np.vdot(h, h)))
    ha = abs(np.vdot(h, ac))
    boundary = P * ha**2 / (mt * s2)
    e1 = h / np.sqrt(hn2)
    resid = ac - np.vdot(e1, ac) * e1
    if gamma0 <= boundary or np.linalg.norm(resid) <= 1e-12 * np.linalg.norm(ac):
        w = np.sqrt(P) * ac / np.linalg.norm(ac)
        branch = "sensing"
    else:
        e2 = resid / np.linalg.norm(resid)
        d1 = np.vdot(e1, ac)
        d2 = np.vdot(e2, ac)
        ph1 = d1 / abs(d1) if abs(d1) > 0 else 1.0
        ph2 = d2 / abs(d2)
        x1 = np.sqrt(gamma0 * s2 / hn2) * ph1
        x2 = np.sqrt(max(P - gamma0 * s2 / hn2, 0.0)) * ph2
        w = x1 * e1 + x2 * e2
        branch = "mixed"
    return _p3_solution(cfg, h, [g], gamma0, w, "closed-form-q1", None, [f"branch={branch}"])


def closed_form_q1_power(cfg: ScenarioConfig, h, a1, gamma0: float) -> float:
    """Optimal beampattern power ``|a1^T w|^2`` of the single-point design."""
    h = np.asarray(h, dtype=complex)
    a1 = a1.a_tx if isinstance(a1, GridPoint) else np.asarray(a1)
    P, s2, mt = cfg.p_max, cfg.sigma2_c, len(a1)
    hn2 = float(np.real(np.vdot(h, h)))
    ha2 = abs(np.vdot(h, a1.conj())) ** 2
    if gamma0 <= P * ha2 / (mt * s2):
        return P * mt
    return (np.sqrt(gamma0 * s2 * ha2) / hn2
            + np.sqrt(max(P - gamma0 * s2 / hn2, 0.0) * max(mt - ha2 / hn2, 0.0))) ** 2


# ---------------------------------------------------------------------------
# benchmarks

def benchmark_deterministic_only(cfg: ScenarioConfig, h, grid=None,
                                 gamma0: Optional[float] = None) -> BeamformingSolution:
    """Maximize the weakest deterministic echo power ``min_q |alpha_q|^2 a_q^T R0 a_q^*``.

    The receiver of this scheme is a matched filter that treats the
    Gaussian echo as interference; score it with :func:`benchmark_mc_pd`.
    """
    grid = _grid(cfg, grid)
    h = np.asarray(h, dtype=complex)
    gamma0 = cfg.gamma0 if gamma0 is None else float(gamma0)
    _check_sinr(cfg, h, gamma0)
    pinned = _pinned_beam(cfg, h, gamma0)
    if pinned is not None:
        return _benchmark_solution(cfg, h, grid, gamma0, pinned, np.zeros((cfg.mt, cfg.mt), dtype=complex),
                                   "deterministic-only", [0.0] * len(grid), 0)
    n = cfg.mt
    a2 = np.array([g.alpha2 for g in grid])
    ref = a2.max()
    hh = np.outer(h, h.conj()) / np.real(np.vdot(h, h))
    p = sdp.SdpProblem().add_block("W", n).add_block("R0", n).add_scalar("t")
    p.set_objective(scalars={"t": 1.0})
    for g in grid:
        p.add_constraint({"R0": (g.alpha2 / ref) * _proj(g.a_tx)}, ">=", 0.0, scalars={"t": -1.0},
                         label=f"q{g.index}")
    _add_comm_constraints(p, cfg, h, hh, gamma0)
    sol = _solve_sdp(p, "deterministic-only benchmark")
    w, r0 = rank_one_reconstruct(cfg.p_max * sol.blocks["W"], cfg.p_max * sol.blocks["R0"], h)
    w, r0 = _repair(cfg, h, gamma0, w, r0, _repair_tol(_kkt_score(sol)))
    return _benchmark_solution(cfg, h, grid, gamma0, w, r0, "deterministic-only",
                               [g.alpha2 * max(0.0, _quad(g.a_tx, r0)) for g in grid], sol.iterations,
                               ["loose-sdp"] if _loose(sol) else [])


def _benchmark_solution(cfg, h, grid, gamma0, w, r0, scheme, terms, it, flags=()):
    per_q = [(gc, gs, float(t)) for (gc, gs, _), t in zip(_p2_terms(cfg, grid, w, r0), terms)]
    return BeamformingSolution(w, r0, comm_sinr(h, w, r0, cfg.sigma2_c), per_q, float(min(terms)), scheme,
                               gamma0, it, True, [], _active(terms), flags=list(flags))


def benchmark_beampattern_gain(cfg: ScenarioConfig, h, grid=None,
                               gamma0: Optional[float] = None) -> BeamformingSolution:
    """Maximize the weakest transmit beampattern gain ``min_q a_q^T (W + R0) a_q^*``.

    The objective does not distinguish the two signal types; the split of
    power between them is the one the interior-point path converges to
    (the analytic center of the optimal face).
    """
    grid = _grid(cfg, grid)
    h = np.asarray(h, dtype=complex)
    gamma0 = cfg.gamma0 if gamma0 is None else float(gamma0)
    _check_sinr(cfg, h, gamma0)
    pinned = _pinned_beam(cfg, h, gamma0)
    if pinned is not None:
        return _benchmark_solution(cfg, h, grid, gamma0, pinned, np.zeros((cfg.mt, cfg.mt), dtype=complex),
                                   "beampattern-gain", [_quad(g.a_tx, np.outer(pinned, pinned.conj()))
                                                        for g in grid], 0)
    n = cfg.mt
    hh = np.outer(h, h.conj()) / np.real(np.vdot(h, h))
    p = sdp.SdpProblem().add_block("W", n).add_block("R0", n).add_scalar("t")
    p.set_objective(scalars={"t": 1.0})
    for g in grid:
        A = _proj(g.a_tx) / n
        p.add_constraint({"W": A, "R0": A}, ">=", 0.0, scalars={"t": -1.0}, label=f"q{g.index}")
    _add_comm_constraints(p, cfg, h, hh, gamma0)
    sol = _solve_sdp(p, "beampattern benchmark")
    w, r0 = rank_one_reconstruct(cfg.p_max * sol.blocks["W"], cfg.p_max * sol.blocks["R0"], h)
    w, r0 = _repair(cfg, h, gamma0, w, r0, _repair_tol(_kkt_score(sol)))
    cov = np.outer(w, w.conj()) + r0
    return _benchmark_solution(cfg, h, grid, gamma0, w, r0, "beampattern-gain",
                               [_quad(g.a_tx, cov) for g in grid], sol.iterations,
                               ["loose-sdp"] if _loose(sol) else [])


def benchmark_time_switching(cfg: ScenarioConfig, h, grid=None, rate_req: float = 0.0):
    """Time-division benchmark.

    The UE is served at full power for ``L_c`` slots, the smallest count with
    ``(L_c / L) log2(1 + SNR_max) >= rate_req``; the remaining ``L_s`` slots
    carry a full-power deterministic beam toward the grid midpoint.

    Returns
    -------
    l_s, l_c : int
    solution : BeamformingSolution
        Sensing-phase design (``w = 0``); ``l_sense`` is set to ``l_s`` and
        ``achieved_sinr`` is the communication-phase SNR.
    """
    grid = _grid(cfg, grid)
    h = np.asarray(h, dtype=complex)
    L = cfg.l_symbols
    snr = max_comm_snr(cfg, h)
    full = math.log2(1 + snr)
    if rate_req < 0 or rate_req > full * (1 + 1e-12):
        raise InfeasibleSinrError(f"rate {rate_req:.6g} exceeds the full-time rate {full:.6g} bits/s/Hz")
    l_c = min(L, max(0, math.ceil(L * rate_req / full - 1e-9)))
    l_s = L - l_c
    phi, _ = _grid_mid(grid)
    a_mid = steering(cfg.mt, cfg.spacing_over_lambda, phi)
    r0 = cfg.p_max * np.outer(a_mid.conj(), a_mid) / cfg.mt
    w = np.zeros(cfg.mt, dtype=complex)
    per_q = _p2_terms(cfg, grid, w, r0)
    sol = BeamformingSolution(w, r0, snr, per_q, float(min(t for *_, t in per_q)), "time-switching",
                              float(2 ** rate_req - 1), 0, True, [], _active([t for *_, t in per_q]),
                              None, l_s, [f"l_c={l_c}"])
    return l_s, l_c, sol


def benchmark_mc_pd(cfg: ScenarioConfig, sol: BeamformingSolution, grid=None, trials: int = 2000,
                    seed: int = 0, points=None, confidence: float = 0.95):
    """Monte-Carlo matched-filter detection rate of a design, minimized over grid points.

    Returns
    -------
    pd_hat, (ci_low, ci_high), q_worst
        Estimate and Wilson interval at the grid point with the lowest
        estimated detection rate.
    """
    grid = _grid(cfg, grid)
    idx = range(len(grid)) if points is None else points
    worst = None
    for q in idx:
        ctx = DetectorContext.from_design(grid[q], sol.w, sol.r0, cfg, seed=seed)
        res = mc_detect(ctx, trials=trials, seed=seed + q, detector="mf", confidence=confidence)
        if worst is None or res.pd_hat < worst[0]:
            worst = (res.pd_hat, res.pd_ci, q)
    return worst


# ---------------------------------------------------------------------------
# JSON

def _cvec(v):
    v = np.asarray(v, dtype=complex).ravel()
    out = np.empty(2 * v.size)
    out[0::2], out[1::2] = v.real, v.imag
    return out.tolist()


def _uncvec(x):
    x = np.asarray(x, dtype=float)
    return x[0::2] + 1j * x[1::2]


def solution_to_json(sol: BeamformingSolution) -> str:
    """Serialize a design.

    ``w`` is stored as interleaved ``[re0, im0, re1, im1, ...]``; ``r0`` as
    its lower triangle in row-major order, also interleaved.
    """
    n = sol.r0.shape[0]
    il = np.tril_indices(n)
    doc = {
        "format": "isaclab-beamforming-v1",
        "scheme": sol.scheme,
        "mt": int(n),
        "w": _cvec(sol.w),
        "r0_lower": _cvec(sol.r0[il]),
        "achieved_sinr": sol.achieved_sinr,
        "gamma0": sol.gamma0,
        "objective": sol.objective,
        "per_q": [list(r) for r in sol.per_q],
        "iterations": sol.iterations,
        "converged": sol.converged,
        "trace": list(sol.trace),
        "active": list(sol.active),
        "relaxation_bound": sol.relaxation_bound,
        "l_sense": sol.l_sense,
        "flags": list(sol.flags),
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def solution_from_json(text: str) -> BeamformingSolution:
    doc = json.loads(text)
    if doc.get("format") != "isaclab-beamforming-v1":
        raise ValueError("not a beamforming solution document")
    n = doc["mt"]
    lower = _uncvec(doc["r0_lower"])
    r0 = np.zeros((n, n), dtype=complex)
    r0[np.tril_indices(n)] = lower
    r0 = r0 + np.tril(r0, -1).conj().T
    return BeamformingSolution(_uncvec(doc["w"]), r0, doc["achieved_sinr"], [tuple(r) for r in doc["per_q"]],
                               doc["objective"], doc["scheme"], doc["gamma0"], doc["iterations"],
                               doc["converged"], doc["trace"], doc["active"], doc["relaxation_bound"],
                               doc["l_sense"], doc["flags"])
