"""Small dense semidefinite programs over Hermitian blocks.

Problems are stated over complex Hermitian PSD blocks plus free real
scalars, with constraints ``sum_b Re tr(A_b X_b) + sum c_k t_k (<=|=|>=) rhs``
and a linear objective.  Each Hermitian block is mapped to a real symmetric
block of twice the size (:func:`complex_embed`) and inequalities get slack
variables.  Free scalars stay unrestricted and enter the Newton system as a
small saddle-point block.  The resulting standard-form cone program is solved by an infeasible-start primal-dual
path-following method with Nesterov-Todd scaling and Mehrotra
predictor-corrector steps.

Reported residuals refer to the row-equilibrated problem (the coefficients
of every constraint row scaled to unit Frobenius norm before slacks are added), which makes them invariant to how the
caller scales individual constraints.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

__all__ = [
    "Block",
    "Constraint",
    "KKT",
    "SdpProblem",
    "SdpSolution",
    "complex_embed",
    "complex_extract",
    "dump_problem",
    "load_problem",
    "numerical_rank",
    "solve",
]

_STEP = 0.98
_INFEAS_LIMIT = 1e12


def complex_embed(h) -> np.ndarray:
    """Real symmetric embedding ``[[Re H, -Im H], [Im H, Re H]]`` of a Hermitian matrix."""
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("expected a square matrix")
    scale = max(1.0, float(np.max(np.abs(h)))) if h.size else 1.0
    if np.max(np.abs(h - h.conj().T), initial=0.0) > 1e-10 * scale:
        raise ValueError("matrix is not Hermitian")
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])


def complex_extract(y) -> np.ndarray:
    """Hermitian matrix whose embedding is the projection of ``y`` onto embedded form."""
    y = np.asarray(y, dtype=float)
    n = y.shape[0] // 2
    y11, y12, y21, y22 = y[:n, :n], y[:n, n:], y[n:, :n], y[n:, n:]
    h = 0.5 * (y11 + y22) + 0.5j * (y21 - y12)
    return 0.5 * (h + h.conj().T)


def numerical_rank(x, rel_tol: float = 1e-6) -> int:
    """Number of singular values above ``rel_tol`` times the largest."""
    s = np.linalg.svd(np.asarray(x), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > rel_tol * s[0]))


@dataclass(frozen=True)
class Block:
    name: str
    dim: int
    hermitian: bool = True


@dataclass
class Constraint:
    """``sum_b Re tr(coeffs[b] X_b) + sum_k scalars[k] t_k  sense  rhs``."""

    coeffs: dict
    sense: str
    rhs: float
    scalars: dict = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        if self.sense not in ("<=", "=", ">="):
            raise ValueError(f"sense must be '<=', '=' or '>=', got {self.sense!r}")


@dataclass
class SdpProblem:
    """Linear objective over Hermitian PSD blocks and free scalars."""

    blocks: list = field(default_factory=list)
    scalars: list = field(default_factory=list)
    constraints: list = field(default_factory=list)
    objective: dict = field(default_factory=dict)
    objective_scalars: dict = field(default_factory=dict)
    sense: str = "max"

    def add_block(self, name: str, dim: int, hermitian: bool = True) -> "SdpProblem":
        self.blocks.append(Block(name, int(dim), hermitian))
        return self

    def add_scalar(self, name: str) -> "SdpProblem":
        self.scalars.append(name)
        return self

    def add_constraint(self, coeffs, sense, rhs, scalars=None, label="") -> "SdpProblem":
        self.constraints.append(Constraint(dict(coeffs), sense, float(rhs), dict(scalars or {}), label))
        return self

    def set_objective(self, coeffs=None, scalars=None, sense="max") -> "SdpProblem":
        if sense not in ("max", "min"):
            raise ValueError("sense must be 'max' or 'min'")
        self.objective = dict(coeffs or {})
        self.objective_scalars = dict(scalars or {})
        self.sense = sense
        return self

    def block(self, name) -> Block:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)

    def validate(self):
        names = [b.name for b in self.blocks]
        if len(set(names)) != len(names) or set(names) & set(self.scalars):
            raise ValueError("block and scalar names must be unique")
        for c in list(self.constraints) + [Constraint(self.objective, "=", 0.0, self.objective_scalars)]:
            for name, mat in c.coeffs.items():
                b = self.block(name)
                mat = np.asarray(mat)
                if mat.shape != (b.dim, b.dim):
                    raise ValueError(f"coefficient for {name} has shape {mat.shape}, expected {(b.dim, b.dim)}")
                if not np.allclose(mat, mat.conj().T, atol=1e-10 * max(1.0, np.abs(mat).max())):
                    raise ValueError(f"coefficient for {name} is not Hermitian")
            for name in c.scalars:
                if name not in self.scalars:
                    raise KeyError(name)


@dataclass
class KKT:
    """Optimality measures on the row-equilibrated problem.

    ``gap`` is the relative objective difference; ``complementarity`` is
    ``<X, S> / (1 + |pobj| + |dobj|)``.  They differ by ``y^T r_p``, which
    matters when a dual multiplier is large.
    """

    primal_residual: float
    dual_residual: float
    gap: float
    min_eig: dict
    complementarity: float = 0.0


@dataclass
class SdpSolution:
    """Solver output; ``blocks`` are Hermitian PSD matrices keyed by block name."""

    status: str
    blocks: dict
    scalars: dict
    duals: np.ndarray
    objective: float
    dual_objective: float
    kkt: KKT
    iterations: int
    history: list = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


# ---------------------------------------------------------------------------
# standard form

@dataclass
class _StdForm:
    sizes: list          # PSD block sizes (real)
    A: list              # per PSD block: (m, n, n)
    A_lp: np.ndarray     # (m, n_lp) slack columns
    B: np.ndarray        # (m, n_free) free-scalar columns
    b: np.ndarray
    C: list
    c_lp: np.ndarray
    c_free: np.ndarray
    row_scale: np.ndarray
    obj_scale: float


def _embed_coeff(mat, hermitian):
    mat = np.asarray(mat)
    if hermitian:
        # Re tr(A X) = tr(embed(A) embed(X)) / 2
        return 0.5 * complex_embed(0.5 * (mat + mat.conj().T))
    return 0.5 * (mat + mat.T).real


def _to_standard(p: SdpProblem) -> _StdForm:
    p.validate()
    m = len(p.constraints)
    sizes = [2 * b.dim if b.hermitian else b.dim for b in p.blocks]
    A = [np.zeros((m, n, n)) for n in sizes]
    n_lp = sum(1 for c in p.constraints if c.sense != "=")
    A_lp = np.zeros((m, n_lp))
    B = np.zeros((m, len(p.scalars)))
    b = np.zeros(m)
    bidx = {blk.name: k for k, blk in enumerate(p.blocks)}
    sidx = {name: k for k, name in enumerate(p.scalars)}
    slack = 0
    for i, c in enumerate(p.constraints):
        for name, mat in c.coeffs.items():
            k = bidx[name]
            A[k][i] = _embed_coeff(mat, p.blocks[k].hermitian)
        for name, v in c.scalars.items():
            B[i, sidx[name]] = v
        if c.sense == "<=":
            A_lp[i, slack] = 1.0
            slack += 1
        elif c.sense == ">=":
            A_lp[i, slack] = -1.0
            slack += 1
        b[i] = c.rhs
    sign = -1.0 if p.sense == "max" else 1.0
    C = [np.zeros((n, n)) for n in sizes]
    for name, mat in p.objective.items():
        k = bidx[name]
        C[k] = sign * _embed_coeff(mat, p.blocks[k].hermitian)
    c_lp = np.zeros(n_lp)
    c_free = np.zeros(len(p.scalars))
    for name, v in p.objective_scalars.items():
        c_free[sidx[name]] = sign * v

    # row equilibration on the caller's coefficients; slacks keep unit weight so that
    # rescaled copies of a constraint give the same standard form
    norms = np.sqrt(sum(np.sum(a**2, axis=(1, 2)) for a in A) + np.sum(B**2, axis=1))
    if np.any(norms == 0):
        bad = [p.constraints[i].label or str(i) for i in np.flatnonzero(norms == 0)]
        raise ValueError(f"constraint rows with no coefficients: {bad}")
    row_scale = 1.0 / norms
    A = [a * row_scale[:, None, None] for a in A]
    B = B * row_scale[:, None]
    b = b * row_scale
    cn = np.sqrt(sum(np.sum(c**2) for c in C) + np.sum(c_free**2))
    obj_scale = 1.0 / cn if cn > 0 else 1.0
    C = [c * obj_scale for c in C]
    c_free = c_free * obj_scale
    return _StdForm(sizes, A, A_lp, B, b, C, c_lp, c_free, row_scale, obj_scale)


@dataclass
class _Point:
    X: list
    x_lp: np.ndarray
    t: np.ndarray
    y: np.ndarray
    S: list
    s_lp: np.ndarray

    def copy(self):
        return _Point([x.copy() for x in self.X], self.x_lp.copy(), self.t.copy(), self.y.copy(),
                      [s.copy() for s in self.S], self.s_lp.copy())


def _op(sf, X, x_lp, t=None):
    out = sf.A_lp @ x_lp
    if t is not None:
        out = out + sf.B @ t
    for a, x in zip(sf.A, X):
        out = out + np.einsum("mij,ij->m", a, x)
    return out


def _adj(sf, y):
    return [np.einsum("m,mij->ij", y, a) for a in sf.A], sf.A_lp.T @ y


def _dot(X, x_lp, S, s_lp):
    return sum(float(np.sum(x * s)) for x, s in zip(X, S)) + float(x_lp @ s_lp)


# ---------------------------------------------------------------------------
# Nesterov-Todd machinery

@dataclass
class _Scaling:
    G: list
    Ginv: list
    lam: list            # eigenvalues of the scaled point per PSD block
    g_lp: np.ndarray     # sqrt(x / s)
    lam_lp: np.ndarray   # sqrt(x s)
    At: list             # G^T A_i G per block, shape (m, n, n)


def _svd(m):
    try:
        return np.linalg.svd(m)
    except np.linalg.LinAlgError:
        # divide-and-conquer occasionally fails near convergence; QR iteration does not
        return linalg.svd(m, lapack_driver="gesvd")


def _nt_scaling(sf, X, x_lp, S, s_lp) -> _Scaling:
    G, Ginv, lams, At = [], [], [], []
    for a, x, s in zip(sf.A, X, S):
        lx = np.linalg.cholesky(x)
        ls = np.linalg.cholesky(s)
        _, d, vt = _svd(ls.T @ lx)
        g = lx @ vt.T / np.sqrt(d)
        ginv = (np.sqrt(d)[:, None] * vt) @ linalg.solve_triangular(lx, np.eye(len(d)), lower=True)
        G.append(g)
        Ginv.append(ginv)
        lams.append(d)
        At.append(g.T[None] @ a @ g[None])
    return _Scaling(G, Ginv, lams, np.sqrt(x_lp / s_lp), np.sqrt(x_lp * s_lp), At)


def _jordan(a, b):
    return 0.5 * (a @ b + b @ a)


def _max_step(lam, d):
    """Largest alpha with diag(lam) + alpha d PSD (d symmetric)."""
    r = 1.0 / np.sqrt(lam)
    lo = np.linalg.eigvalsh(r[:, None] * d * r[None, :])[0]
    return np.inf if lo >= 0 else -1.0 / lo


def _max_step_lp(lam, d):
    neg = d < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-lam[neg] / d[neg]))


def _schur(sf, sc):
    # M_ij = <G^T A_i G, G^T A_j G> + LP part; a Gram matrix, PSD in floating point
    m = len(sf.b)
    M = np.zeros((m, m))
    for at in sc.At:
        v = at.reshape(m, -1)
        M += v @ v.T
    M += (sf.A_lp * sc.g_lp**2) @ sf.A_lp.T
    return 0.5 * (M + M.T)


class _NewtonSolver:
    """Solves ``[[M, B], [B^T, 0]] [dy; dt] = [r1; r2]`` through a Cholesky factor of ``M``."""

    def __init__(self, M, B):
        m = len(M)
        reg = 1e-15 * max(np.trace(M) / max(m, 1), 1e-300)
        try:
            self.fac = linalg.cho_factor(M + reg * np.eye(m))
            self.ldl = None
        except linalg.LinAlgError:
            self.fac = None
            self.ldl = M + reg * np.eye(m)
        self.B = B
        if B.shape[1]:
            self.MinvB = self._msolve(B)
            self.S = B.T @ self.MinvB
            self.S += 1e-15 * max(float(np.max(np.diag(self.S))), 1e-300) * np.eye(len(self.S))
        else:
            self.MinvB = self.S = None

    def _msolve(self, r):
        if self.fac is not None:
            return linalg.cho_solve(self.fac, r)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", linalg.LinAlgWarning)
            return linalg.solve(self.ldl, r, assume_a="sym")  # LDL^T

    def __call__(self, r1, r2):
        u = self._msolve(r1)
        if self.S is None:
            return u, np.zeros(0)
        dt = linalg.solve(self.S, self.B.T @ u - r2, assume_a="sym")
        return u - self.MinvB @ dt, dt


def _direction(sf, sc, newton, rp, Rd, rd_lp, rf, rc, rc_lp):
    """Solve the NT Newton system for a given scaled complementarity target.

    Works in the scaled space: with ``dx = G^-1 dX G^-T`` and
    ``ds = G^T dS G`` the linearized complementarity reads
    ``dx + ds = rc ./ Gamma``, ``Gamma_ij = (lam_i + lam_j) / 2``.
    """
    m = len(sf.b)
    H, Rds = [], []
    rhs = rp.copy()
    for g, lam, r, rd, at in zip(sc.G, sc.lam, rc, Rd, sc.At):
        gam = 0.5 * (lam[:, None] + lam[None, :])
        hsc = r / gam
        rds = g.T @ rd @ g
        H.append(hsc)
        Rds.append(rds)
        rhs -= at.reshape(m, -1) @ (hsc - rds).ravel()
    h_lp = rc_lp / sc.lam_lp
    rds_lp = sc.g_lp * rd_lp
    rhs -= sf.A_lp @ (sc.g_lp * (h_lp - rds_lp))
    dy, dt = newton(rhs, rf)
    ds, dx = [], []
    for at, hsc, rds in zip(sc.At, H, Rds):
        d = rds - np.einsum("m,mij->ij", dy, at)
        d = 0.5 * (d + d.T)
        ds.append(d)
        dx.append(hsc - d)
    ds_lp = rds_lp - sc.g_lp * (sf.A_lp.T @ dy)
    dx_lp = h_lp - ds_lp
    return dx, dx_lp, dt, dy, ds, ds_lp


def _unscale(sc, dx, dx_lp, ds, ds_lp):
    dX = [g @ d @ g.T for g, d in zip(sc.G, dx)]
    dS = [gi.T @ d @ gi for gi, d in zip(sc.Ginv, ds)]
    dX = [0.5 * (d + d.T) for d in dX]
    dS = [0.5 * (d + d.T) for d in dS]
    return dX, dx_lp * sc.g_lp, dS, ds_lp / sc.g_lp


def _steps(sc, dx, dx_lp, ds, ds_lp):
    ap = min([_max_step(l, d) for l, d in zip(sc.lam, dx)] + [_max_step_lp(sc.lam_lp, dx_lp)])
    ad = min([_max_step(l, d) for l, d in zip(sc.lam, ds)] + [_max_step_lp(sc.lam_lp, ds_lp)])
    return ap, ad


def _initial_point(sf) -> _Point:
    # SDPT3-style infeasible starting point
    m = len(sf.b)
    X, S = [], []
    for a, c, n in zip(sf.A, sf.C, sf.sizes):
        anorm = np.sqrt(np.sum(a**2, axis=(1, 2)))
        xi = max(10.0, np.sqrt(n), n * np.max((1 + np.abs(sf.b)) / (1 + anorm)))
        eta = max(10.0, np.sqrt(n), np.max(anorm), np.linalg.norm(c))
        X.append(xi * np.eye(n))
        S.append(eta * np.eye(n))
    n_lp = sf.A_lp.shape[1]
    if n_lp:
        anorm = np.linalg.norm(sf.A_lp, axis=1)
        xi = max(10.0, np.sqrt(n_lp), np.max((1 + np.abs(sf.b)) / (1 + anorm)))
        eta = max(10.0, np.sqrt(n_lp), np.max(anorm), np.linalg.norm(sf.c_lp))
    else:
        xi = eta = 1.0
    return _Point(X, xi * np.ones(n_lp), np.zeros(sf.B.shape[1]), np.zeros(m), S, eta * np.ones(n_lp))


def _interior(pt) -> bool:
    if np.any(pt.x_lp <= 0) or np.any(pt.s_lp <= 0):
        return False
    try:
        for m in pt.X + pt.S:
            np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        return False
    return True


def _residuals(sf, pt):
    rp = sf.b - _op(sf, pt.X, pt.x_lp, pt.t)
    AtY, AtY_lp = _adj(sf, pt.y)
    Rd = [c - s - a for c, s, a in zip(sf.C, pt.S, AtY)]
    rd_lp = sf.c_lp - pt.s_lp - AtY_lp
    rf = sf.c_free - sf.B.T @ pt.y
    return rp, Rd, rd_lp, rf


def _kkt_measures(sf, pt):
    rp, Rd, rd_lp, rf = _residuals(sf, pt)
    bn = np.linalg.norm(sf.b)
    cn = np.sqrt(sum(np.sum(c**2) for c in sf.C) + np.sum(sf.c_lp**2) + np.sum(sf.c_free**2))
    pobj = _dot(sf.C, sf.c_lp, pt.X, pt.x_lp) + float(sf.c_free @ pt.t)
    dobj = float(sf.b @ pt.y)
    pres = np.linalg.norm(rp) / (1 + bn)
    dres = np.sqrt(sum(np.sum(r**2) for r in Rd) + np.sum(rd_lp**2) + np.sum(rf**2)) / (1 + cn)
    gap = abs(pobj - dobj) / (1 + abs(pobj))
    return pres, dres, gap, pobj, dobj


def solve(p: SdpProblem, tol: float = 1e-8, max_iter: int = 100) -> SdpSolution:
    """Solve ``p`` to relative accuracy ``tol``.

    Returns
    -------
    SdpSolution
        ``status`` is ``"optimal"``, ``"infeasible"`` (primal infeasible),
        ``"unbounded"`` (dual infeasible) or ``"max-iter"`` (best iterate).
    """
    sf = _to_standard(p)
    pt = _initial_point(sf)
    nu = sum(sf.sizes) + len(pt.x_lp)
    history = []
    status = "max-iter"
    it = 0
    best = None
    unconstrained = ~np.any(sf.B != 0, axis=0)
    if np.any(sf.c_free[unconstrained] != 0):
        # a scalar that appears only in the objective can be sent to infinity
        return _package(p, sf, "unbounded", pt, 0, history)
    for it in range(1, max_iter + 1):
        pres, dres, gap, pobj, dobj = _kkt_measures(sf, pt)
        mu = _dot(pt.X, pt.x_lp, pt.S, pt.s_lp) / nu
        history.append({"iter": it - 1, "pobj": pobj, "dobj": dobj, "pres": pres, "dres": dres,
                        "gap": gap, "mu": mu})
        compl = mu * nu / (1 + abs(pobj) + abs(dobj))
        score = max(pres, dres, min(gap, compl))
        if best is None or score < best[0]:
            best = (score, pt.copy())
        if pres <= tol and dres <= tol and gap <= tol:
            status = "optimal"
            break
        # divergence checks (data are normalized to unit scale)
        if dobj > _INFEAS_LIMIT and pres > 1e3 * dres:
            status = "infeasible"
            break
        if -pobj > _INFEAS_LIMIT and dres > 1e3 * pres:
            status = "unbounded"
            break

        rp, Rd, rd_lp, rf = _residuals(sf, pt)
        try:
            sc = _nt_scaling(sf, pt.X, pt.x_lp, pt.S, pt.s_lp)
        except np.linalg.LinAlgError:
            break
        newton = _NewtonSolver(_schur(sf, sc), sf.B)

        # predictor
        rc = [-np.diag(l**2) for l in sc.lam]
        rc_lp = -sc.lam_lp**2
        dx, dx_lp, _, _, ds, ds_lp = _direction(sf, sc, newton, rp, Rd, rd_lp, rf, rc, rc_lp)
        ap, ad = _steps(sc, dx, dx_lp, ds, ds_lp)
        ap, ad = min(1.0, ap), min(1.0, ad)
        # scaled-space complementarity after the affine step
        mu_aff = (sum(float(np.sum((np.diag(l) + ap * a) * (np.diag(l) + ad * b)))
                      for l, a, b in zip(sc.lam, dx, ds))
                  + float((sc.lam_lp + ap * dx_lp) @ (sc.lam_lp + ad * ds_lp))) / nu
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0

        # corrector
        rc = [sigma * mu * np.eye(len(l)) - np.diag(l**2) - _jordan(a, b)
              for l, a, b in zip(sc.lam, dx, ds)]
        rc_lp = sigma * mu - sc.lam_lp**2 - dx_lp * ds_lp
        dx, dx_lp, dt, dy, ds, ds_lp = _direction(sf, sc, newton, rp, Rd, rd_lp, rf, rc, rc_lp)
        ap, ad = _steps(sc, dx, dx_lp, ds, ds_lp)
        ap, ad = min(1.0, _STEP * ap), min(1.0, _STEP * ad)
        history[-1].update(ap=ap, ad=ad, sigma=sigma)

        dX, dX_lp, dS, dS_lp = _unscale(sc, dx, dx_lp, ds, ds_lp)
        new = None
        for _ in range(30):
            cand = _Point([0.5 * (x + x.T) for x in (x + ap * d for x, d in zip(pt.X, dX))],
                          pt.x_lp + ap * dX_lp, pt.t + ap * dt, pt.y + ad * dy,
                          [0.5 * (s + s.T) for s in (s + ad * d for s, d in zip(pt.S, dS))],
                          pt.s_lp + ad * dS_lp)
            if _interior(cand):
                new = cand
                break
            # round-off pushed the point onto the boundary; back off
            ap *= 0.8
            ad *= 0.8
        if new is None:
            break
        pt = new
    else:
        it = max_iter

    if status == "max-iter" and best is not None:
        pt = best[1]
    return _package(p, sf, status, pt, it, history)


def _package(p, sf, status, pt, it, history):
    pres, dres, gap, pobj, dobj = _kkt_measures(sf, pt)
    compl = _dot(pt.X, pt.x_lp, pt.S, pt.s_lp) / (1 + abs(pobj) + abs(dobj))
    blocks, min_eig = {}, {}
    for blk, x in zip(p.blocks, pt.X):
        xb = complex_extract(x) if blk.hermitian else 0.5 * (x + x.T)
        blocks[blk.name] = xb
        ev = np.linalg.eigvalsh(xb)
        min_eig[blk.name] = float(ev[0]) if ev.size else 0.0
    scalars = {name: float(v) for name, v in zip(p.scalars, pt.t)}
    sign = -1.0 if p.sense == "max" else 1.0
    # d(objective)/d(rhs_i) in the caller's units
    duals = sign * pt.y * sf.row_scale / sf.obj_scale
    objective = _user_objective(p, blocks, scalars)
    dual_obj = sign * dobj / sf.obj_scale
    return SdpSolution(status, blocks, scalars, duals, objective, float(dual_obj),
                       KKT(float(pres), float(dres), float(gap), min_eig, float(compl)), it, history)


def _user_objective(p, blocks, scalars):
    val = 0.0
    for name, mat in p.objective.items():
        val += float(np.real(np.trace(np.asarray(mat) @ blocks[name])))
    for name, v in p.objective_scalars.items():
        val += v * scalars[name]
    return val


def constraint_values(p: SdpProblem, sol: SdpSolution) -> np.ndarray:
    """Left-hand sides of every constraint at ``sol``."""
    out = []
    for c in p.constraints:
        v = sum(float(np.real(np.trace(np.asarray(m) @ sol.blocks[n]))) for n, m in c.coeffs.items())
        v += sum(k * sol.scalars[n] for n, k in c.scalars.items())
        out.append(v)
    return np.array(out)


# ---------------------------------------------------------------------------
# plain-text dump format
#
#   sdp v1
#   sense max
#   block <name> <dim> <hermitian 0|1>
#   scalar <name>
#   objective
#     coeff <block> followed by <dim> rows of "re im re im ..."
#     scal <name> <value>
#   end
#   constraint <sense> <rhs> <label or ->
#     (same coeff/scal lines)
#   end

def _write_terms(out, coeffs, scalars):
    for name, mat in coeffs.items():
        mat = np.asarray(mat, dtype=complex)
        out.write(f"coeff {name}\n")
        for row in mat:
            out.write(" ".join(f"{float(v.real)!r} {float(v.imag)!r}" for v in row) + "\n")
    for name, v in scalars.items():
        out.write(f"scal {name} {float(v)!r}\n")


def dump_problem(p: SdpProblem, path=None) -> str:
    """Serialize ``p`` to the plain-text matrix format; optionally write it to ``path``."""
    out = io.StringIO()
    out.write("sdp v1\n")
    out.write(f"sense {p.sense}\n")
    for b in p.blocks:
        out.write(f"block {b.name} {b.dim} {int(b.hermitian)}\n")
    for s in p.scalars:
        out.write(f"scalar {s}\n")
    out.write("objective\n")
    _write_terms(out, p.objective, p.objective_scalars)
    out.write("end\n")
    for c in p.constraints:
        out.write(f"constraint {c.sense} {float(c.rhs)!r} {c.label or '-'}\n")
        _write_terms(out, c.coeffs, c.scalars)
        out.write("end\n")
    text = out.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def load_problem(source) -> SdpProblem:
    """Parse the format written by :func:`dump_problem` (text or a path)."""
    if "\n" not in str(source):
        with open(source, encoding="utf-8") as fh:
            source = fh.read()
    lines = iter(source.splitlines())
    if next(lines).strip() != "sdp v1":
        raise ValueError("not an sdp v1 dump")
    p = SdpProblem()
    dims = {}

    def read_terms():
        coeffs, scal = {}, {}
        for line in lines:
            parts = line.split()
            if parts[0] == "end":
                return coeffs, scal
            if parts[0] == "coeff":
                name = parts[1]
                n = dims[name]
                rows = []
                for _ in range(n):
                    vals = np.array(next(lines).split(), dtype=float)
                    rows.append(vals[0::2] + 1j * vals[1::2])
                coeffs[name] = np.array(rows)
            elif parts[0] == "scal":
                scal[parts[1]] = float(parts[2])
            else:
                raise ValueError(f"unexpected line {line!r}")
        raise ValueError("unterminated section")

    for line in lines:
        parts = line.split()
        if not parts:
            continue
        key = parts[0]
        if key == "sense":
            p.sense = parts[1]
        elif key == "block":
            dims[parts[1]] = int(parts[2])
            p.add_block(parts[1], int(parts[2]), bool(int(parts[3])))
        elif key == "scalar":
            p.add_scalar(parts[1])
        elif key == "objective":
            coeffs, scal = read_terms()
            p.objective, p.objective_scalars = coeffs, scal
        elif key == "constraint":
            coeffs, scal = read_terms()
            label = "" if parts[3] == "-" else parts[3]
            p.add_constraint(coeffs, parts[1], float(parts[2]), scal, label)
        else:
            raise ValueError(f"unexpected line {line!r}")
    return p
