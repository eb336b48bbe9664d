import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isaclab.sdp import (SdpProblem, complex_embed, complex_extract, dump_problem, load_problem, numerical_rank,
                         solve)
from isaclab.sdp import constraint_values

from conftest import random_psd
from oracles import maxmin_spectraplex


def _hermitian(rng, n):
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (g + g.conj().T)


def min_eig_problem(c):
    n = c.shape[0]
    p = SdpProblem().add_block("X", n)
    p.add_constraint({"X": np.eye(n)}, "=", 1.0)
    return p.set_objective({"X": c}, sense="min")


def power_problem(a, power):
    n = a.shape[0]
    p = SdpProblem().add_block("X", n).add_scalar("t")
    p.add_constraint({"X": np.eye(n)}, "<=", power)
    p.add_constraint({"X": a}, ">=", 0.0, {"t": -1.0})
    return p.set_objective(scalars={"t": 1.0}, sense="max")


def maxmin_problem(mats):
    n = mats[0].shape[0]
    p = SdpProblem().add_block("X", n).add_scalar("t")
    p.add_constraint({"X": np.eye(n)}, "=", 1.0)
    for a in mats:
        p.add_constraint({"X": a}, ">=", 0.0, {"t": -1.0})
    return p.set_objective(scalars={"t": 1.0})


@pytest.mark.parametrize("seed", range(4))
def test_min_eigenvalue(seed):
    rng = np.random.default_rng(seed)
    c = _hermitian(rng, 6)
    sol = solve(min_eig_problem(c))
    lam, v = np.linalg.eigh(c)
    assert sol.optimal
    assert sol.objective == pytest.approx(lam[0], rel=1e-7, abs=1e-8)
    x = sol.blocks["X"]
    assert np.allclose(x, np.outer(v[:, 0], v[:, 0].conj()), atol=1e-4)


@pytest.mark.parametrize("seed", range(4))
def test_power_to_top_eigenvector(seed):
    rng = np.random.default_rng(10 + seed)
    a = random_psd(rng, 5, 3)
    sol = solve(power_problem(a, 2.5))
    assert sol.optimal
    assert sol.objective == pytest.approx(2.5 * np.linalg.eigvalsh(a)[-1], rel=1e-7)
    assert numerical_rank(sol.blocks["X"], 1e-4) == 1


@pytest.mark.parametrize("seed", range(3))
def test_maxmin_matches_first_order_oracle(seed):
    rng = np.random.default_rng(20 + seed)
    mats = [random_psd(rng, 4, 2) for _ in range(3)]
    sol = solve(maxmin_problem(mats))
    ref = maxmin_spectraplex(mats, iters=6000)
    assert sol.optimal
    # the oracle is a lower bound that approaches the optimum
    assert ref <= sol.objective * (1 + 1e-6)
    assert sol.objective == pytest.approx(ref, rel=0.01)


def test_kkt_reported_and_blocks_psd():
    rng = np.random.default_rng(3)
    sol = solve(maxmin_problem([random_psd(rng, 5, 2) for _ in range(4)]))
    k = sol.kkt
    assert max(k.primal_residual, k.dual_residual, k.gap) <= 1e-8
    x = sol.blocks["X"]
    assert k.min_eig["X"] >= -1e-8 * np.linalg.norm(x, 2)
    assert np.allclose(x, x.conj().T)


def test_weak_duality_final_and_near_feasible_iterates():
    rng = np.random.default_rng(4)
    p = maxmin_problem([random_psd(rng, 6, 2) for _ in range(5)])
    sol = solve(p)
    assert sol.objective <= sol.dual_objective + 1e-8 * (1 + abs(sol.objective))
    # internal form is a minimization: dual objective never exceeds primal once residuals are small
    near = [h for h in sol.history if h["pres"] <= 1e-6 and h["dres"] <= 1e-6]
    assert near
    for h in near:
        assert h["dobj"] <= h["pobj"] + 1e-6 * (1 + abs(h["pobj"]))


def test_row_scaling_invariance():
    rng = np.random.default_rng(5)
    mats = [random_psd(rng, 4, 2) for _ in range(3)]
    base = solve(maxmin_problem(mats))
    p = maxmin_problem(mats)
    for c, s in zip(p.constraints, (1e3, 1e-4, 7.0, 0.02)):
        c.coeffs = {k: s * v for k, v in c.coeffs.items()}
        c.scalars = {k: s * v for k, v in c.scalars.items()}
        c.rhs *= s
    scaled = solve(p)
    assert scaled.optimal
    assert scaled.objective == pytest.approx(base.objective, rel=1e-7)
    assert np.allclose(scaled.blocks["X"], base.blocks["X"], atol=1e-5)


def test_duals_are_sensitivities():
    a = np.diag([3.0, 1.0, 0.5])
    sol = solve(power_problem(a, 2.0))
    # d(objective)/d(power budget) = lambda_max
    assert sol.duals[0] == pytest.approx(3.0, rel=1e-6)


def test_equality_and_le_constraints_satisfied():
    rng = np.random.default_rng(6)
    c = _hermitian(rng, 4)
    p = min_eig_problem(c)
    p.add_constraint({"X": np.diag([1.0, 0, 0, 0]).astype(complex)}, "<=", 0.1)
    sol = solve(p)
    vals = constraint_values(p, sol)
    assert vals[0] == pytest.approx(1.0, abs=1e-8)
    assert vals[1] <= 0.1 + 1e-8


def test_primal_infeasible_detected():
    p = SdpProblem().add_block("X", 3)
    p.add_constraint({"X": np.eye(3)}, "<=", 1.0)
    p.add_constraint({"X": np.eye(3)}, ">=", 2.0)
    p.set_objective({"X": np.eye(3)}, sense="max")
    assert solve(p).status == "infeasible"


def test_unbounded_detected():
    p = SdpProblem().add_block("X", 2)
    p.add_constraint({"X": np.diag([1.0, 0.0])}, "=", 1.0)
    p.set_objective({"X": np.eye(2)}, sense="max")
    assert solve(p).status == "unbounded"


def test_objective_only_scalar_is_unbounded():
    p = SdpProblem().add_block("X", 2).add_scalar("t")
    p.add_constraint({"X": np.eye(2)}, "=", 1.0)
    p.set_objective(scalars={"t": 1.0})
    assert solve(p).status == "unbounded"


def test_max_iter_returns_best_iterate():
    rng = np.random.default_rng(7)
    sol = solve(maxmin_problem([random_psd(rng, 4, 2) for _ in range(3)]), max_iter=3)
    assert sol.status == "max-iter"
    assert sol.iterations == 3 and np.all(np.isfinite(sol.blocks["X"]))


def test_real_symmetric_block():
    c = np.array([[2.0, 1.0], [1.0, 2.0]])
    p = SdpProblem().add_block("X", 2, hermitian=False)
    p.add_constraint({"X": np.eye(2)}, "=", 1.0)
    p.set_objective({"X": c}, sense="min")
    sol = solve(p)
    assert sol.objective == pytest.approx(1.0, rel=1e-8)
    assert np.isrealobj(sol.blocks["X"])


def test_validation_errors():
    p = SdpProblem().add_block("X", 2)
    p.add_constraint({"X": np.eye(3)}, "=", 1.0)
    with pytest.raises(ValueError):
        p.validate()
    q = SdpProblem().add_block("X", 2)
    q.add_constraint({"X": np.array([[0, 1], [0, 0]])}, "=", 1.0)
    with pytest.raises(ValueError):
        q.validate()
    with pytest.raises(ValueError):
        SdpProblem().add_constraint({}, "<", 1.0)
    with pytest.raises(ValueError):
        SdpProblem().set_objective(sense="maximize")


def test_dump_load_roundtrip(tmp_path):
    rng = np.random.default_rng(8)
    p = maxmin_problem([random_psd(rng, 3, 2) for _ in range(2)])
    p.constraints[0].label = "budget"
    text = dump_problem(p, tmp_path / "p.sdp")
    q = load_problem(tmp_path / "p.sdp")
    assert dump_problem(q) == text
    assert q.constraints[0].label == "budget"
    assert solve(q).objective == solve(p).objective


def test_complex_embed_examples():
    assert np.array_equal(complex_embed(np.eye(3)), np.eye(6))
    with pytest.raises(ValueError):
        complex_embed(np.array([[0, 1j], [1j, 0]]))
    with pytest.raises(ValueError):
        complex_embed(np.ones((2, 3)))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**31))
def test_complex_embed_spectrum_and_roundtrip(n, seed):
    h = _hermitian(np.random.default_rng(seed), n)
    e = complex_embed(h)
    assert np.allclose(e, e.T)
    lam = np.linalg.eigvalsh(h)
    assert np.allclose(np.linalg.eigvalsh(e), np.sort(np.repeat(lam, 2)), atol=1e-10)
    assert np.trace(e) == pytest.approx(2 * np.trace(h).real)
    assert np.max(np.abs(complex_extract(e) - h)) <= 1e-12


def test_numerical_rank():
    rng = np.random.default_rng(9)
    assert numerical_rank(random_psd(rng, 6, 2)) == 2
    assert numerical_rank(np.zeros((3, 3))) == 0
    assert numerical_rank(np.diag([1.0, 1e-7]), 1e-6) == 1
    assert numerical_rank(np.diag([1.0, 1e-5]), 1e-6) == 2
