import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import seeds
from cvwitness.sdp import (
    LmiBlock,
    SdpOptions,
    SdpProblem,
    Status,
    certify_infeasible,
    feasibility_check,
    hermitian_embed,
    solve,
)


def lambda_max_problem(A):
    d = A.shape[0]
    return SdpProblem(np.array([1.0]), (LmiBlock(-A, np.eye(d)[None]),))


def sym(rng, d):
    A = rng.standard_normal((d, d))
    return 0.5 * (A + A.T)


def farkas_infeasible(rng, d, n):
    """Random LMI made infeasible by construction: a PSD W orthogonal to every
    F_i with Tr[F0 W] < 0 certifies that no y exists."""
    W = rng.standard_normal((d, d))
    W = W @ W.T
    Fs = []
    for _ in range(n):
        F = sym(rng, d)
        Fs.append(F - np.vdot(F, W) / np.vdot(W, W) * W)
    F0 = sym(rng, d)
    F0 -= (np.vdot(F0, W) / np.vdot(W, W) + rng.uniform(0.1, 1.0)) * W
    return SdpProblem(rng.standard_normal(n), (LmiBlock(F0, np.array(Fs)),))


def test_trivial_problems():
    sol = solve(SdpProblem(np.array([1.0]), (LmiBlock(np.zeros((1, 1)), np.ones((1, 1, 1))),)))
    assert sol.status is Status.OPTIMAL
    assert sol.y[0] == pytest.approx(0.0, abs=1e-7)
    infeasible = SdpProblem(np.array([0.0]), (LmiBlock(-np.ones((1, 1)), np.zeros((1, 1, 1))),))
    assert solve(infeasible).status is Status.INFEASIBLE


def test_unbounded_problem():
    # minimize -y subject to y >= 0
    prob = SdpProblem(np.array([-1.0]), (LmiBlock(np.zeros((1, 1)), np.ones((1, 1, 1))),))
    assert solve(prob).status is Status.UNBOUNDED


@given(seeds, st.integers(1, 8))
def test_lambda_max_oracle(seed, d):
    A = sym(np.random.default_rng(seed), d)
    sol = solve(lambda_max_problem(A))
    assert sol.status is Status.OPTIMAL
    assert sol.objective == pytest.approx(np.linalg.eigvalsh(A)[-1], abs=1e-6)
    assert sol.gap <= 1e-8 * (1 + abs(sol.objective))


@given(seeds, st.integers(2, 6), st.integers(1, 4))
def test_farkas_instances_flagged(seed, d, n):
    rng = np.random.default_rng(seed)
    prob = farkas_infeasible(rng, d, n)
    sol = solve(prob)
    assert sol.status is Status.INFEASIBLE
    assert certify_infeasible(prob, sol.certificate)


def test_hermitian_embed_examples(rng):
    A = sym(rng, 3)
    emb = hermitian_embed(A, np.zeros((3, 3)))
    assert np.allclose(np.linalg.eigvalsh(emb), np.sort(np.repeat(np.linalg.eigvalsh(A), 2)))
    om = np.array([[0.0, 1.0], [-1.0, 0.0]])
    assert np.allclose(np.linalg.eigvalsh(hermitian_embed(np.eye(2), om)), [0, 0, 2, 2])
    with pytest.raises(ValueError):
        hermitian_embed(rng.standard_normal((2, 2)), om)
    with pytest.raises(ValueError):
        hermitian_embed(np.eye(2), np.eye(2))


@given(seeds, st.integers(1, 6))
def test_hermitian_embed_spectrum(seed, d):
    rng = np.random.default_rng(seed)
    A = sym(rng, d)
    B = rng.standard_normal((d, d))
    B = B - B.T
    complex_spec = np.linalg.eigvalsh(A + 1j * B)
    assert np.allclose(np.linalg.eigvalsh(hermitian_embed(A, B)),
                       np.sort(np.repeat(complex_spec, 2)), atol=1e-9)


def test_feasibility_check(rng):
    prob = SdpProblem(np.array([1.0]), (LmiBlock(np.eye(3), sym(rng, 3)[None]),))
    assert feasibility_check(prob, [0.0]).min_eig == pytest.approx(1.0)
    y = np.array([50.0])
    expected = np.linalg.eigvalsh(prob.blocks[0].matrix(y))[0]
    assert feasibility_check(prob, y).min_eig == pytest.approx(expected)
    A = sym(rng, 4)
    sol = solve(lambda_max_problem(A))
    assert feasibility_check(lambda_max_problem(A), sol.y).min_eig >= -SdpOptions().feas_tol


def vertex_oracle(c, G, h):
    """min c.y s.t. G y <= h by enumerating vertices (bounded LPs only)."""
    n = len(c)
    best = np.inf
    for rows in itertools.combinations(range(len(h)), n):
        Gs = G[list(rows)]
        if abs(np.linalg.det(Gs)) < 1e-12:
            continue
        y = np.linalg.solve(Gs, h[list(rows)])
        if np.all(G @ y <= h + 1e-9):
            best = min(best, c @ y)
    return best


@given(seeds, st.integers(1, 3))
def test_lp_embedding_matches_vertex_enumeration(seed, n):
    rng = np.random.default_rng(seed)
    # box keeps the LP bounded; random cuts on top
    G = np.vstack([np.eye(n), -np.eye(n), rng.standard_normal((4, n))])
    h = np.concatenate([np.ones(2 * n), rng.uniform(0.2, 1.0, 4)])
    c = rng.standard_normal(n)
    # diagonal block h - G y >= 0, as one LMI
    prob = SdpProblem(c, (LmiBlock(np.diag(h), np.array([np.diag(-G[:, i]) for i in range(n)])),))
    sol = solve(prob)
    assert sol.status is Status.OPTIMAL
    assert sol.objective == pytest.approx(vertex_oracle(c, G, h), abs=1e-7)


@given(seeds, st.integers(2, 5))
def test_redundant_block_does_not_move_optimum(seed, d):
    rng = np.random.default_rng(seed)
    n = 3
    blk = LmiBlock(np.eye(d), np.array([sym(rng, d) for _ in range(n)]))
    box = LmiBlock(np.eye(2 * n), np.array([np.diag(np.r_[np.eye(n)[i], -np.eye(n)[i]])
                                            for i in range(n)]))
    c = rng.standard_normal(n)
    base = solve(SdpProblem(c, (blk, box)))
    more = solve(SdpProblem(c, (blk, box, blk)))
    assert base.status is Status.OPTIMAL and more.status is Status.OPTIMAL
    assert more.objective == pytest.approx(base.objective, abs=1e-7)


def test_solve_is_deterministic(rng):
    prob = farkas_infeasible(rng, 4, 3)
    lam = lambda_max_problem(sym(rng, 5))
    for p in (prob, lam):
        a, b = solve(p), solve(p)
        assert a.status is b.status
        assert np.array_equal(a.y, b.y, equal_nan=True)


def test_input_validation():
    with pytest.raises(ValueError):
        LmiBlock(np.array([[1.0, 2.0], [0.0, 1.0]]), np.zeros((1, 2, 2)))
    with pytest.raises(ValueError):
        SdpProblem(np.array([]), (LmiBlock(np.eye(1), np.zeros((0, 1, 1))),))
    with pytest.raises(ValueError):
        SdpProblem(np.array([1.0, 2.0]), (LmiBlock(np.eye(1), np.zeros((1, 1, 1))),))


def test_json_round_trip(rng):
    prob = farkas_infeasible(rng, 3, 2)
    back = SdpProblem.from_json(prob.to_json())
    assert np.array_equal(back.objective, prob.objective)
    assert all(np.array_equal(a.Fs, b.Fs) for a, b in zip(back.blocks, prob.blocks))
