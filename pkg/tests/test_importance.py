import time

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from septq.engine import inverse_hessian_factor
from septq.grid import QuantGrid, grid_search
from septq.importance import (
    StrategyConfig,
    dynamic_mask_trace,
    mask_block_sums,
    reserve_count,
    score_all,
    score_histogram,
    score_mass,
    select_mask,
    select_mask_local,
)
from septq.linalg import SingularHessianError, hessian, spd_inverse
from septq.oracles import score_oracle

G = QuantGrid(2, 0.5, 1)


def test_score_diagonal_closed_form():
    # X X^T = 2 I  ->  (X X^T)^-1 diagonal is 0.5; 0.7 rounds to 0.5
    s = score_all([[0.7]], [0.5], G)
    assert s[0, 0] == pytest.approx(0.04, rel=1e-12)


def test_score_grid_aligned_is_zero():
    assert np.all(score_all([[0.5, -0.5, 1.0]], [1.0, 2.0, 3.0], G) == 0)


def test_score_rejects_non_positive_diagonal():
    with pytest.raises(SingularHessianError):
        score_all(np.ones((2, 2)), [1.0, 0.0], G)


def test_closed_form_score_is_half_the_exact_refit_error():
    # brute force: round one weight, re-fit the rest of its row exactly, measure
    # ||W X - W' X||_F^2. The closed form comes out at exactly half of it.
    rng = np.random.default_rng(11)
    w = rng.normal(size=(6, 6))
    x = rng.normal(size=(6, 40))
    g = grid_search(w, 2)
    closed = score_all(w, np.diag(np.linalg.inv(x @ x.T)), g)
    brute = np.array([[score_oracle(w, x, g, i, j) for j in range(6)] for i in range(6)])
    np.testing.assert_allclose(closed, brute / 2, rtol=1e-9)


def test_damped_denominator_matches_undamped_at_zero_damping():
    x = np.random.default_rng(12).normal(size=(5, 30))
    np.testing.assert_allclose(2 * np.diag(spd_inverse(hessian(x, 0.0))), np.diag(np.linalg.inv(x @ x.T)), rtol=1e-10)


def test_select_mask_p0_and_p100():
    s = np.random.default_rng(0).random((4, 5))
    assert not select_mask(s, StrategyConfig(p=0)).any()
    assert select_mask(s, StrategyConfig(p=100)).all()


def test_select_mask_unique_top():
    s = np.zeros((4, 4))
    s[2, 1] = 5.0
    m = select_mask(s, StrategyConfig(p=6.25))
    assert m.sum() == 1 and m[2, 1]


def test_select_mask_ties_lexicographic():
    s = np.ones((3, 3))
    s[2, 2] = 2.0
    m = select_mask(s, StrategyConfig(p=100 * 3 / 9))
    assert sorted(zip(*np.nonzero(m))) == [(0, 0), (0, 1), (2, 2)]


def test_reserve_count_rounds_half_away():
    assert reserve_count(1.0, 1024) == 10
    assert reserve_count(1.0, 65536) == 655
    assert reserve_count(50.0, 5) == 3


scores_st = st.integers(0, 2**31 - 1).map(lambda sd: np.random.default_rng(sd).lognormal(size=(7, 9)))


@settings(max_examples=50, deadline=None)
@given(scores_st, st.floats(0, 100), st.floats(1e-3, 1e3))
def test_select_mask_count_and_scale_equivariance(s, p, c):
    cfg = StrategyConfig(p=p)
    m = select_mask(s, cfg)
    assert m.sum() == reserve_count(p, s.size)
    assert np.array_equal(select_mask(s * c, cfg), m)
    assert np.array_equal(select_mask(s, cfg), m)
    if 0 < m.sum() < s.size:
        assert s[m].min() >= s[~m].max()


def test_local_trio_per_block():
    s = np.random.default_rng(1).random((8, 8))
    assert not select_mask_local(s, StrategyConfig(scope="local", p=0, block=4)).any()
    assert select_mask_local(s, StrategyConfig(scope="local", p=100, block=4)).all()
    s = np.zeros((8, 8))
    for r0 in (0, 4):
        for c0 in (0, 4):
            s[r0 + 1, c0 + 2] = 1.0
    m = select_mask_local(s, StrategyConfig(scope="local", p=6.25, block=4))
    assert m.sum() == 4 and np.all(s[m] == 1.0)


def test_local_partial_edge_blocks_use_actual_size():
    s = np.random.default_rng(2).random((5, 5))
    m = select_mask_local(s, StrategyConfig(scope="local", p=50, block=4))
    # tiles are 4x4, 4x1, 1x4, 1x1 -> 8, 2, 2, 1 (0.5 rounds away from zero)
    assert mask_block_sums(m, 4).tolist() == [[8, 2], [2, 1]]


def test_global_and_local_differ_when_scores_concentrate():
    rng = np.random.default_rng(3)
    s = rng.random((256, 256)) * 1e-3
    s[:128, :128] += rng.random((128, 128))
    cfg = StrategyConfig(p=1.0)
    g = select_mask(s, cfg)
    loc = select_mask_local(s, StrategyConfig(scope="local", p=1.0, block=128))
    assert not np.array_equal(g, loc)
    assert mask_block_sums(g, 128).tolist() == [[655, 0], [0, 0]]
    assert mask_block_sums(loc, 128).tolist() == [[164, 164], [164, 164]]
    assert score_mass(s, g) > score_mass(s, loc)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0, 100), st.sampled_from([2, 3, 4, 8]))
def test_global_mass_dominates_local_with_no_more_entries(seed, p, block):
    s = np.random.default_rng(seed).lognormal(sigma=2, size=(8, 8))
    g = select_mask(s, StrategyConfig(p=p))
    loc = select_mask_local(s, StrategyConfig(scope="local", p=p, block=block))
    assume(loc.sum() <= g.sum())
    assert score_mass(s, g) >= score_mass(s, loc)


def _layer(seed, rows, cols, n):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(rows, cols)), rng.normal(size=(cols, n))


def test_dynamic_p0_is_empty():
    w, x = _layer(4, 8, 8, 32)
    _, u = inverse_hessian_factor(x, 0.01)
    assert not dynamic_mask_trace(w, u, grid_search(w, 2), StrategyConfig(timing="dynamic", p=0)).any()


def test_dynamic_matches_static_without_cross_column_coupling():
    rng = np.random.default_rng(5)
    w = rng.standard_t(2, size=(40, 12))
    x = np.diag(rng.uniform(0.5, 2.0, size=12)) @ np.eye(12, 30)
    hinv, u = inverse_hessian_factor(x, 0.01)
    assert np.count_nonzero(np.triu(u, 1)) == 0
    g = grid_search(w, 2)
    cfg = StrategyConfig(timing="dynamic", p=10)
    dyn = dynamic_mask_trace(w, u, g, cfg)
    # same per-column budget, scores taken once up front
    static = select_mask_local(score_all(w, 2 * np.diag(hinv), g), cfg, block=(40, 1))
    assert dyn.sum() == 12 * 4
    assert np.array_equal(dyn, static)


def test_dynamic_is_slower_than_static():
    w, x = _layer(6, 64, 64, 256)
    hinv, u = inverse_hessian_factor(x, 0.01)
    g = grid_search(w, 2)

    def best_of(fn, reps=5):
        ts = []
        for _ in range(reps):
            t0 = time.perf_counter()
            fn()
            ts.append(time.perf_counter() - t0)
        return min(ts)

    t_static = best_of(lambda: select_mask(score_all(w, 2 * np.diag(hinv), g), StrategyConfig(p=1)))
    t_dyn = best_of(lambda: dynamic_mask_trace(w, u, g, StrategyConfig(timing="dynamic", p=1)))
    assert t_dyn > t_static


def test_histogram_equal_scores_single_bin():
    counts, frac = score_histogram(np.full((4, 4), 0.3), [0.0, 0.1, 0.5, 1.0])
    assert counts.tolist() == [0, 16, 0] and frac.tolist() == [0.0, 1.0, 0.0]


def test_histogram_two_point_long_tail():
    s = np.full(1000, 1e-9)
    s[0] = 0.1
    counts, frac = score_histogram(s, [0.0, 1e-6, 1.0])
    assert counts.tolist() == [999, 1]
    assert frac[1] > 0.99


def test_histogram_matches_accumulation_loop():
    s = np.random.default_rng(7).lognormal(mean=-5, sigma=2, size=(20, 30))
    edges = np.logspace(-9, 0, 12)
    counts, frac = score_histogram(s, edges)
    ref_c = [0] * 11
    ref_m = [0.0] * 11
    for v in s.ravel():
        k = 0
        while k < 10 and v >= edges[k + 1]:
            k += 1
        ref_c[k] += 1
        ref_m[k] += v
    total = sum(ref_m)
    assert counts.tolist() == ref_c
    np.testing.assert_allclose(frac, np.array(ref_m) / total, rtol=1e-12, atol=1e-15)
    assert counts.sum() == s.size
    assert abs(frac.sum() - 1) < 1e-12


def test_histogram_rejects_bad_edges():
    with pytest.raises(ValueError):
        score_histogram([1.0], [0.0, 0.0, 1.0])


def test_block_sums_trio():
    assert not mask_block_sums(np.zeros((300, 200), bool)).any()
    assert mask_block_sums(np.ones((300, 200), bool)).tolist() == [[128 * 128, 128 * 72], [128 * 128, 128 * 72], [44 * 128, 44 * 72]]
    m = np.random.default_rng(8).random((50, 70)) < 0.1
    ref = np.zeros((4, 5), dtype=int)
    for i in range(50):
        for j in range(70):
            ref[i // 16, j // 16] += m[i, j]
    assert np.array_equal(mask_block_sums(m, 16), ref)
