import numpy as np
import pytest

from septq.engine import EngineConfig, layer_error, obs_delta, run_septq
from septq.grid import QuantGrid, grid_search
from septq.oracles import (
    OracleReport,
    kkt_delta_oracle,
    rtn_baseline,
    schur_delta_oracle,
    score_oracle,
    unblocked_reference,
    write_reports,
)


def test_kkt_identity_hessian():
    np.testing.assert_allclose(kkt_delta_oracle(np.eye(5), 3, 0.25), -0.25 * np.eye(5)[3], atol=1e-15)


def test_kkt_zero_gap():
    h = np.diag([1.0, 2.0, 3.0])
    assert np.allclose(kkt_delta_oracle(h, 1, 0.0), 0.0)


def test_kkt_agrees_with_schur_and_closed_form():
    a = np.random.default_rng(0).normal(size=(6, 6))
    h = a.T @ a + np.eye(6)
    kkt = kkt_delta_oracle(h, 2, 0.8)
    np.testing.assert_allclose(kkt, schur_delta_oracle(h, 2, 0.8), rtol=1e-10, atol=1e-13)
    np.testing.assert_allclose(obs_delta(np.linalg.inv(h), 2, 0.8), kkt, rtol=1e-10, atol=1e-13)


def test_score_oracle_grid_aligned_entry_is_zero():
    g = QuantGrid(2, 0.5, 1)
    w = np.array([[0.5, 0.7], [-0.5, 0.2]])
    x = np.random.default_rng(1).normal(size=(2, 10))
    assert score_oracle(w, x, g, 0, 0) == 0.0


def test_score_oracle_scaled_identity():
    # X = c I: no coupling, the re-fit changes nothing and the error is gap^2 * c^2
    g = QuantGrid(2, 0.5, 1)
    w = np.array([[0.7, 0.1, -0.3]])
    c = 3.0
    assert score_oracle(w, c * np.eye(3), g, 0, 0) == pytest.approx(0.04 * c * c, rel=1e-12)


def test_score_oracle_is_a_true_minimum():
    rng = np.random.default_rng(2)
    w = rng.normal(size=(3, 5))
    x = rng.normal(size=(5, 20))
    g = grid_search(w, 2)
    best = score_oracle(w, x, g, 1, 2)
    _, dq = g.quantize(w)
    for _ in range(50):
        trial = w[1].copy()
        trial[2] = dq[1, 2]
        free = [0, 1, 3, 4]
        # any other re-fit of the free weights does no better
        trial[free] += rng.normal(scale=0.1, size=4)
        out = (w[1] - trial) @ x
        assert out @ out >= best - 1e-12


def test_rtn_baseline():
    g = QuantGrid(2, 0.5, 1)
    w = g.dequantize(np.random.default_rng(3).integers(0, 4, size=(4, 4)))
    x = np.random.default_rng(4).normal(size=(4, 9))
    res = rtn_baseline(w, g, x)
    assert res.metrics["layer_error"] == 0.0
    assert not res.mask.any() and res.reserved == []


def test_rtn_worse_than_compensated_on_most_instances():
    worse = 0
    for seed in range(200):
        rng = np.random.default_rng(10_000 + seed)
        w, x = rng.normal(size=(8, 8)), rng.normal(size=(8, 32))
        res = run_septq(w, x, EngineConfig(bits=2, p=0))
        worse += layer_error(w, rtn_baseline(w, res.grid).w_hat, x) >= res.metrics["layer_error"]
    assert worse >= 180


def test_unblocked_full_reservation_is_identity():
    w = np.random.default_rng(5).normal(size=(4, 6))
    x = np.random.default_rng(6).normal(size=(6, 20))
    res = unblocked_reference(w, x, np.ones(w.shape, bool), grid_search(w, 2))
    assert np.array_equal(res.w_hat, w)


def test_unblocked_diagonal_hessian_is_rtn_plus_overlay():
    rng = np.random.default_rng(7)
    w = rng.normal(size=(5, 4))
    x = np.diag([1.0, 2.0, 0.5, 3.0])
    mask = rng.random((5, 4)) < 0.3
    g = grid_search(w, 2)
    res = unblocked_reference(w, x, mask, g)
    expected = np.where(mask, w, g.quantize(w)[1])
    np.testing.assert_allclose(res.w_hat, expected, rtol=0, atol=1e-15)


def test_oracle_guard():
    with pytest.raises(ValueError):
        kkt_delta_oracle(np.eye(65), 0, 1.0)


def test_report_rel_err_and_csv(tmp_path):
    r = OracleReport.compare(3, "score", 1.0, 2.0)
    assert r.rel_err == 0.5
    z = OracleReport.compare(1, "delta", [0.0, 0.0], [0.0, 0.0])
    assert z.rel_err == 0.0
    p = tmp_path / "r.csv"
    write_reports([r, z], p)
    lines = p.read_text().splitlines()
    assert lines[0] == "instance_id,quantity,closed_form,brute_force,rel_err"
    assert lines[1].startswith("1,delta")
