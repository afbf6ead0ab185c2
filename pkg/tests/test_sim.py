import math

import numpy as np
import pytest

import oracles
from sudas.allocator import alternating_optimize, weighted_throughput
from sudas.channel import ChannelRealization, decompose, generate_channels
from sudas.config import SYSTEMS, SolverParams, SweepSpec, SystemConfig, dbm_to_watt
from sudas.sim import (
    UPPER_BOUND_ITERATIONS, baseline_licensed, benchmark_mimo, drop_seed, evaluate_drop,
    relaxed_upper_bound, run_drop, run_sweep, waterfill,
)

SMALL = SystemConfig(n_tx_bs=4, n_sudacs=4, n_ues=2, n_subcarriers=4)


@pytest.mark.parametrize("system", SYSTEMS)
def test_zero_bs_budget(system):
    cfg = SMALL.replace(p_bs_max=0.0)
    assert run_drop(cfg, 3, system) == 0.0


def test_drop_deterministic():
    a = evaluate_drop(SMALL, drop_seed(5, 2))
    b = evaluate_drop(SMALL, drop_seed(5, 2))
    assert a.throughput == b.throughput
    c = evaluate_drop(SMALL, drop_seed(5, 3))
    assert a.throughput["sudas"] != c.throughput["sudas"]


def test_more_streams_help():
    for seed in range(5):
        one = run_drop(SMALL.replace(n_streams=1), seed)
        two = run_drop(SMALL.replace(n_streams=2), seed)
        assert two >= one * (1 - 1e-9)


def test_unknown_system():
    with pytest.raises(ValueError):
        evaluate_drop(SMALL, 0, ("nope",))


# -- water-filling and the comparison systems -------------------------------

def test_waterfill_single_mode_takes_everything():
    power, s = waterfill(np.array([[[4.0]]]), [1.0], 2.5)
    assert power[0, 0, 0] == pytest.approx(2.5, rel=1e-8)
    np.testing.assert_array_equal(s, [[1.0]])


def test_waterfill_matches_projected_gradient():
    g = np.array([0.5, 2.0, 7.0, 30.0])
    power, _ = waterfill(g.reshape(4, 1, 1), [1.0], 1.2, tolerance=1e-12)
    rate = float(np.sum(np.log2(1 + g * power[:, 0, 0])))
    _, oracle = oracles.projected_gradient_rate(g, 1.2)
    assert rate == pytest.approx(oracle, rel=1e-3)
    assert rate >= oracle * (1 - 1e-9)
    assert power.sum() == pytest.approx(1.2, rel=1e-8)


def test_baseline_no_direct_link():
    assert run_drop(SMALL.replace(direct_gain=0.0), 1, "baseline_licensed") == 0.0


def test_baseline_single_subcarrier_full_power():
    cfg = SystemConfig(n_tx_bs=3, n_sudacs=1, n_ues=1, n_subcarriers=1, p_bs_max=2.0)
    ch = generate_channels(cfg, 11)
    g = np.sum(np.abs(ch.direct[0, 0]) ** 2)
    expected = math.log2(1 + g * 2.0) * cfg.subcarrier_bandwidth
    assert baseline_licensed(cfg, ch) == pytest.approx(expected, rel=1e-8)


def test_benchmark_single_antenna_equals_baseline():
    cfg = SystemConfig(n_tx_bs=3, n_sudacs=1, n_ues=1, n_subcarriers=4)
    ch = generate_channels(cfg, 4)
    mirrored = ChannelRealization(ch.backend, ch.frontend, ch.backend.copy(), ch.noise_power)
    assert benchmark_mimo(cfg, ch) == pytest.approx(baseline_licensed(cfg, mirrored), rel=1e-9)


def test_benchmark_dominates_sudas():
    for seed in range(10):
        r = evaluate_drop(SMALL, drop_seed(0, seed), ("sudas", "benchmark_mimo"))
        assert r.throughput["benchmark_mimo"] >= r.throughput["sudas"]


def test_benchmark_zero_channel():
    assert run_drop(SMALL.replace(backend_gain=0.0), 0, "benchmark_mimo") == 0.0


def test_relaxed_bound():
    d = decompose(generate_channels(SMALL, 8))
    params = SolverParams(max_iterations=UPPER_BOUND_ITERATIONS)
    policy, trace = alternating_optimize(d, SMALL, params)
    bound = relaxed_upper_bound(d, SMALL, params)
    assert bound == trace[-1]
    assert bound >= weighted_throughput(policy, d, SMALL).weighted


def test_failed_drop_is_recorded(monkeypatch):
    import sudas.sim as sim
    from sudas.errors import SolverError

    def boom(*args, **kwargs):
        raise SolverError("bracket exhausted")

    monkeypatch.setattr(sim, "alternating_optimize", boom)
    r = sim.evaluate_drop(SMALL, 0, ("sudas", "baseline_licensed"))
    assert math.isnan(r.throughput["sudas"]) and "sudas" in r.errors
    assert r.throughput["baseline_licensed"] > 0
    with pytest.raises(SolverError):
        sim.run_drop(SMALL, 0, "sudas")


# -- sweeps ------------------------------------------------------------------

def test_sweep_single_drop_has_zero_stderr():
    spec = SweepSpec("bs_power", (1.0, 10.0), n_drops=1, base_config=SMALL)
    report = run_sweep(spec)
    for v in range(2):
        assert report.stderr[v]["sudas"] == 0.0
        assert report.n_failures[v]["sudas"] == 0
    assert report.mean[0]["sudas"] == run_drop(SMALL.replace(p_bs_max=1.0), drop_seed(SMALL.rng_seed, 0))


def test_sweep_trends():
    base = SMALL.replace(n_subcarriers=4)
    spec = SweepSpec("bs_power", tuple(dbm_to_watt(x) for x in (30, 40, 46)), n_drops=8, base_config=base)
    report = run_sweep(spec, master_seed=3)
    sudas = [m["sudas"] for m in report.mean]
    assert sudas[0] < sudas[1] < sudas[2]
    spec = SweepSpec("n_tx_bs", (1, 2, 4), n_drops=8, base_config=base)
    report = run_sweep(spec, master_seed=3)
    sudas = [m["sudas"] for m in report.mean]
    assert sudas[0] < sudas[1] < sudas[2]


@pytest.mark.slow
def test_sweep_parallel_matches_serial():
    spec = SweepSpec("n_sudacs", (2, 4), n_drops=4, base_config=SMALL)
    a = run_sweep(spec, master_seed=1)
    b = run_sweep(spec, master_seed=1, n_jobs=2)
    assert a.mean == b.mean
