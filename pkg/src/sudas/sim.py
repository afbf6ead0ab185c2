"""Monte-Carlo drops and parameter sweeps comparing the SUDAS allocator with
a licensed-band-only baseline and an M-antenna-UE MIMO benchmark.

Seeding: drop ``d`` of a sweep with master seed ``m`` draws its channels from
``numpy.random.SeedSequence([m, d])``.  The same drop seed is reused for every
sweep value and every system, so comparisons are paired per drop.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .allocator import (
    CNR_FLOOR, DUAL_FLOOR, LN2, alternating_optimize, assign_subcarriers, solve_dual,
    subcarrier_metric, weighted_throughput,
)
from .channel import ChannelRealization, SpatialDecomposition, decompose, generate_channels
from .config import SYSTEMS, SolverParams, SweepSpec, SystemConfig
from .errors import NumericalError, RankError, SolverError, UnboundedError

log = logging.getLogger(__name__)

UPPER_BOUND_ITERATIONS = 200
DROP_ERRORS = (SolverError, NumericalError, RankError, UnboundedError, FloatingPointError)


def drop_seed(master_seed, drop):
    return np.random.SeedSequence([int(master_seed), int(drop)])


def waterfill(cnr, weights, budget, tolerance=1e-9, bracket_max=1e12):
    """Weighted water-filling with per-subcarrier UE selection.

    Parameters
    ----------
    cnr : (n_F, K, L) array
        Gain-to-noise ratio of each of ``L`` parallel modes.
    weights : (K,) array
    budget : float
        Sum power over the modes of the selected UEs.

    Returns
    -------
    power : (n_F, K, L) array
        Zero outside the selected (subcarrier, UE) pairs.
    assignment : (n_F, K) one-hot array
    """
    cnr = np.asarray(cnr, dtype=float)
    w = np.asarray(weights, dtype=float)[None, :, None]
    n_f, k, _ = cnr.shape
    live = cnr > CNR_FLOOR
    inv = np.where(live, 1.0 / np.where(live, cnr, 1.0), 0.0)

    def level(mu):
        return np.where(live, np.maximum(w / (mu * LN2) - inv, 0.0), 0.0)

    def price(s):
        mask = s[:, :, None]
        return solve_dual(budget, lambda mu: math.fsum((mask * level(mu)).ravel()), tolerance, bracket_max)

    if not budget > 0:
        s = assign_subcarriers(np.zeros((n_f, k)))
        return np.zeros(cnr.shape), s
    s = np.full((n_f, k), 1.0 / k)
    mu = price(s)
    for _ in range(50):
        p = level(max(mu, DUAL_FLOOR))
        s_new = assign_subcarriers(subcarrier_metric(w[..., 0], cnr * p))
        mu = price(s_new)
        if np.array_equal(s_new, s):
            break
        s = s_new
    s = s_new
    return level(max(mu, DUAL_FLOOR)) * s[:, :, None], s


def _parallel_throughput(cnr, power, assignment, weights):
    rates = np.sum(np.log2(1.0 + cnr * power), axis=-1) * assignment
    return math.fsum((np.asarray(weights)[None, :] * rates).ravel())


def baseline_licensed(config: SystemConfig, channel: ChannelRealization, params: SolverParams = SolverParams()):
    """Single-antenna UEs served directly by the BS in the licensed band.

    Maximum-ratio transmission on each BS-to-UE row, water-filling over
    subcarriers under the BS budget only.  Returns bits/s.
    """
    cnr = np.sum(np.abs(channel.direct) ** 2, axis=-1)[..., None] / channel.noise_power
    power, s = waterfill(cnr, config.weights, config.p_bs_max, params.dual_search_tolerance, params.dual_bracket_max)
    return _parallel_throughput(cnr, power, s, config.weights) * config.subcarrier_bandwidth


def benchmark_mimo(config: SystemConfig, channel: ChannelRealization, params: SolverParams = SolverParams()):
    """UEs with ``M`` receive antennas and no SUDAS.

    Every UE sees the backend matrix of the same drop as its own channel, so
    per drop this is an upper bound on what the SUDAS can deliver.  Returns
    bits/s.
    """
    sv = np.linalg.svd(channel.backend, compute_uv=False)
    modes = sv ** 2 / channel.noise_power
    cnr = np.broadcast_to(modes[:, None, :], (modes.shape[0], channel.n_ues, modes.shape[1]))
    power, s = waterfill(cnr, config.weights, config.p_bs_max, params.dual_search_tolerance, params.dual_bracket_max)
    return _parallel_throughput(cnr, power, s, config.weights) * config.subcarrier_bandwidth


def relaxed_upper_bound(decomp: SpatialDecomposition, config: SystemConfig, params: SolverParams = SolverParams()):
    """Final high-SNR objective of the alternating optimizer (bits per channel use).

    Callers wanting the converged value pass a large ``max_iterations``.
    """
    _, trace = alternating_optimize(decomp, config, params)
    return trace[-1]


@dataclass
class DropResult:
    throughput: dict                        # system -> bits/s (nan on failure)
    per_ue: np.ndarray = None               # sudas rho_k in bits/s
    trace: tuple = ()
    errors: dict = field(default_factory=dict)


def evaluate_drop(config: SystemConfig, seed, systems=SYSTEMS, params: SolverParams = SolverParams()):
    """Run the requested systems on one channel draw."""
    channel = generate_channels(config, seed)
    out = DropResult({})
    decomp = None
    for system in systems:
        if system not in SYSTEMS:
            raise ValueError(f"unknown system {system!r}")
        try:
            if system == "baseline_licensed":
                value = baseline_licensed(config, channel, params)
            elif system == "benchmark_mimo":
                value = benchmark_mimo(config, channel, params)
            else:
                if decomp is None:
                    decomp = decompose(channel)
                if system == "sudas":
                    policy, trace = alternating_optimize(decomp, config, params)
                    report = weighted_throughput(policy, decomp, config, trace=trace)
                    value = report.bits_per_second
                    out.per_ue = report.per_ue * config.subcarrier_bandwidth
                    out.trace = tuple(trace)
                else:
                    long_run = dataclasses.replace(
                        params, max_iterations=max(params.max_iterations, UPPER_BOUND_ITERATIONS))
                    value = relaxed_upper_bound(decomp, config, long_run) * config.subcarrier_bandwidth
        except DROP_ERRORS as exc:
            log.warning("drop failed for %s: %s", system, exc)
            out.errors[system] = repr(exc)
            value = float("nan")
        out.throughput[system] = value
    return out


def run_drop(config: SystemConfig, seed, system="sudas", params: SolverParams = SolverParams()):
    """Weighted throughput (bits/s) of one system on one channel draw."""
    result = evaluate_drop(config, seed, (system,), params)
    if system in result.errors:
        raise SolverError(result.errors[system])
    return result.throughput[system]


@dataclass
class SweepReport:
    """Aggregated sweep results.

    ``samples[v][system]`` holds the per-drop throughputs (nan for failed
    drops) for sweep value index ``v``.
    """

    variable: str
    values: tuple
    systems: tuple
    n_drops: int
    mean: list
    stderr: list
    n_failures: list
    samples: list
    per_ue_mean: list
    traces: list


def _mean_stderr(x):
    x = [v for v in x if not math.isnan(v)]
    if not x:
        return float("nan"), float("nan")
    mean = math.fsum(x) / len(x)
    if len(x) < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in x) / (len(x) - 1)
    return mean, math.sqrt(var / len(x))


def _task(args):
    config, seed, systems, params = args
    return evaluate_drop(config, seed, systems, params)


def run_sweep(spec: SweepSpec, params: SolverParams = SolverParams(), master_seed=None, n_jobs=1):
    """Run every (sweep value, drop, system) and aggregate.

    ``master_seed`` defaults to ``spec.base_config.rng_seed``.  Results do not
    depend on ``n_jobs``.
    """
    if master_seed is None:
        master_seed = spec.base_config.rng_seed
    tasks = []
    for value in spec.values:
        config = spec.config_for(value)
        for drop in range(spec.n_drops):
            tasks.append((config, drop_seed(master_seed, drop), spec.systems, params))
    if n_jobs == 1:
        results = [_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * n_jobs))))

    mean, stderr, failures, samples, per_ue_mean, traces = [], [], [], [], [], []
    for v in range(len(spec.values)):
        block = results[v * spec.n_drops:(v + 1) * spec.n_drops]
        row_mean, row_err, row_fail, row_samples = {}, {}, {}, {}
        for system in spec.systems:
            xs = [r.throughput[system] for r in block]
            row_samples[system] = np.array(xs)
            row_mean[system], row_err[system] = _mean_stderr(xs)
            row_fail[system] = sum(1 for r in block if system in r.errors)
        mean.append(row_mean)
        stderr.append(row_err)
        failures.append(row_fail)
        samples.append(row_samples)
        ue = [r.per_ue for r in block if r.per_ue is not None and "sudas" not in r.errors]
        per_ue_mean.append(np.mean(ue, axis=0) if ue else None)
        traces.append([r.trace for r in block])
    return SweepReport(spec.variable, spec.values, spec.systems, spec.n_drops,
                       mean, stderr, failures, samples, per_ue_mean, traces)
