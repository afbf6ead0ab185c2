"""Alternating power / subcarrier optimization over the diagonalized streams.

After diagonalization every (subcarrier ``i``, UE ``k``, stream ``n``) is a
scalar two-hop link with backend CNR ``g1[i, n]`` and frontend CNR
``g2[i, k, n]``.  The solver maximizes the weighted time-sharing objective

    sum_{i,k} w_k s_ik sum_n log2(1 + sinr_approx(g1 p_bs, g2 p_sudas))

subject to ``sum s p_bs <= P_T`` and ``sum s p_sudas <= M P_max`` by
alternating closed-form power updates (each with its own dual price found by
bisection) and argmax subcarrier assignment.

Array layout: powers are ``(n_F, K, N_S)``, assignments ``(n_F, K)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization, SpatialDecomposition
from .config import SolverParams, SystemConfig
from .errors import SolverError, UnboundedError
from . import precoding

log = logging.getLogger(__name__)

LN2 = math.log(2.0)
CNR_FLOOR = 1e-15
DUAL_FLOOR = 1e-12


def sinr_exact(g1, p1, g2, p2):
    """Two-hop SINR ``a b / (1 + a + b)`` with ``a = g1 p1``, ``b = g2 p2``."""
    a = np.multiply(g1, p1)
    b = np.multiply(g2, p2)
    return a * b / (1.0 + a + b)


def sinr_approx(g1, p1, g2, p2):
    """High-SNR SINR ``a b / (a + b)``; zero when ``a = b = 0``."""
    a = np.multiply(g1, p1, dtype=float)
    b = np.multiply(g2, p2, dtype=float)
    den = a + b
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(den > 0, a * b / np.where(den > 0, den, 1.0), 0.0)
    return out[()] if np.ndim(out) == 0 else out


def _closed_form(g_own, c_other, price, w):
    # maximizer over p >= 0 of  w log2(1 + g p c / (g p + c)) - price p
    # with c = (CNR * power) of the other hop held fixed
    g_own, c_other, price, w = np.broadcast_arrays(
        np.asarray(g_own, dtype=float), np.asarray(c_other, dtype=float),
        np.asarray(price, dtype=float), np.asarray(w, dtype=float))
    live = (g_own > 0) & (c_other > 0)
    if np.any(live & (price <= 0)):
        raise UnboundedError("zero dual price with a live link: power is unbounded")
    out = np.zeros(g_own.shape)
    if not np.any(live):
        return out[()] if out.ndim == 0 else out
    g, c, mu, ww = g_own[live], c_other[live], price[live], w[live]
    x = 4.0 * ww * g * (1.0 + c) / (mu * LN2)
    # sqrt(c^2 + x) - c  without cancellation
    root_minus_c = x / (np.sqrt(c * c + x) + c)
    out[live] = np.maximum(c * (root_minus_c - 2.0) / (2.0 * g * (1.0 + c)), 0.0)
    return out[()] if out.ndim == 0 else out


def update_bs_power(g1, g2, p2_fixed, lam, w):
    """Closed-form backend power for fixed frontend power and C1 price ``lam``."""
    return _closed_form(g1, np.multiply(g2, p2_fixed), lam, w)


def update_sudas_power(g1, p1_fixed, g2, beta, w):
    """Closed-form frontend power for fixed backend power and C2 price ``beta``."""
    return _closed_form(g2, np.multiply(g1, p1_fixed), beta, w)


def solve_dual(budget, total_power, tolerance=1e-9, bracket_max=1e12, floor=DUAL_FLOOR):
    """Find the price at which ``total_power(price)`` meets ``budget``.

    ``total_power`` must be non-increasing in the price.  Bisection runs on
    ``log(price)`` and always returns the feasible end of the bracket, so
    ``budget * (1 - tolerance) <= total_power(price) <= budget`` on return.
    Returns ``0.0`` when even ``total_power(floor)`` fits the budget.

    Raises
    ------
    SolverError
        If ``total_power(bracket_max)`` still exceeds the budget.
    """
    if not budget > 0:
        raise ValueError("budget must be > 0")
    if total_power(floor) <= budget:
        return 0.0
    hi = float(bracket_max)
    if total_power(hi) > budget:
        raise SolverError(f"budget {budget!r} not reachable even at dual price {hi!r}")
    lo = float(floor)
    target = budget * (1.0 - tolerance)
    for _ in range(400):
        mid = math.sqrt(lo * hi)
        if not lo < mid < hi:
            break
        used = total_power(mid)
        if used > budget:
            lo = mid
        else:
            hi = mid
            if used >= target:
                break
    return hi


def subcarrier_metric(w, sinr_values):
    """Assignment score ``w * sum_n [log2(1 + x_n) - x_n / (1 + x_n)]`` over the last axis."""
    x = np.asarray(sinr_values, dtype=float)
    return np.asarray(w) * np.sum(np.log2(1.0 + x) - x / (1.0 + x), axis=-1)


def assign_subcarriers(metrics):
    """One-hot argmax per subcarrier; ties go to the lowest UE index."""
    metrics = np.asarray(metrics, dtype=float)
    if not np.all(np.isfinite(metrics)):
        raise ValueError("metrics must be finite")
    s = np.zeros(metrics.shape)
    s[np.arange(metrics.shape[0]), np.argmax(metrics, axis=1)] = 1.0
    return s


@dataclass
class AllocationPolicy:
    """Result of the alternating optimizer.

    ``p_bs`` and ``p_sudas`` are per-active powers: what the pair (i, k)
    uses while it holds subcarrier ``i``.  Radiated power is ``s * p``.
    """

    p_bs: np.ndarray
    p_sudas: np.ndarray
    assignment: np.ndarray
    lam: float = 0.0
    beta: float = 0.0
    converged: bool = False
    iterations: int = 0

    def bs_power_used(self):
        return math.fsum((self.assignment[:, :, None] * self.p_bs).ravel())

    def sudas_power_used(self):
        return math.fsum((self.assignment[:, :, None] * self.p_sudas).ravel())


@dataclass
class ThroughputReport:
    rates: np.ndarray          # (n_F, K) bits per channel use of each assigned pair
    per_ue: np.ndarray         # (K,) rho_k
    weighted: float            # sum_k w_k rho_k, bits per channel use
    bits_per_second: float
    trace: tuple = field(default_factory=tuple)


def stream_arrays(decomp, config):
    g1, g2 = decomp.stream_cnrs(config.num_streams)
    g1 = np.broadcast_to(g1[:, None, :], g2.shape)
    w = np.asarray(config.weights, dtype=float)[None, :, None]
    return g1, g2, w


def relaxed_objective(p_bs, p_sudas, assignment, g1, g2, w):
    """Weighted time-sharing objective with the high-SNR SINR."""
    per_pair = np.sum(np.log2(1.0 + sinr_approx(g1, p_bs, g2, p_sudas)), axis=-1)
    return math.fsum((np.asarray(w)[..., 0] * assignment * per_pair).ravel())


class _Solver:
    """Per-instance state for :func:`alternating_optimize`."""

    def __init__(self, decomp, config, params):
        self.g1, self.g2, self.w = stream_arrays(decomp, config)
        self.params = params
        self.p_total = float(config.p_bs_max)
        self.s_total = float(config.sudas_budget)
        self.live = (self.g1 > CNR_FLOOR) & (self.g2 > CNR_FLOOR)
        self.g1 = np.where(self.live, self.g1, 0.0)
        self.g2 = np.where(self.live, self.g2, 0.0)

    def initial_point(self):
        n_f, k, n_s = self.g2.shape
        s = np.full((n_f, k), 1.0 / k)
        weight = math.fsum((s[:, :, None] * self.live).ravel())
        p_bs = np.zeros(self.g2.shape)
        p_sudas = np.zeros(self.g2.shape)
        if weight > 0:
            p_bs[self.live] = self.p_total / weight
            p_sudas[self.live] = self.s_total / weight
        return p_bs, p_sudas, s

    def _dual_step(self, budget, update, s):
        if budget <= 0:
            return 0.0, np.zeros(self.g2.shape)
        weight = s[:, :, None]

        def total(mu):
            return math.fsum((weight * update(mu)).ravel())

        mu = solve_dual(budget, total, self.params.dual_search_tolerance, self.params.dual_bracket_max)
        return mu, update(max(mu, DUAL_FLOOR))

    def solve_bs(self, s, p_sudas):
        return self._dual_step(
            self.p_total, lambda mu: update_bs_power(self.g1, self.g2, p_sudas, mu, self.w), s)

    def solve_sudas(self, s, p_bs):
        return self._dual_step(
            self.s_total, lambda mu: update_sudas_power(self.g1, p_bs, self.g2, mu, self.w), s)

    def assign(self, p_bs, p_sudas):
        sinr = sinr_approx(self.g1, p_bs, self.g2, p_sudas)
        return assign_subcarriers(subcarrier_metric(self.w[..., 0], sinr))

    def objective(self, p_bs, p_sudas, s):
        return relaxed_objective(p_bs, p_sudas, s, self.g1, self.g2, self.w)


def alternating_optimize(decomp: SpatialDecomposition, config: SystemConfig,
                         params: SolverParams = SolverParams()):
    """Iterative power and subcarrier allocation.

    Each iteration: backend powers at the C1 price, assignment by argmax of
    the subcarrier metric, frontend powers at the C2 price, assignment again.
    When the second assignment differs from the one a price was solved
    under, that price is re-solved so the iterate stays feasible.  If an
    assignment change would lower the objective it is rejected and the
    iteration falls back to the two power updates under the previous
    assignment.  A step that still lowers the objective (only possible at
    the level of the dual tolerance) keeps the previous iterate, so the
    trace is non-decreasing.

    Returns
    -------
    policy : AllocationPolicy
        Binary assignment; ``converged`` is False when ``max_iterations`` ran out.
    trace : list of float
        Objective after each iteration.
    """
    solver = _Solver(decomp, config, params)
    p_bs, p_sudas, s = solver.initial_point()
    lam = beta = 0.0
    trace = []
    converged = False
    slack = 10.0 * params.dual_search_tolerance
    for it in range(1, params.max_iterations + 1):
        lam1, p_bs1 = solver.solve_bs(s, p_sudas)
        s1 = solver.assign(p_bs1, p_sudas)
        beta1, p_sudas1 = solver.solve_sudas(s1, p_bs1)
        s2 = solver.assign(p_bs1, p_sudas1)
        if not np.array_equal(s2, s):
            lam1, p_bs1 = solver.solve_bs(s2, p_sudas1)
        if not np.array_equal(s2, s1) or not np.array_equal(s2, s):
            beta1, p_sudas1 = solver.solve_sudas(s2, p_bs1)
        value = solver.objective(p_bs1, p_sudas1, s2)

        if trace and value < trace[-1] * (1.0 - slack) - 1e-12:
            log.debug("iteration %d: assignment change rejected (%.6g < %.6g)", it, value, trace[-1])
            s2 = s
            lam1, p_bs1 = solver.solve_bs(s, p_sudas)
            beta1, p_sudas1 = solver.solve_sudas(s, p_bs1)
            value = solver.objective(p_bs1, p_sudas1, s)
        if trace and value < trace[-1]:
            # bisection noise at the fixed point; the previous iterate is
            # feasible and no worse
            p_bs1, p_sudas1, s2, lam1, beta1 = p_bs, p_sudas, s, lam, beta
            value = trace[-1]

        delta = max(np.max(np.abs(p_bs1 - p_bs), initial=0.0),
                    np.max(np.abs(p_sudas1 - p_sudas), initial=0.0),
                    np.max(np.abs(s2 - s), initial=0.0))
        p_bs, p_sudas, s, lam, beta = p_bs1, p_sudas1, s2, lam1, beta1
        trace.append(value)
        if delta <= params.convergence_eps:
            converged = True
            break

    policy = AllocationPolicy(p_bs, p_sudas, s, lam, beta, converged, len(trace))
    return policy, trace


def pair_rates(policy: AllocationPolicy, decomp: SpatialDecomposition, config: SystemConfig,
               channel: ChannelRealization = None, matrix_path=False):
    """Exact rate of every (subcarrier, UE) pair at the policy's powers."""
    g1, g2, _ = stream_arrays(decomp, config)
    if not matrix_path:
        return np.sum(np.log2(1.0 + sinr_exact(g1, policy.p_bs, g2, policy.p_sudas)), axis=-1)
    if channel is None:
        raise ValueError("the matrix path needs the channel realization")
    n_f, k = policy.assignment.shape
    rates = np.zeros((n_f, k))
    for i in range(n_f):
        for ue in range(k):
            if policy.assignment[i, ue] == 0:
                continue
            pair = precoding.build_precoders(decomp, policy.p_bs[i, ue], policy.p_sudas[i, ue], i, ue)
            eff = precoding.effective_channel(pair, channel, i, ue)
            rates[i, ue] = precoding.exact_rate(precoding.mse_matrix(eff))
    return rates


def weighted_throughput(policy: AllocationPolicy, decomp: SpatialDecomposition, config: SystemConfig,
                        channel: ChannelRealization = None, matrix_path=False, trace=()):
    """Per-UE rates and weighted throughput with the exact SINR.

    ``matrix_path=True`` evaluates ``-log2 det E`` from the assembled
    precoders instead of the scalar SINR formula (same value, slower).
    """
    s = np.asarray(policy.assignment)
    if not np.all((s == 0) | (s == 1)):
        raise ValueError("weighted_throughput needs a binary assignment")
    rates = pair_rates(policy, decomp, config, channel, matrix_path) * s
    per_ue = np.array([math.fsum(rates[:, ue]) for ue in range(rates.shape[1])])
    weighted = math.fsum(np.asarray(config.weights) * per_ue)
    return ThroughputReport(rates, per_ue, weighted, weighted * config.subcarrier_bandwidth, tuple(trace))
