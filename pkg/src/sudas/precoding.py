"""Diagonalizing BS precoder / SUDAS forwarding matrices and the exact
matrix-domain link quantities (effective channel, MSE, MMSE receiver, rate).

Noise is ``CN(0, N0 I)`` at both the SUDACs and the UE, so the equivalent
noise covariance at the UE is ``N0 (H_s F)(H_s F)^H + N0 I``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .channel import ChannelRealization, SpatialDecomposition
from .errors import NumericalError, RankError

COND_LIMIT = 1e12


@dataclass(frozen=True)
class PrecoderPair:
    bs_precoder: np.ndarray   # (N_T, N_S)
    sudas_matrix: np.ndarray  # (M, M)


@dataclass(frozen=True)
class EffectiveChannel:
    gamma: np.ndarray  # (M, N_S) end-to-end channel
    theta: np.ndarray  # (M, M) Hermitian noise covariance


def forwarding_gains(g1, p_bs, p_sudas, noise_power=1.0):
    """Squared diagonal of the SUDAS forwarding matrix.

    Chosen so that stream ``n`` leaves the SUDAS with power ``p_sudas[n]``,
    counting both the amplified signal and the amplified SUDAC noise.
    """
    g1 = np.asarray(g1, dtype=float)
    return np.asarray(p_sudas, dtype=float) / (noise_power * (g1 * np.asarray(p_bs, dtype=float) + 1.0))


def build_precoders(decomp: SpatialDecomposition, p_bs, p_sudas, subcarrier, ue) -> PrecoderPair:
    """Diagonalizing precoder pair for one (subcarrier, UE).

    ``P = V~_B diag(sqrt(p_bs))`` and ``F = V~_S diag(f) U~_B^H`` where the
    tilde factors are the ``N_S`` rightmost singular vectors and ``f`` comes
    from :func:`forwarding_gains`.
    """
    p_bs = np.asarray(p_bs, dtype=float)
    p_sudas = np.asarray(p_sudas, dtype=float)
    if p_bs.ndim != 1 or p_bs.shape != p_sudas.shape:
        raise ValueError("p_bs and p_sudas must be 1-D with equal length")
    if np.any(p_bs < 0) or np.any(p_sudas < 0):
        raise ValueError("stream powers must be >= 0")
    n_s = p_bs.size
    r1 = int(decomp.backend_rank[subcarrier])
    r2 = int(decomp.frontend_rank[subcarrier, ue])
    if n_s > min(r1, r2):
        raise RankError(f"{n_s} streams requested but rank(H_BS->SUDAS)={r1}, rank(H_SUDAS->UE)={r2}")

    v_b = decomp.backend_v[subcarrier][:, -n_s:]
    u_b = decomp.backend_u[subcarrier][:, -n_s:]
    v_s = decomp.frontend_v[subcarrier, ue][:, -n_s:]
    g1 = decomp.backend_cnr[subcarrier, -n_s:]

    f = np.sqrt(forwarding_gains(g1, p_bs, p_sudas, decomp.noise_power))
    bs_precoder = v_b * np.sqrt(p_bs)[np.newaxis, :]
    sudas_matrix = (v_s * f[np.newaxis, :]) @ u_b.conj().T
    return PrecoderPair(bs_precoder, sudas_matrix)


def effective_channel(pair: PrecoderPair, channel: ChannelRealization, subcarrier, ue) -> EffectiveChannel:
    h_b = channel.backend[subcarrier]
    h_s = channel.frontend_matrix(subcarrier, ue)
    hf = h_s @ pair.sudas_matrix
    if pair.bs_precoder.shape[0] != h_b.shape[1] or hf.shape[1] != h_b.shape[0]:
        raise ValueError("precoder shapes do not match the channel")
    gamma = hf @ h_b @ pair.bs_precoder
    n0 = channel.noise_power
    theta = n0 * (hf @ hf.conj().T) + n0 * np.eye(hf.shape[0])
    theta = 0.5 * (theta + theta.conj().T)
    return EffectiveChannel(gamma, theta)


def _cho(theta):
    if np.linalg.cond(theta) > COND_LIMIT:
        raise NumericalError("noise covariance is numerically singular")
    try:
        return linalg.cho_factor(theta, lower=True)
    except linalg.LinAlgError:
        raise NumericalError("noise covariance is not positive definite") from None


def whitened_gram(eff: EffectiveChannel):
    """``Gamma^H Theta^-1 Gamma``."""
    c = _cho(eff.theta)
    g = eff.gamma.conj().T @ linalg.cho_solve(c, eff.gamma)
    return 0.5 * (g + g.conj().T)


def mse_matrix(eff: EffectiveChannel):
    """``E = [I + Gamma^H Theta^-1 Gamma]^-1``."""
    a = np.eye(eff.gamma.shape[1]) + whitened_gram(eff)
    e = linalg.cho_solve(linalg.cho_factor(a, lower=True), np.eye(a.shape[0]))
    return 0.5 * (e + e.conj().T)


def mmse_receiver(eff: EffectiveChannel):
    """``W = (Gamma Gamma^H + Theta)^-1 Gamma``."""
    cov = eff.gamma @ eff.gamma.conj().T + eff.theta
    cov = 0.5 * (cov + cov.conj().T)
    return linalg.cho_solve(_cho(cov), eff.gamma)


def exact_rate(e):
    """``-log2 det E`` in bits per channel use."""
    eig = np.linalg.eigvalsh(e)
    if np.any(eig <= 0):
        raise ValueError("MSE matrix must be positive definite")
    return max(0.0, float(-np.sum(np.log2(eig))))


def sudas_transmit_power(pair: PrecoderPair, channel: ChannelRealization, subcarrier):
    """``Tr(F (H_B P P^H H_B^H + N0 I) F^H)``."""
    h_b = channel.backend[subcarrier]
    hp = h_b @ pair.bs_precoder
    cov = hp @ hp.conj().T + channel.noise_power * np.eye(h_b.shape[0])
    f = pair.sudas_matrix
    return float(np.real(np.trace(f @ cov @ f.conj().T)))


def bs_transmit_power(pair: PrecoderPair):
    return float(np.real(np.trace(pair.bs_precoder @ pair.bs_precoder.conj().T)))


def empirical_mse_check(pair: PrecoderPair, channel: ChannelRealization, receiver, n_samples,
                        subcarrier, ue, rng=None):
    """Signal-level Monte-Carlo estimate of the per-stream MSE.

    Draws unit-variance symbols and both noise vectors, passes them through
    the two hops and the linear receiver ``receiver^H``.

    Returns
    -------
    mse, stderr : (N_S,) arrays
    """
    rng = np.random.default_rng(rng)
    h_b = channel.backend[subcarrier]
    h_s = channel.frontend_matrix(subcarrier, ue)
    n_s = pair.bs_precoder.shape[1]
    m = h_b.shape[0]
    n0 = channel.noise_power

    def cscg(var, shape):
        return np.sqrt(var / 2.0) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))

    d = cscg(1.0, (n_s, n_samples))
    z = cscg(n0, (m, n_samples))
    n = cscg(n0, (m, n_samples))
    y_sudas = h_b @ (pair.bs_precoder @ d) + z
    y_ue = h_s @ (pair.sudas_matrix @ y_sudas) + n
    d_hat = receiver.conj().T @ y_ue
    err = np.abs(d_hat - d) ** 2
    return err.mean(axis=1), err.std(axis=1, ddof=1) / np.sqrt(n_samples)
