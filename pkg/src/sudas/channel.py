"""Random channel draws and their per-stream SVD decomposition.

Singular values are kept in *ascending* order and the singular vectors are
arranged so that the last ``r`` columns of ``U`` and ``V`` belong to them
(``r = min`` of the matrix dimensions).  The ``n_streams`` strongest spatial
channels are therefore always the rightmost ``n_streams`` columns, and the
diagonal of ``Lambda`` sits in its bottom-right corner::

    H = U @ Lambda @ V^H,   Lambda[M - r + j, N - r + j] = s[j],  s ascending
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .errors import ConfigError, NumericalInputError


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of every link on every subcarrier.

    Attributes
    ----------
    backend : (n_F, M, N_T) complex
        BS to SUDAS matrices.
    frontend : (n_F, K, M) complex
        Diagonals of the SUDAS to UE matrices (one unlicensed sub-band per SUDAC).
    direct : (n_F, K, N_T) complex
        BS to UE rows, only used by the licensed-band baseline.
    noise_power : float
    """

    backend: np.ndarray
    frontend: np.ndarray
    direct: np.ndarray
    noise_power: float = 1.0

    def __post_init__(self):
        for name in ("backend", "frontend", "direct"):
            arr = np.asarray(getattr(self, name), dtype=complex)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.backend.ndim != 3 or self.frontend.ndim != 3 or self.direct.ndim != 3:
            raise ValueError("backend, frontend and direct must be 3-D arrays")
        n_f, m, n_t = self.backend.shape
        if self.frontend.shape[0] != n_f or self.frontend.shape[2] != m:
            raise ValueError(f"frontend shape {self.frontend.shape} inconsistent with backend {self.backend.shape}")
        if self.direct.shape != (n_f, self.frontend.shape[1], n_t):
            raise ValueError(f"direct shape {self.direct.shape} inconsistent with backend/frontend")
        if not self.noise_power > 0:
            raise ValueError("noise_power must be > 0")

    @property
    def n_subcarriers(self):
        return self.backend.shape[0]

    @property
    def n_sudacs(self):
        return self.backend.shape[1]

    @property
    def n_tx_bs(self):
        return self.backend.shape[2]

    @property
    def n_ues(self):
        return self.frontend.shape[1]

    def frontend_matrix(self, subcarrier, ue):
        return np.diag(self.frontend[subcarrier, ue])


def _cscg(rng, variance, shape):
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def generate_channels(config: SystemConfig, seed) -> ChannelRealization:
    """Draw i.i.d. Rayleigh channels for every link.

    Each entry is CN(0, gain) with the link's mean gain from ``config``.
    Draw order is backend, frontend, direct, so a given seed always yields the
    same realization.
    """
    if not isinstance(config, SystemConfig):
        raise ConfigError("expected a SystemConfig")
    config.validate()
    rng = np.random.default_rng(seed)
    n_f, m, n_t, k = config.n_subcarriers, config.n_sudacs, config.n_tx_bs, config.n_ues
    backend = _cscg(rng, config.backend_gain, (n_f, m, n_t))
    frontend = _cscg(rng, config.frontend_gain, (n_f, k, m))
    direct = _cscg(rng, config.direct_gain, (n_f, k, n_t))
    return ChannelRealization(backend, frontend, direct, config.noise_power)


@dataclass(frozen=True)
class SpatialDecomposition:
    """SVD factors and channel-to-noise ratios of a realization.

    ``backend_sv`` has ``min(M, N_T)`` entries per subcarrier and
    ``frontend_sv`` has ``M`` entries per (subcarrier, UE), both ascending.
    """

    backend_u: np.ndarray      # (n_F, M, M)
    backend_sv: np.ndarray     # (n_F, r1)
    backend_v: np.ndarray      # (n_F, N_T, N_T)
    frontend_u: np.ndarray     # (n_F, K, M, M)
    frontend_sv: np.ndarray    # (n_F, K, M)
    frontend_v: np.ndarray     # (n_F, K, M, M)
    backend_rank: np.ndarray   # (n_F,)
    frontend_rank: np.ndarray  # (n_F, K)
    noise_power: float

    @property
    def backend_cnr(self):
        return self.backend_sv ** 2 / self.noise_power

    @property
    def frontend_cnr(self):
        return self.frontend_sv ** 2 / self.noise_power

    @property
    def n_subcarriers(self):
        return self.backend_u.shape[0]

    @property
    def n_ues(self):
        return self.frontend_u.shape[1]

    def backend_lambda(self, subcarrier):
        """``M x N_T`` singular-value matrix with bottom-right aligned diagonal."""
        m = self.backend_u.shape[1]
        n_t = self.backend_v.shape[1]
        s = self.backend_sv[subcarrier]
        r = s.size
        lam = np.zeros((m, n_t))
        lam[m - r + np.arange(r), n_t - r + np.arange(r)] = s
        return lam

    def frontend_lambda(self, subcarrier, ue):
        return np.diag(self.frontend_sv[subcarrier, ue])

    def stream_cnrs(self, n_streams):
        """CNRs of the ``n_streams`` strongest spatial channels of each hop.

        Returns
        -------
        g1 : (n_F, n_streams)
        g2 : (n_F, K, n_streams)
            Ascending along the last axis; stream ``n`` of the backend is
            paired with stream ``n`` of the frontend.
        """
        r1 = self.backend_sv.shape[1]
        m = self.frontend_sv.shape[2]
        if n_streams > min(r1, m):
            raise ValueError(f"n_streams={n_streams} exceeds the number of spatial channels {min(r1, m)}")
        return self.backend_cnr[:, r1 - n_streams:], self.frontend_cnr[:, :, m - n_streams:]


def _numerical_rank(sv, shape):
    if sv.size == 0:
        return 0
    top = sv.max()
    if top == 0:
        return 0
    tol = max(shape) * np.finfo(float).eps * top
    return int(np.count_nonzero(sv > tol))


def _svd_ascending(h):
    """SVD of one matrix with the ascending, right-aligned convention."""
    m, n = h.shape
    u, s, vh = np.linalg.svd(h, full_matrices=True)
    r = s.size
    # numpy pairs column j of u and v with s[j] (descending) for j < r; the
    # remaining columns span the null spaces.  Reverse the paired block and
    # move it to the right.
    u_order = np.concatenate([np.arange(r, m), np.arange(r)[::-1]])
    v_order = np.concatenate([np.arange(r, n), np.arange(r)[::-1]])
    v = vh.conj().T
    return u[:, u_order], s[::-1].copy(), v[:, v_order]


def _diag_svd_ascending(d):
    """Analytic SVD of ``diag(d)``: moduli sorted ascending, phases in U."""
    order = np.argsort(np.abs(d), kind="stable")
    mag = np.abs(d)[order]
    phase = np.ones(d.size, dtype=complex)
    nz = mag > 0
    phase[nz] = d[order][nz] / mag[nz]
    m = d.size
    v = np.zeros((m, m), dtype=complex)
    v[order, np.arange(m)] = 1.0
    u = v * phase[np.newaxis, :]
    return u, mag, v


def decompose(channel: ChannelRealization) -> SpatialDecomposition:
    """SVD of every backend matrix and every (diagonal) frontend matrix."""
    for name in ("backend", "frontend", "direct"):
        if not np.all(np.isfinite(getattr(channel, name))):
            raise NumericalInputError(f"{name} channel contains non-finite entries")
    n_f, m, n_t = channel.backend.shape
    k = channel.n_ues
    r1 = min(m, n_t)

    b_u = np.empty((n_f, m, m), dtype=complex)
    b_s = np.empty((n_f, r1))
    b_v = np.empty((n_f, n_t, n_t), dtype=complex)
    b_rank = np.empty(n_f, dtype=int)
    for i in range(n_f):
        b_u[i], b_s[i], b_v[i] = _svd_ascending(channel.backend[i])
        b_rank[i] = _numerical_rank(b_s[i], (m, n_t))

    f_u = np.empty((n_f, k, m, m), dtype=complex)
    f_s = np.empty((n_f, k, m))
    f_v = np.empty((n_f, k, m, m), dtype=complex)
    f_rank = np.empty((n_f, k), dtype=int)
    for i in range(n_f):
        for ue in range(k):
            f_u[i, ue], f_s[i, ue], f_v[i, ue] = _diag_svd_ascending(channel.frontend[i, ue])
            f_rank[i, ue] = _numerical_rank(f_s[i, ue], (m, m))

    arrays = (b_u, b_s, b_v, f_u, f_s, f_v, b_rank, f_rank)
    for arr in arrays:
        arr.setflags(write=False)
    return SpatialDecomposition(*arrays, noise_power=channel.noise_power)


def reconstruct_backend(decomp: SpatialDecomposition, subcarrier):
    u = decomp.backend_u[subcarrier]
    v = decomp.backend_v[subcarrier]
    return u @ decomp.backend_lambda(subcarrier) @ v.conj().T


def reconstruct_frontend(decomp: SpatialDecomposition, subcarrier, ue):
    u = decomp.frontend_u[subcarrier, ue]
    v = decomp.frontend_v[subcarrier, ue]
    return u @ decomp.frontend_lambda(subcarrier, ue) @ v.conj().T
