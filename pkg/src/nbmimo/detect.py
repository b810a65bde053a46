"""Linear MIMO detectors and their soft outputs.

Every detector works on a single ``(Nr, Nt)`` channel or on a stack of
them with a leading batch axis, and returns a :class:`SoftEstimates`
holding one entry per stream.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg

from .mimo import FIELD_BITS, symbols_to_labels


class Detector(str, Enum):
    MF = "mf"
    MF_SIMPLIFIED = "mf-simplified"
    MMSE = "mmse"
    ZF = "zf"


class VarianceMode(str, Enum):
    EXACT = "exact"
    CONSTANT = "constant"


class DetectionError(ValueError):
    pass


@dataclass(frozen=True)
class SoftEstimate:
    s_hat: complex
    sigma_sq: float
    scale: float
    k: int

    def sinr(self, stream_power: float) -> float:
        """``(E_s/Nt) / sigma_k^2`` for MF-type estimates."""
        return stream_power / self.sigma_sq


@dataclass(frozen=True)
class SoftEstimates:
    """Per-stream estimates as arrays.

    ``scale`` is 1 for MF-type detectors and ``mu_k`` for MMSE, so the
    likelihood of point ``s`` is centred on ``scale * s``.
    """

    s_hat: np.ndarray
    sigma_sq: np.ndarray
    scale: np.ndarray

    def __len__(self) -> int:
        return self.s_hat.shape[-1]

    def __getitem__(self, k: int) -> SoftEstimate:
        if self.s_hat.ndim != 1:
            raise TypeError("indexing is only defined for a single channel use")
        return SoftEstimate(complex(self.s_hat[k]), float(self.sigma_sq[k]), float(self.scale[k]), k)

    def __iter__(self):
        return (self[k] for k in range(len(self)))


def _hermitian(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def _check_dims(h: np.ndarray, y: np.ndarray) -> None:
    if h.ndim not in (2, 3) or y.shape != h.shape[:-1]:
        raise DetectionError(f"channel {h.shape} incompatible with received vector {y.shape}")


def mf_interference_plus_noise(h: np.ndarray, total_power: float, n_tx: int, noise_variance: float) -> np.ndarray:
    """Exact per-stream denominator of the MF SINR for weights ``H_k^H / ||H_k||^2``.

    ``(E_s/Nt) sum_{i != k} |W_k H_i|^2 + 2 sigma_n^2 ||W_k||^2``
    """
    gram = _hermitian(h) @ h
    energy = np.real(np.diagonal(gram, axis1=-2, axis2=-1))
    if np.any(energy <= 0):
        raise DetectionError("channel has a zero column")
    cross = np.sum(np.abs(gram) ** 2, axis=-1) - energy ** 2
    return (total_power / n_tx) * cross / energy ** 2 + 2.0 * noise_variance / energy


def detect_mf(h, y, total_power: float, n_tx: int, noise_variance: float,
              variance_mode: VarianceMode | str = VarianceMode.EXACT) -> SoftEstimates:
    """Matched filter normalized by the column energy.

    ``variance_mode="exact"`` evaluates the interference-plus-noise power per
    realization; ``"constant"`` uses ``2 sigma_n^2 / Nr``.
    """
    h = np.asarray(h)
    y = np.asarray(y)
    _check_dims(h, y)
    energy = np.sum(np.abs(h) ** 2, axis=-2)
    if np.any(energy == 0):
        raise DetectionError("channel has a zero column")
    s_hat = np.einsum("...ik,...i->...k", np.conj(h), y) / energy
    if VarianceMode(variance_mode) is VarianceMode.EXACT:
        sigma_sq = mf_interference_plus_noise(h, total_power, n_tx, noise_variance)
    else:
        sigma_sq = np.full(s_hat.shape, 2.0 * noise_variance / h.shape[-2])
    return SoftEstimates(s_hat, sigma_sq, np.ones(s_hat.shape))


def detect_mf_simplified(h, y, noise_variance: float) -> SoftEstimates:
    """Matched filter with the column energy replaced by Nr."""
    h = np.asarray(h)
    y = np.asarray(y)
    _check_dims(h, y)
    n_rx = h.shape[-2]
    s_hat = np.einsum("...ik,...i->...k", np.conj(h), y) / n_rx
    sigma_sq = np.full(s_hat.shape, 2.0 * noise_variance / n_rx)
    return SoftEstimates(s_hat, sigma_sq, np.ones(s_hat.shape))


def mmse_weights(h: np.ndarray, total_power: float, n_tx: int, noise_variance: float) -> np.ndarray:
    """``W = H^H (H H^H + (N0 Nt / E_s) I)^-1`` via a Cholesky solve; shape ``(Nt, Nr)``.

    When Nr > Nt the equal form ``(H^H H + (N0 Nt / E_s) I)^-1 H^H`` is used,
    which factors the smaller and better conditioned Gram matrix.
    """
    n_rx, n_cols = h.shape[-2:]
    reg = 2.0 * noise_variance * n_tx / total_power
    tall = n_rx > n_cols
    gram = (_hermitian(h) @ h if tall else h @ _hermitian(h)) + reg * np.eye(n_cols if tall else n_rx)
    try:
        factor = scipy.linalg.cho_factor(gram, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        raise DetectionError("regularized Gram matrix is numerically singular") from None
    if tall:
        return scipy.linalg.cho_solve(factor, _hermitian(h), check_finite=False)
    # gram is Hermitian, so (gram^-1 H)^H = H^H gram^-1
    return _hermitian(scipy.linalg.cho_solve(factor, h, check_finite=False))


def detect_mmse(h, y, total_power: float, n_tx: int, noise_variance: float) -> SoftEstimates:
    """MMSE estimates with bias ``mu_k = W_k H_k`` and variance ``(E_s/Nt)(mu_k - mu_k^2)``."""
    h = np.asarray(h)
    y = np.asarray(y)
    _check_dims(h, y)
    if h.ndim == 3:
        parts = [detect_mmse(hh, yy, total_power, n_tx, noise_variance) for hh, yy in zip(h, y)]
        return SoftEstimates(*(np.stack([getattr(p, f) for p in parts]) for f in ("s_hat", "sigma_sq", "scale")))
    w = mmse_weights(h, total_power, n_tx, noise_variance)
    s_hat = w @ y
    mu_c = np.einsum("ki,ik->k", w, h)
    if np.any(np.abs(mu_c.imag) > 1e-9 * np.maximum(np.abs(mu_c), 1e-300)):
        raise DetectionError("MMSE bias term is not real")
    mu = mu_c.real
    sigma_sq = (total_power / n_tx) * (mu - mu ** 2)
    return SoftEstimates(s_hat, sigma_sq, mu)


def detect_zf(h, y) -> np.ndarray:
    """Zero-forcing estimates ``(H^H H)^-1 H^H y``; hard estimates only."""
    h = np.asarray(h)
    y = np.asarray(y)
    _check_dims(h, y)
    if h.ndim == 3:
        return np.stack([detect_zf(hh, yy) for hh, yy in zip(h, y)])
    s_hat, _, rank, _ = np.linalg.lstsq(h, y, rcond=None)
    if rank < h.shape[1]:
        raise DetectionError(f"channel rank {rank} < Nt={h.shape[1]}")
    return s_hat


def soft_output(s_hat, sigma_sq, points: np.ndarray, scale=1.0) -> np.ndarray:
    """Normalized likelihoods ``exp(-|s_hat - scale*s|^2 / (2 sigma^2))`` over ``points``.

    ``points`` must already carry the ``sqrt(E_s/Nt)`` amplitude. Broadcasts
    over any leading shape; the output has one extra trailing axis of size M.
    """
    s_hat = np.asarray(s_hat)
    sigma_sq = np.asarray(sigma_sq, dtype=np.float64)
    if np.any(sigma_sq <= 0):
        raise DetectionError("effective variance must be positive")
    centres = np.asarray(scale)[..., None] * np.asarray(points)
    metric = -np.abs(s_hat[..., None] - centres) ** 2 / (2.0 * sigma_sq[..., None])
    metric -= metric.max(axis=-1, keepdims=True)
    lik = np.exp(metric)
    return lik / lik.sum(axis=-1, keepdims=True)


def estimates_soft_output(est: SoftEstimates, points: np.ndarray) -> np.ndarray:
    return soft_output(est.s_hat, est.sigma_sq, points, est.scale)


def likelihoods_to_symbol_priors(likelihoods, bits_per_signal: int) -> np.ndarray:
    """Combine per-signal likelihoods into priors over the 256 field values.

    ``likelihoods`` has shape ``(n_symbols * q, M)`` (or ``(n_symbols, q, M)``)
    in the mapper's order; ``prior[v]`` is the product of the likelihoods of
    the labels that encode ``v``.
    """
    lik = np.asarray(likelihoods, dtype=np.float64)
    q = FIELD_BITS // bits_per_signal
    m = 1 << bits_per_signal
    if lik.shape[-1] != m:
        raise ValueError(f"expected {m} likelihoods per signal, got {lik.shape[-1]}")
    if lik.ndim == 2:
        if lik.shape[0] % q:
            raise ValueError(f"{lik.shape[0]} signals is not a multiple of q={q}")
        lik = lik.reshape(-1, q, m)
    elif lik.ndim != 3 or lik.shape[1] != q:
        raise ValueError(f"expected shape (n, {q}, {m}), got {lik.shape}")
    labels = symbols_to_labels(np.arange(256), bits_per_signal)  # (256, q)
    logl = np.log(np.maximum(lik, 1e-300))
    log_prior = np.zeros((lik.shape[0], 256))
    for j in range(q):
        log_prior += logl[:, j, labels[:, j]]
    log_prior -= log_prior.max(axis=1, keepdims=True)
    prior = np.exp(log_prior)
    return prior / prior.sum(axis=1, keepdims=True)


def hard_slice(s_hat, points: np.ndarray) -> np.ndarray:
    """Index of the nearest point; ties go to the lower index."""
    s_hat = np.asarray(s_hat)
    return np.argmin(np.abs(s_hat[..., None] - np.asarray(points)) ** 2, axis=-1)


def detect(kind: Detector | str, h, y, total_power: float, n_tx: int, noise_variance: float,
           variance_mode: VarianceMode | str | None = None) -> SoftEstimates:
    """Dispatch by detector name. ZF is returned with unit scale and no variance."""
    kind = Detector(kind)
    if kind is Detector.MF:
        return detect_mf(h, y, total_power, n_tx, noise_variance, variance_mode or VarianceMode.EXACT)
    if kind is Detector.MF_SIMPLIFIED:
        if variance_mode is not None and VarianceMode(variance_mode) is not VarianceMode.CONSTANT:
            raise ValueError("mf-simplified only supports the constant variance mode")
        return detect_mf_simplified(h, y, noise_variance)
    if kind is Detector.MMSE:
        return detect_mmse(h, y, total_power, n_tx, noise_variance)
    s_hat = detect_zf(h, y)
    return SoftEstimates(s_hat, np.full(s_hat.shape, np.nan), np.ones(s_hat.shape))
