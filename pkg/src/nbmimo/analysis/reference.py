"""Analytic reference curves and curve-crossing helpers."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erfc, erfcinv

from ..mimo import LinkConfig, complex_gaussian


def siso_awgn_bpsk_ber(gamma_db):
    """``Q(sqrt(2 gamma))`` for unfaded BPSK."""
    gamma = 10.0 ** (np.asarray(gamma_db, dtype=np.float64) / 10.0)
    out = 0.5 * erfc(np.sqrt(gamma))
    return float(out) if np.ndim(out) == 0 else out


def siso_awgn_bpsk_snr_db(ber: float) -> float:
    """Inverse of :func:`siso_awgn_bpsk_ber`."""
    if not 0 < ber < 0.5:
        raise ValueError("BER must be in (0, 0.5)")
    x = erfcinv(2.0 * ber)  # Q(sqrt(2)*x) = ber, and sqrt(2 gamma) = sqrt(2)*x
    return 10.0 * math.log10(x * x)


def snr_at_ber(snr_db, ber, target: float) -> float | None:
    """SNR where a decreasing BER curve first crosses ``target``.

    Interpolates log10(BER) linearly in dB between the two bracketing
    points. Returns ``None`` if the curve never reaches the target or is
    already below it at its first point, since no crossing is bracketed.
    """
    snr = np.asarray(snr_db, dtype=np.float64)
    b = np.asarray(ber, dtype=np.float64)
    order = np.argsort(snr)
    snr, b = snr[order], b[order]
    if b.size and b[0] <= target:
        return float(snr[0]) if b[0] == target else None
    for i in range(1, b.size):
        if b[i] <= target:
            lo, hi = b[i - 1], b[i]
            if hi <= 0:
                # zero-error point: fall back to linear interpolation in BER
                t = (lo - target) / (lo - hi)
            else:
                t = (math.log10(lo) - math.log10(target)) / (math.log10(lo) - math.log10(hi))
            return float(snr[i - 1] + t * (snr[i] - snr[i - 1]))
    return None


def snr_for_capacity(spectral_eff: float, config: LinkConfig, n_trials: int, seed=0,
                     lo_db: float = -30.0, hi_db: float = 30.0, tol_db: float = 1e-3) -> float:
    """Smallest SNR whose ergodic capacity reaches ``spectral_eff``.

    The same channel sample set is used at every SNR, so the estimate is
    monotone and bisection is exact up to ``tol_db``.
    """
    rng = np.random.default_rng(seed)
    h = complex_gaussian(rng, (n_trials, config.n_rx, config.n_tx))
    gram = h @ np.conj(np.swapaxes(h, -1, -2)) if config.n_rx <= config.n_tx else np.conj(np.swapaxes(h, -1, -2)) @ h
    eig = np.clip(np.linalg.eigvalsh(gram), 0.0, None)

    def capacity(db):
        g = 10.0 ** (db / 10.0)
        return float(np.mean(np.sum(np.log2(1.0 + g / config.n_tx * eig), axis=-1)))

    if capacity(hi_db) < spectral_eff:
        raise ValueError("target spectral efficiency above capacity at the upper SNR bound")
    while hi_db - lo_db > tol_db:
        mid = 0.5 * (lo_db + hi_db)
        if capacity(mid) >= spectral_eff:
            hi_db = mid
        else:
            lo_db = mid
    return hi_db

