"""Gaussian kernel density estimation and the MF interference-plus-noise study."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..mimo import complex_gaussian, snr_to_noise_variance

GRID_POINTS = 512


@dataclass
class DensityCurve:
    x: np.ndarray
    density: np.ndarray
    bandwidth: float

    def integral(self) -> float:
        return float(np.trapezoid(self.density, self.x))

    def modes(self) -> np.ndarray:
        """Grid positions of strict local maxima."""
        f = self.density
        inner = (f[1:-1] > f[:-2]) & (f[1:-1] >= f[2:])
        return self.x[1:-1][inner]


def silverman_bandwidth(samples: np.ndarray) -> float:
    samples = np.asarray(samples, dtype=np.float64)
    return 1.06 * samples.std(ddof=1) * samples.size ** (-0.2)


def kde(samples, bandwidth: float | None = None, grid_points: int = GRID_POINTS,
        chunk: int = 4096) -> DensityCurve:
    """Gaussian-kernel density on an even grid spanning the data +/- 3 bandwidths.

    Raises
    ------
    ValueError
        With fewer than two samples or a non-positive bandwidth.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 2:
        raise ValueError("kde needs at least 2 samples")
    h = silverman_bandwidth(x) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise ValueError("bandwidth must be positive (are all samples equal?)")
    grid = np.linspace(x.min() - 3 * h, x.max() + 3 * h, grid_points)
    dens = np.zeros(grid_points)
    for start in range(0, x.size, chunk):
        z = (grid[:, None] - x[None, start:start + chunk]) / h
        dens += np.exp(-0.5 * z * z).sum(axis=1)
    dens /= x.size * h * np.sqrt(2 * np.pi)
    return DensityCurve(grid, dens, h)


def sample_skewness(samples) -> float:
    x = np.asarray(samples, dtype=np.float64)
    d = x - x.mean()
    return float(np.mean(d ** 3) / np.mean(d ** 2) ** 1.5)


def sample_delta(n_tx: int, n_rx: int, gamma_db: float, realizations: int, rng: np.random.Generator,
                 total_power: float = 1.0, noise_variance: float | None = None,
                 stream: int = 0) -> np.ndarray:
    """Draw the exact MF interference-plus-noise power of one stream per channel draw.

    ``noise_variance`` overrides the SNR conversion (used to compare noise
    conventions).
    """
    if noise_variance is None:
        noise_variance = snr_to_noise_variance(gamma_db, total_power)
    out = np.empty(realizations)
    for r in range(realizations):
        h = complex_gaussian(rng, (n_rx, n_tx))
        # only row `stream` of the Gram matrix is needed
        g = np.conj(h[:, stream]) @ h
        energy = g[stream].real
        cross = np.sum(np.abs(g) ** 2) - energy ** 2
        out[r] = (total_power / n_tx) * cross / energy ** 2 + 2.0 * noise_variance / energy
    return out


def delta_mean_prediction(n_tx: int, n_rx: int, noise_variance: float, total_power: float = 1.0) -> float:
    """Large-array mean ``(E_s/Nt)(Nt-1)/Nr + 2 sigma_n^2 / Nr``."""
    return (total_power / n_tx) * (n_tx - 1) / n_rx + 2.0 * noise_variance / n_rx

