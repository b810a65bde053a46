"""Modulation, transmit power, flat Rayleigh fading and capacity."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FIELD_BITS = 8


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class Constellation:
    """Unit-energy constellation indexed by its bit label (MSB first).

    Square QAM orders use a Gray labelling per quadrature; BPSK maps
    label 0 to +1 and label 1 to -1.
    """

    name: str
    points: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def bits_per_symbol(self) -> int:
        return int(math.log2(self.size))

    def labels_to_points(self, labels) -> np.ndarray:
        return self.points[np.asarray(labels)]


def _gray_pam(bits: int) -> np.ndarray:
    levels = 1 << bits
    amplitudes = np.arange(-(levels - 1), levels, 2, dtype=np.float64)
    out = np.empty(levels)
    for i, a in enumerate(amplitudes):
        out[i ^ (i >> 1)] = a
    # label 0 at the positive extreme, matching BPSK
    return -out if bits == 1 else out


def make_constellation(name: str) -> Constellation:
    name = name.lower()
    if name == "bpsk":
        pts = np.array([1.0 + 0j, -1.0 + 0j])
    else:
        orders = {"qpsk": 4, "4qam": 4, "16qam": 16, "64qam": 64, "256qam": 256}
        if name not in orders:
            raise ConfigurationError(f"unknown modulation {name!r}; allowed: bpsk, {', '.join(orders)}")
        half = int(math.log2(orders[name])) // 2
        pam = _gray_pam(half)
        labels = np.arange(orders[name])
        pts = pam[labels >> half] + 1j * pam[labels & ((1 << half) - 1)]
        pts = pts / np.sqrt(np.mean(np.abs(pts) ** 2))
    pts.flags.writeable = False
    return Constellation(name=name, points=pts)


BPSK = make_constellation("bpsk")


@dataclass(frozen=True)
class LinkConfig:
    n_tx: int
    n_rx: int
    constellation: Constellation = BPSK
    total_power: float = 1.0
    code_rate: float = 1.0

    def __post_init__(self):
        if self.n_tx < 1 or self.n_rx < 1:
            raise ConfigurationError("antenna counts must be positive")
        if self.total_power <= 0:
            raise ConfigurationError("total power must be positive")
        if FIELD_BITS % self.constellation.bits_per_symbol:
            raise ConfigurationError(
                f"{self.constellation.bits_per_symbol} bits/symbol does not divide a field symbol")

    def require_mapping(self) -> None:
        """Raise unless whole field symbols fit in one transmit vector."""
        if self.n_tx % self.signals_per_field_symbol:
            raise ConfigurationError(
                f"Nt={self.n_tx} not divisible by q={self.signals_per_field_symbol}")

    @property
    def bits_per_signal(self) -> int:
        return self.constellation.bits_per_symbol

    @property
    def signals_per_field_symbol(self) -> int:
        """q = 8 / p modulated symbols per field symbol."""
        return FIELD_BITS // self.bits_per_signal

    @property
    def symbols_per_use(self) -> int:
        """K_t coded field symbols carried by one channel use."""
        self.require_mapping()
        return self.n_tx // self.signals_per_field_symbol

    @property
    def amplitude(self) -> float:
        return math.sqrt(self.total_power / self.n_tx)

    def channel_uses(self, n_symbols: int) -> int:
        return -(-n_symbols // self.symbols_per_use)


@dataclass
class ChannelRealization:
    matrix: np.ndarray
    noise_variance: float

    def __post_init__(self):
        if self.noise_variance < 0:
            raise ValueError("noise variance must be nonnegative")


def snr_to_noise_variance(gamma_db: float, total_power: float = 1.0) -> float:
    """Noise variance per real component for SNR per receive antenna.

    Uses ``gamma = E_s / (2 sigma_n^2)``.
    """
    if total_power <= 0:
        raise ConfigurationError("total power must be positive")
    return total_power / (2.0 * 10.0 ** (gamma_db / 10.0))


def symbols_to_labels(symbols, bits_per_signal: int) -> np.ndarray:
    """Split field symbols MSB-first into ``8 / p`` constellation labels each."""
    symbols = np.asarray(symbols, dtype=np.int64)
    q = FIELD_BITS // bits_per_signal
    shifts = FIELD_BITS - bits_per_signal * np.arange(1, q + 1)
    return (symbols[..., None] >> shifts) & ((1 << bits_per_signal) - 1)


def labels_to_symbols(labels, bits_per_signal: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    q = labels.shape[-1]
    shifts = FIELD_BITS - bits_per_signal * np.arange(1, q + 1)
    return np.bitwise_or.reduce(labels << shifts, axis=-1)


def map_codeword_to_signals(codeword, config: LinkConfig) -> np.ndarray:
    """Map field symbols onto per-use transmit vectors.

    Returns an array of shape ``(uses, Nt)``. The last vector is padded with
    the image of field symbol 0 when N is not a multiple of K_t.
    """
    codeword = np.asarray(codeword, dtype=np.int64)
    uses = config.channel_uses(codeword.size)
    padded = np.zeros(uses * config.symbols_per_use, dtype=np.int64)
    padded[:codeword.size] = codeword
    labels = symbols_to_labels(padded, config.bits_per_signal).reshape(uses, config.n_tx)
    return config.constellation.points[labels] * config.amplitude


def demap_labels(labels, n_symbols: int, config: LinkConfig) -> np.ndarray:
    """Inverse of the mapper on hard labels; drops the padding."""
    labels = np.asarray(labels).reshape(-1, config.signals_per_field_symbol)
    return labels_to_symbols(labels, config.bits_per_signal)[:n_symbols].astype(np.uint8)


def complex_gaussian(rng: np.random.Generator, shape, variance: float = 1.0) -> np.ndarray:
    """Circularly symmetric complex Gaussian, ``variance`` total (half per part)."""
    scale = math.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def generate_channel(config: LinkConfig, rng: np.random.Generator, noise_variance: float = 0.0,
                     uses: int | None = None) -> ChannelRealization:
    """I.i.d. CN(0, 1) fading; ``uses`` stacks that many independent matrices."""
    shape = (config.n_rx, config.n_tx) if uses is None else (uses, config.n_rx, config.n_tx)
    return ChannelRealization(matrix=complex_gaussian(rng, shape), noise_variance=noise_variance)


def apply_channel(ch: ChannelRealization, s, rng: np.random.Generator) -> np.ndarray:
    """Return ``y = H s + n`` (batched over a leading axis if ``H`` is 3-D)."""
    h = ch.matrix
    s = np.asarray(s)
    if h.shape[-1] != s.shape[-1] or h.shape[:-2] != s.shape[:-1]:
        raise ValueError(f"channel {h.shape} incompatible with signal {s.shape}")
    clean = np.einsum("...ij,...j->...i", h, s)
    noise = complex_gaussian(rng, clean.shape, 1.0)
    return clean + math.sqrt(2.0 * ch.noise_variance) * noise


def log_det_capacity(matrices: np.ndarray, gamma: float, n_tx: int) -> np.ndarray:
    """``log2 det(I + gamma/Nt H H^H)`` for each matrix in a stack."""
    h = np.asarray(matrices)
    if h.ndim == 2:
        h = h[None]
    # the smaller Gram matrix has the same nonzero eigenvalues
    if h.shape[-2] <= h.shape[-1]:
        gram = h @ np.conj(np.swapaxes(h, -1, -2))
    else:
        gram = np.conj(np.swapaxes(h, -1, -2)) @ h
    eig = np.clip(np.linalg.eigvalsh(gram), 0.0, None)
    return np.sum(np.log2(1.0 + gamma / n_tx * eig), axis=-1)


def ergodic_capacity(config: LinkConfig, gamma_db: float, n_trials: int, rng: np.random.Generator,
                     fixed_channel: np.ndarray | None = None, batch: int = 1000) -> tuple[float, float]:
    """Monte Carlo ergodic capacity in bps/Hz and its standard error.

    ``fixed_channel`` replaces the random draw (test hook); the standard
    error is then 0.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    gamma = 10.0 ** (gamma_db / 10.0)
    if fixed_channel is not None:
        c = float(log_det_capacity(fixed_channel, gamma, config.n_tx)[0])
        return c, 0.0
    values = []
    remaining = n_trials
    while remaining:
        b = min(batch, remaining)
        values.append(log_det_capacity(complex_gaussian(rng, (b, config.n_rx, config.n_tx)), gamma, config.n_tx))
        remaining -= b
    v = np.concatenate(values)
    stderr = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), stderr


def spectral_efficiency(bits_per_signal: int, rate: float, n_tx: int) -> float:
    """Net rate p * R * Nt in bps/Hz."""
    if bits_per_signal < 1 or not 0 < rate <= 1 or n_tx < 1:
        raise ValueError("need p >= 1, 0 < R <= 1, Nt >= 1")
    return bits_per_signal * rate * n_tx
