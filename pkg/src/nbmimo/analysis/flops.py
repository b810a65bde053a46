"""Flop accounting for soft-output MF and MMSE detection.

Costs follow the usual complex-flop table: real multiply 1, complex
multiply 3, real or complex add 1, inner product of length ``n`` costs
``4n - 1``, scalar-vector multiply ``n``, and an exponential 50.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from ..detect import Detector


@dataclass(frozen=True)
class FlopModel:
    real_mul: int = 1
    complex_mul: int = 3
    real_add: int = 1
    complex_add: int = 1
    exponential: int = 50

    def inner_product(self, n: int) -> int:
        return 4 * n - 1

    def scalar_vector(self, n: int) -> int:
        return n


TABLE = FlopModel()


def flops_mf(n_rx: int, m: int) -> tuple[int, int, int]:
    """(detection, soft output, total) for the proposed MF detector with Nt = Nr."""
    if n_rx < 1 or m < 2:
        raise ValueError("need Nr >= 1 and M >= 2")
    detection = 5 * n_rx ** 2 - n_rx
    soft = 55 * m * n_rx
    return detection, soft, detection + soft


def flops_mmse(n_rx: int, m: int) -> tuple[int, int, int]:
    """(detection, soft output, total) for soft-output MMSE with Nt = Nr.

    The detection term has half-integer coefficients but is an integer for
    every Nr; it is evaluated as ``(20 Nr^3 + 11 Nr^2 + 3 Nr) / 2``.
    """
    if n_rx < 1 or m < 2:
        raise ValueError("need Nr >= 1 and M >= 2")
    twice = 20 * n_rx ** 3 + 11 * n_rx ** 2 + 3 * n_rx
    detection = twice // 2
    soft = 4 * m * n_rx ** 2 + 58 * m
    return detection, soft, detection + soft


def complexity_ratio(n_rx: int, m: int) -> float:
    return flops_mf(n_rx, m)[2] / flops_mmse(n_rx, m)[2]


class FlopCounter:
    """Arithmetic wrappers that do the work and charge it to a stage.

    Charges accumulate in ``counts[stage]``. Only the ``detection`` and
    ``soft_output`` stages make up :attr:`total`; anything else (for example
    column energies of the unsimplified MF) is tracked as ``overhead``.
    """

    def __init__(self, model: FlopModel = TABLE):
        self.model = model
        self.counts: Counter[str] = Counter()
        self.stage = "detection"

    def charge(self, flops: int) -> None:
        self.counts[self.stage] += int(flops)

    @property
    def total(self) -> int:
        return self.counts["detection"] + self.counts["soft_output"]

    def inner_product(self, c: np.ndarray, d: np.ndarray) -> complex:
        """``c^H d``."""
        self.charge(self.model.inner_product(len(c)))
        return complex(np.vdot(c, d))

    def scalar_vector(self, vec: np.ndarray, a: float) -> np.ndarray:
        self.charge(self.model.scalar_vector(len(vec)))
        return vec * a

    def sub(self, a, b):
        self.charge(self.model.complex_add * np.broadcast(a, b).size)
        return np.asarray(a) - np.asarray(b)

    def sq_norm(self, a):
        # one flop per value, as in the soft-output cost accounting
        self.charge(np.size(a))
        return np.abs(a) ** 2

    def scale(self, a, c: float):
        self.charge(self.model.complex_mul * np.size(a))
        return np.asarray(a) * c

    def exp(self, a):
        self.charge(self.model.exponential * np.size(a))
        return np.exp(a)

    def real_div(self, a: float, b: float) -> float:
        self.charge(self.model.real_mul)
        return a / b


def _counted_soft_output(counter: FlopCounter, s_hat: np.ndarray, centres: np.ndarray, sigma_sq: np.ndarray) -> np.ndarray:
    counter.stage = "soft_output"
    lik = np.empty(centres.shape)
    for k in range(len(s_hat)):
        # per level: subtraction, squared norm, real-constant scaling, exponential
        d = counter.sub(s_hat[k], centres[k])
        e = counter.sq_norm(d)
        arg = counter.scale(e, -1.0 / (2.0 * sigma_sq[k]))
        lik[k] = counter.exp(arg)
    return lik


def counted_detect(kind: Detector | str, h: np.ndarray, y: np.ndarray, points: np.ndarray,
                   total_power: float = 1.0, noise_variance: float = 1.0,
                   model: FlopModel = TABLE) -> tuple[tuple[np.ndarray, np.ndarray], FlopCounter]:
    """Detection plus soft output with every operation charged.

    ``points`` are the amplitude-scaled constellation points. Returns
    ``((s_hat, likelihoods), counter)`` where the likelihoods are the raw,
    unnormalized Gaussian terms.

    For ``mf`` the column energies ``H_k^H H_k`` are charged to ``overhead``
    because the per-stream weight is a single scalar-vector product either
    way; both MF variants share the constant variance ``2 sigma_n^2 / Nr``.
    ``mmse`` scores the inversion-based procedure in two block charges.
    """
    kind = Detector(kind)
    h = np.asarray(h)
    y = np.asarray(y)
    n_rx, n_tx = h.shape
    m = len(points)
    counter = FlopCounter(model)

    if kind in (Detector.MF, Detector.MF_SIMPLIFIED):
        s_hat = np.empty(n_tx, dtype=complex)
        for k in range(n_tx):
            col = h[:, k]
            if kind is Detector.MF:
                counter.stage = "overhead"
                energy = counter.inner_product(col, col).real
                inv = counter.real_div(1.0, energy)
            else:
                inv = 1.0 / n_rx
            counter.stage = "detection"
            # W_k = H_k^H * inv, then W_k y
            w = counter.scalar_vector(col, inv)
            s_hat[k] = counter.inner_product(w, y)
        sigma_sq = np.full(n_tx, 2.0 * noise_variance / n_rx)
        centres = np.broadcast_to(np.asarray(points), (n_tx, m))
        lik = _counted_soft_output(counter, s_hat, centres, sigma_sq)
        return (s_hat, lik), counter

    if kind is Detector.MMSE:
        counter.stage = "detection"
        det, soft, _ = flops_mmse(n_rx, m)
        reg = 2.0 * noise_variance * n_tx / total_power
        w = np.conj(h.T) @ np.linalg.inv(h @ np.conj(h.T) + reg * np.eye(n_rx))
        s_hat = w @ y
        counter.charge(det)
        counter.stage = "soft_output"
        mu = np.real(np.einsum("ki,ik->k", w, h))
        sigma_sq = (total_power / n_tx) * (mu - mu ** 2)
        centres = mu[:, None] * np.asarray(points)[None, :]
        lik = np.exp(-np.abs(s_hat[:, None] - centres) ** 2 / (2.0 * sigma_sq[:, None]))
        counter.charge(soft)
        return (s_hat, lik), counter

    raise ValueError(f"no flop accounting for detector {kind.value!r}")
