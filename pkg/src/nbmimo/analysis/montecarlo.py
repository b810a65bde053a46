"""Monte Carlo BER/FER runners for uncoded and NB-LDPC coded links.

Each trial (channel use for uncoded runs, frame for coded runs) draws its
randomness from ``default_rng([seed, trial_index])``. The same trial index
therefore sees the same bits, channels and unit-variance noise at every SNR
and for every detector, and results do not depend on how trials are split
across worker processes: chunks are consumed strictly in trial order and
the stop rule is applied trial by trial.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..detect import (Detector, VarianceMode, detect, estimates_soft_output, hard_slice,
                      likelihoods_to_symbol_priors)
from ..mimo import ChannelRealization, LinkConfig, apply_channel, generate_channel, map_codeword_to_signals, \
    snr_to_noise_variance
from ..nbldpc import RepeatedCode, SparseParityCheck, decode_fft_bp, multiplicative_repeat

CSV_HEADER = ["snr_db", "trials", "bit_errors", "frame_errors", "ber", "fer", "avg_iterations", "stderr_ber"]
VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class StopRule:
    """Stop a point once ``target_errors`` is reached or after ``max_trials``.

    Errors are bit errors for uncoded runs and frame errors for coded runs.
    """

    target_errors: int = 100
    max_trials: int = 100_000
    chunk: int = 8


@dataclass
class BerRecord:
    gamma_db: float
    trials: int
    bit_errors: int
    frame_errors: int
    bits_per_frame: int
    iterations: int = 0
    wall_time: float = field(default=0.0, compare=False)

    @property
    def ber(self) -> float:
        return self.bit_errors / (self.trials * self.bits_per_frame) if self.trials else 0.0

    @property
    def fer(self) -> float:
        return self.frame_errors / self.trials if self.trials else 0.0

    @property
    def avg_iterations(self) -> float:
        return self.iterations / self.trials if self.trials else 0.0

    @property
    def stderr_ber(self) -> float:
        n = self.trials * self.bits_per_frame
        return math.sqrt(self.ber * (1.0 - self.ber) / n) if n else 0.0

    def csv_row(self) -> list[str]:
        return [_fmt(self.gamma_db), str(self.trials), str(self.bit_errors), str(self.frame_errors),
                _fmt(self.ber), _fmt(self.fer), _fmt(self.avg_iterations), _fmt(self.stderr_ber)]


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def records_to_csv(records: list[BerRecord], comments: list[str] | None = None) -> str:
    buf = io.StringIO()
    for line in comments or []:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow(r.csv_row())
    return buf.getvalue()


def trial_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(index)])


@dataclass(frozen=True)
class UncodedTask:
    config: LinkConfig
    detector: str
    noise_variance: float
    seed: int
    variance_mode: str | None = None
    unfaded: bool = False


def _channel(config: LinkConfig, rng, noise_variance: float, unfaded: bool, uses: int | None = None):
    if unfaded:
        eye = np.eye(config.n_rx, config.n_tx, dtype=complex)
        return ChannelRealization(eye if uses is None else np.broadcast_to(eye, (uses,) + eye.shape).copy(),
                                  noise_variance)
    return generate_channel(config, rng, noise_variance, uses=uses)


def uncoded_trial(task: UncodedTask, index: int) -> tuple[int, int, int]:
    cfg = task.config
    rng = trial_rng(task.seed, index)
    labels = rng.integers(0, cfg.constellation.size, cfg.n_tx)
    points = cfg.constellation.points * cfg.amplitude
    s = points[labels]
    ch = _channel(cfg, rng, task.noise_variance, task.unfaded)
    y = apply_channel(ch, s, rng)
    est = detect(task.detector, ch.matrix, y, cfg.total_power, cfg.n_tx, task.noise_variance, task.variance_mode)
    decided = hard_slice(est.s_hat / est.scale, points)
    errors = int(sum(bin(v).count("1") for v in (labels ^ decided).tolist()))
    return errors, int(errors > 0), 0


@dataclass(frozen=True)
class CodedTask:
    config: LinkConfig
    detector: str
    noise_variance: float
    seed: int
    code: RepeatedCode
    variance_mode: str | None = None
    max_iterations: int = 200
    unfaded: bool = False


def coded_trial(task: CodedTask, index: int) -> tuple[int, int, int]:
    cfg = task.config
    code = task.code
    rng = trial_rng(task.seed, index)
    info = rng.integers(0, 256, code.k)
    word = code.encode(info)
    s = map_codeword_to_signals(word, cfg)
    ch = _channel(cfg, rng, task.noise_variance, task.unfaded, uses=s.shape[0])
    y = apply_channel(ch, s, rng)
    est = detect(task.detector, ch.matrix, y, cfg.total_power, cfg.n_tx, task.noise_variance, task.variance_mode)
    sigma_sq = np.maximum(est.sigma_sq, VARIANCE_FLOOR * cfg.total_power / cfg.n_tx)
    lik = estimates_soft_output(type(est)(est.s_hat, sigma_sq, est.scale), cfg.constellation.points * cfg.amplitude)
    q = cfg.signals_per_field_symbol
    lik = lik.reshape(-1, cfg.constellation.size)[: code.n * q]
    priors = code.fold_priors(likelihoods_to_symbol_priors(lik, cfg.bits_per_signal))
    result = decode_fft_bp(code.mother, priors, task.max_iterations)
    decided_info = result.decided_symbols[code.info_positions]
    diff = (decided_info.astype(np.int64) ^ info).tolist()
    errors = int(sum(bin(v).count("1") for v in diff))
    return errors, int(errors > 0), result.iterations_used


def _run_chunk(fn, task, start: int, count: int) -> list[tuple[int, int, int]]:
    return [fn(task, i) for i in range(start, start + count)]


def run_point(fn, task, gamma_db: float, bits_per_frame: int, stop: StopRule, count_frames: bool,
              executor: ProcessPoolExecutor | None = None, workers: int = 1) -> BerRecord:
    """Run trials of ``fn`` until the stop rule fires; see the module docstring."""
    t0 = time.perf_counter()
    rec = BerRecord(gamma_db=gamma_db, trials=0, bit_errors=0, frame_errors=0, bits_per_frame=bits_per_frame)

    def done() -> bool:
        errs = rec.frame_errors if count_frames else rec.bit_errors
        return errs >= stop.target_errors or rec.trials >= stop.max_trials

    starts = range(0, stop.max_trials, stop.chunk)
    sizes = [min(stop.chunk, stop.max_trials - s) for s in starts]
    if executor is None:
        results = (_run_chunk(fn, task, s, n) for s, n in zip(starts, sizes))
    else:
        results = _ordered_parallel(executor, fn, task, list(zip(starts, sizes)), ahead=2 * workers)
    for chunk in results:
        for bit_err, frame_err, iters in chunk:
            rec.trials += 1
            rec.bit_errors += bit_err
            rec.frame_errors += frame_err
            rec.iterations += iters
            if done():
                break
        if done():
            break
    if executor is not None:
        results.close()
    rec.wall_time = time.perf_counter() - t0
    return rec


def _ordered_parallel(executor, fn, task, spans, ahead: int):
    pending = []
    it = iter(spans)
    try:
        for s, n in it:
            pending.append(executor.submit(_run_chunk, fn, task, s, n))
            if len(pending) >= ahead:
                break
        while pending:
            head = pending.pop(0)
            nxt = next(it, None)
            if nxt is not None:
                pending.append(executor.submit(_run_chunk, fn, task, *nxt))
            yield head.result()
    finally:
        for f in pending:
            f.cancel()


def _sweep(fn, make_task, snr_list, bits_per_frame, stop, count_frames, workers, total_power,
           noise_variance=None):
    records = []
    executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for gamma_db in snr_list:
            nv = snr_to_noise_variance(gamma_db, total_power) if noise_variance is None else noise_variance
            records.append(run_point(fn, make_task(nv), float(gamma_db), bits_per_frame, stop, count_frames,
                                     executor, workers))
    finally:
        if executor is not None:
            executor.shutdown(cancel_futures=True)
    return records


def run_uncoded_ber(config: LinkConfig, detector: Detector | str, snr_list, stop: StopRule = StopRule(),
                    seed: int = 0, workers: int = 1, variance_mode: VarianceMode | str | None = None,
                    noise_variance: float | None = None, unfaded: bool = False) -> list[BerRecord]:
    """Uncoded BER per SNR; each trial is one channel use carrying Nt * p bits.

    ``noise_variance`` overrides the SNR conversion and ``unfaded`` replaces
    the fading matrix by the identity (both are test hooks).
    """
    detector = Detector(detector).value
    vm = VarianceMode(variance_mode).value if variance_mode is not None else None

    def make(nv):
        return UncodedTask(config, detector, nv, int(seed), vm, unfaded)

    return _sweep(uncoded_trial, make, snr_list, config.n_tx * config.bits_per_signal, stop, False,
                  workers, config.total_power, noise_variance)


def run_coded_ber(config: LinkConfig, detector: Detector | str, code: SparseParityCheck | RepeatedCode, snr_list,
                  stop: StopRule = StopRule(target_errors=50, max_trials=10_000, chunk=4), seed: int = 0,
                  workers: int = 1, variance_mode: VarianceMode | str | None = None, max_iterations: int = 200,
                  noise_variance: float | None = None, unfaded: bool = False) -> list[BerRecord]:
    """Coded BER/FER per SNR over the full encode-map-detect-decode chain.

    Errors are counted on the 8K information bits of each frame.
    """
    detector = Detector(detector)
    if detector is Detector.ZF:
        raise ValueError("zf has no soft output; use mf, mf-simplified or mmse")
    config.require_mapping()
    if isinstance(code, SparseParityCheck):
        code = multiplicative_repeat(code, 1)
    vm = VarianceMode(variance_mode).value if variance_mode is not None else None

    def make(nv):
        return CodedTask(config, detector.value, nv, int(seed), code, vm, max_iterations, unfaded)

    return _sweep(coded_trial, make, snr_list, 8 * code.k, stop, True, workers, config.total_power,
                  noise_variance)
