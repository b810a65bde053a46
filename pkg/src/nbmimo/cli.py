"""Command-line experiments driven by a flat ``key = value`` config file.

Subcommands: ``uncoded-ber``, ``coded-ber``, ``capacity``, ``complexity``,
``delta-pdf``. Every CSV written starts with the resolved configuration as
``#`` comment lines.
"""

from __future__ import annotations

import argparse
import io
import sys
from dataclasses import dataclass, fields

import numpy as np

from .analysis.density import delta_mean_prediction, kde, sample_delta, sample_skewness
from .analysis.flops import flops_mf, flops_mmse
from .analysis.montecarlo import StopRule, records_to_csv, run_coded_ber, run_uncoded_ber
from .detect import Detector, VarianceMode
from .mimo import (LinkConfig, ConfigurationError as MimoConfigError, ergodic_capacity, make_constellation,
                   snr_to_noise_variance, spectral_efficiency)
from .nbldpc import build_regular_code, multiplicative_repeat

SUBCOMMANDS = ("uncoded-ber", "coded-ber", "capacity", "complexity", "delta-pdf")
# keys left out of the CSV config echo so outputs do not depend on them
NOT_ECHOED = {"workers", "output"}


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.replace(",", " ").split())


def _choice(allowed):
    def conv(text: str) -> str:
        if text not in allowed:
            raise ValueError(f"{text!r} not one of: {', '.join(allowed)}")
        return text
    return conv


DETECTORS = tuple(d.value for d in Detector)
VARIANCE_MODES = tuple(v.value for v in VarianceMode)

# key -> (parser, default); default None with required=True below means mandatory
SCHEMA = {
    "experiment": (_choice(SUBCOMMANDS), None),
    "nt": (int, None),
    "nr": (int, None),
    "modulation": (str, "bpsk"),
    "es": (float, 1.0),
    "n_symbols": (int, 300),
    "k_symbols": (int, 100),
    "column_weight": (int, 2),
    "repetition": (int, 1),
    "code_seed": (int, 1),
    "snr_db": (_floats, ()),
    "detector": (_choice(DETECTORS), "mf-simplified"),
    "variance_mode": (_choice(VARIANCE_MODES), None),
    "seed": (int, 0),
    "workers": (int, 1),
    "target_errors": (int, 100),
    "max_trials": (int, 100_000),
    "target_frame_errors": (int, 50),
    "max_frames": (int, 10_000),
    "chunk": (int, 8),
    "max_iterations": (int, 200),
    "capacity_trials": (int, 10_000),
    "realizations": (int, 10_000),
    "fixed_channel": (_bool, False),
    "noise_variance": (float, None),
    "output": (str, None),
}
REQUIRED = ("nt", "nr")


@dataclass
class SimConfig:
    experiment: str | None
    nt: int
    nr: int
    modulation: str
    es: float
    n_symbols: int
    k_symbols: int
    column_weight: int
    repetition: int
    code_seed: int
    snr_db: tuple[float, ...]
    detector: str
    variance_mode: str | None
    seed: int
    workers: int
    target_errors: int
    max_trials: int
    target_frame_errors: int
    max_frames: int
    chunk: int
    max_iterations: int
    capacity_trials: int
    realizations: int
    fixed_channel: bool
    noise_variance: float | None
    output: str | None

    def link(self, code_rate: float = 1.0) -> LinkConfig:
        return LinkConfig(self.nt, self.nr, make_constellation(self.modulation), self.es, code_rate)

    @property
    def code_rate(self) -> float:
        return self.k_symbols / (self.n_symbols * self.repetition)

    def echo(self) -> list[str]:
        out = []
        for f in fields(self):
            if f.name in NOT_ECHOED:
                continue
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ", ".join(f"{x:g}" for x in v)
            elif isinstance(v, bool):
                v = str(v).lower()
            out.append(f"{f.name} = {v}")
        return out


def parse_config(text: str, overrides: dict | None = None) -> SimConfig:
    """Parse and validate a flat config.

    Raises
    ------
    ConfigError
        On an unknown or repeated key, a missing required key, a value of the
        wrong type, or a violated constraint; the message names the line.
    """
    values: dict = {}
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, _, value = (part.strip() for part in line.partition("="))
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"key {key!r} repeated (first on line {lines[key]})", lineno)
        try:
            values[key] = SCHEMA[key][0](value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", lineno) from None
        lines[key] = lineno
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    for key in REQUIRED:
        if key not in values:
            raise ConfigError(f"missing required key {key!r}")
    for key, (_, default) in SCHEMA.items():
        values.setdefault(key, default)
    if values["variance_mode"] is None:
        values["variance_mode"] = "exact" if values["detector"] == "mf" else "constant"
    cfg = SimConfig(**values)
    _validate(cfg, lines)
    return cfg


def _validate(cfg: SimConfig, lines: dict[str, int]) -> None:
    def fail(key, msg):
        raise ConfigError(msg, lines.get(key))

    for key in ("nt", "nr", "n_symbols", "k_symbols", "column_weight", "repetition", "workers",
                "target_errors", "max_trials", "target_frame_errors", "max_frames", "chunk",
                "capacity_trials", "max_iterations"):
        if getattr(cfg, key) < 1:
            fail(key, f"{key} must be >= 1")
    if cfg.realizations < 2:
        fail("realizations", "realizations must be >= 2")
    if cfg.es <= 0:
        fail("es", "es must be positive")
    if cfg.noise_variance is not None and cfg.noise_variance < 0:
        fail("noise_variance", "noise_variance must be >= 0")
    try:
        cfg.link()
    except MimoConfigError as exc:
        key = "modulation" if "modulation" in str(exc) else "nt"
        fail(key, str(exc))
    if not cfg.n_symbols > cfg.k_symbols:
        fail("k_symbols", "need n_symbols > k_symbols")
    m = cfg.n_symbols - cfg.k_symbols
    if (cfg.column_weight * cfg.n_symbols) % m:
        fail("column_weight", f"column_weight * n_symbols = {cfg.column_weight * cfg.n_symbols} "
                              f"not divisible by n_symbols - k_symbols = {m}")
    if cfg.detector == "mf-simplified" and cfg.variance_mode != "constant":
        fail("variance_mode", "mf-simplified only supports variance_mode = constant")


def _require_snr(cfg: SimConfig, sub: str) -> None:
    if not cfg.snr_db:
        raise ConfigError(f"{sub} needs snr_db")


def derived_quantities(cfg: SimConfig) -> dict[str, str]:
    link = cfg.link()
    n_ext = cfg.n_symbols * cfg.repetition
    rate = cfg.code_rate
    out = {
        "bits_per_signal": str(link.bits_per_signal),
        "signals_per_field_symbol": str(link.signals_per_field_symbol),
    }
    try:
        out["symbols_per_use"] = str(link.symbols_per_use)
        out["channel_uses_per_frame"] = str(link.channel_uses(n_ext))
    except MimoConfigError:
        # antenna count only matters for the BER experiments
        out["symbols_per_use"] = out["channel_uses_per_frame"] = "n/a"
    out["code_rate"] = f"{rate:.6g}"
    out["spectral_efficiency"] = f"{spectral_efficiency(link.bits_per_signal, rate, cfg.nt):.6g}"
    return out


def complexity_report(n_rx: int, m: int) -> str:
    mf = flops_mf(n_rx, m)
    mmse = flops_mmse(n_rx, m)
    ratio = mf[2] / mmse[2]
    rows = [("detector", "detection", "soft_output", "total"),
            ("proposed-mf", *map(str, mf)),
            ("mmse", *map(str, mmse))]
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    out = io.StringIO()
    out.write(f"# flops per channel use, Nr = Nt = {n_rx}, M = {m}\n")
    for r in rows:
        out.write("  ".join(c.rjust(w) for c, w in zip(r, widths)).rstrip() + "\n")
    out.write(f"ratio mf/mmse = {ratio:.6f} ({100 * ratio:.2f}%)\n")
    return out.getvalue()


def run(subcommand: str, cfg: SimConfig, dry_run: bool = False, stdout=None) -> int:
    """Run one experiment; returns the process exit status."""
    stdout = stdout or sys.stdout
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    if subcommand in ("uncoded-ber", "coded-ber", "capacity", "delta-pdf"):
        _require_snr(cfg, subcommand)
    if subcommand == "coded-ber":
        try:
            cfg.link().require_mapping()
        except MimoConfigError as exc:
            raise ConfigError(str(exc)) from None
    if subcommand == "coded-ber" and cfg.detector == "zf":
        raise ConfigError("coded-ber needs a soft-output detector (mf, mf-simplified, mmse)")

    if dry_run:
        for line in cfg.echo():
            stdout.write(f"{line}\n")
        for k, v in derived_quantities(cfg).items():
            stdout.write(f"{k} = {v}\n")
        return 0

    link = cfg.link()
    comments = [f"subcommand = {subcommand}"] + cfg.echo()

    if subcommand == "complexity":
        text = complexity_report(cfg.nr, link.constellation.size)
    elif subcommand == "uncoded-ber":
        stop = StopRule(cfg.target_errors, cfg.max_trials, cfg.chunk)
        records = run_uncoded_ber(link, cfg.detector, cfg.snr_db, stop, cfg.seed, cfg.workers,
                                  cfg.variance_mode, cfg.noise_variance, cfg.fixed_channel)
        text = records_to_csv(records, comments)
    elif subcommand == "coded-ber":
        mother = build_regular_code(cfg.n_symbols, cfg.k_symbols, cfg.column_weight, seed=cfg.code_seed)
        code = multiplicative_repeat(mother, cfg.repetition, seed=cfg.code_seed)
        stop = StopRule(cfg.target_frame_errors, cfg.max_frames, cfg.chunk)
        records = run_coded_ber(cfg.link(cfg.code_rate), cfg.detector, code, cfg.snr_db, stop, cfg.seed,
                                cfg.workers, cfg.variance_mode, cfg.max_iterations, cfg.noise_variance,
                                cfg.fixed_channel)
        text = records_to_csv(records, comments)
    elif subcommand == "capacity":
        text = capacity_csv(cfg, link, comments)
    else:
        text = delta_pdf_csv(cfg, comments)

    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return 0


def capacity_csv(cfg: SimConfig, link: LinkConfig, comments: list[str]) -> str:
    out = io.StringIO()
    for c in comments:
        out.write(f"# {c}\n")
    out.write("snr_db,capacity,stderr,trials\n")
    fixed = np.eye(cfg.nr, cfg.nt) if cfg.fixed_channel else None
    for gamma_db in cfg.snr_db:
        # same channel sample set at every SNR
        rng = np.random.default_rng([cfg.seed, 0])
        cap, se = ergodic_capacity(link, gamma_db, cfg.capacity_trials, rng, fixed_channel=fixed)
        trials = 1 if fixed is not None else cfg.capacity_trials
        out.write(f"{gamma_db:.6g},{cap:.6g},{se:.6g},{trials}\n")
    return out.getvalue()


def delta_pdf_csv(cfg: SimConfig, comments: list[str]) -> str:
    gamma_db = cfg.snr_db[0]
    nv = snr_to_noise_variance(gamma_db, cfg.es) if cfg.noise_variance is None else cfg.noise_variance
    rng = np.random.default_rng([cfg.seed, 0])
    samples = sample_delta(cfg.nt, cfg.nr, gamma_db, cfg.realizations, rng, cfg.es, nv)
    curve = kde(samples)
    out = io.StringIO()
    for c in comments:
        out.write(f"# {c}\n")
    out.write(f"# sample_mean = {samples.mean():.6g}\n")
    out.write(f"# predicted_mean = {delta_mean_prediction(cfg.nt, cfg.nr, nv, cfg.es):.6g}\n")
    out.write(f"# skewness = {sample_skewness(samples):.6g}\n")
    out.write(f"# bandwidth = {curve.bandwidth:.6g}\n")
    out.write("x,density\n")
    for x, f in zip(curve.x, curve.density):
        out.write(f"{x:.6g},{f:.6g}\n")
    return out.getvalue()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nbmimo", description=__doc__.splitlines()[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, help="flat key = value config file")
    p.add_argument("--seed", type=int, help="master seed (overrides config)")
    p.add_argument("--workers", type=int, help="worker processes (overrides config)")
    p.add_argument("--out", help="output path (overrides config; default stdout)")
    p.add_argument("--dry-run", action="store_true", help="print resolved config and derived quantities")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
        cfg = parse_config(text, {"seed": args.seed, "workers": args.workers, "output": args.out})
        if cfg.experiment is not None and cfg.experiment != args.subcommand:
            raise ConfigError(f"config is for {cfg.experiment!r}, not {args.subcommand!r}")
        return run(args.subcommand, cfg, args.dry_run)
    except ConfigError as exc:
        print(f"error: ConfigError: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - one-line report for any module failure
        print(f"error: {type(exc).__name__}: {' '.join(str(exc).split())}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
