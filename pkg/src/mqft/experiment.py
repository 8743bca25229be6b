"""Config-driven experiment runner.

Config files are flat ``key = value`` text; ``#`` starts a comment and
unknown keys are rejected.  Every stochastic quantity for trial (or scan point,
or census word) ``t`` is drawn from
``np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(t,)))``
so results do not depend on how trials are spread over workers.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from .core import MAX_QUBITS, PhaseWord, serial_outcome_distribution
from .noise import FitError, NoiseParams, fit_fringe, fringe_scan, phase_error_census
from .oracle import (
    MAX_ORACLE_QUBITS,
    as_words,
    build_qft_circuit,
    build_semiclassical_circuit,
    outcome_distribution,
    product_input_state,
    total_variation,
)
from .pipeline import TrialRecord, run_serial_mqft
from .stats import (
    CONVENTIONS,
    TrialStats,
    bounds_from_trials,
    confidence_bounds,
    estimate_error_rate,
    majority_vote_error,
)

MODES = ("ideal", "noisy", "majority", "fringe", "census", "oracle-check", "bounds")
TRIAL_MODES = ("ideal", "noisy", "majority")
NOISE_KEYS = (
    "v", "m", "dac_digits", "v_pi", "mu", "loss_db", "eta_det", "dark_rate", "retry_cap", "p_override",
)
# keys that control where and how fast a run executes, not what it computes
EXECUTION_KEYS = ("workers", "out_dir")


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _int(text: str) -> int:
    return int(text)


def _float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError("must be finite")
    return value


def _optional(parse):
    def wrapped(text: str):
        return None if text.lower() in ("none", "") else parse(text)
    return wrapped


def _bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError("expected true/false")


def _choice(options):
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text
    return parse


SCHEMA: dict[str, tuple[Any, Any]] = {
    # key: (parser, default)
    "mode": (_choice(MODES), None),
    "profile": (_choice(("ideal", "device")), "ideal"),
    "n_qubits": (_int, None),
    "n_trials": (_int, None),
    "master_seed": (_int, None),
    "phase_word": (str, "random"),
    "v": (_float, None),
    "m": (_optional(_int), None),
    "dac_digits": (_optional(_int), None),
    "v_pi": (_float, None),
    "mu": (_optional(_float), None),
    "loss_db": (_float, None),
    "eta_det": (_float, None),
    "dark_rate": (_float, None),
    "retry_cap": (_int, None),
    "p_override": (_optional(_float), None),
    "M": (_int, 1),
    "stop_at_first_error": (_bool, False),
    "record_bits": (_bool, False),
    "hist_bin_width": (_int, 10),
    "alpha": (_float, 0.05),
    "convention": (_choice(CONVENTIONS), "cumulative"),
    "max_abort_fraction": (_float, 0.05),
    "v_min": (_float, 0.0),
    "v_max": (_float, 12.0),
    "n_points": (_int, 49),
    "pulses_per_point": (_int, 100000),
    "phase_offset": (_float, 0.0),
    "census_bins": (_int, 40),
    "n_random_phases": (_int, 20),
    "k_max": (_int, None),
    "n_max": (_int, None),
    "k_min": (_int, None),
    "n_min": (_int, None),
    "workers": (_int, 1),
    "out_dir": (str, "."),
    "records_file": (str, "trials.jsonl"),
    "histogram_file": (str, "histogram.csv"),
    "table_file": (str, None),
    "summary_file": (str, "summary.txt"),
}

REQUIRED = {
    "ideal": ("n_qubits", "n_trials"),
    "noisy": ("n_qubits", "n_trials"),
    "majority": ("n_qubits", "n_trials", "M"),
    "fringe": ("n_points", "pulses_per_point"),
    "census": ("n_qubits", "n_trials"),
    "oracle-check": ("n_qubits",),
    "bounds": ("k_max", "n_max", "k_min", "n_min", "n_trials"),
}


@dataclass
class ExperimentConfig:
    values: dict[str, Any]
    given: tuple[str, ...] = ()

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def mode(self) -> str:
        return self.values["mode"]

    def noise(self) -> NoiseParams:
        if self.mode == "ideal":
            return NoiseParams.ideal()
        base = NoiseParams.device_profile() if self["profile"] == "device" else NoiseParams()
        changes = {k: self.values[k] for k in NOISE_KEYS if k in self.given}
        changes["repeats"] = self["M"]
        try:
            return base.with_(**changes)
        except ValueError as exc:
            key = next((k for k in changes if k in str(exc)), "noise")
            raise ConfigError(key, str(exc)) from exc

    def echo(self) -> str:
        """Config lines that reproduce this run (execution keys omitted)."""
        lines = []
        for key in SCHEMA:
            if key in self.given and key not in EXECUTION_KEYS:
                lines.append(f"{key} = {_format(self.values[key])}")
        return "\n".join(lines) + "\n"


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text: str, overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(key, "unknown key")
        if key in raw:
            raise ConfigError(key, "given twice")
        raw[key] = value
    values = {key: default for key, (_, default) in SCHEMA.items()}
    for key, text_value in raw.items():
        try:
            values[key] = SCHEMA[key][0](text_value)
        except ValueError as exc:
            raise ConfigError(key, f"bad value {text_value!r} ({exc})") from exc
    given = set(raw)
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
            given.add(key)
    config = ExperimentConfig(values, tuple(k for k in SCHEMA if k in given))
    validate(config)
    return config


def load_config(path: str | Path, overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    return parse_config(Path(path).read_text(), overrides)


def validate(config: ExperimentConfig) -> None:
    v = config.values
    mode = v["mode"]
    if mode is None:
        raise ConfigError("mode", "missing")
    for key in REQUIRED[mode]:
        if v[key] is None:
            raise ConfigError(key, f"required for mode {mode}")
    if mode != "bounds" and v["master_seed"] is None:
        raise ConfigError("master_seed", f"required for mode {mode} (or pass --seed)")
    if v["master_seed"] is not None and v["master_seed"] < 0:
        raise ConfigError("master_seed", "must be non-negative")
    if v["n_trials"] is not None and v["n_trials"] < 1:
        raise ConfigError("n_trials", "must be >= 1")
    if v["workers"] < 1:
        raise ConfigError("workers", "must be >= 1")
    if v["M"] < 1:
        raise ConfigError("M", "must be >= 1")
    if mode == "majority" and v["M"] < 2:
        raise ConfigError("M", "majority mode needs M >= 2")
    if mode in TRIAL_MODES or mode == "census":
        n = v["n_qubits"]
        if not 1 <= n <= MAX_QUBITS:
            raise ConfigError("n_qubits", f"must lie in 1..{MAX_QUBITS}")
        word = v["phase_word"]
        if word != "random" and not word.startswith("file:"):
            try:
                parsed = PhaseWord.from_string(word)
            except ValueError as exc:
                raise ConfigError("phase_word", str(exc)) from exc
            if parsed.n != n:
                raise ConfigError("phase_word", f"has {parsed.n} bits but n_qubits = {n}")
        if v["hist_bin_width"] < 1:
            raise ConfigError("hist_bin_width", "must be >= 1")
    if mode == "oracle-check" and not 1 <= v["n_qubits"] <= MAX_ORACLE_QUBITS:
        raise ConfigError("n_qubits", f"oracle-check supports 1..{MAX_ORACLE_QUBITS}")
    if mode == "fringe":
        if v["n_points"] < 8:
            raise ConfigError("n_points", "fringe fit needs at least 8 points")
        if v["pulses_per_point"] < 1:
            raise ConfigError("pulses_per_point", "must be >= 1")
        if v["v_max"] <= v["v_min"]:
            raise ConfigError("v_max", "must exceed v_min")
    if not 0.0 < v["alpha"] < 0.5:
        raise ConfigError("alpha", "must lie in (0, 0.5)")
    if not 0.0 <= v["max_abort_fraction"] <= 1.0:
        raise ConfigError("max_abort_fraction", "must lie in [0, 1]")
    if mode != "bounds" and mode != "oracle-check":
        config.noise()


def trial_rng(master_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(index,)))


def _load_words(spec: str, n: int) -> list[PhaseWord] | None:
    if spec == "random":
        return None
    if spec.startswith("file:"):
        path = Path(spec[5:])
        lines = [ln.strip() for ln in path.read_text().splitlines() if ln.strip()]
        words = []
        for i, ln in enumerate(lines, 1):
            try:
                w = PhaseWord.from_string(ln)
            except ValueError as exc:
                raise ConfigError("phase_word", f"{path}:{i}: {exc}") from exc
            if w.n != n:
                raise ConfigError("phase_word", f"{path}:{i}: {w.n} bits, expected {n}")
            words.append(w)
        if not words:
            raise ConfigError("phase_word", f"{path} holds no words")
        return words
    return [PhaseWord.from_string(spec)]


def _trial_word(words, n: int, rng: np.random.Generator, index: int) -> PhaseWord:
    if words is None:
        return PhaseWord.random(n, rng)
    return words[index % len(words)]


def _run_trial_chunk(args) -> list[TrialRecord]:
    seed, indices, n, words, noise, stop = args
    out = []
    for t in indices:
        rng = trial_rng(seed, t)
        word = _trial_word(words, n, rng, t)
        out.append(run_serial_mqft(word, noise, rng, stop_at_first_error=stop))
    return out


def run_trials(
    n_qubits: int,
    n_trials: int,
    noise: NoiseParams,
    master_seed: int,
    words: list[PhaseWord] | None = None,
    workers: int = 1,
    stop_at_first_error: bool = False,
) -> list[TrialRecord]:
    """Run ``n_trials`` independent trials; output is ordered by trial index."""
    if workers <= 1 or n_trials < 2:
        return _run_trial_chunk((master_seed, range(n_trials), n_qubits, words, noise, stop_at_first_error))
    chunks = np.array_split(np.arange(n_trials), min(workers * 4, n_trials))
    jobs = [
        (master_seed, [int(i) for i in c], n_qubits, words, noise, stop_at_first_error)
        for c in chunks if c.size
    ]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(_run_trial_chunk, jobs))
    return [rec for chunk in results for rec in chunk]


@dataclass
class RunSummary:
    mode: str
    config: ExperimentConfig
    records: list[TrialRecord] = field(default_factory=list)
    results: dict[str, Any] = field(default_factory=dict)
    histogram: list[tuple[Any, ...]] = field(default_factory=list)
    histogram_header: tuple[str, ...] = ("bin", "count")
    table: list[tuple[Any, ...]] = field(default_factory=list)
    table_header: tuple[str, ...] = ()
    wall_time: float = 0.0
    passed: bool = True

    @property
    def run_lengths(self) -> list[int]:
        return [r.run_length for r in self.records if not r.aborted]

    @property
    def aborted(self) -> int:
        return sum(r.aborted for r in self.records)


def run_length_histogram(run_lengths, n_qubits: int, width: int) -> list[tuple[int, int]]:
    """Counts per bin of ``width`` steps; rows are ``(bin start, count)``."""
    starts = list(range(1, n_qubits + 1, width))
    counts = [0] * len(starts)
    for length in run_lengths:
        counts[(length - 1) // width] += 1
    return list(zip(starts, counts))


def _trial_summary(config: ExperimentConfig) -> RunSummary:
    n = config["n_qubits"]
    noise = config.noise()
    words = _load_words(config["phase_word"], n)
    records = run_trials(
        n, config["n_trials"], noise, config["master_seed"], words,
        config["workers"], config["stop_at_first_error"],
    )
    summary = RunSummary(config.mode, config, records)
    good = [r for r in records if not r.aborted]
    res = summary.results
    res["n_trials"] = len(records)
    res["aborted_trials"] = summary.aborted
    res["full_successes"] = sum(r.censored for r in good)
    if good:
        trials = TrialStats.from_records(good, n)
        est = estimate_error_rate(trials)
        res["mean_run_length"] = float(np.mean(trials.run_lengths))
        res["p_hat_mean"] = est.p_mean
        res["p_hat_censored"] = est.p_censored
        res["all_censored"] = est.all_censored
        p_min, p_max = bounds_from_trials(trials, config["alpha"], config["convention"])
        res["p_min"] = p_min
        res["p_max"] = p_max
        summary.histogram = run_length_histogram(trials.run_lengths, n, config["hist_bin_width"])
    if config.mode == "majority" and noise.p_override is not None:
        p_m = majority_vote_error(noise.repeats, noise.p_override)
        res["p_majority_analytic"] = p_m
        res["full_success_analytic"] = (1.0 - p_m) ** n
    res["total_pulses"] = sum(r.pulses for r in records)
    return summary


def _fringe_summary(config: ExperimentConfig) -> RunSummary:
    noise = config.noise()
    voltages = np.linspace(config["v_min"], config["v_max"], config["n_points"])
    counts = [
        int(fringe_scan(noise.v, noise.v_pi, config["phase_offset"], [V], config["pulses_per_point"],
                        trial_rng(config["master_seed"], i))[0])
        for i, V in enumerate(voltages)
    ]
    summary = RunSummary(config.mode, config)
    summary.table_header = ("voltage", "counts")
    summary.table = [(float(V), c) for V, c in zip(voltages, counts)]
    try:
        fit = fit_fringe(voltages, counts)
    except FitError as exc:
        summary.results["fit_error"] = str(exc)
        summary.passed = False
        return summary
    summary.results.update(
        visibility_fit=fit.visibility, v_pi_fit=fit.v_pi, offset_fit=fit.offset, fit_residual=fit.residual,
        visibility_true=noise.v, v_pi_true=noise.v_pi,
    )
    return summary


def _census_summary(config: ExperimentConfig) -> RunSummary:
    noise = config.noise()
    n = config["n_qubits"]
    fixed = _load_words(config["phase_word"], n)
    words = [_trial_word(fixed, n, trial_rng(config["master_seed"], t), t) for t in range(config["n_trials"])]
    census = phase_error_census(words, noise.m, noise.v_pi, noise.dac_digits, bins=config["census_bins"])
    summary = RunSummary(config.mode, config)
    summary.table_header = ("bin_low", "bin_high", "count")
    summary.table = [
        (float(lo), float(hi), int(c))
        for lo, hi, c in zip(census.edges[:-1], census.edges[1:], census.counts)
    ]
    summary.results.update(
        rotations=census.n_rotations, mean_abs_cos_delta=census.mean_abs_cos,
        min_abs_cos_delta=census.min_abs_cos,
        mean_error_probability=0.5 * (1.0 - noise.v * float(census.cos_delta.mean())),
    )
    return summary


def oracle_check(n_max: int, n_random: int, master_seed: int, tol: float = 1e-9) -> dict[int, float]:
    """Largest pairwise total variation between the three circuit forms for
    every ``n <= n_max`` over all representable and ``n_random`` random phases."""
    worst: dict[int, float] = {}
    for n in range(1, n_max + 1):
        qft, semi = build_qft_circuit(n), build_semiclassical_circuit(n)
        phases: list[Fraction | float] = [Fraction(j, 2**n) for j in range(2**n)]
        phases += [float(trial_rng(master_seed, 1000 * n + j).random()) for j in range(n_random)]
        tv = 0.0
        for phi in phases:
            psi = product_input_state(phi, n)
            da = as_words(outcome_distribution(qft, psi))
            db = as_words(outcome_distribution(semi, psi))
            dc = serial_outcome_distribution(phi, n)
            tv = max(tv, total_variation(da, db), total_variation(da, dc), total_variation(db, dc))
        worst[n] = tv
    return worst


def _oracle_summary(config: ExperimentConfig) -> RunSummary:
    worst = oracle_check(config["n_qubits"], config["n_random_phases"], config["master_seed"])
    summary = RunSummary(config.mode, config)
    summary.table_header = ("n", "max_total_variation")
    summary.table = sorted(worst.items())
    summary.results["max_total_variation"] = max(worst.values())
    summary.passed = summary.results["max_total_variation"] <= 1e-9
    summary.results["passed"] = summary.passed
    return summary


def _bounds_summary(config: ExperimentConfig) -> RunSummary:
    try:
        p_min, p_max = confidence_bounds(
            config["k_max"], config["n_max"], config["k_min"], config["n_min"], config["n_trials"],
            config["alpha"], config["convention"],
        )
    except ValueError as exc:
        raise ConfigError("bounds", str(exc)) from exc
    summary = RunSummary(config.mode, config)
    summary.results.update(p_min=p_min, p_max=p_max)
    return summary


_RUNNERS = {
    "ideal": _trial_summary,
    "noisy": _trial_summary,
    "majority": _trial_summary,
    "fringe": _fringe_summary,
    "census": _census_summary,
    "oracle-check": _oracle_summary,
    "bounds": _bounds_summary,
}


def run_experiment(config: ExperimentConfig) -> RunSummary:
    start = time.perf_counter()
    summary = _RUNNERS[config.mode](config)
    summary.wall_time = time.perf_counter() - start
    return summary


def _csv(rows, header) -> str:
    lines = [",".join(header)]
    lines += [",".join(_format(x) for x in row) for row in rows]
    return "\n".join(lines) + "\n"


def summary_text(summary: RunSummary) -> str:
    """Results as comment lines followed by the config echo.

    The file is itself a valid config, so ``mqft run summary.txt`` repeats
    the run.  Wall time is left out to keep outputs byte-reproducible.
    """
    lines = ["# mqft run summary", f"# mode: {summary.mode}"]
    for key, value in summary.results.items():
        lines.append(f"# {key}: {_format(value)}")
    lines.append("#")
    lines.append("# config")
    return "\n".join(lines) + "\n" + summary.config.echo()


def emit_records(summary: RunSummary, out_dir: str | Path | None = None) -> list[Path]:
    """Write records, histogram/table and summary files; returns their paths."""
    config = summary.config
    out = Path(config["out_dir"] if out_dir is None else out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if summary.mode in TRIAL_MODES:
        path = out / config["records_file"]
        with path.open("w") as fh:
            for i, rec in enumerate(summary.records):
                row = {"index": i, **rec.to_dict(include_bits=config["record_bits"])}
                fh.write(json.dumps(row, sort_keys=True) + "\n")
        written.append(path)
        path = out / config["histogram_file"]
        path.write_text(_csv(summary.histogram, summary.histogram_header))
        written.append(path)
    elif summary.table_header:
        default = {"fringe": "fringe.csv", "census": "census.csv", "oracle-check": "oracle.csv"}[summary.mode]
        path = out / (config["table_file"] or default)
        path.write_text(_csv(summary.table, summary.table_header))
        written.append(path)
    path = out / config["summary_file"]
    path.write_text(summary_text(summary))
    written.append(path)
    return written
