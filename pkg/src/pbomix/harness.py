"""Experiment driver for the dielectric mirror problems.

Config files are flat ``key = value`` text with ``#`` comments.  A run writes,
per seed, ``seed_<s>/history.csv``, ``seed_<s>/best_stack.txt`` and
``seed_<s>/best_spectrum.csv``, then ``summary.csv`` (one row per seed) and
``aggregate.csv`` (mean and one-standard-deviation band across seeds).
"""
from __future__ import annotations

import csv
import io
import logging
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import TextIO

import numpy as np

from .errors import ConfigurationError, ParseError, PboError
from .pbo import OptimizationResult, PboConfig, run
from .tmm import MirrorProblem, SpectrumGrid, StackDesign, format_stack, parse_stack

log = logging.getLogger(__name__)

PROBLEMS = ("mirror-max", "mirror-flat")
HISTORY_HEADER = ("evaluations", "gen_mean_cost", "best_cost")
HISTORY_COMMENT = "# gen_mean_cost: mean cost of the generation's population; best_cost: best so far"
SPECTRUM_HEADER = ("lambda_nm", "reflectance")
AGGREGATE_HEADER = ("evaluations", "avg_mean", "avg_lo", "avg_hi",
                    "best_mean", "best_lo", "best_hi")
SUMMARY_HEADER = ("seed", "best_cost", "mean_reflectance", "min_reflectance",
                  "max_reflectance", "evaluations")
DEFAULT_BUDGET = 10000


class ExperimentError(PboError, RuntimeError):
    pass


def default_threads() -> int:
    env = os.environ.get("PBO_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ConfigurationError(f"PBO_THREADS={env!r} is not an integer") from None
        if value < 1:
            raise ConfigurationError("PBO_THREADS must be >= 1")
        return value
    return os.cpu_count() or 1


@dataclass
class RunConfig:
    problem: str = "mirror-max"
    n_layers: int = 20
    thickness_min: float = 50.0
    thickness_max: float = 150.0
    alpha: float = 0.1
    lambda_min: float = 300.0
    lambda_max: float = 500.0
    samples: int = 101
    population: int = 32
    elites: int | None = None
    budget: int | None = None
    clip: float = 0.2
    epochs: int = 32
    learning_rate: float = 5e-3
    hidden: tuple = (32,)
    sigma_min: float = 0.02
    sigma_max: float = 1.0
    diagonal: bool | None = None
    seeds: tuple = (0, 1, 2, 3, 4)
    output: str = "results"
    threads: int | None = None

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ConfigurationError(f"problem: expected one of {PROBLEMS}, got {self.problem!r}")
        if self.budget is None:
            self.budget = DEFAULT_BUDGET - DEFAULT_BUDGET % self.population
        if self.threads is None:
            self.threads = default_threads()
        self.seeds = tuple(int(s) for s in self.seeds)
        self.hidden = tuple(int(h) for h in self.hidden)
        if not self.seeds:
            raise ConfigurationError("seeds: at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigurationError(f"seeds: duplicates in {self.seeds}")
        if self.alpha < 0:
            raise ConfigurationError(f"alpha: must be >= 0, got {self.alpha}")
        # delegate the remaining checks; re-raise with the offending key where possible
        self.pbo_config(self.seeds[0])
        self.mirror()

    @property
    def effective_alpha(self) -> float:
        return self.alpha if self.problem == "mirror-flat" else 0.0

    def grid(self) -> SpectrumGrid:
        try:
            return SpectrumGrid(self.lambda_min, self.lambda_max, self.samples)
        except PboError as exc:
            raise ConfigurationError(f"lambda_min/lambda_max/samples: {exc}") from None

    def mirror(self) -> MirrorProblem:
        return MirrorProblem(self.n_layers, (self.thickness_min, self.thickness_max), self.grid(),
                             self.effective_alpha)

    def pbo_config(self, seed: int) -> PboConfig:
        return PboConfig(population=self.population, elites=self.elites, budget=self.budget,
                         clip=self.clip, epochs=self.epochs, learning_rate=self.learning_rate,
                         hidden=self.hidden, sigma_min=self.sigma_min, sigma_max=self.sigma_max,
                         diagonal=self.diagonal, seed=seed, threads=self.threads)


def _parse_bool(text: str):
    t = text.lower()
    if t in ("auto", "none"):
        return None
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int_list(text: str) -> tuple:
    return tuple(int(v) for v in text.replace(",", " ").split())


_CONVERTERS = {
    "problem": str, "output": str,
    "n_layers": int, "samples": int, "population": int, "elites": int, "budget": int,
    "epochs": int, "threads": int,
    "thickness_min": float, "thickness_max": float, "alpha": float, "lambda_min": float,
    "lambda_max": float, "clip": float, "learning_rate": float, "sigma_min": float,
    "sigma_max": float,
    "diagonal": _parse_bool, "hidden": _parse_int_list, "seeds": _parse_int_list,
}
assert set(_CONVERTERS) == {f.name for f in fields(RunConfig)}


def parse_config_text(text: str, overrides: dict | None = None) -> RunConfig:
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in _CONVERTERS:
            raise ParseError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ParseError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _CONVERTERS[key](value)
        except ValueError as exc:
            raise ParseError(f"line {lineno}: key {key!r}: {exc}") from None
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return RunConfig(**values)


def parse_config(path, overrides: dict | None = None) -> RunConfig:
    """Read and validate a config file; ``overrides`` win over file values."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    try:
        return parse_config_text(text, overrides)
    except ConfigurationError as exc:
        raise type(exc)(f"{path}: {exc}") from None


# -- CSV helpers --------------------------------------------------------------

def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def write_csv(path, header, rows, comment: str | None = None) -> None:
    buf = io.StringIO()
    if comment:
        buf.write(comment + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    Path(path).write_text(buf.getvalue())


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Header and float data of a CSV written by :func:`write_csv`."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    header = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]], dtype=float)
    return header, data.reshape(-1, len(header))


# -- experiment ---------------------------------------------------------------

@dataclass
class SeedResult:
    seed: int
    result: OptimizationResult
    stack: StackDesign
    spectrum: np.ndarray


@dataclass
class RunArtifacts:
    output: Path
    history: dict = field(default_factory=dict)
    best_stack: dict = field(default_factory=dict)
    best_spectrum: dict = field(default_factory=dict)
    summary: Path | None = None
    aggregate: Path | None = None
    seeds: list = field(default_factory=list)


def _check_writable(out: Path) -> None:
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc}") from exc


def run_seed(config: RunConfig, seed: int, progress: TextIO | None = None) -> SeedResult:
    problem = config.mirror()
    result = run(problem, problem.space, config.pbo_config(seed), progress=progress)
    stack = problem.decode(result.best_action)
    return SeedResult(seed, result, stack, problem.spectrum(stack))


def write_seed(out: Path, config: RunConfig, sr: SeedResult, artifacts: RunArtifacts) -> None:
    d = out / f"seed_{sr.seed}"
    d.mkdir(parents=True, exist_ok=True)
    r = sr.result
    history = d / "history.csv"
    write_csv(history, HISTORY_HEADER,
              zip(r.generation_evaluations, r.generation_mean_cost, r.generation_best_cost),
              comment=HISTORY_COMMENT)
    stack_path = d / "best_stack.txt"
    stack_path.write_text(format_stack(
        sr.stack, comment=f"problem {config.problem}, seed {sr.seed}, best cost {r.best_cost!r}"))
    spectrum = d / "best_spectrum.csv"
    write_csv(spectrum, SPECTRUM_HEADER, zip(config.grid().wavelengths(), sr.spectrum))
    artifacts.history[sr.seed] = history
    artifacts.best_stack[sr.seed] = stack_path
    artifacts.best_spectrum[sr.seed] = spectrum


def aggregate_histories(histories: list[np.ndarray]) -> np.ndarray:
    """Rows ``evaluations, avg_mean, avg_lo, avg_hi, best_mean, best_lo, best_hi``."""
    stacked = np.stack(histories)
    evals = stacked[:, :, 0]
    if np.any(evals != evals[0]):
        raise ExperimentError("histories have different evaluation columns")
    cols = [evals[0]]
    for k in (1, 2):
        mean = stacked[:, :, k].mean(axis=0)
        std = stacked[:, :, k].std(axis=0)
        cols += [mean, mean - std, mean + std]
    return np.column_stack(cols)


def write_aggregate(path, histories: list[np.ndarray]) -> Path:
    rows = aggregate_histories(histories)
    write_csv(path, AGGREGATE_HEADER,
              ([int(r[0]), *r[1:]] for r in rows))
    return Path(path)


def aggregate(directory) -> Path:
    """Recompute ``aggregate.csv`` from the ``seed_*/history.csv`` files in ``directory``."""
    directory = Path(directory)
    files = sorted(directory.glob("seed_*/history.csv"),
                   key=lambda p: int(p.parent.name.split("_", 1)[1]))
    if not files:
        raise ExperimentError(f"no seed_*/history.csv files under {directory}")
    histories = []
    for f in files:
        header, data = read_csv(f)
        if tuple(header) != HISTORY_HEADER:
            raise ExperimentError(f"{f}: unexpected header {header}")
        histories.append(data)
    return write_aggregate(directory / "aggregate.csv", histories)


def run_experiment(config: RunConfig, progress: TextIO | None = None) -> RunArtifacts:
    """Run every seed of ``config`` and write all artifacts."""
    out = Path(config.output)
    _check_writable(out)
    artifacts = RunArtifacts(out)
    summary_rows = []
    histories = []
    for seed in config.seeds:
        log.info("running %s seed %d", config.problem, seed)
        try:
            sr = run_seed(config, seed, progress)
        except Exception as exc:
            raise ExperimentError(f"seed {seed} failed: {exc}") from exc
        write_seed(out, config, sr, artifacts)
        r = sr.result
        histories.append(np.column_stack(
            [r.generation_evaluations, r.generation_mean_cost, r.generation_best_cost]))
        summary_rows.append((seed, r.best_cost, float(sr.spectrum.mean()),
                             float(sr.spectrum.min()), float(sr.spectrum.max()),
                             r.n_evaluations))
        artifacts.seeds.append(sr)
    artifacts.summary = out / "summary.csv"
    write_csv(artifacts.summary, SUMMARY_HEADER, summary_rows)
    artifacts.aggregate = write_aggregate(out / "aggregate.csv", histories)
    return artifacts


@dataclass
class StackEvaluation:
    mean: float
    min: float
    max: float
    wavelengths: np.ndarray
    reflectance: np.ndarray

    def summary_line(self) -> str:
        return f"mean={self.mean:.6f}\tmin={self.min:.6f}\tmax={self.max:.6f}"


def evaluate_stack(stack_file, grid: SpectrumGrid | None = None,
                   spectrum_csv=None) -> StackEvaluation:
    """Reflectance statistics of a stack file; optionally write its spectrum CSV."""
    grid = grid or SpectrumGrid()
    try:
        text = Path(stack_file).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read stack file {stack_file}: {exc}") from None
    try:
        stack = parse_stack(text)
    except ParseError as exc:
        raise ParseError(f"{stack_file}: {exc}") from None
    from .tmm import reflectance_spectrum

    lam = grid.wavelengths()
    rho = reflectance_spectrum(stack, grid)
    if spectrum_csv is not None:
        write_csv(spectrum_csv, SPECTRUM_HEADER, zip(lam, rho))
    return StackEvaluation(float(rho.mean()), float(rho.min()), float(rho.max()), lam, rho)

