"""Simulation-study harness: replicate loop, metric aggregation and report files."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
import configparser
import csv
from dataclasses import asdict, dataclass, field, fields
import json
import math
import os
from pathlib import Path
import platform
from typing import List, Optional, Tuple

import numpy as np

from .criteria import CriterionKind, validation_metrics
from .dataset import Dataset, random_split
from .exchange import RexsubConfig, rexsub_search, select_test_set
from .samplers import imspe_sequential, lhs_subsample, random_subsample
from .simulate import make_dataset, make_setting
from .timing import FITTING, INITIAL_SAMPLING, TASKS, TOTAL, TaskTimer
from .vecchia import FitConfig, FitError, VecchiaConfig, fit_mle

METHODS = ("random", "lhs", "imspe", "rexsub")
METRICS = ("mspe", "interval_score", "coverage")
# fixed stream keys so adding or removing a method never shifts another's draws
_METHOD_KEY = {name: k for k, name in enumerate(METHODS)}


class ConfigError(ValueError):
    pass


class DataError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    settings: Tuple[int, ...] = (1,)
    data: Optional[str] = None
    log_transform: bool = False
    has_header: bool = False
    methods: Tuple[str, ...] = ("random", "lhs", "rexsub")
    n: int = 25
    replicates: int = 2
    m: int = 10
    p: float = 0.10
    alpha: float = 0.05
    criterion: str = "mspe"
    seed: int = 2024
    out: Optional[str] = None
    N: int = 12500
    n_train: int = 10000
    n_cand: int = 10
    n_repeat: int = 2
    n_init: int = 9
    imspe_grid: int = 32
    imspe_cand: int = 100
    validate_frac: float = 0.10
    workers: int = 1

    def __post_init__(self):
        self.settings = tuple(int(s) for s in self.settings)
        self.methods = tuple(self.methods)
        if self.replicates < 1:
            raise ConfigError("replicates must be at least 1")
        if not self.methods:
            raise ConfigError("at least one method is required")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}")
        if self.data is None:
            if not self.settings:
                raise ConfigError("give settings or a data file")
            for s in self.settings:
                try:
                    make_setting(s)
                except ValueError as exc:
                    raise ConfigError(str(exc)) from exc
        if not 0 < self.p < 1 or not 0 < self.alpha < 1:
            raise ConfigError("p and alpha must lie in (0, 1)")
        if self.criterion not in ("mspe", "interval_score"):
            raise ConfigError(f"unknown criterion {self.criterion!r}")
        if self.n < 3 or self.m < 1:
            raise ConfigError("need n >= 3 and m >= 1")
        if "imspe" in self.methods and self.n < self.n_init:
            raise ConfigError("n must be at least n_init for the imspe method")

    @property
    def sources(self) -> List[str]:
        return ["data"] if self.data else [str(s) for s in self.settings]


_LIST_KEYS = {"settings", "methods"}


def load_config(path, **overrides) -> ExperimentConfig:
    """Read an ``[experiment]`` key-value file; ``overrides`` that are not None win."""
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keys are case-sensitive: N and n differ
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    section = parser["experiment"] if parser.has_section("experiment") else {}
    values = {}
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    for key, raw in section.items():
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _coerce(key, raw, types[key])
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _coerce(key, raw: str, typ: str):
    raw = raw.strip()
    try:
        if key in _LIST_KEYS:
            items = [t for t in raw.replace(",", " ").split() if t]
            return tuple(int(t) for t in items) if key == "settings" else tuple(items)
        if typ == "bool":
            return raw.lower() in ("1", "true", "yes", "on")
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
        if raw.lower() in ("", "none"):
            return None
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def ingest_csv(path, has_header: bool = False, log_transform: bool = False) -> Dataset:
    """Read ``x,y,z`` rows into a :class:`Dataset` whose training pool is every row."""
    rows = []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if lineno == 1 and has_header:
                continue
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise DataError(f"line {lineno}: expected 3 fields, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise DataError(f"line {lineno}: non-numeric value in {row!r}") from None
            if not all(math.isfinite(v) for v in vals):
                raise DataError(f"line {lineno}: non-finite value")
            if log_transform:
                if vals[2] <= 0:
                    raise DataError(f"line {lineno}: log transform needs z > 0, got {vals[2]!r}")
                vals[2] = math.log(vals[2])
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    arr = np.asarray(rows)
    N = len(arr)
    return Dataset(arr[:, :2], arr[:, 2], np.arange(N), np.zeros(0, dtype=np.intp),
                   label="data")


@dataclass
class ReplicateRecord:
    source: str
    method: str
    replicate: int
    metrics: dict
    timings: dict
    indices: np.ndarray
    locations: np.ndarray


@dataclass
class MetricsTable:
    metrics: List[tuple] = field(default_factory=list)  # (source, method, metric, mean, stderr)
    timings: List[tuple] = field(default_factory=list)  # (source, method, task, mean_seconds)
    records: List[ReplicateRecord] = field(default_factory=list)

    def mean(self, source: str, method: str, metric: str) -> float:
        for s, m, k, mu, _ in self.metrics:
            if (s, m, k) == (str(source), method, metric):
                return mu
        raise KeyError((source, method, metric))

    def timing(self, source: str, method: str, task: str = TOTAL) -> float:
        for s, m, k, sec in self.timings:
            if (s, m, k) == (str(source), method, task):
                return sec
        raise KeyError((source, method, task))


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def _source_key(source: str) -> int:
    return 0 if source == "data" else int(source)


def _external_dataset(cfg: ExperimentConfig) -> Dataset:
    base = ingest_csv(cfg.data, cfg.has_header, cfg.log_transform)
    n_val = int(np.floor(cfg.validate_frac * base.N))
    train, validate = random_split(base.N, n_val, _rng(cfg.seed, 0, 0))
    return Dataset(base.locations, base.z, train, validate, label="data")


def simulated_dataset(cfg: ExperimentConfig, source: str, rep: int) -> Dataset:
    """The dataset replicate ``rep`` of a simulated setting uses under ``cfg.seed``."""
    return make_dataset(make_setting(int(source)), cfg.N, cfg.n_train,
                        _rng(cfg.seed, _source_key(source), rep, 0))


def run_method(method: str, dataset: Dataset, test_idx, selectable, cfg: ExperimentConfig,
               rng: np.random.Generator, workers: int = 1):
    """Select a subsample with ``method`` and fit its final GP; returns ``(indices, fit, timer)``."""
    vcfg = VecchiaConfig(m=cfg.m)
    fcfg = FitConfig()
    timer = TaskTimer()
    if method == "rexsub":
        rcfg = RexsubConfig(n=cfg.n, n_cand=cfg.n_cand, n_repeat=cfg.n_repeat,
                            criterion=CriterionKind(cfg.criterion, cfg.alpha), vecchia=vcfg,
                            fit=fcfg, seed=int(rng.integers(2**63)))
        res = rexsub_search(dataset, test_idx, rcfg, selectable, workers=workers, timer=timer)
        if res.fit is None:
            raise FitError("no feasible REX-SUB subsample")
        return res.indices, res.fit, timer
    if method == "random":
        with timer.task(INITIAL_SAMPLING):
            idx = random_subsample(selectable, cfg.n, rng)
    elif method == "lhs":
        with timer.task(INITIAL_SAMPLING):
            idx = lhs_subsample(dataset.locations, selectable, cfg.n, rng)
    else:
        idx = imspe_sequential(dataset, selectable, cfg.n, rng, n_init=cfg.n_init,
                               grid=cfg.imspe_grid, cand=cfg.imspe_cand, vecchia=vcfg,
                               fit=fcfg, timer=timer)
    with timer.task(FITTING):
        fit = fit_mle(dataset.subset(idx, centered=True), vcfg, fcfg)
    return np.asarray(idx, dtype=np.intp), fit, timer


def run_replicate(cfg: ExperimentConfig, source: str, rep: int,
                  dataset: Optional[Dataset] = None) -> List[ReplicateRecord]:
    """Everything for one replicate of one source; deterministic in ``(cfg.seed, source, rep)``."""
    key = _source_key(source)
    if dataset is None:
        dataset = simulated_dataset(cfg, source, rep)
    test_idx, selectable = select_test_set(dataset.train, cfg.p, _rng(cfg.seed, key, rep, 1))
    validate = dataset.validation_data()
    search = dataset.search_view()
    out = []
    for method in cfg.methods:
        rng = _rng(cfg.seed, key, rep, 2, _METHOD_KEY[method])
        idx, fit, timer = run_method(method, search, test_idx, selectable, cfg, rng)
        metrics = validation_metrics(fit, validate, cfg.alpha)
        out.append(ReplicateRecord(source, method, rep, metrics, timer.as_dict(), idx,
                                   dataset.locations[idx]))
    return out


def _job(args):
    cfg, source, rep, dataset = args
    return run_replicate(cfg, source, rep, dataset)


def aggregate(records: List[ReplicateRecord], cfg: ExperimentConfig) -> MetricsTable:
    table = MetricsTable(records=records)
    for source in cfg.sources:
        for method in cfg.methods:
            recs = [r for r in records if r.source == source and r.method == method]
            if not recs:
                raise RuntimeError(f"no replicates for {source}/{method}")
            for metric in METRICS:
                vals = np.array([r.metrics[metric] for r in recs])
                se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else float("nan")
                table.metrics.append((source, method, metric, float(vals.mean()), se))
            for task in TASKS + (TOTAL,):
                table.timings.append((source, method, task,
                                      float(np.mean([r.timings[task] for r in recs]))))
    return table


def run_experiment(cfg: ExperimentConfig) -> MetricsTable:
    """Run every (source, replicate) job, aggregate, and write reports if ``cfg.out`` is set."""
    if cfg.out is not None:
        _check_writable(cfg.out)
    external = _external_dataset(cfg) if cfg.data else None
    jobs = [(cfg, source, rep, external) for source in cfg.sources for rep in range(cfg.replicates)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            results = list(ex.map(_job, jobs))
    else:
        results = [_job(j) for j in jobs]
    records = [r for batch in results for r in batch]
    table = aggregate(records, cfg)
    if cfg.out is not None:
        emit_reports(table, cfg.out, cfg)
    return table


def _check_writable(path):
    try:
        Path(path).mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {path}: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise ConfigError(f"output directory {path} is not writable")


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def _write_csv(path: Path, header, rows):
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"failed writing {path}: {exc}") from exc


def emit_reports(table: MetricsTable, out_dir, cfg: Optional[ExperimentConfig] = None) -> List[Path]:
    """Write ``metrics.csv``, ``timings.csv``, per-replicate subsamples and ``manifest.json``."""
    if not table.metrics:
        raise ValueError("empty metrics table")
    out = Path(out_dir)
    (out / "subsamples").mkdir(parents=True, exist_ok=True)
    written = [out / "metrics.csv", out / "timings.csv"]
    _write_csv(written[0], ("setting", "method", "metric", "mean", "stderr"), table.metrics)
    _write_csv(written[1], ("setting", "method", "task", "mean_seconds"), table.timings)
    for r in table.records:
        p = out / "subsamples" / f"{r.source}_{r.method}_{r.replicate}.csv"
        _write_csv(p, ("index", "x", "y"),
                   ((int(i), float(x), float(y)) for i, (x, y) in zip(r.indices, r.locations)))
        written.append(p)
    manifest = {
        "config": _jsonable(asdict(cfg)) if cfg is not None else None,
        "seed": cfg.seed if cfg is not None else None,
        "versions": _versions(),
    }
    mpath = out / "manifest.json"
    with open(mpath, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(mpath)
    return written


def _jsonable(d: dict) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def _versions() -> dict:
    import numba
    import scipy

    from . import __version__

    return {"python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__, "rexsub": __version__}


def read_metrics_csv(path) -> List[tuple]:
    """Parse a ``metrics.csv`` back into ``(setting, method, metric, mean, stderr)`` tuples."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        return [(s, m, k, float(mu), float(se)) for s, m, k, mu, se in reader]
