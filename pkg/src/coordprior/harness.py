"""Multi-seed experiment orchestration and results tables.

Config files are flat ``key = value`` lines grouped under ``[experiment]``,
``[train]`` and ``[provider]`` headers::

    [experiment]
    scenarios = speaker_listener
    methods = qmix, ours:mock_heuristic
    seeds = 0, 1, 2
    output_dir = out

    [train]
    total_steps = 50000

    [provider]
    kind = mock_heuristic

A method is ``iql``, ``vdn``, ``qmix`` or ``ours``; ``ours:<mode>`` picks the
prior mode (``uniform``, ``mock_heuristic`` or ``llm``) and bare ``ours``
means ``ours:llm``, i.e. the configured provider.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .env import SCENARIOS, make_spec
from .errors import ConfigError
from .learn import METHODS, TrainConfig, run_training
from .prior import ProviderConfig

log = logging.getLogger(__name__)

# TrainConfig fields that the experiment section controls per run
_RUN_KEYS = ("method", "prior_mode", "seeds")
RESULT_COLUMNS = ("scenario", "method", "mean_return", "std_return", "n_seeds", "failed_seeds")


def parse_method(name: str) -> tuple[str, str]:
    """``"qmix"`` -> ``("qmix", "none")``; ``"ours:uniform"`` -> ``("ours", "uniform")``."""
    base, _, mode = name.partition(":")
    if base not in METHODS:
        raise ConfigError(f"unknown method {name!r}; expected one of {METHODS}")
    if base == "ours":
        mode = mode or "llm"
        if mode == "none":
            raise ConfigError("ours needs a prior mode other than none")
    elif mode:
        raise ConfigError(f"baseline {base!r} takes no prior mode")
    else:
        mode = "none"
    return base, mode


@dataclass
class ExperimentConfig:
    scenarios: tuple = ("speaker_listener",)
    methods: tuple = ("qmix",)
    seeds: tuple = (0, 1, 2, 3, 4)
    output_dir: str = "results"
    train: TrainConfig = field(default_factory=TrainConfig)
    provider: ProviderConfig = field(default_factory=ProviderConfig)

    def __post_init__(self):
        self.scenarios = tuple(self.scenarios)
        self.methods = tuple(self.methods)
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.scenarios:
            raise ConfigError("scenario list is empty")
        if not self.methods:
            raise ConfigError("method list is empty")
        if not self.seeds:
            raise ConfigError("seed list is empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        for s in self.scenarios:
            if s not in SCENARIOS:
                raise ConfigError(f"unknown scenario {s!r}; expected one of {SCENARIOS}")
        for m in self.methods:
            parse_method(m)
        if len(set(self.methods)) != len(self.methods) or len(set(self.scenarios)) != len(self.scenarios):
            raise ConfigError("scenarios and methods must not repeat")

    def train_config(self, method: str) -> TrainConfig:
        base, mode = parse_method(method)
        return dataclasses.replace(self.train, method=base, prior_mode=mode, seeds=self.seeds)

    def provider_config(self) -> ProviderConfig:
        # the shared prior cache lives with the results unless placed elsewhere
        if self.provider.cache_dir:
            return self.provider
        return dataclasses.replace(self.provider, cache_dir=str(Path(self.output_dir) / "prior_cache"))


# -- config text ---------------------------------------------------------------


def _field_types(cls, skip=()) -> dict[str, str]:
    return {f.name: f.type for f in dataclasses.fields(cls) if f.name not in skip}


_SECTIONS = {
    "experiment": {"scenarios": "tuple", "methods": "tuple", "seeds": "tuple", "output_dir": "str"},
    "train": _field_types(TrainConfig, skip=_RUN_KEYS),
    "provider": _field_types(ProviderConfig),
}


def _coerce(value: str, typ: str, key: str, lineno: int):
    try:
        if typ == "int":
            return int(value)
        if typ == "float":
            return float(value)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {value!r} as {typ}", lineno) from None
    if typ == "tuple":
        items = tuple(v.strip() for v in value.split(",") if v.strip())
        if key == "seeds":
            try:
                return tuple(int(v) for v in items)
            except ValueError:
                raise ConfigError(f"seeds: expected integers, got {value!r}", lineno) from None
        return items
    return value


def parse_config(text: str) -> ExperimentConfig:
    values = {name: {} for name in _SECTIONS}
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SECTIONS:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        if section is None:
            raise ConfigError("key outside of any section", lineno)
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        types = _SECTIONS[section]
        if key not in types:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno)
        if key in values[section]:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", lineno)
        values[section][key] = _coerce(value, types[key], key, lineno)
    exp = values["experiment"]
    return ExperimentConfig(train=TrainConfig(**values["train"]),
                            provider=ProviderConfig(**values["provider"]), **exp)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize(cfg: ExperimentConfig) -> str:
    """Full config text with every key spelled out; ``parse_config`` inverts it."""
    lines = ["[experiment]"]
    lines += [f"{k} = {_fmt(getattr(cfg, k))}" for k in _SECTIONS["experiment"]]
    lines += ["", "[train]"]
    lines += [f"{k} = {_fmt(getattr(cfg.train, k))}" for k in _SECTIONS["train"]]
    lines += ["", "[provider]"]
    lines += [f"{k} = {_fmt(getattr(cfg.provider, k))}" for k in _SECTIONS["provider"]]
    return "\n".join(lines) + "\n"


# -- running -------------------------------------------------------------------


@dataclass
class RunOutcome:
    scenario: str
    method: str
    seed: int
    final_return: float = math.nan
    provider_calls: int = 0
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error


@dataclass
class ResultRow:
    scenario: str
    method: str
    mean_return: float
    std_return: float
    n_seeds: int
    failed_seeds: tuple = ()


@dataclass
class ResultsTable:
    rows: list = field(default_factory=list)
    runs: list = field(default_factory=list)

    def row(self, scenario: str, method: str) -> ResultRow:
        for r in self.rows:
            if (r.scenario, r.method) == (scenario, method):
                return r
        raise KeyError((scenario, method))

    @property
    def failures(self) -> list:
        return [r for r in self.runs if not r.ok]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in self.rows:
            w.writerow([r.scenario, r.method, repr(r.mean_return), repr(r.std_return), r.n_seeds,
                        " ".join(str(s) for s in r.failed_seeds)])
        return buf.getvalue()

    def runs_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("scenario", "method", "seed", "final_return", "provider_calls", "error"))
        for r in self.runs:
            w.writerow([r.scenario, r.method, r.seed, repr(r.final_return), r.provider_calls, r.error])
        return buf.getvalue()

    def to_text(self) -> str:
        out = ["# final greedy return: mean +/- population std (ddof=0) over completed seeds", ""]
        width = max([len(r.method) for r in self.rows] + [6])
        for scen in dict.fromkeys(r.scenario for r in self.rows):
            out.append(scen)
            for r in (r for r in self.rows if r.scenario == scen):
                note = f"  failed seeds: {' '.join(map(str, r.failed_seeds))}" if r.failed_seeds else ""
                out.append(f"  {r.method:<{width}}  {r.mean_return:10.3f} +/- {r.std_return:7.3f}"
                           f"  (n={r.n_seeds}){note}")
        return "\n".join(out) + "\n"


def aggregate(values) -> tuple[float, float]:
    """Mean and population standard deviation; NaN for an empty list."""
    if len(values) == 0:
        return math.nan, math.nan
    a = np.asarray(values, dtype=np.float64)
    return float(a.mean()), float(a.std(ddof=0))


def run_dir(output_dir, scenario: str, method: str, seed: int) -> Path:
    return Path(output_dir) / "runs" / scenario / method.replace(":", "-") / f"seed_{seed}"


def _run_one(job) -> RunOutcome:
    cfg, scenario, method, seed, train_fn = job
    out = RunOutcome(scenario, method, seed)
    try:
        tlog = train_fn(make_spec(scenario), cfg.train_config(method), cfg.provider_config(), seed)
        tlog.write_csv(run_dir(cfg.output_dir, scenario, method, seed) / "log.csv")
        out.final_return = float(tlog.final_return)
        out.provider_calls = int(tlog.provider_calls)
        if not math.isfinite(out.final_return):
            out.error = "non-finite final return"
    except Exception as exc:  # a failed seed is recorded, never fatal
        out.error = f"{type(exc).__name__}: {exc}"
    return out


def run_experiment(cfg: ExperimentConfig, train_fn=run_training, jobs: int = 1) -> ResultsTable:
    """Train every (scenario, method, seed), then write results.csv, results.txt and runs.csv.

    ``train_fn(spec, train_cfg, provider_cfg, seed)`` must return an object with
    ``final_return``, ``provider_calls`` and ``write_csv(path)``. With ``jobs > 1``
    seeds run in worker processes, so ``train_fn`` must be picklable.
    """
    if jobs < 1:
        raise ConfigError("jobs must be >= 1")
    jobs_list = [(cfg, s, m, seed, train_fn)
                 for s in cfg.scenarios for m in cfg.methods for seed in cfg.seeds]
    if jobs == 1:
        outcomes = [_run_one(j) for j in jobs_list]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_one, jobs_list))

    table = ResultsTable(runs=outcomes)
    for s in cfg.scenarios:
        for m in cfg.methods:
            mine = [o for o in outcomes if (o.scenario, o.method) == (s, m)]
            done = [o.final_return for o in mine if o.ok]
            mean, std = aggregate(done)
            failed = tuple(o.seed for o in mine if not o.ok)
            for o in mine:
                if not o.ok:
                    log.warning("%s/%s seed %d failed: %s", s, m, o.seed, o.error)
            table.rows.append(ResultRow(s, m, mean, std, len(done), failed))

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.csv").write_text(table.to_csv())
    (out / "results.txt").write_text(table.to_text())
    (out / "runs.csv").write_text(table.runs_csv())
    (out / "config.ini").write_text(serialize(cfg))
    return table


__all__ = ["ExperimentConfig", "ResultRow", "ResultsTable", "RunOutcome", "RESULT_COLUMNS",
           "aggregate", "load_config", "parse_config", "parse_method", "run_dir",
           "run_experiment", "serialize"]
