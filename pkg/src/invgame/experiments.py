"""Metrics and the four-experiment harness (E1-E4) with report emission."""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .data import Dataset
from .equilibrium import ce_vertices, max_entropy_ce
from .estimation import FITTERS, FitError, make_design
from .optimize import FitConfig, tomllib
from .scenarios import (
    CHICKEN_TRUTH,
    TRAFFIC_TRUTH,
    SweepGrid,
    chicken_dare_game,
    chicken_features,
    sample_iid,
    signaled_sample,
    sweep_traffic_scenarios,
    traffic_features_from_tau,
    traffic_game,
    uncoordinated_sample,
)

REPORT_SCHEMA = 1
EXPERIMENTS = ("E1", "E2", "E3", "E4")
METHODS = ("ice", "ce-ml", "lbr-ml", "lbr-ml-fixed")
METRIC_NAMES = ("mae", "rmse", "tv", "accuracy")


# -- metrics -------------------------------------------------------------------


@dataclass(frozen=True)
class Metrics:
    mae: float | None
    rmse: float | None
    tv: float
    accuracy: float


def mae_rmse(est, truth) -> tuple[float, float]:
    """Errors pooled over every weight entry of both players."""
    if len(est) != len(truth) or any(np.shape(e) != np.shape(t) for e, t in zip(est, truth)):
        raise ValueError("estimated and true weights have different dimensions")
    r = np.concatenate([np.ravel(e) - np.ravel(t) for e, t in zip(est, truth)])
    return float(np.abs(r).mean()), float(np.sqrt((r**2).mean()))


def tv_distance(p, q) -> float:
    return float(0.5 * np.abs(np.asarray(p, float) - np.asarray(q, float)).sum())


def decision_accuracy(model, d: Dataset) -> float:
    """Percent of records equal to the model's argmax (lowest index on ties).

    ``model`` is one distribution, or one per record.
    """
    if len(d) == 0:
        raise ValueError("dataset is empty")
    pred = np.argmax(np.asarray(model, dtype=float), axis=-1) + 1
    return float(100.0 * np.mean(d.actions == pred))


# -- configuration -------------------------------------------------------------


_SCENARIO_DEFAULTS = {
    "E1": {},
    "E2": {"tau": [2.0, 3.0]},
    "E3": {"tau": [2.0, 3.0], "device_vertex": 4},
    "E4": {
        "noise": 1.0,
        "fixed_lambda": [1.0, 1.0],
        "sweep": {"v_range": [8.0, 16.0], "d_range": [10.0, 60.0], "steps": 6, "jitter": 0.05},
        "sweep_seed": 0,
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    T: tuple[int, ...]
    seeds: tuple[int, ...]
    methods: tuple[str, ...]
    scenario: dict = field(default_factory=dict)
    fit: FitConfig = FitConfig()

    def __post_init__(self):
        exp = str(self.experiment).upper()
        if exp not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        object.__setattr__(self, "experiment", exp)
        for name in ("T", "seeds", "methods"):
            if not getattr(self, name):
                raise ValueError(f"config needs a nonempty {name} list")
        if any(int(t) < 1 for t in self.T):
            raise ValueError("every T must be positive")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; expected some of {METHODS}")
        object.__setattr__(self, "T", tuple(int(t) for t in self.T))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "scenario", {**_SCENARIO_DEFAULTS[exp], **self.scenario})

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        d = dict(d)
        unknown = set(d) - {"experiment", "T", "seeds", "methods", "scenario", "fit"}
        if unknown:
            raise ValueError(f"unknown experiment config keys: {sorted(unknown)}")
        missing = {"experiment", "T", "seeds", "methods"} - set(d)
        if missing:
            raise ValueError(f"experiment config is missing {sorted(missing)}")
        d["fit"] = FitConfig.from_dict(d.get("fit", {}))
        return cls(**d)

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        path = Path(path)
        text = path.read_text()
        data = tomllib.loads(text) if path.suffix == ".toml" else json.loads(text)
        return cls.from_dict(data)

    @classmethod
    def bundled(cls, name: str) -> ExperimentConfig:
        text = resources.files("invgame").joinpath("configs", f"{name.lower()}.toml").read_text()
        return cls.from_dict(tomllib.loads(text))

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "T": list(self.T),
            "seeds": list(self.seeds),
            "methods": list(self.methods),
            "scenario": self.scenario,
            "fit": {k: _plain(v) for k, v in self.fit.to_dict().items() if v is not None},
        }


def _plain(v):
    return [_plain(x) for x in v] if isinstance(v, (tuple, list)) else v


# -- protocols -----------------------------------------------------------------


def _truth(cfg: ExperimentConfig):
    if cfg.experiment == "E1":
        return CHICKEN_TRUTH
    if cfg.experiment in ("E2", "E3"):
        return TRAFFIC_TRUTH
    return None


def _features(cfg: ExperimentConfig):
    return chicken_features() if cfg.experiment == "E1" else traffic_features_from_tau


def _state_pool(cfg: ExperimentConfig):
    sc = cfg.scenario
    return sweep_traffic_scenarios(SweepGrid.from_dict(sc["sweep"]), sc["sweep_seed"])


def generate_data(cfg: ExperimentConfig, T: int, seed: int) -> Dataset:
    sc = cfg.scenario
    if cfg.experiment == "E1":
        return sample_iid(max_entropy_ce(chicken_dare_game()), T, seed)
    if cfg.experiment == "E2":
        return sample_iid(max_entropy_ce(traffic_game(*sc["tau"])), T, seed, context=sc["tau"])
    if cfg.experiment == "E3":
        device = ce_vertices(traffic_game(*sc["tau"]))[sc["device_vertex"] - 1]
        return signaled_sample(device, T, seed, context=sc["tau"])
    pool = _state_pool(cfg)
    # decision points and driver noise come from independent streams
    pick = np.random.default_rng([seed, 1]).choice(len(pool), size=T)
    return uncoordinated_sample([pool[i] for i in pick], sc["noise"], seed)


# -- rows and reports ------------------------------------------------------------


@dataclass
class Row:
    experiment: str
    method: str
    T: int
    seed: int
    status: str
    error: str = ""
    mae: float | None = None
    rmse: float | None = None
    tv: float | None = None
    accuracy: float | None = None
    nll: float | None = None
    empirical_nll: float | None = None
    w1: list | None = None
    w2: list | None = None
    y: list | None = None
    lam: list | None = None
    fitted_distribution: list | None = None
    empirical_distribution: list | None = None


ROW_FIELDS = [f for f in Row.__dataclass_fields__]
_LIST_FIELDS = ("w1", "w2", "y", "lam", "fitted_distribution", "empirical_distribution")


def _fit_method(method: str, d: Dataset, cfg: ExperimentConfig):
    fit_cfg = cfg.fit
    if method == "lbr-ml-fixed":
        fit_cfg = replace(fit_cfg, fixed_lambda=tuple(cfg.scenario.get("fixed_lambda", (1.0, 1.0))))
        return FITTERS["lbr-ml"](d, _features(cfg), fit_cfg)
    return FITTERS[method](d, _features(cfg), fit_cfg)


def _run_cell(cfg: ExperimentConfig, T: int, seed: int) -> list[Row]:
    d = generate_data(cfg, T, seed)
    design = make_design(d, _features(cfg))
    empirical = d.frequencies()
    truth = _truth(cfg)
    rows = []
    for method in cfg.methods:
        row = Row(cfg.experiment, method, T, seed, "ok", empirical_distribution=empirical.tolist())
        try:
            est = _fit_method(method, d, cfg)
        except (FitError, FloatingPointError, ValueError) as exc:
            row.status, row.error = "error", f"{type(exc).__name__}: {exc}"
            rows.append(row)
            continue
        if truth is not None:
            row.mae, row.rmse = mae_rmse((est.w1, est.w2), truth)
        row.tv = tv_distance(est.fitted_distribution, empirical)
        row.accuracy = decision_accuracy(est.record_distributions(design), d)
        row.nll, row.empirical_nll = est.nll, est.empirical_nll
        row.w1, row.w2 = est.w1.tolist(), est.w2.tolist()
        row.fitted_distribution = est.fitted_distribution.tolist()
        extra = est.to_dict()
        row.y = extra.get("y")
        row.lam = extra.get("lambda")
        rows.append(row)
    return rows


def _star(args):
    return _run_cell(*args)


def aggregate(rows: list[Row]) -> list[dict]:
    """Median and interquartile range of each metric per (method, T), in first-seen order."""
    groups: dict[tuple, list[Row]] = {}
    for r in rows:
        groups.setdefault((r.experiment, r.method, r.T), []).append(r)
    out = []
    for (exp, method, T), rs in groups.items():
        ok = [r for r in rs if r.status == "ok"]
        agg = {"experiment": exp, "method": method, "T": T, "n": len(rs), "n_ok": len(ok)}
        for m in METRIC_NAMES:
            vals = np.array([getattr(r, m) for r in ok if getattr(r, m) is not None], dtype=float)
            if vals.size:
                q25, q50, q75 = np.percentile(vals, [25, 50, 75])
                agg[f"{m}_median"], agg[f"{m}_iqr"] = float(q50), float(q75 - q25)
            else:
                agg[f"{m}_median"] = agg[f"{m}_iqr"] = None
        out.append(agg)
    return out


@dataclass
class ExperimentReport:
    config: dict
    rows: list[Row]

    @property
    def aggregates(self) -> list[dict]:
        return aggregate(self.rows)

    def to_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA,
            "config": self.config,
            "rows": [asdict(r) for r in self.rows],
            "aggregates": self.aggregates,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentReport:
        if d.get("schema_version") != REPORT_SCHEMA:
            raise ValueError(f"unsupported report schema {d.get('schema_version')!r}")
        return cls(d["config"], [Row(**r) for r in d["rows"]])

    @classmethod
    def load(cls, path) -> ExperimentReport:
        return cls.from_dict(json.loads(Path(path).read_text()))

    def plot_data(self) -> list[dict]:
        """Per-action empirical and model probabilities, averaged over successful seeds."""
        out = []
        groups: dict[tuple, list[Row]] = {}
        for r in self.rows:
            if r.status == "ok":
                groups.setdefault((r.experiment, r.method, r.T), []).append(r)
        for (exp, method, T), rs in groups.items():
            emp = np.mean([r.empirical_distribution for r in rs], axis=0)
            mod = np.mean([r.fitted_distribution for r in rs], axis=0)
            for l in range(4):
                out.append(
                    {
                        "action_index": l + 1,
                        "empirical_p": float(emp[l]),
                        "model_p": float(mod[l]),
                        "method": method,
                        "experiment": exp,
                        "T": T,
                    }
                )
        return out

    def format_table(self) -> str:
        """Aggregate table: one line per method, one column group per T."""
        aggs = self.aggregates
        Ts = sorted({a["T"] for a in aggs})
        metrics = [m for m in METRIC_NAMES if any(a[f"{m}_median"] is not None for a in aggs)]
        head = f"{'method':<14}" + "".join(f"{m + ' T=' + str(T):>18}" for T in Ts for m in metrics)
        lines = [head, "-" * len(head)]
        for method in dict.fromkeys(a["method"] for a in aggs):
            cells = []
            for T in Ts:
                a = next((a for a in aggs if a["method"] == method and a["T"] == T), None)
                for m in metrics:
                    v = None if a is None else a[f"{m}_median"]
                    cells.append(f"{'--' if v is None else format(v, '.2f' if m == 'accuracy' else '.4f'):>18}")
            lines.append(f"{method:<14}" + "".join(cells))
        return "\n".join(lines)


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentReport:
    """Fit every method on every (T, seed) dataset; failures become error rows."""
    cells = [(cfg, T, seed) for T in cfg.T for seed in cfg.seeds]
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_star, cells))  # map keeps submission order
    else:
        results = [_run_cell(*c) for c in cells]
    return ExperimentReport(cfg.to_dict(), [r for rows in results for r in rows])


# -- emission ----------------------------------------------------------------------


def _csv_value(v):
    if v is None:
        return ""
    if isinstance(v, list):
        return json.dumps(v)
    if isinstance(v, float):
        return repr(v)
    return v


def _write_csv(path: Path, fields, records) -> None:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            for rec in records:
                writer.writerow({k: _csv_value(rec[k]) for k in fields})
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def emit_report(report: ExperimentReport, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror}") from exc
    paths = {
        "rows": out / "rows.csv",
        "aggregates": out / "aggregates.csv",
        "report": out / "report.json",
        "plot_data": out / "plot_data.csv",
    }
    _write_csv(paths["rows"], ROW_FIELDS, [asdict(r) for r in report.rows])
    aggs = report.aggregates
    _write_csv(paths["aggregates"], list(aggs[0]) if aggs else ["experiment"], aggs)
    _write_csv(
        paths["plot_data"],
        ["action_index", "empirical_p", "model_p", "method", "experiment", "T"],
        report.plot_data(),
    )
    try:
        paths["report"].write_text(json.dumps(report.to_dict(), indent=1) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {paths['report']}: {exc.strerror}") from exc
    return paths


def read_rows_csv(path) -> list[dict]:
    """rows.csv back into dicts with numbers and lists decoded."""
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            row = {}
            for k, v in rec.items():
                if v == "":
                    row[k] = None
                elif k in _LIST_FIELDS:
                    row[k] = json.loads(v)
                elif k in ("T", "seed"):
                    row[k] = int(v)
                elif k in ("experiment", "method", "status", "error"):
                    row[k] = v
                else:
                    row[k] = float(v)
            out.append(row)
    return out

