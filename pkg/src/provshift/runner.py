"""Sweep orchestration: grid enumeration, repeated runs, aggregation.

A sweep spec names a corpus, a featurizer, the parameter grids, and the
model configurations. Every grid combination is checked end to end
(derived rates, solved test rates, integer plans, corpus feasibility);
infeasible combinations are skipped and logged, never approximated. Each
surviving setting runs ``repeats`` times with per-cell random streams
derived from (base seed, setting index, repeat index), so parallel and
serial execution emit identical rows.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .corpus import (
    Corpus,
    attach_embeddings,
    build_vocabulary,
    embedding_matrix,
    load_corpus,
    unigram_matrix,
)
from .metrics import SlopeFit, auprc, fit_slope
from .model import LRConfig, fit_lr
from .sampler import (
    CELLS,
    CellPlan,
    DegenerateSettingError,
    InfeasibleRatesError,
    ShiftSetting,
    check_feasibility,
    derive_rates,
    draw_split,
    plan_cells,
    seed_tuple,
    solve_test_rates,
)

__all__ = [
    "FeaturizerSpec",
    "ModelSpec",
    "CyFilter",
    "SweepSpec",
    "PlannedSetting",
    "SkipEntry",
    "SweepRow",
    "SlopeReport",
    "AggregateReport",
    "EmptyGridError",
    "load_sweep_spec",
    "enumerate_settings",
    "run_sweep",
    "aggregate_report",
    "write_rows",
    "read_rows",
    "write_slope_reports",
    "write_plot_data",
]

ROWS_HEADER = (
    "setting_id,cy,alpha_train,alpha_test,repeat,model,auprc,n_train_cells,n_test_cells"
)
SLOPES_HEADER = "model,cy,slope,intercept,n_points,log_base"


class EmptyGridError(ValueError):
    """No grid combination survived the feasibility checks."""


@dataclass(frozen=True)
class FeaturizerSpec:
    kind: str
    min_df: int = 1
    path: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("unigram", "embedding"):
            raise ValueError(f"featurizer kind must be 'unigram' or 'embedding', got {self.kind!r}")
        if self.kind == "unigram" and self.min_df < 1:
            raise ValueError("min_df must be a positive integer")
        if self.kind == "embedding" and not self.path:
            raise ValueError("embedding featurizer requires a table path")


@dataclass(frozen=True)
class ModelSpec:
    tag: str
    adjusted: bool
    lr: LRConfig = field(default_factory=LRConfig)


@dataclass(frozen=True)
class CyFilter:
    values: tuple[float, ...]
    tolerance: float = 1e-9

    def admits(self, cy: float) -> bool:
        return any(abs(cy - v) <= self.tolerance for v in self.values)


@dataclass(frozen=True)
class SweepSpec:
    corpus_path: str
    source_names: tuple[str, str]
    featurizer: FeaturizerSpec
    p_train_y1_z0: tuple[float, ...]
    p_train_y1_z1: tuple[float, ...]
    cz: tuple[float, ...]
    alpha_test: tuple[float, ...]
    n_train: int
    n_test: int
    model_configs: tuple[ModelSpec, ...]
    cy_filter: CyFilter | None = None
    repeats: int = 5
    base_seed: int = 0
    slope_on: str = "rows"

    def __post_init__(self) -> None:
        for name in ("p_train_y1_z0", "p_train_y1_z1", "cz", "alpha_test"):
            if not getattr(self, name):
                raise ValueError(f"grid {name} must be non-empty")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if not self.model_configs:
            raise ValueError("at least one model config required")
        tags = [m.tag for m in self.model_configs]
        if len(set(tags)) != len(tags):
            raise ValueError(f"model tags must be unique, got {tags}")
        if self.slope_on not in ("rows", "alpha_means"):
            raise ValueError("slope_on must be 'rows' or 'alpha_means'")

    @classmethod
    def from_dict(cls, doc: Mapping) -> "SweepSpec":
        known = {
            "corpus_path",
            "source_names",
            "featurizer",
            "p_train_y1_z0",
            "p_train_y1_z1",
            "cz",
            "alpha_test",
            "cy_filter",
            "n_train",
            "n_test",
            "repeats",
            "base_seed",
            "model_configs",
            "slope_on",
        }
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown sweep config keys: {sorted(unknown)}")
        missing = {
            "corpus_path",
            "source_names",
            "featurizer",
            "p_train_y1_z0",
            "p_train_y1_z1",
            "cz",
            "alpha_test",
            "n_train",
            "n_test",
            "model_configs",
        } - set(doc)
        if missing:
            raise ValueError(f"missing sweep config keys: {sorted(missing)}")

        feat_doc = dict(doc["featurizer"])
        featurizer = FeaturizerSpec(
            kind=feat_doc.pop("kind", ""),
            min_df=feat_doc.pop("min_df", 1),
            path=feat_doc.pop("path", None),
        )
        if feat_doc:
            raise ValueError(f"unknown featurizer keys: {sorted(feat_doc)}")

        models = []
        for i, m in enumerate(doc["model_configs"]):
            m = dict(m)
            adjusted = m.pop("adjusted", None)
            if adjusted is None:
                raise ValueError(f"model config {i}: missing 'adjusted' flag")
            tag = m.pop("tag", "adjusted" if adjusted else "unadjusted")
            lr = LRConfig(
                C=m.pop("C", 1.0),
                v=m.pop("v", 10.0),
                tol=m.pop("tol", 1e-6),
                max_iter=m.pop("max_iter", 1000),
            )
            if m:
                raise ValueError(f"model config {i}: unknown keys {sorted(m)}")
            models.append(ModelSpec(tag=tag, adjusted=bool(adjusted), lr=lr))

        cy_filter = None
        if doc.get("cy_filter") is not None:
            cf = dict(doc["cy_filter"])
            cy_filter = CyFilter(
                values=tuple(float(x) for x in cf.pop("values")),
                tolerance=float(cf.pop("tolerance", 1e-9)),
            )
            if cf:
                raise ValueError(f"unknown cy_filter keys: {sorted(cf)}")

        return cls(
            corpus_path=str(doc["corpus_path"]),
            source_names=tuple(doc["source_names"]),
            featurizer=featurizer,
            p_train_y1_z0=tuple(float(x) for x in doc["p_train_y1_z0"]),
            p_train_y1_z1=tuple(float(x) for x in doc["p_train_y1_z1"]),
            cz=tuple(float(x) for x in doc["cz"]),
            alpha_test=tuple(float(x) for x in doc["alpha_test"]),
            n_train=int(doc["n_train"]),
            n_test=int(doc["n_test"]),
            model_configs=tuple(models),
            cy_filter=cy_filter,
            repeats=int(doc.get("repeats", 5)),
            base_seed=int(doc.get("base_seed", 0)),
            slope_on=str(doc.get("slope_on", "rows")),
        )


def load_sweep_spec(path: str | Path) -> SweepSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return SweepSpec.from_dict(json.load(fh))


@dataclass(frozen=True)
class PlannedSetting:
    """A feasible grid point with its derived quantities and cell plan."""

    index: int
    setting: ShiftSetting
    cy: float
    alpha_train: float
    p_test_y1_z0: float
    p_test_y1_z1: float
    plan: CellPlan


@dataclass(frozen=True)
class SkipEntry:
    index: int
    params: Mapping[str, float]
    reason: str


def enumerate_settings(
    spec: SweepSpec, corpus: Corpus
) -> tuple[list[PlannedSetting], list[SkipEntry]]:
    """Expand the grids and keep the combinations that can actually run.

    Setting indices count positions in the full Cartesian product, so a
    setting's random streams do not move when filters change. Raises
    :class:`EmptyGridError` when nothing survives.
    """
    corpus_counts = corpus.cell_counts()
    planned: list[PlannedSetting] = []
    skips: list[SkipEntry] = []
    grid = itertools.product(spec.p_train_y1_z0, spec.p_train_y1_z1, spec.cz, spec.alpha_test)
    for index, (p0, p1, cz, alpha) in enumerate(grid):
        params = {"p_train_y1_z0": p0, "p_train_y1_z1": p1, "cz": cz, "alpha_test": alpha}

        def skip(reason: str) -> None:
            skips.append(SkipEntry(index=index, params=params, reason=reason))

        try:
            setting = ShiftSetting(
                p_train_y1_z0=p0,
                p_train_y1_z1=p1,
                cz=cz,
                alpha_test=alpha,
                n_train=spec.n_train,
                n_test=spec.n_test,
            )
            rates = derive_rates(setting)
        except DegenerateSettingError as exc:
            skip(f"degenerate setting: {exc}")
            continue
        if spec.cy_filter is not None and not spec.cy_filter.admits(rates.cy):
            skip(f"cy filter: cy={rates.cy!r} not within tolerance of targets")
            continue
        try:
            pt0, pt1 = solve_test_rates(cz, rates.cy, alpha)
        except InfeasibleRatesError as exc:
            skip(f"infeasible rates: {exc}")
            continue
        except DegenerateSettingError as exc:
            skip(f"degenerate setting: {exc}")
            continue
        plan = CellPlan(
            train=plan_cells(spec.n_train, cz, p0, p1),
            test=plan_cells(spec.n_test, cz, pt0, pt1),
        )
        report = check_feasibility(plan, corpus_counts)
        if not report.ok:
            skip(report.describe())
            continue
        planned.append(
            PlannedSetting(
                index=index,
                setting=setting,
                cy=rates.cy,
                alpha_train=rates.alpha_train,
                p_test_y1_z0=pt0,
                p_test_y1_z1=pt1,
                plan=plan,
            )
        )
    if not planned:
        raise EmptyGridError(
            f"no feasible settings among {len(skips)} candidates; "
            f"first skip: {skips[0].reason if skips else 'empty grid'}"
        )
    return planned, skips


@dataclass(frozen=True)
class SweepRow:
    setting_id: int
    cy: float
    alpha_train: float
    alpha_test: float
    repeat: int
    model: str
    auprc: float
    n_train_cells: tuple[int, int, int, int]
    n_test_cells: tuple[int, int, int, int]


def _cells_field(counts: Mapping[tuple[int, int], int]) -> tuple[int, int, int, int]:
    return tuple(counts[cell] for cell in CELLS)


def _build_features(
    featurizer: FeaturizerSpec, train, test
) -> tuple[object, object]:
    if featurizer.kind == "unigram":
        space = build_vocabulary(train, min_df=featurizer.min_df)
        return unigram_matrix(train, space), unigram_matrix(test, space)
    return embedding_matrix(train), embedding_matrix(test)


def _execute_unit(
    spec: SweepSpec,
    corpus: Corpus,
    planned: PlannedSetting,
    repeat: int,
    extra_scorers: Mapping[str, Callable] | None = None,
) -> list[SweepRow]:
    seed = seed_tuple(spec.base_seed, planned.index, repeat)
    train_ids, test_ids = draw_split(corpus, planned.plan, seed)
    train = corpus.subset(train_ids)
    test = corpus.subset(test_ids)
    x_train, x_test = _build_features(spec.featurizer, train, test)
    y_train = np.array([r.y for r in train], dtype=np.int64)
    z_train = np.array([r.z for r in train], dtype=np.int64)
    y_test = np.array([r.y for r in test], dtype=np.int64)

    def make_row(tag: str, score_value: float) -> SweepRow:
        return SweepRow(
            setting_id=planned.index,
            cy=planned.cy,
            alpha_train=planned.alpha_train,
            alpha_test=planned.setting.alpha_test,
            repeat=repeat,
            model=tag,
            auprc=score_value,
            n_train_cells=_cells_field(planned.plan.train),
            n_test_cells=_cells_field(planned.plan.test),
        )

    rows = []
    for mspec in spec.model_configs:
        try:
            fitted = fit_lr(x_train, y_train, z_train if mspec.adjusted else None, mspec.lr)
            if mspec.adjusted:
                scores = fitted.predict_backdoor(x_test)
            else:
                scores = fitted.predict_conditional(x_test, 0)
            rows.append(make_row(mspec.tag, auprc(scores, y_test)))
        except ValueError as exc:
            raise RuntimeError(
                f"setting {planned.index} repeat {repeat} model {mspec.tag!r}: {exc}"
            ) from exc
    for tag, scorer in (extra_scorers or {}).items():
        scores = np.array([scorer(rec) for rec in test], dtype=np.float64)
        rows.append(make_row(tag, auprc(scores, y_test)))
    return rows


_WORKER: dict = {}


def _worker_init(spec: SweepSpec, corpus: Corpus) -> None:
    _WORKER["spec"] = spec
    _WORKER["corpus"] = corpus


def _worker_run(args: tuple[PlannedSetting, int]) -> list[SweepRow]:
    planned, repeat = args
    return _execute_unit(_WORKER["spec"], _WORKER["corpus"], planned, repeat)


def prepare_corpus(spec: SweepSpec) -> Corpus:
    """Load the spec's corpus, attaching embeddings when configured."""
    corpus = load_corpus(spec.corpus_path, spec.source_names)
    if spec.featurizer.kind == "embedding":
        corpus = attach_embeddings(corpus, spec.featurizer.path)
    return corpus


def run_sweep(
    spec: SweepSpec,
    corpus: Corpus | None = None,
    jobs: int = 1,
    extra_scorers: Mapping[str, Callable] | None = None,
) -> tuple[list[SweepRow], list[PlannedSetting], list[SkipEntry]]:
    """Run every (setting, repeat) cell and return rows sorted by
    (setting, repeat) with models in config order.

    The output is a pure function of (spec, corpus); the jobs count only
    changes wall-clock time.
    """
    if corpus is None:
        corpus = prepare_corpus(spec)
    elif spec.featurizer.kind == "embedding" and any(
        r.features is None for r in corpus
    ):
        corpus = attach_embeddings(corpus, spec.featurizer.path)
    planned, skips = enumerate_settings(spec, corpus)
    units = [(p, r) for p in planned for r in range(spec.repeats)]

    results: list[list[SweepRow]]
    if jobs <= 1:
        results = [
            _execute_unit(spec, corpus, p, r, extra_scorers) for p, r in units
        ]
    else:
        if extra_scorers:
            raise ValueError("extra scorers are supported in serial mode only")
        with ProcessPoolExecutor(
            max_workers=jobs, initializer=_worker_init, initargs=(spec, corpus)
        ) as pool:
            results = list(pool.map(_worker_run, units, chunksize=1))

    rows = [row for unit_rows in results for row in unit_rows]
    rows.sort(key=lambda r: (r.setting_id, r.repeat))
    return rows, planned, skips


@dataclass(frozen=True)
class SlopeReport:
    model: str
    cy: float
    slope: float
    intercept: float
    n_points: int
    log_base: str


@dataclass(frozen=True)
class AlphaSummary:
    model: str
    cy: float
    alpha_test: float
    mean: float
    min: float
    max: float
    n: int


@dataclass(frozen=True)
class AggregateReport:
    slopes: tuple[SlopeReport, ...]
    alpha_means: tuple[AlphaSummary, ...]
    warnings: tuple[str, ...]


_LOG_BASE_LABELS = {math.e: "e", 2.0: "2", 10.0: "10"}


def aggregate_report(
    rows: Sequence[SweepRow],
    log_base: float = math.e,
    slope_on: str = "rows",
) -> AggregateReport:
    """Fit robustness slopes per (model, Cy-rounded-to-2-decimals) group.

    ``slope_on='rows'`` fits across every (repeat, alpha) row, keeping
    repeat variance in the fit; ``'alpha_means'`` averages repeats per
    alpha first. Groups with fewer than two distinct alphas are skipped
    with a warning.
    """
    if slope_on not in ("rows", "alpha_means"):
        raise ValueError("slope_on must be 'rows' or 'alpha_means'")
    base_label = _LOG_BASE_LABELS.get(log_base, repr(log_base))

    groups: dict[tuple[str, float], list[SweepRow]] = {}
    for row in rows:
        groups.setdefault((row.model, round(row.cy, 2)), []).append(row)

    slopes: list[SlopeReport] = []
    summaries: list[AlphaSummary] = []
    warnings: list[str] = []
    for (model, cy), group in sorted(groups.items()):
        by_alpha: dict[float, list[float]] = {}
        for row in group:
            by_alpha.setdefault(row.alpha_test, []).append(row.auprc)
        for alpha in sorted(by_alpha):
            vals = by_alpha[alpha]
            summaries.append(
                AlphaSummary(
                    model=model,
                    cy=cy,
                    alpha_test=alpha,
                    mean=float(np.mean(vals)),
                    min=float(np.min(vals)),
                    max=float(np.max(vals)),
                    n=len(vals),
                )
            )
        if len(by_alpha) < 2:
            warnings.append(
                f"group (model={model}, cy={cy}): single alpha value, slope skipped"
            )
            continue
        if slope_on == "rows":
            points = [(row.alpha_test, row.auprc) for row in group]
        else:
            points = [
                (alpha, float(np.mean(vals))) for alpha, vals in sorted(by_alpha.items())
            ]
        fit: SlopeFit = fit_slope(points, log_base=log_base)
        slopes.append(
            SlopeReport(
                model=model,
                cy=cy,
                slope=fit.slope,
                intercept=fit.intercept,
                n_points=fit.n_points,
                log_base=base_label,
            )
        )
    return AggregateReport(
        slopes=tuple(slopes), alpha_means=tuple(summaries), warnings=tuple(warnings)
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def write_rows(rows: Sequence[SweepRow], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ROWS_HEADER.split(","))
        for r in rows:
            writer.writerow(
                [
                    str(r.setting_id),
                    _fmt(r.cy),
                    _fmt(r.alpha_train),
                    _fmt(r.alpha_test),
                    str(r.repeat),
                    r.model,
                    _fmt(r.auprc),
                    "|".join(str(c) for c in r.n_train_cells),
                    "|".join(str(c) for c in r.n_test_cells),
                ]
            )


def read_rows(path: str | Path) -> list[SweepRow]:
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ROWS_HEADER.split(",")
        if reader.fieldnames != expected:
            raise ValueError(f"rows file header mismatch: {reader.fieldnames}")
        for rec in reader:
            rows.append(
                SweepRow(
                    setting_id=int(rec["setting_id"]),
                    cy=float(rec["cy"]),
                    alpha_train=float(rec["alpha_train"]),
                    alpha_test=float(rec["alpha_test"]),
                    repeat=int(rec["repeat"]),
                    model=rec["model"],
                    auprc=float(rec["auprc"]),
                    n_train_cells=tuple(int(c) for c in rec["n_train_cells"].split("|")),
                    n_test_cells=tuple(int(c) for c in rec["n_test_cells"].split("|")),
                )
            )
    return rows


def write_slope_reports(reports: Sequence[SlopeReport], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(SLOPES_HEADER + "\n")
        for r in reports:
            fh.write(
                ",".join(
                    [
                        r.model,
                        _fmt(r.cy),
                        _fmt(r.slope),
                        _fmt(r.intercept),
                        str(r.n_points),
                        r.log_base,
                    ]
                )
                + "\n"
            )


def write_plot_data(summaries: Sequence[AlphaSummary], path: str | Path) -> None:
    """One JSON object per (model, cy) with per-alpha mean/min/max arrays."""
    grouped: dict[tuple[str, float], list[AlphaSummary]] = {}
    for s in summaries:
        grouped.setdefault((s.model, s.cy), []).append(s)
    with open(path, "w", encoding="utf-8") as fh:
        for (model, cy), items in sorted(grouped.items()):
            items = sorted(items, key=lambda s: s.alpha_test)
            obj = {
                "model": model,
                "cy": cy,
                "alpha_test": [s.alpha_test for s in items],
                "mean_auprc": [s.mean for s in items],
                "min_auprc": [s.min for s in items],
                "max_auprc": [s.max for s in items],
                "n": [s.n for s in items],
            }
            fh.write(json.dumps(obj) + "\n")


def write_skip_log(skips: Sequence[SkipEntry], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in skips:
            fh.write(json.dumps({"index": s.index, **s.params, "reason": s.reason}) + "\n")
