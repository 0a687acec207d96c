"""Evaluation harness: dataset loading, random splits, the method grid,
significance testing, and the dependent-signal and bound-sweep studies.

Protocol per split: 30% of the data trains the one-feature weak-signal
models (its labels are visible only to them), 40% is the unlabeled training
set, and 30% is held out for scoring.  Labels of the training set are used
only to compute "true" error bounds and are never passed to a learner.
"""

from __future__ import annotations

import csv
import logging
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from .baselines import conditional_reference, train_avg, train_ge
from .core import ContractError, Dataset, WeakSignalSet, accuracy, constraint_value
from .models import FitConfig, SigmoidLinearModel
from .solver import SolverConfig, train
from .weak import fit_weak_model

log = logging.getLogger(__name__)

DATA_DIR_ENV = "ADVLABEL_DATA_DIR"

# Step size decays as 1/sqrt(t); the other settings are the solver defaults.
PROTOCOL_SOLVER = SolverConfig(step=0.01, schedule="inv_sqrt", rho=0.1, max_iters=10_000)
METHODS = ("ALL", "GE", "AVG", "WS")


class DatasetError(ValueError):
    pass


# --------------------------------------------------------------------------
# Datasets


@dataclass(frozen=True)
class Manifest:
    name: str
    label_column: str
    positive_class: str | None = None
    classes: tuple[str, ...] = ()
    class_selection: str = "all"  # or "two_most_common"
    id_column: str | None = None
    drop_columns: tuple[str, ...] = ()
    ws_features: tuple[str, ...] = ()
    expected_n: int | None = None


def _split_list(value: str, sep: str = ",") -> tuple[str, ...]:
    return tuple(v.strip() for v in value.split(sep) if v.strip())


def parse_manifest(text: str) -> Manifest:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    Pixel features may be given as ``ws_pixels = r,c; r,c; ...`` together
    with ``image_width`` (default 28), ``pixel_prefix`` (default ``pixel``)
    and ``pixel_base`` (default 1, the index of the first pixel column).
    """
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DatasetError(f"manifest line {lineno}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        raw[key.strip()] = value.strip()
    for required in ("name", "label_column"):
        if required not in raw:
            raise DatasetError(f"manifest is missing {required!r}")

    ws_features = _split_list(raw.get("ws_features", ""))
    if "ws_pixels" in raw:
        width = int(raw.get("image_width", 28))
        prefix = raw.get("pixel_prefix", "pixel")
        base = int(raw.get("pixel_base", 1))
        ws_features = tuple(
            f"{prefix}{int(r) * width + int(c) + base}"
            for r, c in (pair.split(",") for pair in _split_list(raw["ws_pixels"], ";"))
        )
    selection = raw.get("class_selection", "all")
    if selection not in ("all", "two_most_common"):
        raise DatasetError(f"unknown class_selection {selection!r}")
    return Manifest(
        name=raw["name"],
        label_column=raw["label_column"],
        positive_class=raw.get("positive_class") or None,
        classes=_split_list(raw.get("classes", "")),
        class_selection=selection,
        id_column=raw.get("id_column") or None,
        drop_columns=_split_list(raw.get("drop_columns", "")),
        ws_features=ws_features,
        expected_n=int(raw["expected_n"]) if raw.get("expected_n") else None,
    )


def read_manifest(path) -> Manifest:
    return parse_manifest(Path(path).read_text())


def resolve_data_path(path) -> Path:
    """Relative paths are looked up under ``$ADVLABEL_DATA_DIR`` when set."""
    path = Path(path)
    base = os.environ.get(DATA_DIR_ENV)
    if base and not path.is_absolute() and not path.exists():
        return Path(base) / path
    return path


def load_dataset(path, manifest: Manifest) -> Dataset:
    """Read a CSV export into a binary :class:`Dataset`.

    Classes are restricted by ``manifest.classes`` or, with
    ``class_selection = two_most_common``, to the two largest classes.  The
    positive class is ``manifest.positive_class`` when given, otherwise the
    less common of the two.
    """
    path = resolve_data_path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    frame = pd.read_csv(path, dtype=str, skipinitialspace=True)
    if manifest.label_column not in frame.columns:
        raise DatasetError(f"{path}: no label column {manifest.label_column!r}")
    labels = frame[manifest.label_column].str.strip()

    if manifest.classes:
        keep = labels.isin(manifest.classes)
    elif manifest.class_selection == "two_most_common":
        counts = Counter(labels)
        top = sorted(counts, key=lambda c: (-counts[c], c))[:2]
        keep = labels.isin(top)
    else:
        keep = pd.Series(True, index=labels.index)
    frame, labels = frame[keep], labels[keep]
    present = sorted(set(labels))
    if len(present) < 2:
        raise DatasetError(f"{path}: need two classes, found {present}")
    if len(present) > 2:
        raise DatasetError(
            f"{path}: {len(present)} classes present; set 'classes' or "
            "'class_selection = two_most_common' in the manifest"
        )
    positive = manifest.positive_class
    if positive is None:
        counts = Counter(labels)
        positive = sorted(present, key=lambda c: (counts[c], c))[0]
    if positive not in present:
        raise DatasetError(f"{path}: positive class {positive!r} not among {present}")

    skip = {manifest.label_column, *manifest.drop_columns}
    if manifest.id_column:
        skip.add(manifest.id_column)
    columns = [c for c in frame.columns if c not in skip]
    values = np.empty((len(frame), len(columns)))
    for j, col in enumerate(columns):
        numeric = pd.to_numeric(frame[col], errors="coerce")
        bad = numeric.isna().to_numpy()
        if bad.any():
            row = int(np.argmax(bad))
            # +2: header line plus 1-based numbering
            raise DatasetError(
                f"{path}: non-numeric cell {frame[col].iloc[row]!r} "
                f"at line {frame.index[row] + 2}, column {col!r}"
            )
        values[:, j] = numeric.to_numpy(dtype=np.float64)

    ids = frame[manifest.id_column].to_numpy() if manifest.id_column else None
    dataset = Dataset(values, (labels == positive).to_numpy(dtype=np.float64), ids, columns)
    if manifest.expected_n is not None and dataset.n != manifest.expected_n:
        log.warning("%s: expected %d examples, loaded %d", manifest.name, manifest.expected_n, dataset.n)
    return dataset


def signal_feature_indices(dataset: Dataset, manifest: Manifest | None = None) -> list[int]:
    """Weak-signal columns from the manifest, else first / middle / last."""
    if manifest is not None and manifest.ws_features:
        return [dataset.feature_index(name) for name in manifest.ws_features]
    return [0, dataset.d // 2, dataset.d - 1]


def two_gaussian_dataset(n: int = 1000, good_shift: float = 1.5, bad_shift: float = 0.2,
                         noise_features: int = 3, seed: int = 0) -> Dataset:
    """Balanced classes with one strong and one weak feature.

    Column 0 is ``good_shift * s + N(0, 1)`` and column 1 is
    ``bad_shift * s + N(0, 1)`` with ``s = +-1`` the class sign; the rest are
    pure noise.  Used as a stand-in for a dataset with one reliable and one
    unreliable expert signal.
    """
    rng = np.random.default_rng(seed)
    y = (rng.random(n) < 0.5).astype(np.float64)
    s = 2.0 * y - 1.0
    cols = [good_shift * s + rng.normal(size=n), bad_shift * s + rng.normal(size=n)]
    cols += [rng.normal(size=n) for _ in range(noise_features)]
    names = ["good", "bad"] + [f"noise{i + 1}" for i in range(noise_features)]
    return Dataset(np.column_stack(cols), y, np.arange(n), names)


# --------------------------------------------------------------------------
# Splits


@dataclass(frozen=True)
class SplitSpec:
    fractions: tuple[float, float, float] = (0.30, 0.40, 0.30)
    seed: int = 0
    stratified: bool = False

    def __post_init__(self):
        if len(self.fractions) != 3 or abs(sum(self.fractions) - 1) > 1e-9:
            raise ContractError("split fractions must be three values summing to 1")


def make_splits(dataset: Dataset, spec: SplitSpec):
    """Disjoint (weak-supervision, train, test) index arrays covering the data."""
    rng = np.random.default_rng(spec.seed)
    if spec.stratified:
        if dataset.true_labels is None:
            raise ContractError("stratified splits need labels")
        parts = [[], [], []]
        for cls in (0.0, 1.0):
            idx = rng.permutation(np.flatnonzero(dataset.true_labels == cls))
            for part, chunk in zip(parts, _cut(idx, spec.fractions)):
                part.append(chunk)
        return tuple(rng.permutation(np.concatenate(p)) for p in parts)
    return tuple(_cut(rng.permutation(dataset.n), spec.fractions))


def _cut(idx, fractions):
    n = len(idx)
    a = int(round(fractions[0] * n))
    b = a + int(round(fractions[1] * n))
    return idx[:a], idx[a:b], idx[b:]


# --------------------------------------------------------------------------
# One split


@dataclass(frozen=True)
class SplitData:
    train: Dataset  # labels kept only for bound computation
    test: Dataset
    signals: np.ndarray  # (m, n_train)
    test_signals: np.ndarray  # (m, n_test)
    references: list


def prepare_split(dataset: Dataset, features: Sequence[int], seed: int,
                  fit: FitConfig = FitConfig(), stratified: bool = False) -> SplitData:
    ws_idx, tr_idx, te_idx = make_splits(dataset, SplitSpec(seed=seed, stratified=stratified))
    ws_split, train_split, test_split = (dataset.subset(i) for i in (ws_idx, tr_idx, te_idx))
    signals, test_signals, refs = [], [], []
    for f in features:
        weak = fit_weak_model(ws_split, f, fit)
        signals.append(weak.predict(train_split))
        test_signals.append(weak.predict(test_split))
        refs.append(conditional_reference(weak.predict(ws_split), ws_split.true_labels))
    return SplitData(train_split, test_split, np.array(signals), np.array(test_signals), refs)


def bounds_for(split: SplitData, bound_mode) -> np.ndarray:
    """``"true"`` measures each signal's error on the training labels;
    a float fixes every bound to that value."""
    if bound_mode == "true":
        return np.array([constraint_value(q, split.train.true_labels) for q in split.signals])
    value = float(bound_mode)
    return np.full(len(split.signals), value)


@dataclass(frozen=True)
class Record:
    dataset: str
    method: str
    seed: int
    accuracy: float
    status: str = "ok"

    @property
    def converged(self) -> bool:
        return self.status in ("ok", "converged")

    @property
    def flagged(self) -> bool:
        return self.status == "infeasible"


def evaluate_methods(split: SplitData, bound_mode, ks: Iterable[int], methods=METHODS,
                     solver: SolverConfig = PROTOCOL_SOLVER, fit: FitConfig = FitConfig(),
                     signal_rows: Sequence[int] | None = None) -> dict:
    """Accuracy and status for every ``method-k``; ``signal_rows`` selects
    and orders the signals (repeats allowed)."""
    rows = list(range(len(split.signals))) if signal_rows is None else list(signal_rows)
    Q = split.signals[rows]
    refs = [split.references[r] for r in rows]
    bounds = bounds_for(split, bound_mode)[rows]
    full = WeakSignalSet(Q, bounds, tuple(f"ws{r + 1}" for r in rows))
    learner_view = split.train.without_labels()
    y_test = split.test.true_labels
    out = {}
    for k in ks:
        ws = full.take(k)
        if "ALL" in methods:
            model = SigmoidLinearModel.zeros(learner_view)
            result = train(learner_view, ws, model, solver)
            acc = accuracy(result.model.predict(split.test), y_test)
            out[f"ALL-{k}"] = (acc, result.status)
        if "GE" in methods:
            model = train_ge(learner_view, ws, refs[:k], fit)
            out[f"GE-{k}"] = (accuracy(model.predict(split.test), y_test), "ok")
        if "AVG" in methods:
            model = train_avg(learner_view, ws, fit)
            out[f"AVG-{k}"] = (accuracy(model.predict(split.test), y_test), "ok")
        if "WS" in methods:
            out[f"WS-{k}"] = (accuracy(split.test_signals[rows[k - 1]], y_test), "ok")
    return out


# --------------------------------------------------------------------------
# Significance


@dataclass(frozen=True)
class TTest:
    statistic: float
    critical: float
    distinguishable: bool


def paired_ttest(a, b, alpha: float = 0.05) -> TTest:
    """Two-tailed paired t-test on matched samples."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ContractError("paired samples must be equal-length vectors of size >= 2")
    diff = a - b
    df = diff.size - 1
    critical = float(stats.t.ppf(1 - alpha / 2, df))
    sd = diff.std(ddof=1)
    if sd == 0:
        if np.all(diff == 0):
            return TTest(0.0, critical, False)
        return TTest(float(np.sign(diff.mean()) * np.inf), critical, True)
    t = float(diff.mean() / (sd / np.sqrt(diff.size)))
    return TTest(t, critical, abs(t) > critical)


def significance_groups(accuracies: dict, alpha: float = 0.05) -> dict:
    """1 for the best method and every method not distinguishable from it."""
    means = {m: float(np.mean(v)) for m, v in accuracies.items()}
    best = max(means, key=means.get)
    return {
        m: int(m == best or not paired_ttest(accuracies[best], v, alpha).distinguishable)
        for m, v in accuracies.items()
    }


# --------------------------------------------------------------------------
# Studies


@dataclass
class GridResult:
    dataset: str
    records: list = field(default_factory=list)

    def accuracies(self) -> dict:
        out: dict = {}
        for r in self.records:
            out.setdefault(r.method, []).append(r.accuracy)
        return out

    def summary(self) -> list[dict]:
        acc = self.accuracies()
        groups = significance_groups(acc)
        return [
            {"dataset": self.dataset, "method": m, "mean": float(np.mean(v)),
             "significance_group": groups[m],
             "flagged": sum(r.flagged for r in self.records if r.method == m)}
            for m, v in acc.items()
        ]

    def mean(self, method: str) -> float:
        return float(np.mean(self.accuracies()[method]))


def _grid_job(args):
    dataset, name, features, seed, bound_mode, ks, methods, solver, fit = args
    split = prepare_split(dataset, features, seed, fit)
    cells = evaluate_methods(split, bound_mode, ks, methods, solver, fit)
    return [Record(name, m, seed, acc, status) for m, (acc, status) in cells.items()]


def _map(fn, jobs_args, jobs: int):
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, jobs_args))
    return [fn(a) for a in jobs_args]


def run_grid(dataset: Dataset, features: Sequence[int], bound_mode="true", methods=METHODS,
             seeds: Iterable[int] = range(10), ks: Iterable[int] | None = None,
             name: str = "dataset", solver: SolverConfig = PROTOCOL_SOLVER,
             fit: FitConfig = FitConfig(), jobs: int = 1) -> GridResult:
    """Every ``method-k`` on every split; non-converged cells are kept and flagged."""
    if dataset.true_labels is None:
        raise ContractError("the harness needs true labels")
    ks = tuple(ks) if ks is not None else tuple(range(1, len(features) + 1))
    jobs_args = [(dataset, name, list(features), s, bound_mode, ks, tuple(methods), solver, fit)
                 for s in seeds]
    result = GridResult(name)
    for records in _map(_grid_job, jobs_args, jobs):
        result.records.extend(records)
    order = {f"{m}-{k}": i for i, (m, k) in enumerate((m, k) for m in METHODS for k in ks)}
    result.records.sort(key=lambda r: (order.get(r.method, 999), r.seed))
    return result


def _dependent_job(args):
    dataset, good, bad, max_copies, seed, methods, solver, fit = args
    split = prepare_split(dataset, [good, bad], seed, fit)
    out = {}
    for k in range(1, max_copies + 1):
        rows = [0] + [1] * k
        cells = evaluate_methods(split, "true", [k + 1], methods, solver, fit, signal_rows=rows)
        for key, (acc, status) in cells.items():
            out[(key.split("-")[0], k)] = (acc, status)
    return out


def dependent_error_study(dataset: Dataset, good: int, bad: int, max_copies: int = 6,
                          seeds: Iterable[int] = range(10), methods=("ALL", "GE", "AVG"),
                          solver: SolverConfig = PROTOCOL_SOLVER, fit: FitConfig = FitConfig(),
                          jobs: int = 1) -> dict:
    """Train on the good signal plus ``k`` copies of the bad one, k = 1..max_copies.

    Returns ``{method: [mean accuracy for k = 1, 2, ...]}``.
    """
    jobs_args = [(dataset, good, bad, max_copies, s, tuple(methods), solver, fit) for s in seeds]
    per_seed = _map(_dependent_job, jobs_args, jobs)
    return {
        m: [float(np.mean([r[(m, k)][0] for r in per_seed])) for k in range(1, max_copies + 1)]
        for m in methods
    }


@dataclass(frozen=True)
class SweepPoint:
    bound: float
    error: float  # nan when excluded
    infeasible_splits: int
    splits: int

    @property
    def excluded(self) -> bool:
        return self.infeasible_splits > 0


def _sweep_job(args):
    dataset, features, values, seed, solver, fit = args
    split = prepare_split(dataset, features, seed, fit)
    out = []
    for v in values:
        (acc, status), = evaluate_methods(split, v, [len(features)], ("ALL",), solver, fit).values()
        out.append((1.0 - acc, status))
    return out


def bound_sweep(dataset: Dataset, features: Sequence[int], values: Sequence[float],
                seeds: Iterable[int] = range(10), solver: SolverConfig = PROTOCOL_SOLVER,
                fit: FitConfig = FitConfig(), jobs: int = 1) -> list[SweepPoint]:
    """ALL-m test error for each fixed bound; points where any split is
    infeasible are marked and carry ``nan`` error."""
    for v in values:
        if not 0 < v <= 1:
            raise ContractError(f"bound values must lie in (0, 1], got {v}")
    seeds = list(seeds)
    per_seed = _map(_sweep_job, [(dataset, list(features), list(values), s, solver, fit)
                                 for s in seeds], jobs)
    points = []
    for i, v in enumerate(values):
        cells = [r[i] for r in per_seed]
        bad = sum(status == "infeasible" for _, status in cells)
        error = float("nan") if bad else float(np.mean([e for e, _ in cells]))
        points.append(SweepPoint(float(v), error, bad, len(cells)))
    return points


# --------------------------------------------------------------------------
# Output


def write_results_csv(result: GridResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dataset", "method", "split_seed", "accuracy", "converged", "status"])
        for r in result.records:
            w.writerow([r.dataset, r.method, r.seed, f"{r.accuracy:.6f}", int(r.converged), r.status])


def write_summary_csv(result: GridResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dataset", "method", "mean", "significance_group"])
        for row in result.summary():
            w.writerow([row["dataset"], row["method"], f"{row['mean']:.6f}", row["significance_group"]])


def format_table(result: GridResult) -> str:
    """Aligned text; ``*`` marks the top significance group."""
    rows = result.summary()
    header = f"{'method':<8} {'mean':>7}  flagged"
    lines = [result.dataset, header, "-" * len(header)]
    for row in rows:
        mark = "*" if row["significance_group"] else " "
        lines.append(f"{row['method']:<8} {row['mean']:>7.3f}{mark} {row['flagged']:>6}")
    return "\n".join(lines)


def write_curve_csv(curves: dict, path) -> None:
    methods = list(curves)
    n = len(next(iter(curves.values())))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["copies", *methods])
        for k in range(n):
            w.writerow([k + 1, *(f"{curves[m][k]:.6f}" for m in methods)])


def write_sweep_csv(points: Sequence[SweepPoint], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bound", "error", "infeasible_splits", "splits", "excluded"])
        for p in points:
            w.writerow([f"{p.bound:.4f}", "" if p.excluded else f"{p.error:.6f}",
                        p.infeasible_splits, p.splits, int(p.excluded)])
