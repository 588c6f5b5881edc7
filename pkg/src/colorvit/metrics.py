"""Multi-class evaluation: confusion matrix, macro scores, ROC and AUC.

Conventions, chosen for determinism:
  - argmax prediction breaks ties toward the lowest class index
  - precision/recall with a zero denominator are 0, and the class is
    flagged in the report
  - macro F1 is the unweighted mean of per-class F1; the harmonic mean
    of macro precision and macro recall is reported alongside it
  - ROC ties collapse into a single vertex, so trapezoidal AUC equals
    the rank-sum probability P(pos > neg) + 0.5 * P(tie)
  - a class with no positives or no negatives has undefined AUC; it is
    excluded from the macro AUC and flagged
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field

import numpy as np


class UndefinedMetricError(ValueError):
    """The requested metric has no value for these inputs."""


def confusion_matrix(labels, predictions, num_classes: int) -> np.ndarray:
    """Count matrix with rows indexed by true class, columns by predicted."""
    labels = np.asarray(labels, dtype=np.int64)
    predictions = np.asarray(predictions, dtype=np.int64)
    if labels.shape != predictions.shape or labels.ndim != 1:
        raise ValueError(
            f"labels and predictions must be equal-length 1-d arrays, "
            f"got {labels.shape} and {predictions.shape}"
        )
    if labels.size == 0:
        raise ValueError("cannot build a confusion matrix from empty inputs")
    for name, arr in (("labels", labels), ("predictions", predictions)):
        if arr.min() < 0 or arr.max() >= num_classes:
            raise ValueError(f"{name} contain values outside [0, {num_classes})")
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (labels, predictions), 1)
    return cm


@dataclass(frozen=True)
class PrfScores:
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    macro_precision: float
    macro_recall: float
    macro_f1: float
    macro_f1_harmonic: float
    zero_division_classes: tuple[int, ...]


def precision_recall_f1(cm: np.ndarray) -> PrfScores:
    """Per-class and macro precision/recall/F1 from a confusion matrix."""
    cm = np.asarray(cm)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise ValueError(f"confusion matrix must be square, got shape {cm.shape}")
    tp = np.diag(cm).astype(np.float64)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp

    flagged: list[int] = []

    def safe_divide(num, den, kind):
        out = np.zeros_like(num)
        zero = den == 0
        out[~zero] = num[~zero] / den[~zero]
        for c in np.flatnonzero(zero):
            flagged.append(int(c))
            warnings.warn(
                f"{kind} for class {c} has a zero denominator; reporting 0"
            )
        return out

    precision = safe_divide(tp, tp + fp, "precision")
    recall = safe_divide(tp, tp + fn, "recall")
    pr_sum = precision + recall
    f1 = np.zeros_like(precision)
    nonzero = pr_sum > 0
    f1[nonzero] = 2.0 * precision[nonzero] * recall[nonzero] / pr_sum[nonzero]

    macro_p = float(precision.mean())
    macro_r = float(recall.mean())
    harmonic = 0.0
    if macro_p + macro_r > 0:
        harmonic = 2.0 * macro_p * macro_r / (macro_p + macro_r)
    return PrfScores(
        precision=precision,
        recall=recall,
        f1=f1,
        macro_precision=macro_p,
        macro_recall=macro_r,
        macro_f1=float(f1.mean()),
        macro_f1_harmonic=harmonic,
        zero_division_classes=tuple(sorted(set(flagged))),
    )


@dataclass(frozen=True)
class RocCurve:
    """One-vs-rest ROC polyline from (0, 0) to (1, 1)."""

    class_index: int
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.fpr) < 0) or np.any(np.diff(self.tpr) < 0):
            raise ValueError("ROC rates must be nondecreasing")
        if (self.fpr[0], self.tpr[0]) != (0.0, 0.0) or (self.fpr[-1], self.tpr[-1]) != (1.0, 1.0):
            raise ValueError("ROC curve must run from (0, 0) to (1, 1)")


def roc_curve_ovr(scores: np.ndarray, labels, class_index: int) -> RocCurve:
    """Threshold sweep over one class's scores against all other classes.

    Tied scores collapse into one vertex, so a run of ties becomes a
    single diagonal segment of the polyline.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.ndim != 2 or labels.shape != (scores.shape[0],):
        raise ValueError(
            f"expected (N, C) scores with N labels, got {scores.shape} and {labels.shape}"
        )
    s = scores[:, class_index]
    positive = labels == class_index
    n_pos = int(positive.sum())
    n_neg = int(positive.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(
            f"ROC for class {class_index} is undefined: "
            f"{n_pos} positives, {n_neg} negatives"
        )

    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    pos_sorted = positive[order].astype(np.float64)
    tp_cum = np.cumsum(pos_sorted)
    fp_cum = np.cumsum(1.0 - pos_sorted)
    # keep only the last position of each tied run
    distinct = np.flatnonzero(np.append(np.diff(s_sorted) != 0, True))
    tpr = np.concatenate([[0.0], tp_cum[distinct] / n_pos])
    fpr = np.concatenate([[0.0], fp_cum[distinct] / n_neg])
    thresholds = s_sorted[distinct]
    return RocCurve(class_index=class_index, fpr=fpr, tpr=tpr, thresholds=thresholds)


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the ROC polyline."""
    return float(np.trapezoid(curve.tpr, curve.fpr))


@dataclass
class EvaluationReport:
    class_names: tuple[str, ...]
    n: int
    accuracy: float
    confusion: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    macro_precision: float
    macro_recall: float
    macro_f1: float
    macro_f1_harmonic: float
    per_class_auc: tuple[float | None, ...]
    macro_auc: float | None
    zero_division_classes: tuple[int, ...] = ()
    undefined_auc_classes: tuple[int, ...] = ()
    curves: list[RocCurve] = field(default_factory=list)


def full_report(scores: np.ndarray, labels, class_names) -> EvaluationReport:
    """Predict by argmax and compose every metric into one report."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    class_names = tuple(class_names)
    if scores.ndim != 2 or scores.shape[1] != len(class_names):
        raise ValueError(
            f"expected (N, {len(class_names)}) scores, got shape {scores.shape}"
        )
    c = len(class_names)
    predictions = np.argmax(scores, axis=-1)
    accuracy = float(np.mean(predictions == labels))
    cm = confusion_matrix(labels, predictions, c)
    prf = precision_recall_f1(cm)

    per_class_auc: list[float | None] = []
    curves: list[RocCurve] = []
    undefined: list[int] = []
    for ci in range(c):
        try:
            curve = roc_curve_ovr(scores, labels, ci)
        except UndefinedMetricError:
            warnings.warn(
                f"AUC for class {ci} ({class_names[ci]}) is undefined; "
                f"excluding it from the macro mean"
            )
            undefined.append(ci)
            per_class_auc.append(None)
            continue
        curves.append(curve)
        per_class_auc.append(auc(curve))
    defined = [a for a in per_class_auc if a is not None]
    macro_auc = float(np.mean(defined)) if defined else None

    return EvaluationReport(
        class_names=class_names,
        n=int(labels.size),
        accuracy=accuracy,
        confusion=cm,
        precision=prf.precision,
        recall=prf.recall,
        f1=prf.f1,
        macro_precision=prf.macro_precision,
        macro_recall=prf.macro_recall,
        macro_f1=prf.macro_f1,
        macro_f1_harmonic=prf.macro_f1_harmonic,
        per_class_auc=tuple(per_class_auc),
        macro_auc=macro_auc,
        zero_division_classes=prf.zero_division_classes,
        undefined_auc_classes=tuple(undefined),
        curves=curves,
    )


# -- serialization ------------------------------------------------------------


def _r(value) -> str:
    # shortest exact decimal form; also strips numpy scalar wrappers
    return repr(float(value))


def report_text(report: EvaluationReport) -> str:
    """Key/value summary; floats use repr so round-trips are exact."""
    lines = [
        f"n = {report.n}",
        f"classes = {','.join(report.class_names)}",
        f"accuracy = {_r(report.accuracy)}",
        f"macro_precision = {_r(report.macro_precision)}",
        f"macro_recall = {_r(report.macro_recall)}",
        f"macro_f1 = {_r(report.macro_f1)}",
        f"macro_f1_harmonic = {_r(report.macro_f1_harmonic)}",
        f"macro_auc = {'undefined' if report.macro_auc is None else _r(report.macro_auc)}",
    ]
    for i, name in enumerate(report.class_names):
        a = report.per_class_auc[i]
        lines.append(f"precision.{name} = {_r(report.precision[i])}")
        lines.append(f"recall.{name} = {_r(report.recall[i])}")
        lines.append(f"f1.{name} = {_r(report.f1[i])}")
        lines.append(f"auc.{name} = {'undefined' if a is None else _r(a)}")
    if report.zero_division_classes:
        flagged = ",".join(str(c) for c in report.zero_division_classes)
        lines.append(f"zero_division_classes = {flagged}")
    if report.undefined_auc_classes:
        flagged = ",".join(str(c) for c in report.undefined_auc_classes)
        lines.append(f"undefined_auc_classes = {flagged}")
    return "\n".join(lines) + "\n"


def confusion_csv(report: EvaluationReport) -> str:
    header = "true\\pred," + ",".join(report.class_names)
    rows = [header]
    for i, name in enumerate(report.class_names):
        counts = ",".join(str(int(v)) for v in report.confusion[i])
        rows.append(f"{name},{counts}")
    return "\n".join(rows) + "\n"


def per_class_csv(report: EvaluationReport) -> str:
    rows = ["class,support,precision,recall,f1,auc"]
    supports = report.confusion.sum(axis=1)
    for i, name in enumerate(report.class_names):
        a = report.per_class_auc[i]
        auc_text = "undefined" if a is None else _r(a)
        rows.append(
            f"{name},{int(supports[i])},{_r(report.precision[i])},"
            f"{_r(report.recall[i])},{_r(report.f1[i])},{auc_text}"
        )
    return "\n".join(rows) + "\n"


def roc_csv(curve: RocCurve) -> str:
    rows = ["fpr,tpr,threshold"]
    # the leading (0, 0) vertex has no threshold of its own
    rows.append(f"{_r(0.0)},{_r(0.0)},")
    for f, t, th in zip(curve.fpr[1:], curve.tpr[1:], curve.thresholds):
        rows.append(f"{_r(f)},{_r(t)},{_r(th)}")
    return "\n".join(rows) + "\n"


def _parse_float(kv: dict, key: str, source: str) -> float:
    if key not in kv:
        raise ValueError(f"{source}: missing field {key!r}")
    try:
        return float(kv[key])
    except ValueError:
        raise ValueError(f"{source}: field {key!r} is not a number: {kv[key]!r}") from None


def read_report(report_dir) -> EvaluationReport:
    """Rebuild a report from the files write_report produced.

    A missing or malformed field raises ValueError naming the field, so
    a half-written report directory fails loudly instead of plotting
    nonsense.
    """
    report_dir = os.fspath(report_dir)
    summary_path = os.path.join(report_dir, "report.txt")
    if not os.path.exists(summary_path):
        raise ValueError(f"{report_dir}: missing report.txt")
    kv: dict[str, str] = {}
    with open(summary_path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if " = " not in line:
                raise ValueError(f"report.txt: malformed line {line!r}")
            key, value = line.split(" = ", 1)
            kv[key] = value

    if "classes" not in kv:
        raise ValueError("report.txt: missing field 'classes'")
    class_names = tuple(kv["classes"].split(","))
    n = int(_parse_float(kv, "n", "report.txt"))

    precision = np.array([_parse_float(kv, f"precision.{c}", "report.txt") for c in class_names])
    recall = np.array([_parse_float(kv, f"recall.{c}", "report.txt") for c in class_names])
    f1 = np.array([_parse_float(kv, f"f1.{c}", "report.txt") for c in class_names])
    per_class_auc: list[float | None] = []
    for c in class_names:
        key = f"auc.{c}"
        if key not in kv:
            raise ValueError(f"report.txt: missing field {key!r}")
        per_class_auc.append(None if kv[key] == "undefined" else _parse_float(kv, key, "report.txt"))
    macro_auc = None if kv.get("macro_auc") == "undefined" else _parse_float(kv, "macro_auc", "report.txt")

    confusion_path = os.path.join(report_dir, "confusion.csv")
    if not os.path.exists(confusion_path):
        raise ValueError(f"{report_dir}: missing confusion.csv")
    with open(confusion_path, encoding="utf-8") as f:
        rows = [line.strip().split(",") for line in f if line.strip()]
    if len(rows) != len(class_names) + 1:
        raise ValueError(f"confusion.csv: expected {len(class_names)} data rows")
    cm = np.array([[int(v) for v in row[1:]] for row in rows[1:]], dtype=np.int64)
    if cm.shape != (len(class_names), len(class_names)):
        raise ValueError(f"confusion.csv: matrix shape {cm.shape} is not square over classes")

    curves: list[RocCurve] = []
    for ci, cname in enumerate(class_names):
        if per_class_auc[ci] is None:
            continue
        roc_path = os.path.join(report_dir, f"roc_{cname}.csv")
        if not os.path.exists(roc_path):
            raise ValueError(f"{report_dir}: missing roc_{cname}.csv")
        fprs, tprs, ths = [], [], []
        with open(roc_path, encoding="utf-8") as f:
            lines = [line.strip() for line in f if line.strip()]
        if not lines or lines[0] != "fpr,tpr,threshold":
            raise ValueError(f"roc_{cname}.csv: unexpected header")
        for line in lines[1:]:
            fpr_text, tpr_text, th_text = line.split(",")
            fprs.append(float(fpr_text))
            tprs.append(float(tpr_text))
            if th_text:
                ths.append(float(th_text))
        curves.append(RocCurve(ci, np.array(fprs), np.array(tprs), np.array(ths)))

    undefined = tuple(ci for ci, a in enumerate(per_class_auc) if a is None)
    return EvaluationReport(
        class_names=class_names,
        n=n,
        accuracy=_parse_float(kv, "accuracy", "report.txt"),
        confusion=cm,
        precision=precision,
        recall=recall,
        f1=f1,
        macro_precision=_parse_float(kv, "macro_precision", "report.txt"),
        macro_recall=_parse_float(kv, "macro_recall", "report.txt"),
        macro_f1=_parse_float(kv, "macro_f1", "report.txt"),
        macro_f1_harmonic=_parse_float(kv, "macro_f1_harmonic", "report.txt"),
        per_class_auc=tuple(per_class_auc),
        macro_auc=macro_auc,
        undefined_auc_classes=undefined,
        curves=curves,
    )


def write_report(report: EvaluationReport, out_dir) -> list[str]:
    """Write the text summary and CSV tables; returns the paths written."""
    out_dir = os.fspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def emit(name, text):
        path = os.path.join(out_dir, name)
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
        written.append(path)

    emit("report.txt", report_text(report))
    emit("confusion.csv", confusion_csv(report))
    emit("per_class.csv", per_class_csv(report))
    for curve in report.curves:
        name = report.class_names[curve.class_index]
        emit(f"roc_{name}.csv", roc_csv(curve))
    return written
