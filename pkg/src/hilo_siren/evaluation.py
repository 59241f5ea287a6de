"""Confusion matrices, detection metrics with d' and criterion, manifest evaluation."""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .audio import AudioError, read_wav
from .detector import DetectionResult, DetectorConfig, detect

log = logging.getLogger(__name__)

LABELS = {"siren": True, "nosiren": False}


class LengthMismatch(ValueError):
    pass


class EmptyClass(ValueError):
    pass


class OutOfDomain(ValueError):
    pass


class DegeneratePrecision(RuntimeWarning):
    pass


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("counts must be non-negative")

    @property
    def positives(self) -> int:
        return self.tp + self.fn

    @property
    def negatives(self) -> int:
        return self.tn + self.fp

    @property
    def total(self) -> int:
        return self.positives + self.negatives


@dataclass(frozen=True)
class MetricsReport:
    error_rate: float
    sensitivity: float
    specificity: float
    precision: float  # nan when nothing was predicted positive
    f1: float
    d_prime: float
    criterion: float

    def to_text(self, cm: ConfusionMatrix | None = None) -> str:
        rows = []
        if cm is not None:
            rows += [("TP", cm.tp), ("FP", cm.fp), ("TN", cm.tn), ("FN", cm.fn)]
        rows += [
            ("Error rate", self.error_rate),
            ("Sensitivity", self.sensitivity),
            ("Specificity", self.specificity),
            ("Precision", self.precision),
            ("F1 score", self.f1),
            ("d'", self.d_prime),
            ("Criterion", self.criterion),
        ]
        width = max(len(k) for k, _ in rows)
        lines = []
        for k, v in rows:
            val = str(v) if isinstance(v, int) else ("undefined" if math.isnan(v) else f"{v:.4f}")
            lines.append(f"{k:<{width}}  {val:>10}")
        return "\n".join(lines) + "\n"

    def to_csv(self, cm: ConfusionMatrix) -> str:
        vals = [self.error_rate, self.sensitivity, self.specificity, self.precision,
                self.f1, self.d_prime, self.criterion]
        return ",".join([str(cm.tp), str(cm.fp), str(cm.tn), str(cm.fn)] + [f"{v:.6f}" for v in vals])


CSV_HEADER = "tp,fp,tn,fn,error,sens,spec,prec,f1,dprime,criterion"


def confusion(labels: Sequence[bool], predictions: Sequence[bool]) -> ConfusionMatrix:
    labels, predictions = list(labels), list(predictions)
    if len(labels) != len(predictions):
        raise LengthMismatch(f"{len(labels)} labels vs {len(predictions)} predictions")
    if not labels:
        raise EmptyClass("no samples")
    tp = sum(1 for y, p in zip(labels, predictions) if y and p)
    fn = sum(1 for y, p in zip(labels, predictions) if y and not p)
    fp = sum(1 for y, p in zip(labels, predictions) if not y and p)
    tn = sum(1 for y, p in zip(labels, predictions) if not y and not p)
    return ConfusionMatrix(tp, fp, tn, fn)


# Acklam's rational approximation to the normal quantile
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _acklam(p: float) -> float:
    if p < _P_LOW:
        q = math.sqrt(-2 * math.log(p))
        return (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1)
    if p > 1 - _P_LOW:
        return -_acklam(1 - p)
    q = p - 0.5
    r = q * q
    return (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
        ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1)


def probit(p: float) -> float:
    """Inverse standard normal CDF.

    Acklam's approximation (relative error ~1e-9) followed by one Halley
    step against ``erfc``, which brings it to near machine precision.
    """
    if not 0.0 < p < 1.0:
        raise OutOfDomain(f"probit is defined on (0, 1), got {p}")
    if p > 0.5:
        return -probit(1.0 - p)
    x = _acklam(p)
    e = 0.5 * math.erfc(-x / math.sqrt(2)) - p
    u = e * math.sqrt(2 * math.pi) * math.exp(x * x / 2)
    return x - u / (1 + x * u / 2)


def _clamped_rate(k: int, n: int) -> float:
    lo = 1.0 / (2 * n)
    return min(max(k / n, lo), 1.0 - lo)


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    if cm.positives == 0 or cm.negatives == 0:
        raise EmptyClass(f"need both classes, got {cm.positives} positives and {cm.negatives} negatives")
    sens = cm.tp / cm.positives
    spec = cm.tn / cm.negatives
    if cm.tp + cm.fp == 0:
        warnings.warn("no positive predictions: precision undefined, F1 set to 0", DegeneratePrecision, stacklevel=2)
        prec, f1 = math.nan, 0.0
    else:
        prec = cm.tp / (cm.tp + cm.fp)
        f1 = 0.0 if prec + sens == 0 else 2 * prec * sens / (prec + sens)
    z_hit = probit(_clamped_rate(cm.tp, cm.positives))
    z_fa = probit(_clamped_rate(cm.fp, cm.negatives))
    return MetricsReport(
        error_rate=(cm.fp + cm.fn) / cm.total,
        sensitivity=sens,
        specificity=spec,
        precision=prec,
        f1=f1,
        d_prime=z_hit - z_fa,
        criterion=-(z_hit + z_fa) / 2,
    )


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: bool


def parse_manifest(lines: Iterable[str], base_dir: Path | None = None) -> list[ManifestEntry]:
    """``<path>\\t<siren|nosiren>`` per line; blank lines and ``#`` comments skipped.

    Relative paths resolve against ``base_dir`` when given.
    """
    entries = []
    for n, line in enumerate(lines, 1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or parts[1].strip() not in LABELS:
            raise ManifestError(f"line {n}: expected '<path>\\t<siren|nosiren>', got {line!r}")
        path = parts[0]
        if base_dir is not None and not Path(path).is_absolute():
            path = str(base_dir / path)
        entries.append(ManifestEntry(path, LABELS[parts[1].strip()]))
    return entries


def read_manifest(path) -> list[ManifestEntry]:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        return parse_manifest(fh, base_dir=path.parent)


@dataclass(frozen=True)
class Verdict:
    path: str
    label: bool
    detected: bool | None  # None when the file could not be processed
    reason: str

    def to_line(self) -> str:
        pred = "SKIP" if self.detected is None else ("SIREN" if self.detected else "NOSIREN")
        truth = "siren" if self.label else "nosiren"
        return f"{self.path}\t{truth}\t{pred}\t{self.reason}"


@dataclass
class Evaluation:
    confusion: ConfusionMatrix
    report: MetricsReport
    verdicts: list[Verdict] = field(default_factory=list)

    @property
    def skipped(self) -> list[Verdict]:
        return [v for v in self.verdicts if v.detected is None]

    @property
    def has_skips(self) -> bool:
        return bool(self.skipped)


def _default_classifier(cfg: DetectorConfig) -> Callable[[str], DetectionResult]:
    return lambda path: detect(read_wav(path), cfg)


def evaluate_manifest(
    manifest: Sequence[ManifestEntry],
    cfg: DetectorConfig | None = None,
    classify: Callable[[str], DetectionResult | bool] | None = None,
    n_jobs: int = 1,
) -> Evaluation:
    """Run the detector over every manifest entry and score it.

    ``classify`` replaces file decoding plus detection (it receives the
    path); unreadable files are reported as skipped and left out of the
    counts. Verdicts keep manifest order.
    """
    cfg = cfg or DetectorConfig()
    classify = classify or _default_classifier(cfg)

    def run(entry: ManifestEntry) -> Verdict:
        try:
            out = classify(entry.path)
        except (OSError, AudioError) as e:
            return Verdict(entry.path, entry.label, None, f"{type(e).__name__}: {e}")
        if isinstance(out, DetectionResult):
            return Verdict(entry.path, entry.label, out.detected, str(out.reject_reason))
        return Verdict(entry.path, entry.label, bool(out), "None" if out else "stub")

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            verdicts = list(pool.map(run, manifest))
    else:
        verdicts = [run(e) for e in manifest]

    for v in verdicts:
        if v.detected is None:
            log.warning("skipped %s: %s", v.path, v.reason)
    scored = [v for v in verdicts if v.detected is not None]
    if not scored:
        raise EmptyClass("manifest has no evaluable files")
    cm = confusion([v.label for v in scored], [v.detected for v in scored])
    return Evaluation(cm, metrics(cm), verdicts)
