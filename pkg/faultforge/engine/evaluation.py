# Copyright (c), CommunityLogiq Software

"""
Vulnerability KPIs from result files.

SDE counts inferences whose top-1 class (or detection set) differs from the
fault-free leg without any NaN/Inf flag; DUE counts inferences flagged with
NaN/Inf. Per-bit and per-layer breakdowns attribute an inference to the first
fault of its group.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pyarrow as pa
import pyarrow.csv as pacsv
from loguru import logger

from faultforge.errors import EvaluationError
from faultforge.engine.binfmt import PathLike
from faultforge.engine.model_registry import Detection
from faultforge.engine.results import (
    TOP_K,
    ClassificationRow,
    DetectionRow,
    FaultLocation,
    LegFiles,
    write_combined_csv,
)

DEFAULT_IOU_THRESHOLD = 0.5
DEFAULT_CONF_THRESHOLD = 0.25

# key used for inferences that ran without any applied fault
NO_FAULT = -1


@dataclass
class BucketStats:
    total: int = 0
    sde: int = 0
    due: int = 0

    @property
    def sde_rate(self) -> float:
        return self.sde / self.total if self.total else 0.0

    @property
    def due_rate(self) -> float:
        return self.due / self.total if self.total else 0.0

    def add(self, sde: bool, due: bool):
        self.total += 1
        self.sde += int(sde)
        self.due += int(due)


@dataclass
class KpiReport:
    total: int = 0
    corrupted: int = 0
    due: int = 0
    per_bit: Dict[int, BucketStats] = field(default_factory=dict)
    per_layer: Dict[int, BucketStats] = field(default_factory=dict)

    @property
    def sde_rate(self) -> float:
        return self.corrupted / self.total if self.total else 0.0

    @property
    def due_rate(self) -> float:
        return self.due / self.total if self.total else 0.0

    def record(self, first_fault: Optional[FaultLocation], sde: bool, due: bool):
        self.total += 1
        self.corrupted += int(sde)
        self.due += int(due)
        bit = first_fault.bit if first_fault is not None else NO_FAULT
        layer = first_fault.layer if first_fault is not None else NO_FAULT
        self.per_bit.setdefault(bit, BucketStats()).add(sde, due)
        self.per_layer.setdefault(layer, BucketStats()).add(sde, due)

    def summary(self) -> Dict[str, float]:
        return {
            "total": self.total,
            "sde": self.corrupted,
            "due": self.due,
            "sde_rate": self.sde_rate,
            "due_rate": self.due_rate,
        }


def top_k(logits: Sequence[float], k: int = TOP_K) -> List[Tuple[int, float]]:
    """Softmax probabilities, highest first, ties to the lower class id; padded with (-1, 0.0)"""
    x = np.asarray(logits, dtype=np.float64)
    with np.errstate(over="ignore", invalid="ignore"):
        e = np.exp(x - np.max(x))
        probs = e / np.sum(e)
    order = np.argsort(-probs, kind="stable")
    ranked = [(int(c), float(probs[c])) for c in order[:k]]
    return ranked + [(-1, 0.0)] * (k - len(ranked))


def _pair(orig: Sequence, corr: Sequence) -> List[Tuple]:
    by_key = {row.key(): row for row in orig}
    corr_keys = {row.key() for row in corr}
    if len(by_key) != len(orig) or set(by_key) != corr_keys or len(corr_keys) != len(corr):
        raise EvaluationError(
            f"legs cover different images: {len(by_key)} fault-free against {len(corr_keys)} faulty"
        )
    return [(by_key[row.key()], row) for row in corr]


def _first(row) -> Optional[FaultLocation]:
    return row.faults[0] if row.faults else None


def sde_due_classification(
    orig: Sequence[ClassificationRow], corr: Sequence[ClassificationRow]
) -> KpiReport:
    report = KpiReport()
    for o, c in _pair(orig, corr):
        due = c.due
        sde = not due and c.top1 != o.top1
        report.record(_first(c), sde, due)
    return report


def iou(a: Sequence[float], b: Sequence[float]) -> float:
    ax1, ay1, ax2, ay2 = a[:4]
    bx1, by1, bx2, by2 = b[:4]
    area_a = max(0.0, ax2 - ax1) * max(0.0, ay2 - ay1)
    area_b = max(0.0, bx2 - bx1) * max(0.0, by2 - by1)
    if area_a == 0 or area_b == 0:
        return 0.0
    iw = max(0.0, min(ax2, bx2) - max(ax1, bx1))
    ih = max(0.0, min(ay2, by2) - max(ay1, by1))
    inter = iw * ih
    return inter / (area_a + area_b - inter)


@dataclass(frozen=True)
class Matching:
    pairs: Tuple[Tuple[int, int, float], ...]
    unmatched_orig: Tuple[int, ...]
    unmatched_corr: Tuple[int, ...]


Matcher = Callable[[Sequence[Detection], Sequence[Detection]], Matching]


def match_detections(orig: Sequence[Detection], corr: Sequence[Detection]) -> Matching:
    """Greedy one-to-one matching by descending IoU; pairs without overlap stay unmatched"""
    candidates = []
    for i, o in enumerate(orig):
        for j, c in enumerate(corr):
            overlap = iou(o, c)
            if overlap > 0:
                candidates.append((-overlap, i, j))
    candidates.sort()

    used_orig, used_corr, pairs = set(), set(), []
    for neg_overlap, i, j in candidates:
        if i in used_orig or j in used_corr:
            continue
        used_orig.add(i)
        used_corr.add(j)
        pairs.append((i, j, -neg_overlap))
    return Matching(
        tuple(sorted(pairs)),
        tuple(i for i in range(len(orig)) if i not in used_orig),
        tuple(j for j in range(len(corr)) if j not in used_corr),
    )


def detections_differ(
    orig: Sequence[Detection],
    corr: Sequence[Detection],
    iou_thresh: float = DEFAULT_IOU_THRESHOLD,
    matcher: Matcher = match_detections,
) -> bool:
    m = matcher(orig, corr)
    if m.unmatched_orig or m.unmatched_corr:
        return True
    return any(orig[i].cls != corr[j].cls or overlap < iou_thresh for i, j, overlap in m.pairs)


def sde_due_detection(
    orig: Sequence[DetectionRow],
    corr: Sequence[DetectionRow],
    iou_thresh: float = DEFAULT_IOU_THRESHOLD,
    conf_thresh: float = DEFAULT_CONF_THRESHOLD,
    matcher: Matcher = match_detections,
) -> KpiReport:
    report = KpiReport()
    for o, c in _pair(orig, corr):
        due = c.due
        sde = False
        if not due:
            kept_orig = [d for d in o.detections if d.score >= conf_thresh]
            kept_corr = [d for d in c.detections if d.score >= conf_thresh]
            sde = detections_differ(kept_orig, kept_corr, iou_thresh, matcher)
        report.record(_first(c), sde, due)
    return report


_SUMMARY_SCHEMA = pa.schema(
    [("total", pa.int64()), ("sde", pa.int64()), ("due", pa.int64()), ("sde_rate", pa.float64()), ("due_rate", pa.float64())]
)


def _bucket_schema(key: str) -> pa.Schema:
    return pa.schema(
        [(key, pa.int64()), ("total", pa.int64()), ("sde", pa.int64()), ("due", pa.int64()), ("sde_rate", pa.float64())]
    )


def _bucket_table(key: str, buckets: Dict[int, BucketStats]) -> pa.Table:
    keys = sorted(buckets)
    return pa.table(
        {
            key: keys,
            "total": [buckets[k].total for k in keys],
            "sde": [buckets[k].sde for k in keys],
            "due": [buckets[k].due for k in keys],
            "sde_rate": [buckets[k].sde_rate for k in keys],
        },
        schema=_bucket_schema(key),
    )


def _report_json(report: KpiReport) -> Dict:
    def buckets(key: str, values: Dict[int, BucketStats]):
        return [
            {key: k, "total": v.total, "sde": v.sde, "due": v.due, "sde_rate": v.sde_rate}
            for k, v in sorted(values.items())
        ]

    return {
        "kpi": report.summary(),
        "per_bit": buckets("bit", report.per_bit),
        "per_layer": buckets("layer", report.per_layer),
    }


def write_report(report: KpiReport, out_dir: PathLike, fmt: str = "csv", prefix: str = "") -> List[Path]:
    """Writes the KPI summary plus the per-bit and per-layer tables used for plotting"""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path = out / f"{prefix}kpi.json"
        path.write_text(json.dumps(_report_json(report), indent=2) + "\n")
        return [path]
    if fmt != "csv":
        raise EvaluationError(f"unknown report format {fmt!r}, expected csv or json")

    summary = pa.table({name: [value] for name, value in report.summary().items()}, schema=_SUMMARY_SCHEMA)
    paths = [out / f"{prefix}kpi.csv", out / f"{prefix}per_bit.csv", out / f"{prefix}per_layer.csv"]
    pacsv.write_csv(summary, str(paths[0]))
    pacsv.write_csv(_bucket_table("bit", report.per_bit), str(paths[1]))
    pacsv.write_csv(_bucket_table("layer", report.per_layer), str(paths[2]))
    return paths


def _buckets_from(rows: List[Dict], key: str) -> Dict[int, BucketStats]:
    return {int(r[key]): BucketStats(int(r["total"]), int(r["sde"]), int(r["due"])) for r in rows}


def read_report(path: PathLike) -> KpiReport:
    """Reads kpi.json, or kpi.csv together with its per_bit.csv and per_layer.csv neighbours"""
    path = Path(path)
    try:
        if path.suffix == ".json":
            raw = json.loads(path.read_text())
            kpi = raw["kpi"]
            return KpiReport(
                int(kpi["total"]),
                int(kpi["sde"]),
                int(kpi["due"]),
                _buckets_from(raw["per_bit"], "bit"),
                _buckets_from(raw["per_layer"], "layer"),
            )
        prefix = path.name[: -len("kpi.csv")]
        kpi = pacsv.read_csv(str(path)).to_pylist()[0]
        per_bit = pacsv.read_csv(
            str(path.with_name(f"{prefix}per_bit.csv")),
            convert_options=pacsv.ConvertOptions(column_types=_bucket_schema("bit")),
        ).to_pylist()
        per_layer = pacsv.read_csv(
            str(path.with_name(f"{prefix}per_layer.csv")),
            convert_options=pacsv.ConvertOptions(column_types=_bucket_schema("layer")),
        ).to_pylist()
        return KpiReport(
            int(kpi["total"]),
            int(kpi["sde"]),
            int(kpi["due"]),
            _buckets_from(per_bit, "bit"),
            _buckets_from(per_layer, "layer"),
        )
    except (OSError, KeyError, IndexError, ValueError, pa.ArrowInvalid) as e:
        raise EvaluationError(f"cannot read KPI report {path}: {e}")


def evaluate_results(
    results_dir: PathLike,
    iou_thresh: float = DEFAULT_IOU_THRESHOLD,
    conf_thresh: float = DEFAULT_CONF_THRESHOLD,
) -> Dict[str, KpiReport]:
    """KPI reports of the faulty leg and, when present, the hardened leg against the fault-free one"""
    files = LegFiles.locate(results_dir)
    orig = files.read("orig")
    reports = {}
    for leg in ("corr", "resil"):
        if leg not in files.legs:
            continue
        rows = files.read(leg)
        if files.kind == "csv":
            reports[leg] = sde_due_classification(orig, rows)
        else:
            reports[leg] = sde_due_detection(orig, rows, iou_thresh, conf_thresh)
        logger.info(
            f"{leg}: {reports[leg].total} inferences, SDE {reports[leg].sde_rate:.4f}, DUE {reports[leg].due_rate:.4f}"
        )
    return reports


def write_evaluation(
    results_dir: PathLike,
    reports: Dict[str, KpiReport],
    fmt: str = "csv",
) -> List[Path]:
    """Writes one report per evaluated leg; classification runs also get the combined leg table"""
    files = LegFiles.locate(results_dir)
    paths = []
    for leg, report in reports.items():
        paths += write_report(report, files.root, fmt, prefix="" if leg == "corr" else f"{leg}_")
    if files.kind == "csv":
        legs = {leg: files.read(leg) for leg in files.legs}
        combined = files.root / "combined.csv"
        write_combined_csv(legs, combined)
        paths.append(combined)
    return paths
