# Copyright (c), CommunityLogiq Software

"""
Per-leg result files: CSV for classification, JSON for detection.

A leg is one of "orig" (fault-free), "corr" (faulty) and "resil" (hardened
and faulty). Fault location columns are strings; when several faults hit the
same inference their values are joined with ';'.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pyarrow as pa
import pyarrow.csv as pacsv
from loguru import logger

from faultforge.errors import EvaluationError
from faultforge.engine.binfmt import PathLike
from faultforge.engine.fault_gen import FaultRecord, NeuronFault
from faultforge.engine.injector import FlipDirection
from faultforge.engine.model_registry import Detection
from faultforge.engine.scenario import RndMode

LEGS = ("orig", "corr", "resil")
TOP_K = 5

_FAULT_FIELDS = ("layer", "channel", "in_channel", "depth", "height", "width", "bit", "value")


@dataclass(frozen=True)
class FaultLocation:
    """Where a fault hit, flattened for the result tables.

    For weight faults channel is the output channel and in_channel the input
    channel; neuron faults leave in_channel at -1. bit is -1 unless the
    campaign flips bits.
    """

    layer: int
    channel: int
    in_channel: int
    depth: int
    height: int
    width: int
    bit: int
    value: float
    flip: FlipDirection = FlipDirection.NOT_APPLICABLE

    @staticmethod
    def of(fault: FaultRecord, rnd_mode: RndMode, flip: FlipDirection) -> "FaultLocation":
        bit = int(fault.value) if rnd_mode == RndMode.BIT_FLIP else -1
        if isinstance(fault, NeuronFault):
            return FaultLocation(
                fault.layer, fault.channel, -1, fault.depth, fault.height, fault.width, bit, fault.value, flip
            )
        return FaultLocation(
            fault.layer, fault.out_ch, fault.in_ch, fault.k_depth, fault.k_h, fault.k_w, bit, fault.value, flip
        )


@dataclass(frozen=True)
class ClassificationRow:
    epoch: int
    batch_index: int
    image_id: int
    gt_label: int
    top: Tuple[int, ...]
    probs: Tuple[float, ...]
    nan: bool
    inf: bool
    faults: Tuple[FaultLocation, ...] = ()
    leg: str = "corr"

    @property
    def top1(self) -> int:
        return self.top[0]

    @property
    def due(self) -> bool:
        return self.nan or self.inf

    def key(self) -> Tuple[int, int]:
        return (self.epoch, self.image_id)


@dataclass(frozen=True)
class DetectionRow:
    epoch: int
    batch_index: int
    image_id: int
    detections: Tuple[Detection, ...]
    nan: bool
    inf: bool
    faults: Tuple[FaultLocation, ...] = ()
    leg: str = "corr"

    @property
    def due(self) -> bool:
        return self.nan or self.inf

    def key(self) -> Tuple[int, int]:
        return (self.epoch, self.image_id)


def _join(values: Sequence[Any]) -> str:
    return ";".join(str(v) for v in values)


def _split(text: str, cast) -> List[Any]:
    return [cast(v) for v in text.split(";")] if text else []


def _classification_columns() -> List[str]:
    columns = ["epoch", "batch_index", "image_id", "gt_label"]
    columns += [f"top{i}" for i in range(1, TOP_K + 1)]
    columns += [f"p{i}" for i in range(1, TOP_K + 1)]
    columns += ["nan", "inf"]
    columns += [f"fault_{name}" for name in _FAULT_FIELDS]
    columns += ["flip_dir"]
    return columns


CLASSIFICATION_COLUMNS = tuple(_classification_columns())


def _column_types() -> Dict[str, pa.DataType]:
    types: Dict[str, pa.DataType] = {}
    for name in CLASSIFICATION_COLUMNS:
        if name.startswith("fault_") or name == "flip_dir":
            types[name] = pa.string()
        elif name.startswith("p") and name[1:].isdigit():
            types[name] = pa.float64()
        elif name in ("nan", "inf"):
            types[name] = pa.bool_()
        else:
            types[name] = pa.int64()
    return types


def classification_table(rows: Sequence[ClassificationRow]) -> pa.Table:
    data: Dict[str, List[Any]] = {name: [] for name in CLASSIFICATION_COLUMNS}
    for row in rows:
        data["epoch"].append(row.epoch)
        data["batch_index"].append(row.batch_index)
        data["image_id"].append(row.image_id)
        data["gt_label"].append(row.gt_label)
        for i in range(TOP_K):
            data[f"top{i + 1}"].append(row.top[i])
            data[f"p{i + 1}"].append(float(row.probs[i]))
        data["nan"].append(row.nan)
        data["inf"].append(row.inf)
        for name in _FAULT_FIELDS:
            data[f"fault_{name}"].append(_join([getattr(f, name) for f in row.faults]))
        data["flip_dir"].append(_join([int(f.flip) for f in row.faults]))

    types = _column_types()
    return pa.table({name: pa.array(values, type=types[name]) for name, values in data.items()})


def write_classification_csv(rows: Sequence[ClassificationRow], path: PathLike):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pacsv.write_csv(classification_table(rows), str(path))


def _float_or_nan(value: Optional[float]) -> float:
    return math.nan if value is None else float(value)


def read_classification_csv(path: PathLike, leg: str = "corr") -> List[ClassificationRow]:
    try:
        table = pacsv.read_csv(str(path), convert_options=pacsv.ConvertOptions(column_types=_column_types()))
    except (pa.ArrowInvalid, OSError) as e:
        raise EvaluationError(f"cannot read result table {path}: {e}")
    missing = [name for name in CLASSIFICATION_COLUMNS if name not in table.column_names]
    if missing:
        raise EvaluationError(f"result table {path} lacks columns {', '.join(missing)}")

    rows = []
    for raw in table.to_pylist():
        faults = []
        parts = {name: _split(raw[f"fault_{name}"] or "", float) for name in _FAULT_FIELDS}
        flips = _split(raw["flip_dir"] or "", int)
        for i in range(len(parts["layer"])):
            faults.append(
                FaultLocation(
                    int(parts["layer"][i]),
                    int(parts["channel"][i]),
                    int(parts["in_channel"][i]),
                    int(parts["depth"][i]),
                    int(parts["height"][i]),
                    int(parts["width"][i]),
                    int(parts["bit"][i]),
                    parts["value"][i],
                    FlipDirection(flips[i]),
                )
            )
        rows.append(
            ClassificationRow(
                epoch=raw["epoch"],
                batch_index=raw["batch_index"],
                image_id=raw["image_id"],
                gt_label=raw["gt_label"],
                top=tuple(raw[f"top{i}"] for i in range(1, TOP_K + 1)),
                probs=tuple(_float_or_nan(raw[f"p{i}"]) for i in range(1, TOP_K + 1)),
                nan=bool(raw["nan"]),
                inf=bool(raw["inf"]),
                faults=tuple(faults),
                leg=leg,
            )
        )
    return rows


def _fault_json(fault: FaultLocation) -> Dict[str, Any]:
    body: Dict[str, Any] = {name: getattr(fault, name) for name in _FAULT_FIELDS}
    body["flip_dir"] = int(fault.flip)
    return body


def detection_document(rows: Sequence[DetectionRow]) -> Dict[str, Any]:
    return {
        "images": [
            {
                "epoch": row.epoch,
                "batch_index": row.batch_index,
                "image_id": row.image_id,
                "nan": row.nan,
                "inf": row.inf,
                "detections": [
                    {"class": d.cls, "score": d.score, "bbox": [d.x1, d.y1, d.x2, d.y2]} for d in row.detections
                ],
                "faults": [_fault_json(f) for f in row.faults],
            }
            for row in rows
        ]
    }


def write_detection_json(rows: Sequence[DetectionRow], path: PathLike):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(detection_document(rows), indent=2) + "\n")


def read_detection_json(path: PathLike, leg: str = "corr") -> List[DetectionRow]:
    try:
        document = json.loads(Path(path).read_text())
        rows = []
        for image in document["images"]:
            detections = tuple(
                Detection(*(float(v) for v in d["bbox"]), float(d["score"]), int(d["class"]))
                for d in image["detections"]
            )
            faults = tuple(
                FaultLocation(
                    *(int(f[name]) for name in _FAULT_FIELDS[:-1]), float(f["value"]), FlipDirection(f["flip_dir"])
                )
                for f in image["faults"]
            )
            rows.append(
                DetectionRow(
                    image["epoch"], image["batch_index"], image["image_id"], detections,
                    bool(image["nan"]), bool(image["inf"]), faults, leg,
                )
            )
        return rows
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise EvaluationError(f"cannot read detection results {path}: {e}")


@dataclass
class LegFiles:
    """The result files of one campaign directory"""

    root: Path
    kind: str = "csv"
    legs: Dict[str, Path] = field(default_factory=dict)

    @staticmethod
    def locate(results_dir: PathLike) -> "LegFiles":
        root = Path(results_dir)
        if (root / "results").is_dir():
            root = root / "results"
        for kind in ("csv", "json"):
            legs = {leg: root / f"{leg}.{kind}" for leg in LEGS if (root / f"{leg}.{kind}").exists()}
            if "orig" in legs and "corr" in legs:
                return LegFiles(root, kind, legs)
        raise EvaluationError(f"no orig/corr result files under {results_dir}")

    def read(self, leg: str):
        path = self.legs[leg]
        logger.debug(f"Reading {leg} results from {path}")
        if self.kind == "csv":
            return read_classification_csv(path, leg)
        return read_detection_json(path, leg)


def write_leg(rows, path_stem: Path, detection: bool) -> Path:
    if detection:
        path = path_stem.with_suffix(".json")
        write_detection_json(rows, path)
    else:
        path = path_stem.with_suffix(".csv")
        write_classification_csv(rows, path)
    return path


def combined_table(legs: Dict[str, Sequence[ClassificationRow]]) -> pa.Table:
    """orig_*, corr_* and resil_* side by side, keyed by epoch and image id"""
    base = list(legs["orig"])
    by_leg = {leg: {row.key(): row for row in rows} for leg, rows in legs.items()}
    for leg, rows in by_leg.items():
        if set(rows) != {row.key() for row in base}:
            raise EvaluationError(f"leg {leg} covers different images than orig")

    data: Dict[str, List[Any]] = {"epoch": [], "image_id": [], "gt_label": []}
    for leg in legs:
        for i in range(1, TOP_K + 1):
            data[f"{leg}_top{i}"] = []
        for i in range(1, TOP_K + 1):
            data[f"{leg}_p{i}"] = []
    for name in ("layer", "channel", "height", "width", "bit"):
        data[f"fault_{name}"] = []
    data["flip_dir"], data["nan"], data["inf"] = [], [], []

    for row in base:
        data["epoch"].append(row.epoch)
        data["image_id"].append(row.image_id)
        data["gt_label"].append(row.gt_label)
        for leg in legs:
            other = by_leg[leg][row.key()]
            for i in range(TOP_K):
                data[f"{leg}_top{i + 1}"].append(other.top[i])
                data[f"{leg}_p{i + 1}"].append(float(other.probs[i]))
        corr = by_leg["corr"][row.key()]
        for name in ("layer", "channel", "height", "width", "bit"):
            data[f"fault_{name}"].append(_join([getattr(f, name) for f in corr.faults]))
        data["flip_dir"].append(_join([int(f.flip) for f in corr.faults]))
        data["nan"].append(corr.nan)
        data["inf"].append(corr.inf)
    return pa.table(data)


def write_combined_csv(legs: Dict[str, Sequence[ClassificationRow]], path: PathLike):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pacsv.write_csv(combined_table(legs), str(path))
