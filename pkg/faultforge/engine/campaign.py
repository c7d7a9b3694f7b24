# Copyright (c), CommunityLogiq Software

"""
Campaign orchestration: the fault-free, faulty and (optionally) hardened legs
run in lockstep on the same input batch; the coordinator consumes the fault
iterator and writes every output in a fixed order, whatever the number of
worker threads.

Output layout:

    meta/     scenario.yml, dataset.json, model.txt (+ ground_truth.json, sweep.json)
    faults/   campaign.alff, campaign.alfr
    results/  orig, corr, resil as .csv (classification) or .json (detection)
"""

import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from faultforge.errors import (
    FaultForgeError,
    ScenarioMismatchError,
    ScenarioStateError,
    ScenarioValidationError,
    ValidationError,
)
from faultforge.engine.binfmt import PathLike
from faultforge.engine.dataset import (
    DatasetHandle,
    Sample,
    batches,
    export_ground_truth_json,
    save_descriptor,
)
from faultforge.engine.evaluation import KpiReport, sde_due_classification, sde_due_detection, top_k
from faultforge.engine.fault_gen import (
    FaultMatrix,
    NeuronFault,
    generate_fault_matrix,
    load_fault_matrix,
    save_fault_matrix,
)
from faultforge.engine.injector import AppliedFault, CorruptedModel, FaultIterator, make_fault_iterator
from faultforge.engine.model_registry import Detection, Model, Task, decode_detections, weights_digest
from faultforge.engine.monitors import Monitor, NanInfMonitor, RangeMonitor
from faultforge.engine.results import (
    ClassificationRow,
    DetectionRow,
    FaultLocation,
    read_classification_csv,
    read_detection_json,
    write_leg,
)
from faultforge.engine.runset import RunsetRecord, load_runset, save_runset
from faultforge.engine.scenario import (
    FaultPersistence,
    InjectionPolicy,
    InjectionTarget,
    RndMode,
    ScenarioConfig,
    parse_scenario,
    save_scenario,
    scenario_hash,
    validate_scenario,
)

LEG_ORIG, LEG_CORR, LEG_RESIL = "orig", "corr", "resil"


@dataclass(frozen=True)
class RangeProfile:
    bounds: Dict[int, Tuple[float, float]]

    def __post_init__(self):
        for layer, (lo, hi) in self.bounds.items():
            if not lo <= hi:
                raise ValidationError(f"range profile of layer {layer} has min {lo} above max {hi}")


def profile_ranges(model: Model, ds: DatasetHandle, batch_size: int = 16) -> RangeProfile:
    """Exact min/max of every injectable layer output over a fault-free pass"""
    monitor = RangeMonitor()
    for batch in batches(ds, batch_size):
        model.forward(batch.images, monitors=(monitor,))
    logger.debug(f"Profiled {model.num_injectable} layers of {model.name} over {len(ds)} images")
    return RangeProfile(dict(sorted(monitor.bounds.items())))


def harden_with_clipper(model: Model, profile: RangeProfile) -> Model:
    return model.with_clipping(profile.bounds, name=f"{model.name}+clipper")


@dataclass
class WorkItem:
    epoch: int
    batch_index: int
    samples: Tuple[Sample, ...]
    corrupted: CorruptedModel


@dataclass
class LegOutput:
    out: np.ndarray
    nan_inf: NanInfMonitor
    applied: List[AppliedFault] = field(default_factory=list)


@dataclass
class ItemOutput:
    item: WorkItem
    legs: Dict[str, LegOutput]


@dataclass
class CampaignResult:
    out_dir: Optional[Path]
    cfg: ScenarioConfig
    faults: FaultMatrix
    records: List[RunsetRecord]
    rows: Dict[str, list]
    task: Task

    def kpi(self, leg: str = LEG_CORR) -> KpiReport:
        if self.task == Task.DETECTION:
            return sde_due_detection(self.rows[LEG_ORIG], self.rows[leg])
        return sde_due_classification(self.rows[LEG_ORIG], self.rows[leg])


def _work_items(it: FaultIterator, ds: DatasetHandle, cfg: ScenarioConfig) -> Iterable[WorkItem]:
    """Pairs every forward pass with its corrupted model, consuming the iterator in column order"""
    for epoch in range(cfg.num_runs):
        logger.debug(f"Epoch {epoch}")
        epoch_model = next(it) if cfg.inj_policy == InjectionPolicy.PER_EPOCH else None
        for batch in batches(ds, cfg.batch_size):
            match cfg.inj_policy:
                case InjectionPolicy.PER_EPOCH:
                    assert epoch_model is not None
                    yield WorkItem(epoch, batch.index, batch.samples, epoch_model)
                case InjectionPolicy.PER_BATCH:
                    yield WorkItem(epoch, batch.index, batch.samples, next(it))
                case _ if cfg.inj_target == InjectionTarget.WEIGHTS:
                    # weights are shared by the whole batch: one image per forward
                    for sample in batch.samples:
                        yield WorkItem(epoch, batch.index, (sample,), next(it))
                case _:
                    group = [next(it) for _ in batch.samples]
                    if len(group) == 1 or group[-1].persistence == FaultPersistence.PERMANENT:
                        # the last group of an epoch prefix already carries the earlier ones
                        yield WorkItem(epoch, batch.index, batch.samples, group[-1])
                    else:
                        yield WorkItem(epoch, batch.index, batch.samples, group[0].combine(*group[1:]))


def _run_leg(model_or_corrupted: Union[Model, CorruptedModel], images: np.ndarray, monitors: Sequence[Monitor]):
    nan_inf = NanInfMonitor(images.shape[0])
    hooks = (nan_inf, *monitors)
    if isinstance(model_or_corrupted, CorruptedModel):
        out, applied = model_or_corrupted.forward(images, monitors=hooks)
    else:
        out, applied = model_or_corrupted.forward(images, monitors=hooks), []
    nan_inf.observe_output(out)
    return LegOutput(out, nan_inf, applied)


def _execute(
    item: WorkItem,
    model: Model,
    hardened: Optional[Model],
    monitors: Dict[str, Sequence[Monitor]],
) -> ItemOutput:
    images = np.stack([s.image for s in item.samples]).astype(np.float32, copy=False)
    legs = {
        LEG_ORIG: _run_leg(model, images, monitors.get(LEG_ORIG, ())),
        LEG_CORR: _run_leg(item.corrupted, images, monitors.get(LEG_CORR, ())),
    }
    if hardened is not None:
        legs[LEG_RESIL] = _run_leg(item.corrupted.on(hardened), images, monitors.get(LEG_RESIL, ()))
    return ItemOutput(item, legs)


def _hits(applied: Sequence[AppliedFault], slot: int) -> List[AppliedFault]:
    return sorted((a for a in applied if a.slot is None or a.slot == slot), key=lambda a: a.column)


def _row(model: Model, item: WorkItem, slot: int, leg: str, output: LegOutput, rnd_mode: RndMode):
    sample = item.samples[slot]
    nan, inf = output.nan_inf.flags(slot)
    faults = tuple(FaultLocation.of(a.fault, rnd_mode, a.flip) for a in _hits(output.applied, slot))
    if model.task == Task.DETECTION:
        detections = tuple(decode_detections(output.out[slot], model))
        return DetectionRow(item.epoch, item.batch_index, sample.image_id, detections, nan, inf, faults, leg)
    ranked = top_k(output.out[slot])
    return ClassificationRow(
        item.epoch,
        item.batch_index,
        sample.image_id,
        sample.label if sample.label is not None else -1,
        tuple(c for c, _ in ranked),
        tuple(p for _, p in ranked),
        nan,
        inf,
        faults,
        leg,
    )


def _model_text(model: Model) -> str:
    return f"{model.name}\n{weights_digest(model)}\n"


def _resolve_faults(model: Model, cfg: ScenarioConfig, faults: Optional[FaultMatrix]) -> FaultMatrix:
    if faults is not None:
        return faults
    if cfg.read_fault_file:
        logger.info(f"Reusing faults from {cfg.read_fault_file}")
        return load_fault_matrix(cfg.read_fault_file)
    return generate_fault_matrix(model, cfg)


def run_campaign(
    model: Model,
    ds: DatasetHandle,
    cfg: ScenarioConfig,
    faults: Optional[FaultMatrix] = None,
    with_mitigation: bool = False,
    out_dir: Optional[PathLike] = None,
    threads: int = 1,
    monitors: Optional[Dict[str, Sequence[Monitor]]] = None,
) -> CampaignResult:
    """Runs one campaign; writes the meta, fault and result sets when out_dir is given"""
    if len(ds) < cfg.dataset_size:
        raise ScenarioValidationError(
            "dataset_size", f"scenario needs {cfg.dataset_size} images, data set {ds.name} holds {len(ds)}"
        )
    if len(ds) > cfg.dataset_size:
        ds = ds.head(cfg.dataset_size)
    if threads < 1:
        raise ValidationError(f"thread count must be positive, got {threads}")

    faults = _resolve_faults(model, cfg, faults)
    it = make_fault_iterator(model, faults, cfg)
    digest_before = weights_digest(model)

    hardened = None
    if with_mitigation:
        hardened = harden_with_clipper(model, profile_ranges(model, ds, cfg.batch_size))

    logger.info(
        f"Campaign on {model.name}: {cfg.dataset_size} images x {cfg.num_runs} runs, "
        f"{cfg.max_faults_per_image} {cfg.inj_target.value} faults per {cfg.inj_policy.value.replace('per_', '')}, "
        f"{threads} thread(s){', with clipper leg' if hardened else ''}"
    )

    items = list(_work_items(it, ds, cfg))
    monitors = monitors or {}
    if threads == 1:
        outputs = [_execute(item, model, hardened, monitors) for item in items]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outputs = list(pool.map(lambda item: _execute(item, model, hardened, monitors), items))

    legs = [LEG_ORIG, LEG_CORR] + ([LEG_RESIL] if hardened is not None else [])
    rows: Dict[str, list] = {leg: [] for leg in legs}
    records: List[RunsetRecord] = []
    for output in outputs:
        item = output.item
        for slot, sample in enumerate(item.samples):
            for leg in legs:
                rows[leg].append(_row(model, item, slot, leg, output.legs[leg], cfg.rnd_mode))
            nan, inf = output.legs[LEG_CORR].nan_inf.flags(slot)
            for applied in _hits(output.legs[LEG_CORR].applied, slot):
                records.append(
                    RunsetRecord(
                        item.epoch,
                        item.batch_index,
                        sample.image_id,
                        applied.column,
                        applied.fault,
                        applied.original,
                        applied.corrupted,
                        applied.flip,
                        nan,
                        inf,
                    )
                )
    records.sort(key=RunsetRecord.sort_key)

    if weights_digest(model) != digest_before:
        raise FaultForgeError(f"weights of {model.name} changed during the campaign")

    result = CampaignResult(Path(out_dir) if out_dir is not None else None, cfg, faults, records, rows, model.task)
    if out_dir is not None:
        _write_outputs(result, model, ds)
    logger.info(f"Campaign done: {len(records)} faults applied over {len(rows[LEG_ORIG])} inferences")
    return result


def _write_outputs(result: CampaignResult, model: Model, ds: DatasetHandle):
    assert result.out_dir is not None
    meta, fault_dir, results = result.out_dir / "meta", result.out_dir / "faults", result.out_dir / "results"
    meta.mkdir(parents=True, exist_ok=True)
    save_scenario(result.cfg, meta / "scenario.yml")
    save_descriptor(ds, meta / "dataset.json")
    (meta / "model.txt").write_text(_model_text(model))
    if model.task == Task.DETECTION:
        export_ground_truth_json(ds, meta / "ground_truth.json")

    save_fault_matrix(result.faults, fault_dir / "campaign.alff")
    save_runset(result.records, fault_dir / "campaign.alfr")

    detection = model.task == Task.DETECTION
    for leg, leg_rows in result.rows.items():
        path = write_leg(leg_rows, results / leg, detection)
        logger.debug(f"Wrote {len(leg_rows)} {leg} rows to {path}")
    logger.info(f"Campaign outputs written to {result.out_dir}")


class Session:
    """A model, a data set and the scenario currently driving them.

    The scenario may only change between campaigns; set_scenario regenerates
    the fault matrix, or reloads it when the scenario names a read_fault_file.
    """

    def __init__(self, model: Model, ds: DatasetHandle, cfg: ScenarioConfig):
        self.model = model
        self.dataset = ds
        self._cfg = cfg
        self._busy = False
        self._monitors: Dict[str, List[Monitor]] = {}
        self._faults = _resolve_faults(model, cfg, None)

    @property
    def faults(self) -> FaultMatrix:
        return self._faults

    def get_scenario(self) -> ScenarioConfig:
        return self._cfg

    def set_scenario(self, cfg: ScenarioConfig):
        if self._busy:
            raise ScenarioStateError("the scenario can only change between campaigns, not during one")
        validate_scenario(cfg)
        faults = _resolve_faults(self.model, cfg, None)
        self._cfg, self._faults = cfg, faults

    def attach_monitor(self, callback: Monitor, leg: str = LEG_CORR):
        if leg not in (LEG_ORIG, LEG_CORR, LEG_RESIL):
            raise ValidationError(f"unknown leg {leg!r}")
        self._monitors.setdefault(leg, []).append(callback)

    def run(self, out_dir: Optional[PathLike] = None, with_mitigation: bool = False, threads: int = 1) -> CampaignResult:
        self._busy = True
        try:
            return run_campaign(
                self.model,
                self.dataset,
                self._cfg,
                self._faults,
                with_mitigation,
                out_dir,
                threads,
                self._monitors,
            )
        finally:
            self._busy = False


def get_scenario(session: Session) -> ScenarioConfig:
    return session.get_scenario()


def set_scenario(session: Session, cfg: ScenarioConfig):
    session.set_scenario(cfg)


def attach_monitor(session: Session, callback: Monitor, leg: str = LEG_CORR):
    session.attach_monitor(callback, leg)


class SweepAxis(str, Enum):
    LAYER = "layer"
    BIT = "bit"
    FAULTS_PER_IMAGE = "faults-per-image"
    TARGET = "target"


def _parse_layer_value(value: Union[str, int, Tuple[int, int]]) -> Tuple[int, int]:
    if isinstance(value, tuple):
        return value
    if isinstance(value, int):
        return (value, value)
    lo, sep, hi = str(value).partition("-")
    try:
        return (int(lo), int(hi)) if sep else (int(lo), int(lo))
    except ValueError:
        raise ScenarioValidationError("layer_range", f"invalid layer or layer group {value!r}")


def swept_scenario(cfg: ScenarioConfig, axis: SweepAxis, value) -> ScenarioConfig:
    try:
        match axis:
            case SweepAxis.LAYER:
                return cfg.replace(layer_range=_parse_layer_value(value))
            case SweepAxis.BIT:
                bit = int(value)
                return cfg.replace(rnd_mode=RndMode.BIT_FLIP, rnd_bit_range=(bit, bit))
            case SweepAxis.FAULTS_PER_IMAGE:
                return cfg.replace(max_faults_per_image=int(value))
            case SweepAxis.TARGET:
                return cfg.replace(inj_target=InjectionTarget(value))
    except ValueError as e:
        raise ScenarioValidationError(axis.value, f"invalid sweep value {value!r}: {e}")
    raise ScenarioValidationError("axis", f"unknown sweep axis {axis}")


def sweep(
    session: Session,
    axis: SweepAxis,
    values: Sequence,
    out_root: PathLike,
    with_mitigation: bool = False,
    threads: int = 1,
) -> List[Path]:
    """One full campaign per value; the session's scenario is restored afterwards"""
    axis = SweepAxis(axis)
    original = session.get_scenario()
    dirs = []
    try:
        for value in values:
            session.set_scenario(swept_scenario(original, axis, value))
            out_dir = Path(out_root) / f"{axis.value}-{value}"
            logger.info(f"Sweep {axis.value}={value} -> {out_dir}")
            session.run(out_dir, with_mitigation, threads)
            (out_dir / "meta" / "sweep.json").write_text(
                json.dumps({"axis": axis.value, "value": str(value)}, indent=2) + "\n"
            )
            dirs.append(out_dir)
    finally:
        session.set_scenario(original)
    return dirs


@dataclass(frozen=True)
class ReplayMismatch:
    epoch: int
    image_id: int
    column: int
    field: str
    recorded: str
    replayed: str


@dataclass
class ReplayReport:
    inferences: int = 0
    faults: int = 0
    mismatches: List[ReplayMismatch] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches


def _f32_bits(value) -> int:
    return struct.unpack("<I", struct.pack("<f", float(value)))[0]


def _f64_bits(value: float) -> int:
    return struct.unpack("<Q", struct.pack("<d", value))[0]


def _same_float(a: float, b: float) -> bool:
    # NaN payloads do not survive json
    return (np.isnan(a) and np.isnan(b)) or _f64_bits(a) == _f64_bits(b)


def _same_detections(recorded: Sequence[Detection], replayed: Sequence[Detection]) -> bool:
    if len(recorded) != len(replayed):
        return False
    for r, p in zip(recorded, replayed):
        if r.cls != p.cls or not all(_same_float(a, b) for a, b in zip(r[:5], p[:5])):
            return False
    return True


def _read_final_outputs(
    fault_file: Path, model: Model
) -> Dict[Tuple[int, int], Union[ClassificationRow, DetectionRow]]:
    """The faulty leg's recorded outputs next to the fault file, keyed by (epoch, image_id)"""
    results = fault_file.resolve().parent.parent / "results"
    if model.task == Task.DETECTION:
        path, reader = results / "corr.json", read_detection_json
    else:
        path, reader = results / "corr.csv", read_classification_csv
    if not path.exists():
        logger.warning(f"No {path.name} next to {fault_file}, final outputs are not compared")
        return {}
    return {row.key(): row for row in reader(path)}


def _read_meta(fault_file: Path) -> Tuple[Optional[str], Optional[ScenarioConfig]]:
    meta = fault_file.resolve().parent.parent / "meta"
    model_text = (meta / "model.txt").read_text() if (meta / "model.txt").exists() else None
    cfg = parse_scenario(meta / "scenario.yml") if (meta / "scenario.yml").exists() else None
    return model_text, cfg


def replay(
    fault_file: PathLike,
    runset_file: PathLike,
    model: Model,
    ds: DatasetHandle,
    rnd_mode: Optional[RndMode] = None,
) -> ReplayReport:
    """Re-executes every recorded injection one image at a time and compares"""
    fault_file = Path(fault_file)
    matrix = load_fault_matrix(fault_file)
    records = load_runset(runset_file)
    model_text, cfg = _read_meta(fault_file)

    if model_text is not None and model_text != _model_text(model):
        recorded = model_text.splitlines()[0] if model_text else "?"
        raise ScenarioMismatchError(f"campaign was run on {recorded}, refusing to replay on {model.name}")
    if cfg is not None:
        if scenario_hash(cfg) != matrix.scenario_hash:
            raise ScenarioMismatchError(f"{fault_file} does not belong to the scenario stored next to it")
        rnd_mode = rnd_mode or cfg.rnd_mode
    if rnd_mode is None:
        raise ValidationError("no scenario next to the fault file; the corruption mode must be given")

    corr_rows = _read_final_outputs(fault_file, model)

    report = ReplayReport()
    grouped: Dict[Tuple[int, int, int], List[RunsetRecord]] = {}
    for record in records:
        grouped.setdefault(record.inference_key(), []).append(record)

    def mismatch(record: RunsetRecord, name: str, recorded, replayed):
        report.mismatches.append(
            ReplayMismatch(record.epoch, record.image_id, record.fault_column, name, str(recorded), str(replayed))
        )

    for (epoch, _, image_id), group in sorted(grouped.items()):
        group.sort(key=lambda r: r.fault_column)
        report.inferences += 1
        sample = ds.by_id(image_id)
        faults = []
        for record in group:
            if record.fault_column >= len(matrix) or matrix.columns[record.fault_column] != record.location:
                mismatch(record, "location", record.location, "not in fault matrix")
            location = record.location
            if isinstance(location, NeuronFault):
                location = NeuronFault(0, *location.coords()[1:], value=location.value)
            faults.append((record.fault_column, location))

        corrupted = CorruptedModel(model, faults, matrix.target, rnd_mode)
        out = _run_leg(corrupted, sample.image[np.newaxis], ())
        applied = {a.column: a for a in out.applied}
        nan, inf = out.nan_inf.flags(0)
        for record in group:
            report.faults += 1
            a = applied.get(record.fault_column)
            if a is None:
                mismatch(record, "applied", "yes", "no")
                continue
            if _f32_bits(a.original) != _f32_bits(record.original_value):
                mismatch(record, "original_value", record.original_value, a.original)
            if _f32_bits(a.corrupted) != _f32_bits(record.corrupted_value):
                mismatch(record, "corrupted_value", record.corrupted_value, a.corrupted)
            if a.flip != record.flip_direction:
                mismatch(record, "flip_direction", record.flip_direction.name, a.flip.name)
            if (nan, inf) != (record.nan_detected, record.inf_detected):
                mismatch(record, "nan_inf", (record.nan_detected, record.inf_detected), (nan, inf))

        row = corr_rows.get((epoch, image_id))
        if isinstance(row, ClassificationRow):
            replayed = tuple(c for c, _ in top_k(out.out[0]))
            if replayed != row.top:
                mismatch(group[0], "top5", row.top, replayed)
        elif isinstance(row, DetectionRow):
            detections = tuple(decode_detections(out.out[0], model))
            if not _same_detections(row.detections, detections):
                mismatch(group[0], "detections", row.detections, detections)

    level = "INFO" if report.ok else "WARNING"
    logger.log(
        level,
        f"Replayed {report.faults} faults over {report.inferences} inferences: {len(report.mismatches)} mismatches",
    )
    return report
