# Copyright (c), CommunityLogiq Software

"""
Seeded synthetic data sets with enough per-sample metadata (id, virtual path,
size) to re-run any single inference of a campaign, plus COCO-style ground
truth export.

Labels and boxes come from the fault-free model itself, so corruption is
measured against fault-free behaviour without a training loop.
"""

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from faultforge.errors import ConfigurationError, ValidationError
from faultforge.engine.binfmt import PathLike
from faultforge.engine.model_registry import Model, Task, decode_detections
from faultforge.engine.prng import XorShift64Star
from faultforge.engine.tensor_core import Tensor

DEFAULT_DATA_SEED = 0x5EED_0000_DA7A
DETECTION_SCORE_THRESHOLD = 0.25

# (x1, y1, x2, y2, class)
Box = Tuple[float, float, float, float, int]


@dataclass(frozen=True)
class Sample:
    image: Tensor
    image_id: int
    path: str
    height: int
    width: int
    label: Optional[int] = None
    boxes: Optional[Tuple[Box, ...]] = None


@dataclass(frozen=True)
class Batch:
    index: int
    samples: Tuple[Sample, ...]

    @property
    def images(self) -> Tensor:
        return np.stack([s.image for s in self.samples]).astype(np.float32, copy=False)

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class DatasetDescriptor:
    """Everything needed to rebuild a synthetic data set bit for bit"""

    name: str
    task: Task
    count: int
    shape: Tuple[int, ...]
    num_classes: int
    seed: int
    label_model: Optional[str] = None

    def to_json(self) -> str:
        body = {
            "name": self.name,
            "task": self.task.value,
            "count": self.count,
            "shape": list(self.shape),
            "num_classes": self.num_classes,
            "seed": self.seed,
            "label_model": self.label_model,
        }
        return json.dumps(body, indent=2) + "\n"

    @staticmethod
    def from_json(text: str) -> "DatasetDescriptor":
        try:
            raw = json.loads(text)
            return DatasetDescriptor(
                name=raw["name"],
                task=Task(raw["task"]),
                count=int(raw["count"]),
                shape=tuple(int(d) for d in raw["shape"]),
                num_classes=int(raw["num_classes"]),
                seed=int(raw["seed"]),
                label_model=raw.get("label_model"),
            )
        except (KeyError, ValueError, TypeError) as e:
            raise ValidationError(f"invalid data set descriptor: {e}")


class DatasetHandle:
    def __init__(self, name: str, samples: Sequence[Sample], descriptor: DatasetDescriptor, shuffle: bool = False):
        self.name = name
        self.samples: Tuple[Sample, ...] = tuple(samples)
        self.descriptor = descriptor
        self.shuffle = shuffle
        self._by_id = {s.image_id: s for s in self.samples}
        if len(self._by_id) != len(self.samples):
            raise ConfigurationError(f"data set {name}: duplicate image ids")

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[Sample]:
        return iter(self.samples)

    def __getitem__(self, index: int) -> Sample:
        return self.samples[index]

    def by_id(self, image_id: int) -> Sample:
        try:
            return self._by_id[image_id]
        except KeyError:
            raise ValidationError(f"data set {self.name} has no image {image_id}")

    @property
    def task(self) -> Task:
        return self.descriptor.task

    def head(self, count: int) -> "DatasetHandle":
        if count > len(self.samples):
            raise ValidationError(f"data set {self.name} holds {len(self.samples)} images, {count} requested")
        descriptor = DatasetDescriptor(
            self.descriptor.name,
            self.descriptor.task,
            count,
            self.descriptor.shape,
            self.descriptor.num_classes,
            self.descriptor.seed,
            self.descriptor.label_model,
        )
        return DatasetHandle(self.name, self.samples[:count], descriptor, self.shuffle)


def _images(count: int, shape: Tuple[int, ...], seed: int) -> List[Tensor]:
    rng = XorShift64Star(seed)
    size = int(np.prod(shape))
    images = []
    for _ in range(count):
        # top 24 bits of each draw give an exact float32 in [0, 1)
        raw = np.array([rng.next_u64() >> 40 for _ in range(size)], dtype=np.float32)
        images.append((raw * np.float32(1.0 / (1 << 24))).reshape(shape))
    return images


def _samples(name: str, images: Sequence[Tensor]) -> List[Sample]:
    return [
        Sample(
            image=image,
            image_id=image_id,
            path=f"synthetic://{name}/{image_id:06d}",
            height=int(image.shape[-2]),
            width=int(image.shape[-1]),
        )
        for image_id, image in enumerate(images)
    ]


def synthetic_classification_dataset(
    count: int,
    channels: int,
    h: int,
    w: int,
    num_classes: int,
    seed: int = DEFAULT_DATA_SEED,
    model: Optional[Model] = None,
    depth: Optional[int] = None,
) -> DatasetHandle:
    if count < 1 or channels < 1 or h < 1 or w < 1 or num_classes < 1:
        raise ConfigurationError(f"invalid synthetic data set geometry {count}x{channels}x{h}x{w}/{num_classes}")
    shape = (channels, h, w) if depth is None else (channels, depth, h, w)
    name = f"synthetic-cls-{seed:x}"
    descriptor = DatasetDescriptor(name, Task.CLASSIFICATION, count, shape, num_classes, seed)
    ds = DatasetHandle(name, _samples(name, _images(count, shape, seed)), descriptor)
    return assign_labels(ds, model) if model is not None else ds


def synthetic_detection_dataset(
    count: int,
    channels: int,
    h: int,
    w: int,
    num_classes: int,
    seed: int = DEFAULT_DATA_SEED,
    model: Optional[Model] = None,
) -> DatasetHandle:
    if count < 1 or channels < 1 or h < 1 or w < 1 or num_classes < 1:
        raise ConfigurationError(f"invalid synthetic data set geometry {count}x{channels}x{h}x{w}/{num_classes}")
    shape = (channels, h, w)
    name = f"synthetic-det-{seed:x}"
    descriptor = DatasetDescriptor(name, Task.DETECTION, count, shape, num_classes, seed)
    ds = DatasetHandle(name, _samples(name, _images(count, shape, seed)), descriptor)
    if model is not None:
        return assign_labels(ds, model)

    rng = XorShift64Star(seed ^ 0xB0B0)
    samples = []
    for sample in ds:
        boxes = []
        for _ in range(1 + rng.next_below(3)):
            x1, y1 = rng.uniform(0, w / 2), rng.uniform(0, h / 2)
            boxes.append((x1, y1, x1 + rng.uniform(1, w / 2), y1 + rng.uniform(1, h / 2), rng.next_below(num_classes)))
        samples.append(replace(sample, boxes=tuple(boxes)))
    return DatasetHandle(ds.name, samples, descriptor)


def assign_labels(ds: DatasetHandle, model: Model) -> DatasetHandle:
    """Labels every sample with the fault-free model's prediction"""
    samples = []
    for sample in ds:
        out = model.forward(sample.image)
        if model.task == Task.DETECTION:
            boxes = tuple(
                (d.x1, d.y1, d.x2, d.y2, d.cls)
                for d in decode_detections(out, model)
                if d.score >= DETECTION_SCORE_THRESHOLD
            )
            samples.append(replace(sample, boxes=boxes))
        else:
            samples.append(replace(sample, label=int(np.argmax(out))))

    d = ds.descriptor
    descriptor = DatasetDescriptor(d.name, d.task, d.count, d.shape, d.num_classes, d.seed, model.name)
    logger.debug(f"Labelled {len(samples)} samples of {ds.name} with {model.name}")
    return DatasetHandle(ds.name, samples, descriptor, ds.shuffle)


def dataset_for_model(model: Model, count: int, seed: int = DEFAULT_DATA_SEED) -> DatasetHandle:
    """Synthetic data shaped for the model's input, labelled by the model"""
    shape = model.input_shape
    if model.task == Task.DETECTION:
        return synthetic_detection_dataset(count, shape[0], shape[-2], shape[-1], model.num_classes, seed, model)
    depth = shape[1] if len(shape) == 4 else None
    return synthetic_classification_dataset(
        count, shape[0], shape[-2], shape[-1], model.num_classes, seed, model, depth=depth
    )


def dataset_from_descriptor(descriptor: DatasetDescriptor, model: Optional[Model] = None) -> DatasetHandle:
    shape = descriptor.shape
    if descriptor.label_model is not None and (model is None or model.name != descriptor.label_model):
        raise ValidationError(
            f"data set {descriptor.name} was labelled by {descriptor.label_model}, "
            f"got {model.name if model else 'no model'}"
        )
    if descriptor.task == Task.DETECTION:
        return synthetic_detection_dataset(
            descriptor.count, shape[0], shape[-2], shape[-1], descriptor.num_classes, descriptor.seed, model
        )
    depth = shape[1] if len(shape) == 4 else None
    return synthetic_classification_dataset(
        descriptor.count,
        shape[0],
        shape[-2],
        shape[-1],
        descriptor.num_classes,
        descriptor.seed,
        model,
        depth=depth,
    )


def save_descriptor(ds: DatasetHandle, path: PathLike):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(ds.descriptor.to_json())


def load_descriptor(path: PathLike) -> DatasetDescriptor:
    return DatasetDescriptor.from_json(Path(path).read_text())


def batches(ds: DatasetHandle, batch_size: int) -> Iterator[Batch]:
    if batch_size < 1:
        raise ConfigurationError(f"batch size must be positive, got {batch_size}")
    for index, start in enumerate(range(0, len(ds), batch_size)):
        yield Batch(index, ds.samples[start : start + batch_size])


def ground_truth_document(ds: DatasetHandle) -> Dict[str, Any]:
    images = []
    annotations = []
    categories = set()
    for sample in ds:
        images.append(
            {
                "id": sample.image_id,
                "file_name": sample.path,
                "height": sample.height,
                "width": sample.width,
            }
        )
        if sample.boxes is not None:
            for x1, y1, x2, y2, cls in sample.boxes:
                categories.add(cls)
                annotations.append(
                    {
                        "id": len(annotations) + 1,
                        "image_id": sample.image_id,
                        "bbox": [x1, y1, x2 - x1, y2 - y1],
                        "area": (x2 - x1) * (y2 - y1),
                        "category_id": cls,
                        "iscrowd": 0,
                    }
                )
        elif sample.label is not None:
            categories.add(sample.label)
            annotations.append(
                {"id": len(annotations) + 1, "image_id": sample.image_id, "category_id": sample.label}
            )

    return {
        "images": images,
        "annotations": annotations,
        "categories": [{"id": c, "name": f"class_{c}"} for c in sorted(categories)],
    }


def export_ground_truth_json(ds: DatasetHandle, path: Optional[PathLike] = None) -> str:
    """COCO-style images/annotations/categories document; bbox is [x, y, width, height]"""
    text = json.dumps(ground_truth_document(ds), indent=2) + "\n"
    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        logger.info(f"Wrote ground truth for {len(ds)} images to {path}")
    return text


def parse_ground_truth_json(text: str) -> Dict[int, List[Box]]:
    """Boxes per image id, back in (x1, y1, x2, y2, class) form"""
    document = json.loads(text)
    boxes: Dict[int, List[Box]] = {image["id"]: [] for image in document["images"]}
    for annotation in document["annotations"]:
        if "bbox" not in annotation:
            continue
        x, y, w, h = annotation["bbox"]
        boxes.setdefault(annotation["image_id"], []).append((x, y, x + w, y + h, annotation["category_id"]))
    return boxes
