"""Synthetic detection pipeline for desk-scale arithmetic studies.

Full-scale networks are far too expensive to run on emulated arithmetic,
so this module provides a miniature stand-in with the same structure: a
three-layer convolutional score network followed by a threshold
detector, all arithmetic routed through the configured lane. Scenes are
generated from a seed; objects sit on a sparse cell lattice, carry a
per-class code channel, and render into the input tensor together with
sub-threshold clutter blobs that faults can push over the line.

Everything downstream (matching, AP, histograms) treats the generated
ground truth exactly like a labelled dataset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import ImageRecord, ObjectRecord
from .errors import DataError
from .kernels import ArithmeticConfig, Tensor, arithmetic_lane, conv2d
from .faults import FaultStats
from .metrics import BoundingBox, Detection

CLASSES = ("car", "truck", "bus", "motorbike", "person")
CLASS_CODES = {cls: 0.2 + 0.1 * k for k, cls in enumerate(CLASSES)}

# Cells below this confidence are not emitted at all; the evaluation
# threshold of 0.5 is applied later by the matcher.
EMIT_FLOOR = 0.25


@dataclass(frozen=True)
class SceneSpec:
    """Parameters of the synthetic scene generator."""

    n_images: int = 40
    grid: int = 14
    cell_pixels: int = 32
    solid_objects: int = 10
    marginal_objects: int = 4
    clutter_blobs: int = 16
    solid_intensity: tuple = (0.57, 0.74)
    marginal_intensity: tuple = (0.44, 0.49)
    clutter_intensity: tuple = (0.38, 0.48)
    background_noise: float = 0.04
    seed: int = 20260806

    def to_dict(self) -> dict:
        return {
            "kind": "toy-scene",
            "n_images": self.n_images,
            "grid": self.grid,
            "cell_pixels": self.cell_pixels,
            "solid_objects": self.solid_objects,
            "marginal_objects": self.marginal_objects,
            "clutter_blobs": self.clutter_blobs,
            "solid_intensity": list(self.solid_intensity),
            "marginal_intensity": list(self.marginal_intensity),
            "clutter_intensity": list(self.clutter_intensity),
            "background_noise": self.background_noise,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "SceneSpec":
        if raw.get("kind") != "toy-scene":
            raise DataError("not a toy-scene description")
        fields = {k: v for k, v in raw.items() if k != "kind"}
        for key in ("solid_intensity", "marginal_intensity", "clutter_intensity"):
            if key in fields:
                fields[key] = tuple(fields[key])
        try:
            return cls(**fields)
        except TypeError as exc:
            raise DataError(f"bad toy-scene field: {exc}") from exc


@dataclass
class Scene:
    spec: SceneSpec
    images: list  # list[Tensor], each (2, grid, grid)
    records: list  # list[ImageRecord], the labelled ground truth


def _cell_box_pixels(spec: SceneSpec, row: int, col: int) -> tuple:
    cp = spec.cell_pixels
    return (col * cp, row * cp, (col + 1) * cp, (row + 1) * cp)


def generate_scene(spec: SceneSpec | None = None) -> Scene:
    """Render deterministic images and their ground-truth records."""
    spec = spec or SceneSpec()
    rng = np.random.default_rng(spec.seed)
    g = spec.grid
    # Sparse lattice (every other cell) keeps objects out of each
    # other's 3x3 neighborhoods, so scores stay separable.
    lattice = [(r, c) for r in range(0, g, 2) for c in range(0, g, 2)]
    needed = spec.solid_objects + spec.marginal_objects + spec.clutter_blobs
    if needed > len(lattice):
        raise DataError("scene is overcrowded for its grid")
    images, records = [], []
    side = g * spec.cell_pixels
    for index in range(spec.n_images):
        intensity = rng.uniform(0, spec.background_noise, size=(g, g))
        code = np.zeros((g, g))
        chosen = rng.choice(len(lattice), size=needed, replace=False)
        cells = [lattice[i] for i in chosen]
        record = ImageRecord(f"img_{index:03d}", side, side)
        cursor = 0
        for count, (lo, hi), is_object in (
            (spec.solid_objects, spec.solid_intensity, True),
            (spec.marginal_objects, spec.marginal_intensity, True),
            (spec.clutter_blobs, spec.clutter_intensity, False),
        ):
            for _ in range(count):
                r, c = cells[cursor]
                cursor += 1
                cls = CLASSES[rng.integers(0, len(CLASSES))]
                intensity[r, c] = rng.uniform(lo, hi)
                code[r, c] = CLASS_CODES[cls]
                if is_object:
                    record.objects.append(
                        ObjectRecord(cls, _cell_box_pixels(spec, r, c), None)
                    )
        images.append(
            Tensor.from_array(np.stack([code, intensity]).astype(np.float32))
        )
        records.append(record)
    return Scene(spec=spec, images=images, records=records)


def detector_weights() -> tuple:
    """Hand-built weights of the three-layer score network.

    Layer 1 extracts the center class code, the center intensity and a
    3x3 neighborhood intensity average. Layer 2 (5x5, center taps)
    passes the code through and sharpens objectness: the center
    intensity is boosted and the neighborhood average subtracted, which
    cancels the blob's own spill and drives neighbor cells negative
    (cut by the relu). The 1x1 head emits (objectness, code).
    """
    w1 = np.zeros((3, 2, 3, 3), dtype=np.float32)
    w1[0, 0, 1, 1] = 1.0  # f0: class code
    w1[1, 1, 1, 1] = 1.0  # f1: center intensity
    w1[2, 1] = 0.125      # f2: neighborhood intensity
    w2 = np.zeros((3, 3, 5, 5), dtype=np.float32)
    w2[0, 0, 2, 2] = 1.0   # code pass-through
    w2[1, 1, 2, 2] = 1.25  # objectness: boosted center ...
    w2[1, 2, 2, 2] = -2.0  # ... minus neighborhood
    w2[2, 2, 2, 2] = 1.0
    wh = np.zeros((2, 3, 1, 1), dtype=np.float32)
    wh[0, 1, 0, 0] = 1.0  # objectness
    wh[1, 0, 0, 0] = 1.0  # code
    return Tensor.from_array(w1), Tensor.from_array(w2), Tensor.from_array(wh)


def _relu(t: Tensor) -> Tensor:
    return Tensor(shape=t.shape, data=np.maximum(t.data, np.float32(0.0)))


_INVOCATIONS_PER_IMAGE = 4


def run_detector(
    image: Tensor,
    cfg: ArithmeticConfig,
    image_index: int = 0,
    fault_stats: FaultStats | None = None,
) -> list:
    """Detections for one image under the configured arithmetic."""
    stats = fault_stats if fault_stats is not None else FaultStats()
    w1, w2, wh = detector_weights()
    base = image_index * _INVOCATIONS_PER_IMAGE
    x = _relu(conv2d(image, w1, cfg, padding=1, invocation=base, fault_stats=stats))
    x = _relu(conv2d(x, w2, cfg, padding=2, invocation=base + 1, fault_stats=stats))
    x = conv2d(x, wh, cfg, invocation=base + 2, fault_stats=stats)
    scores = x.as_array()
    g = image.shape[1]
    lane = arithmetic_lane(cfg, invocation=base + 3, stats=stats)
    neg_codes = [lane.encode(-CLASS_CODES[cls]) for cls in CLASSES]
    detections = []
    for r in range(g):
        for c in range(g):
            conf = float(min(max(scores[0, r, c], 0.0), 1.0))
            if conf < EMIT_FLOOR:
                continue
            code_bits = lane.encode(float(scores[1, r, c]))
            best_cls = None
            best_dist = None
            for k, cls in enumerate(CLASSES):
                add, _ = lane.cell_ops((r * g + c) * len(CLASSES) + k)
                dist = abs(lane.decode(add(code_bits, neg_codes[k])))
                if best_dist is None or dist < best_dist:
                    best_cls, best_dist = cls, dist
            detections.append(
                Detection(
                    best_cls,
                    conf,
                    BoundingBox(c / g, r / g, (c + 1) / g, (r + 1) / g),
                    frame_id=image_index,
                )
            )
    return detections


def detect_scene(
    scene: Scene, cfg: ArithmeticConfig
) -> tuple[list, FaultStats]:
    """All detections of a scene plus the aggregated fault statistics."""
    stats = FaultStats()
    detections = []
    for index, image in enumerate(scene.images):
        detections.extend(run_detector(image, cfg, index, fault_stats=stats))
    return detections, stats
