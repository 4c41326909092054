"""IoU matching and precision/recall/AP/mAP for object detections.

Matching is the PASCAL-VOC style convention: per frame and class,
detections above the confidence threshold are taken in descending
confidence order and greedily assigned one-to-one to the unmatched
ground truth with the highest IoU at or above the threshold. AP uses
all-point interpolation; mAP is the unweighted mean over a class set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError

VEHICLE_CLASSES = ("car", "truck", "motorbike", "bus")
PERSON_CLASS = "person"


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box; coordinates are normalized image fractions."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"box corners out of order: {self}")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)


@dataclass(frozen=True)
class Detection:
    class_id: str
    confidence: float
    box: BoundingBox
    frame_id: int = 0


@dataclass(frozen=True)
class GroundTruthObject:
    class_id: str
    box: BoundingBox
    frame_id: int = 0
    # Reference-detector confidence, when the "ground truth" is the
    # output of a reference configuration rather than labelled data.
    confidence: float | None = None


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union; 0 for disjoint or degenerate boxes."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


@dataclass
class MatchedDetection:
    """One retained detection with its match outcome."""

    detection: Detection
    is_tp: bool
    iou: float = 0.0
    matched_gt: GroundTruthObject | None = None


@dataclass
class MatchResult:
    """Outcome of matching one detection set against one reference set."""

    matches: list = field(default_factory=list)  # MatchedDetection, ranked
    unmatched_gts: list = field(default_factory=list)  # the false negatives
    gts_by_class: dict = field(default_factory=dict)  # class -> gt count
    retained_by_class: dict = field(default_factory=dict)

    @property
    def tp(self) -> int:
        return sum(1 for m in self.matches if m.is_tp)

    @property
    def fp(self) -> int:
        return sum(1 for m in self.matches if not m.is_tp)

    @property
    def fn(self) -> int:
        return len(self.unmatched_gts)

    def counts(self) -> tuple[int, int, int]:
        return self.tp, self.fp, self.fn


def match_detections(
    detections,
    ground_truths,
    iou_threshold: float = 0.5,
    conf_threshold: float = 0.5,
) -> MatchResult:
    """Greedy one-to-one matching per (frame, class).

    Detections below ``conf_threshold`` are discarded. Ties in
    confidence keep input order; ties in IoU keep ground-truth input
    order, so the result is deterministic.
    """
    retained = [d for d in detections if d.confidence >= conf_threshold]
    order = sorted(range(len(retained)), key=lambda i: -retained[i].confidence)
    gt_groups: dict = {}
    for gi, gt in enumerate(ground_truths):
        gt_groups.setdefault((gt.frame_id, gt.class_id), []).append(gi)
    taken = [False] * len(ground_truths)
    result = MatchResult()
    ranked: list = [None] * len(retained)
    for i in order:
        det = retained[i]
        best_gi = -1
        best_iou = 0.0
        for gi in gt_groups.get((det.frame_id, det.class_id), ()):
            if taken[gi]:
                continue
            overlap = iou(det.box, ground_truths[gi].box)
            if overlap >= iou_threshold and overlap > best_iou:
                best_iou = overlap
                best_gi = gi
        if best_gi >= 0:
            taken[best_gi] = True
            ranked[i] = MatchedDetection(det, True, best_iou, ground_truths[best_gi])
        else:
            ranked[i] = MatchedDetection(det, False)
    result.matches = ranked
    result.unmatched_gts = [g for gi, g in enumerate(ground_truths) if not taken[gi]]
    for gt in ground_truths:
        result.gts_by_class[gt.class_id] = result.gts_by_class.get(gt.class_id, 0) + 1
    for det in retained:
        result.retained_by_class[det.class_id] = (
            result.retained_by_class.get(det.class_id, 0) + 1
        )
    return result


def precision_recall_curve(result: MatchResult, class_id: str):
    """Cumulative (recall, precision) at each rank of one class.

    Undefined (returns None) when the class has no ground truths.
    """
    n_gts = result.gts_by_class.get(class_id, 0)
    if n_gts == 0:
        return None
    ranked = sorted(
        (m for m in result.matches if m.detection.class_id == class_id),
        key=lambda m: -m.detection.confidence,
    )
    points = []
    tp = fp = 0
    for m in ranked:
        if m.is_tp:
            tp += 1
        else:
            fp += 1
        points.append((tp / n_gts, tp / (tp + fp)))
    return points


def average_precision(pr_points) -> float:
    """Area under the PR curve with all-point interpolation.

    At every recall step the precision is replaced by the maximum
    precision achieved at that recall or beyond.
    """
    if not pr_points:
        return 0.0
    interp = [0.0] * len(pr_points)
    running = 0.0
    for i in range(len(pr_points) - 1, -1, -1):
        running = max(running, pr_points[i][1])
        interp[i] = running
    ap = 0.0
    last_recall = 0.0
    for (recall, _), precision in zip(pr_points, interp):
        ap += (recall - last_recall) * precision
        last_recall = recall
    return ap


def ap_by_class(result: MatchResult) -> tuple[dict, list]:
    """AP for every class with ground truths; also the excluded classes.

    Classes that appear only in detections have no defined recall and
    are returned separately instead of receiving an AP.
    """
    aps = {}
    for class_id in sorted(result.gts_by_class):
        curve = precision_recall_curve(result, class_id)
        aps[class_id] = average_precision(curve)
    excluded = sorted(
        c for c in result.retained_by_class if c not in result.gts_by_class
    )
    return aps, excluded


def mean_average_precision(aps: dict, class_set) -> float:
    """Unweighted mean of the APs of ``class_set`` members with defined AP."""
    included = [aps[c] for c in class_set if c in aps]
    if not included:
        raise ConfigError(
            f"no class of {sorted(class_set)} has a defined AP"
        )
    return sum(included) / len(included)
