"""Misdetection analyses: confidence distributions, object-area binning,
and vehicle-class generalization.

A false negative is an unmatched reference object. When the reference is
a detector output it carries a confidence, which is how FN can be placed
on a confidence axis at all; labelled ground truth has none and such FNs
are reported unbinned.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, replace

from .metrics import VEHICLE_CLASSES, MatchResult

VEHICLE_MERGED_CLASS = "vehicle"
VEHICLE_GENERALIZATION = {cls: VEHICLE_MERGED_CLASS for cls in VEHICLE_CLASSES}

# Object area is binned on a log axis: four decades below full-image
# area, ten steps per decade.
AREA_DECADES = 4
AREA_BINS_PER_DECADE = 10


def default_confidence_edges(n_bins: int = 10):
    return [i / n_bins for i in range(n_bins + 1)]


def area_bin_edges():
    n = AREA_DECADES * AREA_BINS_PER_DECADE
    return [10.0 ** (-AREA_DECADES + i / AREA_BINS_PER_DECADE) for i in range(n + 1)]


@dataclass
class ConfidenceHistogram:
    """TP and FP+FN counts per confidence bin."""

    bin_edges: list
    tp_counts: list
    fp_counts: list
    fn_counts: list
    unbinned_fn: int = 0  # FNs whose reference carries no confidence

    @property
    def fpfn_counts(self) -> list:
        return [f + n for f, n in zip(self.fp_counts, self.fn_counts)]

    def to_rows(self) -> list:
        rows = []
        for i in range(len(self.tp_counts)):
            rows.append(
                {
                    "bin_low": self.bin_edges[i],
                    "bin_high": self.bin_edges[i + 1],
                    "tp": self.tp_counts[i],
                    "fp_plus_fn": self.fpfn_counts[i],
                }
            )
        return rows


@dataclass
class AreaBinning:
    """TP and FN counts by object area ratio (box area / image area)."""

    bin_edges: list
    tp_counts: list
    fn_counts: list
    underflow_tp: int = 0  # area below the smallest edge
    underflow_fn: int = 0

    def tp_percentage(self) -> list:
        out = []
        for tp, fn in zip(self.tp_counts, self.fn_counts):
            total = tp + fn
            out.append(None if total == 0 else 100.0 * tp / total)
        return out

    def to_rows(self) -> list:
        pct = self.tp_percentage()
        rows = []
        for i in range(len(self.tp_counts)):
            rows.append(
                {
                    "area_low": self.bin_edges[i],
                    "area_high": self.bin_edges[i + 1],
                    "tp": self.tp_counts[i],
                    "fn": self.fn_counts[i],
                    "tp_percentage": pct[i],
                }
            )
        return rows


def _bin_index(edges, value: float) -> int:
    """Index of the half-open bin [e_i, e_i+1) holding value; the last
    bin is closed at the top."""
    if value >= edges[-1]:
        return len(edges) - 2
    return bisect.bisect_right(edges, value) - 1


def confidence_histogram(
    result: MatchResult, bin_edges=None
) -> ConfidenceHistogram:
    """Bin TPs and FPs by detection confidence, FNs by reference confidence."""
    edges = list(bin_edges) if bin_edges is not None else default_confidence_edges()
    n = len(edges) - 1
    hist = ConfidenceHistogram(edges, [0] * n, [0] * n, [0] * n)
    for m in result.matches:
        idx = _bin_index(edges, m.detection.confidence)
        if m.is_tp:
            hist.tp_counts[idx] += 1
        else:
            hist.fp_counts[idx] += 1
    for gt in result.unmatched_gts:
        if gt.confidence is None:
            hist.unbinned_fn += 1
        else:
            hist.fn_counts[_bin_index(edges, gt.confidence)] += 1
    return hist


def area_analysis(result: MatchResult) -> AreaBinning:
    """Bin matched and missed reference objects by their area ratio.

    Boxes are in normalized coordinates, so the box area is already the
    ratio to the image area. Both TP and FN use the reference object's
    box, keeping the two series on the same population.
    """
    edges = area_bin_edges()
    n = len(edges) - 1
    binning = AreaBinning(edges, [0] * n, [0] * n)
    for m in result.matches:
        if not m.is_tp:
            continue
        area = m.matched_gt.box.area
        if area < edges[0]:
            binning.underflow_tp += 1
        else:
            binning.tp_counts[_bin_index(edges, area)] += 1
    for gt in result.unmatched_gts:
        area = gt.box.area
        if area < edges[0]:
            binning.underflow_fn += 1
        else:
            binning.fn_counts[_bin_index(edges, area)] += 1
    return binning


def generalize_classes(detections, ground_truths, mapping=None):
    """Remap class labels (by default all vehicle types to one class).

    Returns new detection and ground-truth lists; matching them erases
    FP+FN pairs that were pure vehicle-type confusions.
    """
    if mapping is None:
        mapping = VEHICLE_GENERALIZATION
    new_dets = [
        replace(d, class_id=mapping.get(d.class_id, d.class_id)) for d in detections
    ]
    new_gts = [
        replace(g, class_id=mapping.get(g.class_id, g.class_id))
        for g in ground_truths
    ]
    return new_dets, new_gts
