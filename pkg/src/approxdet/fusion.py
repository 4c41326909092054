"""Temporal confidence fusion over a sliding three-frame window.

Raw per-frame detection lists (pre-threshold, confidences retained) are
associated across the last three frames; each resulting track averages
its member confidences and is emitted only when the average clears the
confidence threshold. A detection seen in a single frame therefore
needs a very high average to survive, while an object missed in one
frame out of three keeps its track alive.

Rules pinned here (association is by class-restricted greedy IoU):

  * a frame where the track has no member contributes 0 confidence and
    the divisor stays at the window length;
  * at sequence start the divisor is the number of frames available,
    so the first frame passes through unfused;
  * the emitted box and class come from the most recent member.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import DataError
from .metrics import Detection, iou

WINDOW = 3
DEFAULT_IOU_FLOOR = 0.3


@dataclass
class FrameSequence:
    """Ordered per-frame detection lists with strictly increasing ids."""

    frames: list = field(default_factory=list)  # list[list[Detection]]
    frame_ids: list = field(default_factory=list)

    def __post_init__(self):
        if not self.frame_ids:
            self.frame_ids = list(range(len(self.frames)))
        if len(self.frame_ids) != len(self.frames):
            raise DataError("frame_ids and frames length mismatch")
        for a, b in zip(self.frame_ids, self.frame_ids[1:]):
            if b <= a:
                raise DataError("frame ids must be strictly increasing")

    def __len__(self):
        return len(self.frames)

    @classmethod
    def from_detections(cls, detections) -> "FrameSequence":
        by_frame: dict = {}
        for det in detections:
            by_frame.setdefault(det.frame_id, []).append(det)
        ids = sorted(by_frame)
        return cls(frames=[by_frame[i] for i in ids], frame_ids=ids)


def associate(prev_frame, cur_frame, iou_floor: float = DEFAULT_IOU_FLOOR):
    """Greedy one-to-one pairing of two consecutive frames.

    Same-class pairs with IoU at or above the floor are taken in
    descending IoU order (ties by input order). Returns index pairs
    ``(prev_index, cur_index)``.
    """
    candidates = []
    for i, p in enumerate(prev_frame):
        for j, c in enumerate(cur_frame):
            if p.class_id != c.class_id:
                continue
            overlap = iou(p.box, c.box)
            if overlap >= iou_floor:
                candidates.append((overlap, i, j))
    candidates.sort(key=lambda t: (-t[0], t[1], t[2]))
    used_prev: set = set()
    used_cur: set = set()
    pairs = []
    for overlap, i, j in candidates:
        if i in used_prev or j in used_cur:
            continue
        used_prev.add(i)
        used_cur.add(j)
        pairs.append((i, j))
    return pairs


@dataclass
class Track:
    """Members of one object across the window, oldest slot first."""

    members: list  # list[Detection | None], len == window length

    @property
    def latest(self) -> Detection:
        for det in reversed(self.members):
            if det is not None:
                return det
        raise ValueError("empty track")

    def average_confidence(self, divisor: int) -> float:
        return sum(d.confidence for d in self.members if d is not None) / divisor


def build_tracks(window, iou_floor: float = DEFAULT_IOU_FLOOR):
    """Partition the window's detections into per-object tracks.

    Adjacent frames are associated pairwise; a current detection with
    no partner in the middle frame may still bridge to an unclaimed
    detection two frames back, which keeps a track alive across one
    missed frame.
    """
    n = len(window)
    if n == 1:
        return [Track([det]) for det in window[0]]
    cur = window[-1]
    mid = window[-2]
    pair_mid_cur = dict()
    for i, j in associate(mid, cur, iou_floor):
        pair_mid_cur[j] = i
    if n == 2:
        tracks = [
            Track([mid[pair_mid_cur[j]] if j in pair_mid_cur else None, det])
            for j, det in enumerate(cur)
        ]
        claimed_mid = set(pair_mid_cur.values())
        tracks.extend(
            Track([det, None]) for i, det in enumerate(mid) if i not in claimed_mid
        )
        return tracks
    old = window[-3]
    pair_old_mid = dict(associate(old, mid, iou_floor))
    mid_to_old = {m: o for o, m in pair_old_mid.items()}
    # Gap bridging: current detections and oldest detections that both
    # lack a middle-frame partner.
    free_cur = [j for j in range(len(cur)) if j not in pair_mid_cur]
    free_old = [o for o in range(len(old)) if o not in pair_old_mid]
    bridge = dict()
    for oi, cj in associate(
        [old[o] for o in free_old], [cur[j] for j in free_cur], iou_floor
    ):
        bridge[free_cur[cj]] = free_old[oi]
    tracks = []
    claimed_mid: set = set()
    claimed_old: set = set()
    for j, det in enumerate(cur):
        m = pair_mid_cur.get(j)
        o = mid_to_old.get(m) if m is not None else bridge.get(j)
        if m is not None:
            claimed_mid.add(m)
        if o is not None:
            claimed_old.add(o)
        tracks.append(
            Track(
                [
                    old[o] if o is not None else None,
                    mid[m] if m is not None else None,
                    det,
                ]
            )
        )
    for m, det in enumerate(mid):
        if m in claimed_mid:
            continue
        o = mid_to_old.get(m)
        if o is not None:
            claimed_old.add(o)
        tracks.append(Track([old[o] if o is not None else None, det, None]))
    tracks.extend(
        Track([det, None, None])
        for o, det in enumerate(old)
        if o not in claimed_old
    )
    return tracks


def fuse(
    window,
    conf_threshold: float = 0.5,
    iou_floor: float = DEFAULT_IOU_FLOOR,
    frame_id: int | None = None,
):
    """Fused output list for the newest frame of a 1-3 frame window."""
    if not 1 <= len(window) <= WINDOW:
        raise DataError(f"fusion window must hold 1..{WINDOW} frames")
    if frame_id is None:
        if not window[-1]:
            raise DataError("frame_id required when the current frame is empty")
        frame_id = window[-1][0].frame_id
    divisor = len(window)
    fused = []
    for track in build_tracks(window, iou_floor):
        avg = track.average_confidence(divisor)
        if avg >= conf_threshold:
            latest = track.latest
            fused.append(
                Detection(latest.class_id, avg, latest.box, frame_id=frame_id)
            )
    return fused


def fuse_sequence(
    sequence,
    conf_threshold: float = 0.5,
    iou_floor: float = DEFAULT_IOU_FLOOR,
) -> FrameSequence:
    """Causal fused stream: frame i uses only frames i-2..i."""
    if not isinstance(sequence, FrameSequence):
        sequence = FrameSequence(frames=list(sequence))
    fused_frames = []
    for i in range(len(sequence)):
        window = sequence.frames[max(0, i - WINDOW + 1) : i + 1]
        fused_frames.append(
            fuse(
                window,
                conf_threshold=conf_threshold,
                iou_floor=iou_floor,
                frame_id=sequence.frame_ids[i],
            )
        )
    return FrameSequence(frames=fused_frames, frame_ids=list(sequence.frame_ids))
