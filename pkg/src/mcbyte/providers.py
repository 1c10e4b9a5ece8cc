"""File formats and input sources.

Text formats handled here:

* detections, MOT-Challenge style: ``frame,-1,x,y,w,h,score,-1,-1,-1``
* ground truth: ``frame,id,x,y,w,h,conf,class,visibility``
* tracker results: ``frame,id,x,y,w,h,score,-1,-1,-1``
* masks: header ``masks v1 <width> <height>`` then ``frame slot conf run,run,...``
* warps: ``frame a11 a12 tx a21 a22 ty``, one line per frame, absent means identity
* correspondences: ``frame sx sy dx dy``

Box coordinates in the comma-separated files are 1-based; everything in
memory is 0-based. Writers emit a canonical form so that reading a canonical
file and writing it back reproduces it byte for byte.
"""
from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .errors import (
    DegenerateGeometry, InsufficientPoints, NonMonotonicFrames, ParseError, SlotDesync,
    UnknownTracklet,
)
from .geometry import BoundingBox, iou
from .lifecycle import SlotTable
from .maskops import MaskBitmap, MaskSet
from .motion import Correspondence, WarpMatrix, estimate_warp
from .pipeline import MaskManagementMessages, MaskSource, TrackRecord

log = logging.getLogger(__name__)

DET_FILE = "det.txt"
GT_FILE = "gt.txt"
MASK_FILE = "masks.txt"
WARP_FILE = "warp.txt"
CORR_FILE = "corr.txt"
MANIFEST_FILE = "manifest.json"


def fmt_num(v: float) -> str:
    """Canonical decimal: six places with trailing zeros stripped."""
    s = ("%.6f" % v).rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def fmt_exact(v: float) -> str:
    """Shortest text that parses back to exactly ``v``."""
    v = float(v)
    if v == 0:
        return "0"
    s = repr(v)
    return s[:-2] if s.endswith(".0") else s


def quantize(v: float) -> float:
    """The value a canonical write-then-read of ``v`` yields."""
    return float(fmt_num(v))


def _lines(path) -> Iterable[tuple[int, str]]:
    with open(path, "r", encoding="utf-8") as fh:
        for no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if line:
                yield no, line


def _float(text: str, what: str, path, no) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"{what} is not a number: {text!r}", path, no) from None
    if not math.isfinite(v):
        raise ParseError(f"{what} must be finite, got {text!r}", path, no)
    return v


def _int(text: str, what: str, path, no) -> int:
    v = _float(text, what, path, no)
    if v != int(v):
        raise ParseError(f"{what} must be an integer, got {text!r}", path, no)
    return int(v)


def _box(fields, path, no) -> BoundingBox:
    x, y, w, h = (_float(f, n, path, no) for f, n in zip(fields, ("x", "y", "w", "h")))
    try:
        return BoundingBox(x - 1.0, y - 1.0, w, h)
    except ValueError as exc:
        raise ParseError(str(exc), path, no) from None


def _check_order(frame, last, path, no):
    if last is not None and frame < last:
        raise NonMonotonicFrames(f"{path}:{no}: frame {frame} after frame {last}")


def _box_fields(b: BoundingBox) -> str:
    return ",".join(fmt_num(v) for v in (b.x + 1.0, b.y + 1.0, b.w, b.h))


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


# ---------------------------------------------------------------- detections

@dataclass
class DetectionSource:
    frames: dict[int, list[tuple[BoundingBox, float]]] = field(default_factory=dict)

    @property
    def frame_range(self) -> range:
        if not self.frames:
            return range(0)
        return range(min(self.frames), max(self.frames) + 1)

    def __call__(self, frame_index: int) -> list[tuple[BoundingBox, float]]:
        return list(self.frames.get(frame_index, []))


def read_detections(path) -> DetectionSource:
    src = DetectionSource()
    last = None
    for no, line in _lines(path):
        f = line.split(",")
        if not 7 <= len(f) <= 10:
            raise ParseError(f"expected 7 to 10 comma-separated fields, got {len(f)}", path, no)
        frame = _int(f[0], "frame", path, no)
        _check_order(frame, last, path, no)
        last = frame
        box = _box(f[2:6], path, no)
        score = _float(f[6], "score", path, no)
        if not 0.0 <= score <= 1.0:
            log.warning("%s:%d: score %s clamped to [0, 1]", path, no, f[6])
            score = min(max(score, 0.0), 1.0)
        src.frames.setdefault(frame, []).append((box, score))
    return src


def write_detections(path, frames: Mapping[int, Sequence[tuple[BoundingBox, float]]]) -> None:
    rows = [f"{t},-1,{_box_fields(b)},{fmt_num(s)},-1,-1,-1"
            for t in sorted(frames) for b, s in frames[t]]
    _atomic_write(path, "".join(r + "\n" for r in rows))


# -------------------------------------------------------------- ground truth

@dataclass(frozen=True)
class GtRow:
    track_id: int
    box: BoundingBox
    conf: float = 1.0
    cls: int = 1
    visibility: float = 1.0


@dataclass
class GroundTruth:
    frames: dict[int, list[GtRow]] = field(default_factory=dict)

    @property
    def frame_range(self) -> range:
        if not self.frames:
            return range(0)
        return range(min(self.frames), max(self.frames) + 1)


def read_gt(path) -> GroundTruth:
    gt = GroundTruth()
    last = None
    for no, line in _lines(path):
        f = line.split(",")
        if len(f) not in (9, 10):
            raise ParseError(f"expected 9 comma-separated fields, got {len(f)}", path, no)
        frame = _int(f[0], "frame", path, no)
        _check_order(frame, last, path, no)
        last = frame
        tid = _int(f[1], "id", path, no)
        if tid <= 0:
            raise ParseError(f"ground-truth ids must be positive, got {tid}", path, no)
        row = GtRow(tid, _box(f[2:6], path, no), _float(f[6], "conf", path, no),
                    _int(f[7], "class", path, no), _float(f[8], "visibility", path, no))
        gt.frames.setdefault(frame, []).append(row)
    return gt


def write_gt(path, gt: GroundTruth) -> None:
    rows = [f"{t},{r.track_id},{_box_fields(r.box)},{fmt_num(r.conf)},{r.cls},{fmt_num(r.visibility)}"
            for t in sorted(gt.frames) for r in gt.frames[t]]
    _atomic_write(path, "".join(r + "\n" for r in rows))


# ------------------------------------------------------------------- results

def read_results(path) -> list[TrackRecord]:
    out = []
    last = None
    for no, line in _lines(path):
        f = line.split(",")
        if not 7 <= len(f) <= 10:
            raise ParseError(f"expected 7 to 10 comma-separated fields, got {len(f)}", path, no)
        frame = _int(f[0], "frame", path, no)
        _check_order(frame, last, path, no)
        last = frame
        tid = _int(f[1], "id", path, no)
        if tid <= 0:
            raise ParseError(f"track ids must be positive, got {tid}", path, no)
        out.append(TrackRecord(frame, tid, _box(f[2:6], path, no), _float(f[6], "score", path, no)))
    return out


def format_results(records: Iterable[TrackRecord]) -> str:
    rows = sorted(records, key=lambda r: (r.frame_index, r.track_id))
    return "".join(f"{r.frame_index},{r.track_id},{_box_fields(r.box)},{fmt_num(r.score)},-1,-1,-1\n"
                   for r in rows)


def write_results(path, records: Iterable[TrackRecord]) -> None:
    _atomic_write(path, format_results(records))


# --------------------------------------------------------------------- masks

def read_masks(path) -> tuple[tuple[int, int], dict[int, MaskSet]]:
    """Returns ``((width, height), {frame: MaskSet})``."""
    it = iter(_lines(path))
    try:
        no, header = next(it)
    except StopIteration:
        raise ParseError("missing header 'masks v1 <width> <height>'", path, 1) from None
    h = header.split()
    if len(h) != 4 or h[0] != "masks" or h[1] != "v1":
        raise ParseError(f"bad header {header!r}; expected 'masks v1 <width> <height>'", path, no)
    width, height = _int(h[2], "width", path, no), _int(h[3], "height", path, no)
    if width <= 0 or height <= 0:
        raise ParseError("mask size must be positive", path, no)
    frames: dict[int, dict[int, MaskBitmap]] = {}
    last = None
    for no, line in it:
        f = line.split()
        if len(f) != 4:
            raise ParseError(f"expected 4 space-separated fields, got {len(f)}", path, no)
        frame, slot = _int(f[0], "frame", path, no), _int(f[1], "slot", path, no)
        if slot < 0:
            raise ParseError(f"slot must be >= 0, got {slot}", path, no)
        if last is not None and (frame, slot) <= last:
            if frame < last[0]:
                raise NonMonotonicFrames(f"{path}:{no}: frame {frame} after frame {last[0]}")
            raise ParseError(f"slot {slot} not ascending within frame {frame}", path, no)
        last = (frame, slot)
        conf = _float(f[2], "mean confidence", path, no)
        runs = [_int(r, "run", path, no) for r in f[3].split(",")]
        try:
            m = MaskBitmap(width, height, tuple(runs), conf)
        except ValueError as exc:
            raise ParseError(str(exc), path, no) from None
        frames.setdefault(frame, {})[slot] = m
    return (width, height), {t: MaskSet(t, e) for t, e in frames.items()}


def write_masks(path, size: tuple[int, int], frames: Mapping[int, MaskSet]) -> None:
    width, height = size
    out = [f"masks v1 {width} {height}\n"]
    for t in sorted(frames):
        for slot in sorted(frames[t].entries):
            m = frames[t].entries[slot]
            if (m.width, m.height) != (width, height):
                raise ValueError(f"frame {t} slot {slot}: mask size differs from file header")
            out.append(f"{t} {slot} {m.mean_confidence:.6f} {','.join(map(str, m.runs))}\n")
    _atomic_write(path, "".join(out))


# --------------------------------------------------------------------- warps

def read_warps(path) -> dict[int, WarpMatrix]:
    out = {}
    last = None
    for no, line in _lines(path):
        f = line.split()
        if len(f) != 7:
            raise ParseError(f"expected 7 space-separated fields, got {len(f)}", path, no)
        frame = _int(f[0], "frame", path, no)
        if last is not None and frame <= last:
            if frame < last:
                raise NonMonotonicFrames(f"{path}:{no}: frame {frame} after frame {last}")
            raise ParseError(f"duplicate warp for frame {frame}", path, no)
        last = frame
        vals = [_float(v, "warp entry", path, no) for v in f[1:]]
        try:
            out[frame] = WarpMatrix(*vals)
        except ValueError as exc:
            raise ParseError(str(exc), path, no) from None
    return out


def write_warps(path, warps: Mapping[int, WarpMatrix]) -> None:
    rows = []
    for t in sorted(warps):
        w = warps[t]
        vals = (w.a11, w.a12, w.tx, w.a21, w.a22, w.ty)
        rows.append(f"{t} " + " ".join(fmt_exact(v) for v in vals) + "\n")
    _atomic_write(path, "".join(rows))


def read_correspondences(path) -> dict[int, list[Correspondence]]:
    out: dict[int, list[Correspondence]] = {}
    last = None
    for no, line in _lines(path):
        f = line.split()
        if len(f) != 5:
            raise ParseError(f"expected 5 space-separated fields, got {len(f)}", path, no)
        frame = _int(f[0], "frame", path, no)
        _check_order(frame, last, path, no)
        last = frame
        sx, sy, dx, dy = (_float(v, "coordinate", path, no) for v in f[1:])
        out.setdefault(frame, []).append(Correspondence((sx, sy), (dx, dy)))
    return out


def write_correspondences(path, corr: Mapping[int, Sequence[Correspondence]]) -> None:
    rows = [f"{t} " + " ".join(fmt_exact(v) for v in (*c.src, *c.dst)) + "\n"
            for t in sorted(corr) for c in corr[t]]
    _atomic_write(path, "".join(rows))


class WarpSource:
    """Per-frame camera warp, from a warp file or estimated from correspondences."""

    def __init__(self, warps: Optional[Mapping[int, WarpMatrix]] = None):
        self._warps = dict(warps or {})

    @classmethod
    def from_correspondences(cls, corr: Mapping[int, Sequence[Correspondence]],
                             iterations: int = 200, inlier_tol: float = 3.0,
                             seed: int = 0) -> "WarpSource":
        warps = {}
        for t in sorted(corr):
            try:
                warps[t] = estimate_warp(corr[t], iterations, inlier_tol, seed)
            except (InsufficientPoints, DegenerateGeometry) as exc:
                log.warning("frame %d: no camera warp (%s); using identity", t, exc)
        return cls(warps)

    def __call__(self, frame_index: int) -> WarpMatrix:
        return self._warps.get(frame_index, WarpMatrix())

    @property
    def frames(self) -> list[int]:
        return sorted(self._warps)


# -------------------------------------------------------------- mask sources

class FileMaskSource(MaskSource):
    """Replays a mask file whose slots already follow a fixed creation order.

    The message history is tracked only to check that the file never refers
    to a slot the tracker has not created.
    """

    def __init__(self, size: tuple[int, int], frames: Mapping[int, MaskSet]):
        self.size = size
        self._frames = dict(frames)
        self._table = SlotTable()

    @classmethod
    def from_file(cls, path) -> "FileMaskSource":
        return cls(*read_masks(path))

    @property
    def live_slots(self) -> int:
        return len(self._table)

    def masks(self, frame_index: int) -> MaskSet:
        ms = self._frames.get(frame_index, MaskSet(frame_index))
        if ms.max_slot >= len(self._table):
            raise SlotDesync(f"frame {frame_index}: mask file uses slot {ms.max_slot} "
                             f"but only {len(self._table)} masks have been created")
        return ms

    def apply_slot_messages(self, msgs: MaskManagementMessages) -> None:
        table = self._table
        try:
            for tid, _ in msgs.create:
                table = table.add(tid)
            table = table.purge_and_remap(msgs.purge)
        except (UnknownTracklet, ValueError) as exc:
            raise SlotDesync(f"frame {msgs.frame_index}: {exc}") from None
        self._table = table

    @property
    def frames(self) -> list[int]:
        return sorted(self._frames)


class OracleMaskSource(MaskSource):
    """Live slot allocation over a scene whose object silhouettes are known.

    A creation request is linked to the object whose box overlaps the
    tracklet's box most at that frame (the stand-in for prompting a
    segmenter with the box). From then on the slot answers with that object's
    visible silhouette, if any.
    """

    def __init__(self, gt_boxes: Callable[[int], Mapping[int, BoundingBox]],
                 silhouettes: Callable[[int], Mapping[int, MaskBitmap]]):
        self._gt_boxes = gt_boxes
        self._silhouettes = silhouettes
        self._table = SlotTable()
        self._object_of: dict[int, Optional[int]] = {}
        self.served: dict[int, MaskSet] = {}

    @property
    def table(self) -> SlotTable:
        return self._table

    def object_of(self, tid: int) -> Optional[int]:
        return self._object_of.get(tid)

    def masks(self, frame_index: int) -> MaskSet:
        sil = self._silhouettes(frame_index)
        entries = {}
        for slot, tid in enumerate(self._table.order):
            obj = self._object_of.get(tid)
            if obj is not None and obj in sil:
                entries[slot] = sil[obj]
        ms = MaskSet(frame_index, entries)
        self.served[frame_index] = ms
        return ms

    def apply_slot_messages(self, msgs: MaskManagementMessages) -> None:
        boxes = self._gt_boxes(msgs.frame_index)
        table = self._table
        for tid, box in msgs.create:
            best, best_iou = None, 0.0
            for obj in sorted(boxes):
                v = iou(box, boxes[obj])
                if v > best_iou:
                    best, best_iou = obj, v
            self._object_of[tid] = best
            table = table.add(tid)
        table = table.purge_and_remap(msgs.purge)
        for tid in msgs.purge:
            self._object_of.pop(tid, None)
        self._table = table


def apply_slot_messages(src: MaskSource, msgs: MaskManagementMessages) -> MaskSource:
    src.apply_slot_messages(msgs)
    return src


# ----------------------------------------------------------------- sequences

@dataclass
class SequenceDir:
    """Paths and metadata of one sequence directory."""

    path: Path
    manifest: dict

    @classmethod
    def open(cls, path) -> "SequenceDir":
        path = Path(path)
        if not path.is_dir():
            raise FileNotFoundError(f"sequence directory not found: {path}")
        mf = path / MANIFEST_FILE
        manifest = json.loads(mf.read_text(encoding="utf-8")) if mf.exists() else {}
        return cls(path, manifest)

    @property
    def name(self) -> str:
        return self.manifest.get("name", self.path.name)

    def file(self, name: str) -> Optional[Path]:
        p = self.path / name
        return p if p.exists() else None

    @property
    def image_size(self) -> Optional[tuple[int, int]]:
        size = self.manifest.get("image_size")
        return (int(size[0]), int(size[1])) if size else None

    def frame_range(self, dets: DetectionSource) -> range:
        if "frames" in self.manifest:
            first, last = self.manifest["frames"]
            return range(int(first), int(last) + 1)
        gt = self.file(GT_FILE)
        ranges = [dets.frame_range]
        if gt is not None:
            ranges.append(read_gt(gt).frame_range)
        ranges = [r for r in ranges if len(r)]
        if not ranges:
            return range(0)
        return range(min(r.start for r in ranges), max(r.stop for r in ranges))
