"""Deterministic synthetic scenes: ground truth, detections, masks, warps, correspondences.

Random draws come from SplitMix64, defined by its recurrence so that any
implementation reproduces the same fixtures::

    state = (state + 0x9E3779B97F4A7C15) mod 2**64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2**64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) mod 2**64
    output z ^ (z >> 31)

A uniform in [0, 1) is ``(output >> 11) * 2**-53``. A standard normal uses
Box-Muller on two uniforms, ``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)``.

Objects live in world coordinates; the camera maps world to image by a
zoom about the image center followed by a pan. Occlusion uses the
painter's rule: nearer objects (smaller depth) hide farther ones.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np

from .geometry import BoundingBox
from .maskops import MaskBitmap
from .motion import Correspondence, WarpMatrix

if TYPE_CHECKING:
    from .pipeline import SequenceInputs
    from .providers import GroundTruth

_MASK64 = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed: int):
        self.state = int(seed) & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def normal(self) -> float:
        u1, u2 = self.uniform(), self.uniform()
        return math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)


@dataclass(frozen=True)
class Trajectory:
    """Center path of an object in world pixels.

    ``linear``: ``start + velocity * (t - first_frame)``.
    ``circular``: around ``center`` with ``radius``, ``period`` frames per turn, ``phase`` radians.
    ``waypoints``: piecewise-linear through ``(frame, cx, cy)``, held constant outside.
    """

    kind: str
    start: tuple[float, float] = (0.0, 0.0)
    velocity: tuple[float, float] = (0.0, 0.0)
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 0.0
    period: float = 1.0
    phase: float = 0.0
    waypoints: tuple[tuple[float, float, float], ...] = ()

    def __post_init__(self):
        if self.kind not in ("linear", "crossing", "circular", "waypoints"):
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        if self.kind == "waypoints" and not self.waypoints:
            raise ValueError("waypoint trajectory needs at least one waypoint")
        object.__setattr__(self, "waypoints", tuple(tuple(map(float, w)) for w in self.waypoints))

    def at(self, t: int) -> tuple[float, float]:
        if self.kind in ("linear", "crossing"):
            k = t - 1
            return self.start[0] + self.velocity[0] * k, self.start[1] + self.velocity[1] * k
        if self.kind == "circular":
            ang = self.phase + 2.0 * math.pi * (t - 1) / self.period
            return self.center[0] + self.radius * math.cos(ang), self.center[1] + self.radius * math.sin(ang)
        wp = self.waypoints
        if t <= wp[0][0]:
            return wp[0][1], wp[0][2]
        for (f0, x0, y0), (f1, x1, y1) in zip(wp, wp[1:]):
            if t <= f1:
                a = (t - f0) / (f1 - f0)
                return x0 + a * (x1 - x0), y0 + a * (y1 - y0)
        return wp[-1][1], wp[-1][2]


@dataclass(frozen=True)
class ObjectSpec:
    shape: str                      # "rect" or "ellipse"
    size: tuple[float, float]       # world width, height
    depth: float                    # smaller is nearer the camera
    trajectory: Trajectory
    first_frame: int = 1
    last_frame: Optional[int] = None

    def __post_init__(self):
        if self.shape not in ("rect", "ellipse"):
            raise ValueError(f"unknown shape {self.shape!r}")
        if not (self.size[0] > 0 and self.size[1] > 0):
            raise ValueError("object size must be positive")


@dataclass(frozen=True)
class Noise:
    jitter_std: float = 0.0
    dropout: float = 0.0
    score_offset: float = 0.6
    score_slope: float = 0.4
    conf_floor: float = 0.4              # mask confidence = floor + (1 - floor) * visible fraction
    detect_min_visibility: float = 0.05  # below this an object is neither detected nor evaluated


@dataclass(frozen=True)
class Camera:
    """Pan (image px per frame) and zoom (factor per frame) active on frames ``start..end``."""

    pan: tuple[float, float] = (0.0, 0.0)
    zoom: float = 1.0
    start: int = 2
    end: Optional[int] = None


@dataclass(frozen=True)
class MaskFault:
    """Corrupts one object's oracle mask on frames ``first..last``.

    ``leak``: the mask also covers the object ``other``'s silhouette.
    ``lowconf``: mean confidence forced to ``value``.
    ``residue``: only a ``value``-sized square at the mask's top-left corner survives.
    ``drop``: no mask.
    """

    obj: int
    kind: str
    first: int
    last: int
    other: int = 0
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("leak", "lowconf", "residue", "drop"):
            raise ValueError(f"unknown mask fault {self.kind!r}")


@dataclass(frozen=True)
class Scenario:
    name: str
    image_size: tuple[int, int]
    frames: int
    objects: tuple[ObjectSpec, ...]
    noise: Noise = Noise()
    camera: Camera = Camera()
    faults: tuple[MaskFault, ...] = ()
    seed: int = 0
    correspondences: int = 40
    corr_outliers: float = 0.3
    tags: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "Scenario":
        objs = tuple(ObjectSpec(o["shape"], tuple(o["size"]), o["depth"],
                                Trajectory(**{k: (tuple(v) if isinstance(v, list) else v)
                                              for k, v in o["trajectory"].items()}),
                                o.get("first_frame", 1), o.get("last_frame"))
                     for o in d["objects"])
        cam = d.get("camera", {})
        return cls(d["name"], tuple(d["image_size"]), int(d["frames"]), objs,
                   Noise(**d.get("noise", {})),
                   Camera(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in cam.items()}),
                   tuple(MaskFault(**f) for f in d.get("faults", [])), int(d.get("seed", 0)),
                   int(d.get("correspondences", 40)), float(d.get("corr_outliers", 0.3)),
                   tuple(d.get("tags", ())))


def _camera_params(cam: Camera, t: int) -> tuple[float, float, float]:
    """Cumulative (zoom, pan x, pan y) at frame ``t``."""
    last = t if cam.end is None else min(t, cam.end)
    steps = max(0, last - cam.start + 1)
    return cam.zoom ** steps, cam.pan[0] * steps, cam.pan[1] * steps


def camera_matrix(s: Scenario, t: int) -> WarpMatrix:
    """World to image at frame ``t``: zoom about the image center, then pan."""
    z, px, py = _camera_params(s.camera, t)
    ox, oy = s.image_size[0] / 2.0, s.image_size[1] / 2.0
    return WarpMatrix(z, 0.0, ox - z * ox - px, 0.0, z, oy - z * oy - py)


def frame_warp(s: Scenario, t: int) -> WarpMatrix:
    """Image at ``t - 1`` to image at ``t``."""
    return camera_matrix(s, t).compose(camera_matrix(s, t - 1).inverse())


def _canon(v: float) -> float:
    # same as a canonical write/read of a 1-based coordinate
    s = ("%.6f" % (v + 1.0)).rstrip("0").rstrip(".")
    return float(s) - 1.0


def _canon_len(v: float) -> float:
    return float(("%.6f" % v).rstrip("0").rstrip("."))


@dataclass
class GeneratedScene:
    scenario: Scenario
    gt_boxes: dict[int, dict[int, BoundingBox]]       # frame -> object id -> box (image)
    visibility: dict[int, dict[int, float]]           # frame -> object id -> visible fraction
    detections: dict[int, list[tuple[BoundingBox, float]]]
    warps: dict[int, WarpMatrix]
    correspondences: dict[int, list[Correspondence]]
    _silhouettes: dict[int, dict[int, MaskBitmap]] = field(default_factory=dict, repr=False)
    _visible: dict[int, dict[int, np.ndarray]] = field(default_factory=dict, repr=False)

    @property
    def frame_range(self) -> range:
        return range(1, self.scenario.frames + 1)

    def boxes(self, t: int) -> dict[int, BoundingBox]:
        return self.gt_boxes.get(t, {})

    def visible_array(self, t: int, obj: int) -> Optional[np.ndarray]:
        return self._visible.get(t, {}).get(obj)

    def silhouettes(self, t: int) -> dict[int, MaskBitmap]:
        """Oracle masks of frame ``t`` keyed by object id, faults applied; empty ones omitted."""
        if t in self._silhouettes:
            return self._silhouettes[t]
        s = self.scenario
        W, H = s.image_size
        vis = self._visible.get(t, {})
        out = {}
        for obj, arr in vis.items():
            vf = self.visibility[t][obj]
            conf = min(1.0, max(0.0, s.noise.conf_floor + (1.0 - s.noise.conf_floor) * vf))
            mask = arr
            for f in s.faults:
                if f.obj != obj or not f.first <= t <= f.last:
                    continue
                if f.kind == "drop":
                    mask = None
                elif f.kind == "lowconf":
                    conf = f.value
                elif f.kind == "leak" and f.other in vis:
                    mask = mask | vis[f.other]
                elif f.kind == "residue":
                    ys, xs = np.nonzero(mask)
                    keep = np.zeros_like(mask)
                    if len(xs):
                        k = int(f.value)
                        x0, y0 = xs.min(), ys.min()
                        keep[y0:y0 + k, x0:x0 + k] = mask[y0:y0 + k, x0:x0 + k]
                    mask = keep
                if mask is None:
                    break
            if mask is None or not mask.any():
                continue
            out[obj] = MaskBitmap.from_array(mask, round(conf, 6))
        self._silhouettes[t] = out
        return out


def _raster(shape: str, box: BoundingBox) -> tuple[int, int, np.ndarray]:
    """Silhouette pixels of an object on its own grid: (x0, y0, bool array)."""
    x0, y0 = math.floor(box.x + 0.5), math.floor(box.y + 0.5)
    x1, y1 = math.floor(box.x + box.w + 0.5), math.floor(box.y + box.h + 0.5)
    w, h = max(x1 - x0, 1), max(y1 - y0, 1)
    if shape == "rect":
        return x0, y0, np.ones((h, w), bool)
    cx, cy = box.x + box.w / 2.0, box.y + box.h / 2.0
    px = np.arange(x0, x0 + w) + 0.5
    py = np.arange(y0, y0 + h) + 0.5
    inside = ((px[None, :] - cx) / (box.w / 2.0)) ** 2 + ((py[:, None] - cy) / (box.h / 2.0)) ** 2 <= 1.0
    return x0, y0, inside


def generate(s: Scenario) -> GeneratedScene:
    W, H = s.image_size
    rng = SplitMix64(s.seed)
    gt_boxes, visibility, dets, visible = {}, {}, {}, {}
    order = sorted(range(len(s.objects)), key=lambda k: (s.objects[k].depth, k))
    for t in range(1, s.frames + 1):
        cam = camera_matrix(s, t)
        z = math.sqrt(abs(cam.det))
        boxes = {}
        for k, o in enumerate(s.objects):
            if t < o.first_frame or (o.last_frame is not None and t > o.last_frame):
                continue
            cx, cy = cam.apply(o.trajectory.at(t))[0]
            w, h = o.size[0] * z, o.size[1] * z
            b = BoundingBox(_canon(cx - w / 2.0), _canon(cy - h / 2.0), _canon_len(w), _canon_len(h))
            if b.x2 <= 0 or b.y2 <= 0 or b.x >= W or b.y >= H:
                continue  # outside the image
            boxes[k + 1] = b
        occupied = np.zeros((H, W), bool)
        frame_vis, frame_masks = {}, {}
        for k in order:
            obj = k + 1
            if obj not in boxes:
                continue
            x0, y0, sil = _raster(s.objects[k].shape, boxes[obj])
            full = int(sil.sum())
            canvas = np.zeros((H, W), bool)
            ya, yb = max(y0, 0), min(y0 + sil.shape[0], H)
            xa, xb = max(x0, 0), min(x0 + sil.shape[1], W)
            if ya < yb and xa < xb:
                canvas[ya:yb, xa:xb] = sil[ya - y0:yb - y0, xa - x0:xb - x0]
            vis = canvas & ~occupied
            occupied |= canvas
            frame_vis[obj] = round(int(vis.sum()) / full, 6) if full else 0.0
            frame_masks[obj] = vis
        gt_boxes[t], visibility[t], visible[t] = boxes, frame_vis, frame_masks

        frame_dets = []
        for k, o in enumerate(s.objects):
            obj = k + 1
            # draws are consumed for every object and frame so streams stay aligned
            jit = [rng.normal() for _ in range(4)]
            u = rng.uniform()
            if obj not in boxes:
                continue
            vf = frame_vis[obj]
            if vf < s.noise.detect_min_visibility or vf == 0.0 or u < s.noise.dropout:
                continue
            b = boxes[obj]
            sd = s.noise.jitter_std
            box = BoundingBox(_canon(b.x + sd * jit[0]), _canon(b.y + sd * jit[1]),
                              _canon_len(max(1.0, b.w + sd * jit[2])),
                              _canon_len(max(1.0, b.h + sd * jit[3])))
            score = min(1.0, max(0.0, s.noise.score_offset + s.noise.score_slope * vf))
            frame_dets.append((box, _canon_len(score)))
        dets[t] = frame_dets

    warps, corr = {}, {}
    crng = SplitMix64(s.seed ^ 0x5DEECE66D)
    anchors = [(crng.uniform() * W * 1.6 - 0.3 * W, crng.uniform() * H * 1.6 - 0.3 * H)
               for _ in range(s.correspondences)]
    for t in range(2, s.frames + 1):
        w = frame_warp(s, t)
        if not w.is_identity():
            warps[t] = w
        prev, cur = camera_matrix(s, t - 1), camera_matrix(s, t)
        rows = []
        for p in anchors:
            a, b = prev.apply(p)[0], cur.apply(p)[0]
            out = crng.uniform() < s.corr_outliers
            dx = (20.0 + 80.0 * crng.uniform()) * (1 if crng.uniform() < 0.5 else -1)
            dy = (20.0 + 80.0 * crng.uniform()) * (1 if crng.uniform() < 0.5 else -1)
            if not (0 <= a[0] < W and 0 <= a[1] < H and 0 <= b[0] < W and 0 <= b[1] < H):
                continue
            if out:
                b = (b[0] + dx, b[1] + dy)
            rows.append(Correspondence((float(a[0]), float(a[1])), (float(b[0]), float(b[1]))))
        corr[t] = rows
    return GeneratedScene(s, gt_boxes, visibility, dets, warps, corr, _visible=visible)


# ------------------------------------------------------------------ the suite

def _lin(x, y, vx=0.0, vy=0.0) -> Trajectory:
    return Trajectory("linear", start=(x, y), velocity=(vx, vy))


def _way(*pts) -> Trajectory:
    return Trajectory("waypoints", waypoints=tuple(pts))


def _obj(w, h, depth, traj, shape="rect", first=1, last=None) -> ObjectSpec:
    return ObjectSpec(shape, (w, h), depth, traj, first, last)


def bundled_suite() -> list[Scenario]:
    """The fixed evaluation scenes, in a stable order."""
    S = (320, 240)
    trap = (
        _obj(30, 60, 1, _way((1, 60, 114), (20, 150, 114), (40, 60, 114))),
        _obj(30, 60, 2, _way((1, 240, 126), (20, 150, 126), (40, 240, 126))),
    )
    scenes = [
        Scenario("linear-3", S, 40, (
            _obj(30, 60, 1, _lin(40, 60, 2.0, 0.5)),
            _obj(30, 60, 2, _lin(160, 150, -1.5, 0.0)),
            _obj(24, 48, 3, _lin(260, 60, 0.0, 1.5)),
        ), seed=1, tags=("clean",)),
        Scenario("parallel-lanes", S, 50, (
            _obj(28, 56, 1, _lin(20, 50, 3.0, 0.0)),
            _obj(28, 56, 2, _lin(300, 120, -3.0, 0.0)),
            _obj(28, 56, 3, _lin(20, 190, 2.5, 0.0)),
        ), seed=2, tags=("clean",)),
        Scenario("circular-2", S, 60, (
            _obj(26, 52, 1, Trajectory("circular", center=(90, 120), radius=45, period=40)),
            _obj(26, 52, 2, Trajectory("circular", center=(235, 120), radius=45, period=50, phase=1.0),
                 shape="ellipse"),
        ), seed=3, tags=("clean",)),
        Scenario("jitter-5", S, 50, (
            _obj(30, 60, 1, _lin(30, 40, 2.0, 0.3)),
            _obj(30, 60, 2, _lin(290, 60, -2.0, 0.2)),
            _obj(30, 60, 3, _lin(100, 170, 1.0, -0.4)),
            _obj(30, 60, 4, _lin(220, 170, -1.0, -0.4)),
            _obj(24, 48, 5, _lin(160, 40, 0.0, 1.2)),
        ), noise=Noise(jitter_std=1.0), seed=4),
        # two walkers meet, overlap and turn back; constant-velocity
        # prediction carries each box onto the other's detection
        Scenario("id-swap-trap", S, 40, trap, seed=7, tags=("crossing", "trap")),
        Scenario("id-swap-trap-vertical", S, 40, (
            _obj(60, 30, 1, _way((1, 154, 40), (20, 154, 120), (40, 154, 40))),
            _obj(60, 30, 2, _way((1, 166, 200), (20, 166, 120), (40, 166, 200))),
        ), seed=9, tags=("crossing", "trap")),
        # a walker stops behind a bystander for a while, then leaves
        Scenario("long-occlusion", S, 60, (
            _obj(30, 60, 1, _way((1, 40, 120), (20, 140, 120), (26, 160, 120), (40, 160, 120),
                                 (60, 300, 120))),
            _obj(30, 60, 2, _lin(160, 120, 0.0, 0.0)),
        ), seed=8, tags=("occlusion",)),
        Scenario("long-occlusion-dropout", S, 70, (
            _obj(32, 64, 1, _way((1, 30, 120), (22, 140, 120), (28, 165, 120), (45, 165, 120),
                                 (70, 310, 120))),
            _obj(30, 60, 2, _lin(165, 122, 0.0, 0.0)),
            _obj(26, 52, 3, _lin(40, 40, 3.0, 0.0)),
        ), noise=Noise(dropout=0.1), seed=10, tags=("occlusion",)),
        Scenario("crossing-pass", S, 50, (
            _obj(30, 60, 1, _lin(40, 100, 4.0, 0.0)),
            _obj(30, 60, 2, _lin(280, 140, -4.0, 0.0)),
        ), seed=5, tags=("crossing",)),
        Scenario("crossing-ellipse", S, 50, (
            _obj(34, 64, 1, _lin(30, 150, 5.0, -0.8), shape="ellipse"),
            _obj(34, 64, 2, _lin(290, 110, -5.0, 0.6), shape="ellipse"),
        ), seed=6, tags=("crossing",)),
        Scenario("crowd-occlusion", S, 60, (
            _obj(30, 60, 1, _lin(20, 120, 5.0, 0.0)),
            _obj(30, 60, 2, _lin(120, 118, 0.3, 0.0)),
            _obj(30, 60, 3, _lin(170, 124, -0.3, 0.0)),
            _obj(30, 60, 4, _lin(220, 121, 0.2, 0.0)),
        ), seed=11, tags=("occlusion",)),
        Scenario("ambiguity-cluster", S, 50, (
            _obj(30, 60, 1, _way((1, 120, 120), (25, 150, 118), (50, 120, 122))),
            _obj(30, 60, 2, _way((1, 150, 126), (25, 128, 124), (50, 152, 126))),
            _obj(30, 60, 3, _way((1, 180, 116), (25, 168, 126), (50, 184, 116))),
        ), seed=12, tags=("crossing",)),
        Scenario("pan-right", S, 50, (
            _obj(30, 60, 1, _lin(80, 100, 1.0, 0.0)),
            _obj(30, 60, 2, _lin(200, 140, -1.0, 0.0)),
        ), camera=Camera(pan=(2.0, 0.0)), seed=13, tags=("camera",)),
        Scenario("zoom-in", S, 40, (
            _obj(20, 40, 1, _lin(110, 100, 0.0, 0.0)),
            _obj(20, 40, 2, _lin(210, 130, 0.0, 0.0)),
        ), camera=Camera(zoom=1.02), seed=15, tags=("camera",)),
        Scenario("pan-zoom-crossing", S, 50, (
            _obj(26, 52, 1, _lin(80, 110, 2.5, 0.0)),
            _obj(26, 52, 2, _lin(240, 126, -2.5, 0.0)),
        ), camera=Camera(pan=(1.5, 0.5), zoom=1.005), seed=16, tags=("camera", "crossing")),
        # one-frame camera jerk wider than a box: each prediction lands on its
        # neighbour's detection unless the warp is compensated
        Scenario("camera-jerk", S, 40, tuple(
            _obj(30, 60, k, _lin(60 + 34 * k, 90 + 8 * (k % 2), 0.0, 0.0)) for k in range(1, 6)),
            camera=Camera(pan=(40.0, 0.0), start=20, end=20), seed=17, tags=("camera",)),
        Scenario("camera-jerk-vertical", S, 40, tuple(
            _obj(60, 30, k, _lin(120 + 8 * (k % 2), 30 + 34 * k, 0.0, 0.0)) for k in range(1, 5)),
            camera=Camera(pan=(0.0, -40.0), start=15, end=15), seed=18, tags=("camera",)),
        Scenario("mask-leak", S, 40, trap,
                 faults=(MaskFault(1, "leak", 12, 30, other=2),), seed=19, tags=("fault",)),
        # correct masks reported with low confidence: the confidence gate
        # discards a cue that would have helped
        Scenario("mask-lowconf", S, 40, trap, faults=(
            MaskFault(1, "lowconf", 12, 30, value=0.3),
            MaskFault(2, "lowconf", 12, 30, value=0.3)), seed=20, tags=("fault",)),
        Scenario("mask-residue-drop", S, 40, trap, faults=(
            MaskFault(1, "residue", 12, 30, value=6),
            MaskFault(2, "drop", 12, 30)), seed=21, tags=("fault",)),
    ]
    return scenes


def scene_manifest(scene: GeneratedScene) -> dict:
    s = scene.scenario
    return {
        "name": s.name,
        "image_size": list(s.image_size),
        "frames": [1, s.frames],
        "scenario": s.to_json(),
    }


def scene_inputs(scene: GeneratedScene, masks: str = "oracle") -> "SequenceInputs":
    """Tracker inputs for a generated scene; ``masks`` is ``"oracle"`` or ``"none"``."""
    from .pipeline import NoMasks, SequenceInputs
    from .providers import OracleMaskSource

    src = OracleMaskSource(scene.boxes, scene.silhouettes) if masks == "oracle" else NoMasks()
    return SequenceInputs(
        frames=scene.frame_range,
        detections=lambda t: list(scene.detections.get(t, [])),
        masks=src,
        warps=lambda t: scene.warps.get(t, WarpMatrix()),
    )


def bake_masks(scene: GeneratedScene) -> dict:
    """Masks served to a reference McByte run, in that run's slot layout."""
    from .pipeline import PipelineConfig, Variant, run_sequence

    inputs = scene_inputs(scene)
    run_sequence(inputs, PipelineConfig(variant=Variant.MCBYTE))
    return {t: ms for t, ms in inputs.masks.served.items() if len(ms)}


def gt_of(scene: GeneratedScene) -> "GroundTruth":
    from .providers import GroundTruth, GtRow

    gt = GroundTruth()
    floor = scene.scenario.noise.detect_min_visibility
    for t in scene.frame_range:
        rows = []
        for obj, box in sorted(scene.boxes(t).items()):
            vf = scene.visibility[t][obj]
            evaluable = vf > 0.0 and vf >= floor
            rows.append(GtRow(obj, box, 1.0 if evaluable else 0.0, 1, vf))
        if rows:
            gt.frames[t] = rows
    return gt


def write_scene(scene: GeneratedScene, directory) -> Path:
    """Write det, gt, masks, warp, correspondence files and a manifest into ``directory``."""
    from . import providers as pv

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    pv.write_detections(d / pv.DET_FILE, scene.detections)
    pv.write_gt(d / pv.GT_FILE, gt_of(scene))
    pv.write_masks(d / pv.MASK_FILE, scene.scenario.image_size, bake_masks(scene))
    pv.write_warps(d / pv.WARP_FILE, scene.warps)
    pv.write_correspondences(d / pv.CORR_FILE, scene.correspondences)
    text = json.dumps(scene_manifest(scene), indent=2, sort_keys=True) + "\n"
    pv._atomic_write(d / pv.MANIFEST_FILE, text)
    return d


def write_suite(directory, scenarios: Optional[Sequence[Scenario]] = None) -> list[Path]:
    scenarios = bundled_suite() if scenarios is None else scenarios
    return [write_scene(generate(s), Path(directory) / s.name) for s in scenarios]


@lru_cache(maxsize=64)
def _generate_cached(text: str) -> GeneratedScene:
    return generate(Scenario.from_json(json.loads(text)))


def scene_from_manifest(manifest: dict) -> GeneratedScene:
    """Regenerate a scene from the scenario stored in its manifest."""
    if "scenario" not in manifest:
        raise ValueError("manifest carries no scenario; oracle masks need a synthetic scene")
    return _generate_cached(json.dumps(manifest["scenario"], sort_keys=True))
