"""Per-frame tracking step and whole-sequence driver.

Each frame runs: predict, optional camera-motion compensation, association of
confident detections with Active and Lost tracklets, association of weak
detections with the remaining Active tracklets, confirmation of Tentative
tracklets, spawning, state update, and finally the mask-management messages
that tell the mask source which masks to create or purge.
"""
from __future__ import annotations

import dataclasses
import enum
import logging
import sys
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .assignment import (
    Assignment, CostMatrix, Gate, MaskCueConfig, Scope, build_iou_costs, detect_ambiguity,
    fuse_mask_cue, mark_feasible, mask_ratios, solve,
)
from .errors import ConfigError, McByteError, OutOfOrderFrame, ProviderMismatch
from .geometry import BoundingBox, BufferScales
from .lifecycle import (
    SlotTable, TrackState, Tracklet, WaitingList, request_mask_creation, step_states,
)
from .maskops import MaskBitmap, MaskSet, is_visible
from .motion import WarpMatrix, apply_warp, kf_init, kf_predict, kf_update

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

log = logging.getLogger(__name__)


class Variant(enum.Enum):
    BASELINE = "Baseline"
    A1 = "A1"
    A2 = "A2"
    A3 = "A3"
    A4 = "A4"
    A5 = "A5"
    A6 = "A6"
    MCBYTE = "McByte"
    CBIOU = "CBIoU"

    @classmethod
    def parse(cls, text: str) -> "Variant":
        for v in cls:
            if v.value.lower() == str(text).strip().lower():
                return v
        raise ConfigError(f"unknown variant {text!r}; expected one of {[v.value for v in cls]}")


ALL_VARIANTS = tuple(Variant)

# max_age per benchmark for the buffered-IoU comparison runs
MAX_AGE_PRESETS = {"dancetrack": 100, "soccernet": 60, "mot17": 60}


@dataclass(frozen=True)
class PipelineConfig:
    det_high_threshold: float = 0.6
    init_threshold_delta: float = 0.1
    match_threshold_stage1: float = 0.8
    match_threshold_stage2: float = 0.5
    mask_cfg: MaskCueConfig = MaskCueConfig()
    variant: Variant = Variant.MCBYTE
    cmc_enabled: Optional[bool] = None  # None: on for McByte only
    max_age: int = 30
    buffer_scales: BufferScales = BufferScales()
    fusion_in_stage2: bool = True
    seed: int = 0
    det_low_threshold: float = 0.1
    match_threshold_unconfirmed: float = 0.7
    occlusion_iou_max: float = 0.7
    backfill_tentative: bool = True
    ransac_iterations: int = 200
    ransac_inlier_tol: float = 3.0

    def __post_init__(self):
        if isinstance(self.variant, str):
            object.__setattr__(self, "variant", Variant.parse(self.variant))
        for name in ("det_high_threshold", "init_threshold_delta", "match_threshold_stage1",
                     "match_threshold_stage2", "det_low_threshold",
                     "match_threshold_unconfirmed", "occlusion_iou_max"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if self.max_age < 0:
            raise ConfigError("max_age must be >= 0")
        if self.variant is Variant.MCBYTE and self.cmc_enabled is False:
            raise ConfigError("variant McByte requires cmc_enabled")

    @property
    def uses_cmc(self) -> bool:
        if self.cmc_enabled is None:
            return self.variant is Variant.MCBYTE
        return self.cmc_enabled

    @property
    def init_threshold(self) -> float:
        return self.det_high_threshold + self.init_threshold_delta

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        """Flat key/value view, the same shape the config file uses."""
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.name == "mask_cfg":
                out.update(confidence_min=v.confidence_min, mm2_min=v.mm2_min, mm1_min=v.mm1_min)
            elif f.name == "buffer_scales":
                out.update(buffer_b1=v.b1, buffer_b2=v.b2)
            elif f.name == "variant":
                out["variant"] = v.value
            elif f.name == "cmc_enabled":
                out["cmc_enabled"] = self.uses_cmc
            else:
                out[f.name] = v
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        data = dict(data)
        mask_keys = {"confidence_min", "mm2_min", "mm1_min"}
        buffer_keys = {"buffer_b1": "b1", "buffer_b2": "b2"}
        plain = {f.name for f in dataclasses.fields(cls)} - {"mask_cfg", "buffer_scales"}
        unknown = sorted(set(data) - plain - mask_keys - set(buffer_keys))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        kwargs = {k: data[k] for k in plain if k in data}
        try:
            defaults = MaskCueConfig()
            kwargs["mask_cfg"] = MaskCueConfig(**{k: data.get(k, getattr(defaults, k))
                                                  for k in mask_keys})
            bdef = BufferScales()
            kwargs["buffer_scales"] = BufferScales(**{v: data.get(k, getattr(bdef, v))
                                                      for k, v in buffer_keys.items()})
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        nested = [k for k, v in data.items() if isinstance(v, dict)]
        if nested:
            raise ConfigError(f"{path}: config is flat; unexpected tables {nested}")
        return cls.from_dict(data)


@dataclass(frozen=True)
class AssociationPolicy:
    """How one variant scores tracklet/detection pairs."""

    cost: str              # "iou", "mask" (A1), "mask_or_iou" (A2), "buffered" (cascade)
    gates: Optional[Gate]  # mask-cue conditions applied on ambiguous pairs, None for no fusion
    cmc: bool = False

    @property
    def uses_masks(self) -> bool:
        return self.cost in ("mask", "mask_or_iou") or self.gates is not None


_GATES = {
    Variant.A3: Gate.VISIBLE,
    Variant.A4: Gate.VISIBLE | Gate.CONFIDENT,
    Variant.A5: Gate.VISIBLE | Gate.CONFIDENT | Gate.FILL,
    Variant.A6: Gate.ALL,
    Variant.MCBYTE: Gate.ALL,
}


def variant_behavior(variant: Variant) -> AssociationPolicy:
    variant = Variant.parse(variant) if isinstance(variant, str) else variant
    if variant is Variant.BASELINE:
        return AssociationPolicy("iou", None)
    if variant is Variant.A1:
        return AssociationPolicy("mask", None)
    if variant is Variant.A2:
        return AssociationPolicy("mask_or_iou", None)
    if variant is Variant.CBIOU:
        return AssociationPolicy("buffered", None)
    return AssociationPolicy("iou", _GATES[variant], cmc=variant is Variant.MCBYTE)


@dataclass
class FrameBundle:
    frame_index: int
    detections: list[tuple[BoundingBox, float]] = field(default_factory=list)
    masks: Optional[MaskSet] = None
    warp: WarpMatrix = WarpMatrix()


@dataclass(frozen=True)
class TrackRecord:
    frame_index: int
    track_id: int
    box: BoundingBox
    score: float


@dataclass
class MaskManagementMessages:
    """Instructions for the mask source, valid from the next frame on.

    ``create`` lists ``(tracklet id, current box)`` in slot order: each entry
    is appended after the existing slots. ``purge`` lists tracklet ids whose
    masks are dropped afterwards, shifting later slots down.
    """

    frame_index: int
    create: list[tuple[int, BoundingBox]] = field(default_factory=list)
    purge: list[int] = field(default_factory=list)

    def is_empty(self) -> bool:
        return not self.create and not self.purge


@dataclass
class TrackerState:
    tracklets: list[Tracklet] = field(default_factory=list)
    next_id: int = 1
    last_frame: Optional[int] = None
    slots: SlotTable = field(default_factory=SlotTable)
    waiting: WaitingList = field(default_factory=WaitingList)
    # frame/box/score of each Tentative tracklet's birth, for backfilling
    births: dict[int, tuple[int, BoundingBox, float]] = field(default_factory=dict)


def _mask_costs(masks: Sequence[Optional[MaskBitmap]], dets: Sequence[BoundingBox],
                fallback: Optional[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Cost ``1 - mm2`` where the tracklet mask is visible.

    Without a visible mask the pair is unusable, or takes the IoU cost from
    ``fallback`` when one is given.
    """
    n, m = len(masks), len(dets)
    cost = np.ones((n, m))
    usable = np.zeros((n, m), dtype=bool)
    for i, mask in enumerate(masks):
        if is_visible(mask):
            for j, d in enumerate(dets):
                cost[i, j] = 1.0 - mask_ratios(mask, d)[1]
            usable[i] = True
        elif fallback is not None:
            cost[i] = fallback[i]
            usable[i] = True
    return cost, usable


def associate(tracks: Sequence[Tracklet], boxes: Sequence[BoundingBox],
              dets: Sequence[BoundingBox], masks: Sequence[Optional[MaskBitmap]],
              threshold: float, policy: AssociationPolicy, cfg: PipelineConfig,
              use_masks: bool = True) -> Assignment:
    """Match predicted ``boxes`` of ``tracks`` to ``dets`` under ``policy``."""
    n, m = len(boxes), len(dets)
    if n == 0 or m == 0:
        return Assignment([], list(range(n)), list(range(m)))
    if policy.cost == "buffered":
        return _cascade(boxes, dets, threshold, cfg.buffer_scales)
    if use_masks and policy.cost in ("mask", "mask_or_iou"):
        fallback = build_iou_costs(boxes, dets).cost if policy.cost == "mask_or_iou" else None
        cost, usable = _mask_costs(masks, dets, fallback)
        return solve(CostMatrix(cost, usable & (cost <= threshold)))
    c = mark_feasible(build_iou_costs(boxes, dets), threshold)
    if use_masks and policy.gates is not None:
        c = fuse_mask_cue(c, detect_ambiguity(c), masks, dets, cfg.mask_cfg,
                          Scope.AMBIGUOUS_ONLY, policy.gates)
    return solve(c)


def _cascade(boxes, dets, threshold, scales: BufferScales) -> Assignment:
    """Match with the small buffer, then retry the leftovers with the large one."""
    first = solve(mark_feasible(build_iou_costs(boxes, dets, scales.b1), threshold))
    rows, cols = first.unmatched_tracklets, first.unmatched_detections
    pairs = list(first.pairs)
    if rows and cols:
        sub = build_iou_costs([boxes[i] for i in rows], [dets[j] for j in cols], scales.b2)
        second = solve(mark_feasible(sub, threshold))
        pairs += [(rows[a], cols[b]) for a, b in second.pairs]
    pairs.sort()
    used_r = {i for i, _ in pairs}
    used_c = {j for _, j in pairs}
    return Assignment(pairs, [i for i in range(len(boxes)) if i not in used_r],
                      [j for j in range(len(dets)) if j not in used_c])


def step(state: TrackerState, bundle: FrameBundle,
         cfg: PipelineConfig) -> tuple[TrackerState, list[TrackRecord], MaskManagementMessages]:
    """Advance the tracker by one frame. ``state`` is updated in place and returned."""
    t = bundle.frame_index
    if state.last_frame is not None and t != state.last_frame + 1:
        raise OutOfOrderFrame(f"expected frame {state.last_frame + 1}, got {t}")
    policy = variant_behavior(cfg.variant)
    masks = bundle.masks if bundle.masks is not None else MaskSet(t)
    if masks.max_slot >= len(state.slots):
        raise ProviderMismatch(
            f"frame {t}: mask slot {masks.max_slot} given but only {len(state.slots)} masks are live")

    live = [tr for tr in state.tracklets if tr.is_live]
    for tr in live:
        if tr.state is not TrackState.ACTIVE:
            tr.kalman.mean[7] = 0.0  # no height drift while unobserved
        tr.kalman = kf_predict(tr.kalman)
        if cfg.uses_cmc and not bundle.warp.is_identity():
            tr.kalman = apply_warp(tr.kalman, bundle.warp)

    dets = [(b, min(max(float(s), 0.0), 1.0)) for b, s in bundle.detections]
    high = [k for k, (_, s) in enumerate(dets) if s >= cfg.det_high_threshold]
    low = [k for k, (_, s) in enumerate(dets) if cfg.det_low_threshold <= s < cfg.det_high_threshold]

    def mask_of(tr: Tracklet) -> Optional[MaskBitmap]:
        return masks.get(state.slots.slot_of(tr.id))

    matched: dict[int, int] = {}  # tracklet id -> detection index

    def run_stage(tracks, det_idx, threshold, use_masks):
        boxes = [tr.kalman.to_box() for tr in tracks]
        a = associate(tracks, boxes, [dets[k][0] for k in det_idx], [mask_of(tr) for tr in tracks],
                      threshold, policy, cfg, use_masks)
        for i, j in a.pairs:
            matched[tracks[i].id] = det_idx[j]
        return [tracks[i] for i in a.unmatched_tracklets], [det_idx[j] for j in a.unmatched_detections]

    confirmed = [tr for tr in live if tr.state in (TrackState.ACTIVE, TrackState.LOST)]
    left_tracks, left_high = run_stage(confirmed, high, cfg.match_threshold_stage1, True)
    still_active = [tr for tr in left_tracks if tr.state is TrackState.ACTIVE]
    run_stage(still_active, low, cfg.match_threshold_stage2, cfg.fusion_in_stage2)
    tentative = [tr for tr in live if tr.state is TrackState.TENTATIVE]
    _, left_high = run_stage(tentative, left_high, cfg.match_threshold_unconfirmed, True)

    by_id = {tr.id: tr for tr in live}
    records: list[TrackRecord] = []
    for tid, k in matched.items():
        tr = by_id[tid]
        box, score = dets[k]
        tr.kalman = kf_update(tr.kalman, box)
        tr.last_box, tr.score = box, score
        if tr.state is TrackState.TENTATIVE and cfg.backfill_tentative and tid in state.births:
            bf, bbox, bscore = state.births[tid]
            records.append(TrackRecord(bf, tid, bbox, bscore))
    step_states(live, set(matched), cfg.max_age)
    for tr in live:
        state.births.pop(tr.id, None)  # every older Tentative is resolved by now

    born = []
    for k in left_high:
        box, score = dets[k]
        if score < cfg.init_threshold:
            continue
        tr = Tracklet(state.next_id, TrackState.TENTATIVE, kf_init(box), box, score, 0, None, t)
        state.next_id += 1
        state.births[tr.id] = (t, box, score)
        born.append(tr)

    records += [TrackRecord(t, tr.id, tr.last_box, tr.score)
                for tr in live if tr.state is TrackState.ACTIVE and tr.frames_since_update == 0]
    records.sort(key=lambda r: (r.frame_index, r.track_id))

    msgs = _mask_messages(state, live, born, t, cfg)
    state.tracklets = [tr for tr in live if tr.is_live] + born
    state.last_frame = t
    return state, records, msgs


def _mask_messages(state: TrackerState, live, born, t, cfg) -> MaskManagementMessages:
    removed = [tr.id for tr in live if tr.state is TrackState.REMOVED]
    purge = [tid for tid in removed if tid in state.slots]
    state.waiting.discard(removed)

    present = [(tr.id, tr.last_box) for tr in live + born
               if tr.state in (TrackState.ACTIVE, TrackState.TENTATIVE)]
    by_id = {tr.id: tr for tr in live + born}
    # waiting tracklets that are currently Lost keep waiting: their box is stale
    candidates = [(tr.id, tr.last_box) for tr in born]
    candidates += [(tid, by_id[tid].last_box) for tid in state.waiting
                   if by_id[tid].state is not TrackState.LOST]
    create, waiting = request_mask_creation(candidates, present, cfg.occlusion_iou_max)
    for tid in waiting:
        state.waiting.add(tid)
    state.waiting.discard(create)
    create_boxes = [(tid, by_id[tid].last_box) for tid in create]

    table = state.slots
    for tid in create:
        table = table.add(tid)
    table = table.purge_and_remap(purge)
    state.slots = table
    for tr in live + born:
        tr.mask_slot = table.slot_of(tr.id)
    return MaskManagementMessages(t, create_boxes, purge)


class MaskSource:
    """Per-frame masks keyed by slot, kept in step with the tracker's messages."""

    requires_messages = True

    def masks(self, frame_index: int) -> MaskSet:  # pragma: no cover - interface
        raise NotImplementedError

    def apply_slot_messages(self, msgs: MaskManagementMessages) -> None:  # pragma: no cover
        raise NotImplementedError


class NoMasks(MaskSource):
    def masks(self, frame_index: int) -> MaskSet:
        return MaskSet(frame_index)

    def apply_slot_messages(self, msgs) -> None:
        pass


@dataclass
class SequenceInputs:
    """Everything the tracker consumes for one sequence."""

    frames: Sequence[int]
    detections: Callable[[int], list[tuple[BoundingBox, float]]]
    masks: MaskSource = field(default_factory=NoMasks)
    warps: Callable[[int], WarpMatrix] = lambda t: WarpMatrix()


def run_sequence(inputs: SequenceInputs, cfg: PipelineConfig,
                 on_frame: Optional[Callable[[FrameBundle, MaskManagementMessages], None]] = None
                 ) -> list[TrackRecord]:
    """Track a whole sequence; records come back sorted by (frame, id)."""
    state = TrackerState()
    out: list[TrackRecord] = []
    for t in inputs.frames:
        try:
            bundle = FrameBundle(t, inputs.detections(t), inputs.masks.masks(t), inputs.warps(t))
            state, records, msgs = step(state, bundle, cfg)
            inputs.masks.apply_slot_messages(msgs)
        except McByteError as exc:
            raise type(exc)(f"frame {t}: {exc}") from exc
        if on_frame is not None:
            on_frame(bundle, msgs)
        out.extend(records)
    out.sort(key=lambda r: (r.frame_index, r.track_id))
    return out
