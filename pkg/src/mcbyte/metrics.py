"""Tracking evaluation: CLEAR MOTA, IDF1 and HOTA.

Ground-truth rows that are not evaluable (zero confidence, a class outside
the evaluated set, or visibility under the threshold) are dropped together
with any prediction that matches them at the IoU threshold, following the
MOT-Challenge convention.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .assignment import CostMatrix, solve
from .geometry import BoundingBox, iou_matrix
from .pipeline import TrackRecord
from .providers import GroundTruth, GtRow

HOTA_ALPHAS = tuple(float(a) for a in np.round(np.arange(0.05, 0.96, 0.05), 2))

# per-frame tracks: frame -> [(track id, box)]
Tracks = Mapping[int, Sequence[tuple[int, BoundingBox]]]


@dataclass(frozen=True)
class EvalConfig:
    iou_min: float = 0.5
    classes: Optional[frozenset] = frozenset({1})  # None evaluates every class
    min_visibility: float = 0.0


@dataclass
class MetricReport:
    hota: float = 0.0
    deta: float = 0.0
    assa: float = 0.0
    idf1: float = 0.0
    mota: float = 0.0
    id_switches: int = 0
    fp: int = 0
    fn: int = 0
    tp: int = 0
    num_gt: int = 0
    idtp: int = 0
    idfp: int = 0
    idfn: int = 0
    hota_per_alpha: list[float] = field(default_factory=list)
    deta_per_alpha: list[float] = field(default_factory=list)
    assa_per_alpha: list[float] = field(default_factory=list)


def tracks_from_records(records: Iterable[TrackRecord]) -> dict[int, list[tuple[int, BoundingBox]]]:
    out: dict[int, list[tuple[int, BoundingBox]]] = {}
    for r in records:
        out.setdefault(r.frame_index, []).append((r.track_id, r.box))
    return out


def _evaluable(row: GtRow, cfg: EvalConfig) -> bool:
    if row.conf == 0:
        return False
    if cfg.classes is not None and row.cls not in cfg.classes:
        return False
    return row.visibility >= cfg.min_visibility


@dataclass
class _Frame:
    gt_ids: list[int]
    gt_boxes: list[BoundingBox]
    tr_ids: list[int]
    tr_boxes: list[BoundingBox]
    sim: np.ndarray  # IoU, gt x tracks


def _max_iou_match(sim: np.ndarray, iou_min: float) -> list[tuple[int, int]]:
    if sim.size == 0:
        return []
    return solve(CostMatrix(1.0 - sim, sim >= iou_min)).pairs


def _prepare(gt: GroundTruth, tracks: Tracks, cfg: EvalConfig) -> list[_Frame]:
    frames = sorted(set(gt.frames) | set(tracks))
    out = []
    for t in frames:
        rows = gt.frames.get(t, [])
        trk = list(tracks.get(t, []))
        keep = [_evaluable(r, cfg) for r in rows]
        if trk and not all(keep):
            sim = iou_matrix([r.box for r in rows], [b for _, b in trk])
            drop = {j for i, j in _max_iou_match(sim, cfg.iou_min) if not keep[i]}
            trk = [p for j, p in enumerate(trk) if j not in drop]
        rows = [r for r, k in zip(rows, keep) if k]
        gb = [r.box for r in rows]
        tb = [b for _, b in trk]
        out.append(_Frame([r.track_id for r in rows], gb, [i for i, _ in trk], tb,
                          iou_matrix(gb, tb)))
    return out


def _clear(frames: list[_Frame], iou_min: float) -> dict:
    tp = fp = fn = idsw = num_gt = 0
    prev: dict[int, int] = {}   # gt id -> track id matched in the previous frame
    last: dict[int, int] = {}   # gt id -> track id of its latest match
    for f in frames:
        num_gt += len(f.gt_ids)
        pairs = []
        gi_free, tj_free = set(range(len(f.gt_ids))), set(range(len(f.tr_ids)))
        # keep last frame's correspondences while they still overlap enough
        col_of = {tid: j for j, tid in enumerate(f.tr_ids)}
        for i, gid in enumerate(f.gt_ids):
            j = col_of.get(prev.get(gid))
            if j is not None and j in tj_free and f.sim[i, j] >= iou_min:
                pairs.append((i, j))
                gi_free.discard(i)
                tj_free.discard(j)
        rows, cols = sorted(gi_free), sorted(tj_free)
        if rows and cols:
            sub = f.sim[np.ix_(rows, cols)]
            pairs += [(rows[a], cols[b]) for a, b in _max_iou_match(sub, iou_min)]
        cur = {}
        for i, j in pairs:
            gid, tid = f.gt_ids[i], f.tr_ids[j]
            if gid in last and last[gid] != tid:
                idsw += 1
            last[gid] = tid
            cur[gid] = tid
        prev = cur
        tp += len(pairs)
        fn += len(f.gt_ids) - len(pairs)
        fp += len(f.tr_ids) - len(pairs)
    mota = 1.0 - (fn + fp + idsw) / max(1, num_gt)
    return dict(mota=100.0 * mota, tp=tp, fp=fp, fn=fn, id_switches=idsw, num_gt=num_gt)


def _idf1(frames: list[_Frame], iou_min: float) -> dict:
    gt_index: dict[int, int] = {}
    tr_index: dict[int, int] = {}
    for f in frames:
        for g in f.gt_ids:
            gt_index.setdefault(g, len(gt_index))
        for k in f.tr_ids:
            tr_index.setdefault(k, len(tr_index))
    counts = np.zeros((len(gt_index), len(tr_index)))
    n_gt = sum(len(f.gt_ids) for f in frames)
    n_tr = sum(len(f.tr_ids) for f in frames)
    for f in frames:
        gi, tj = np.nonzero(f.sim >= iou_min)
        for a, b in zip(gi, tj):
            counts[gt_index[f.gt_ids[a]], tr_index[f.tr_ids[b]]] += 1
    idtp = 0
    if counts.size and counts.max() > 0:
        # maximizing total overlap minimizes IDFP + IDFN
        a = solve(CostMatrix(-counts / counts.max(), np.ones(counts.shape, bool)))
        idtp = int(sum(counts[i, j] for i, j in a.pairs))
    idfn, idfp = n_gt - idtp, n_tr - idtp
    idf1 = 2 * idtp / max(1, 2 * idtp + idfp + idfn)
    return dict(idf1=100.0 * idf1, idtp=idtp, idfp=idfp, idfn=idfn)


def _hota(frames: list[_Frame]) -> dict:
    gt_index: dict[int, int] = {}
    tr_index: dict[int, int] = {}
    for f in frames:
        for g in f.gt_ids:
            gt_index.setdefault(g, len(gt_index))
        for k in f.tr_ids:
            tr_index.setdefault(k, len(tr_index))
    G, T = len(gt_index), len(tr_index)
    gt_count, tr_count = np.zeros(G), np.zeros(T)
    potential = np.zeros((G, T))
    for f in frames:
        gi = [gt_index[g] for g in f.gt_ids]
        ti = [tr_index[k] for k in f.tr_ids]
        gt_count[gi] += 1
        tr_count[ti] += 1
        if f.sim.size:
            s = f.sim
            denom = s.sum(axis=0, keepdims=True) + s.sum(axis=1, keepdims=True) - s
            frac = np.divide(s, denom, out=np.zeros_like(s), where=denom > 0)
            potential[np.ix_(gi, ti)] += frac
    union = gt_count[:, None] + tr_count[None, :] - potential
    alignment = np.divide(potential, union, out=np.zeros_like(potential), where=union > 0)

    A = len(HOTA_ALPHAS)
    tp, fn, fp = np.zeros(A), np.zeros(A), np.zeros(A)
    matches = np.zeros((A, G, T))
    eps = np.finfo(float).eps
    for f in frames:
        n, m = f.sim.shape
        if n == 0 or m == 0:
            fn += n
            fp += m
            continue
        gi = [gt_index[g] for g in f.gt_ids]
        ti = [tr_index[k] for k in f.tr_ids]
        score = alignment[np.ix_(gi, ti)] * f.sim
        pairs = solve(CostMatrix(-score, np.ones(score.shape, bool))).pairs
        for a, alpha in enumerate(HOTA_ALPHAS):
            ok = [(i, j) for i, j in pairs if f.sim[i, j] >= alpha - eps]
            tp[a] += len(ok)
            fn[a] += n - len(ok)
            fp[a] += m - len(ok)
            for i, j in ok:
                matches[a, gi[i], ti[j]] += 1
    deta = tp / np.maximum(1.0, tp + fn + fp)
    assa = np.zeros(A)
    for a in range(A):
        mc = matches[a]
        denom = gt_count[:, None] + tr_count[None, :] - mc
        score = np.divide(mc, denom, out=np.zeros_like(mc), where=denom > 0)
        assa[a] = (mc * score).sum() / max(1.0, tp[a])
    hota = np.sqrt(deta * assa)
    return dict(hota=100.0 * float(hota.mean()), deta=100.0 * float(deta.mean()),
                assa=100.0 * float(assa.mean()), hota_per_alpha=(100 * hota).tolist(),
                deta_per_alpha=(100 * deta).tolist(), assa_per_alpha=(100 * assa).tolist())


def mota(gt: GroundTruth, tracks: Tracks, iou_min: float = 0.5,
         cfg: Optional[EvalConfig] = None) -> dict:
    cfg = cfg or EvalConfig(iou_min=iou_min)
    return _clear(_prepare(gt, tracks, cfg), cfg.iou_min)


def idf1(gt: GroundTruth, tracks: Tracks, iou_min: float = 0.5,
         cfg: Optional[EvalConfig] = None) -> float:
    cfg = cfg or EvalConfig(iou_min=iou_min)
    return _idf1(_prepare(gt, tracks, cfg), cfg.iou_min)["idf1"]


def hota(gt: GroundTruth, tracks: Tracks, cfg: Optional[EvalConfig] = None) -> dict:
    cfg = cfg or EvalConfig()
    return _hota(_prepare(gt, tracks, cfg))


def evaluate(gt: GroundTruth, tracks: Tracks, cfg: EvalConfig = EvalConfig()) -> MetricReport:
    frames = _prepare(gt, tracks, cfg)
    out = {}
    out.update(_clear(frames, cfg.iou_min))
    out.update(_idf1(frames, cfg.iou_min))
    out.update(_hota(frames))
    return MetricReport(**out)


def mean_report(reports: Sequence[MetricReport]) -> MetricReport:
    """Unweighted mean of the percentages, sums of the counts."""
    if not reports:
        return MetricReport()
    pct = ("hota", "deta", "assa", "idf1", "mota")
    counts = ("id_switches", "fp", "fn", "tp", "num_gt", "idtp", "idfp", "idfn")
    out = MetricReport(**{k: float(np.mean([getattr(r, k) for r in reports])) for k in pct},
                       **{k: int(sum(getattr(r, k) for r in reports)) for k in counts})
    return out


TABLE_COLUMNS = ("HOTA", "IDF1", "MOTA", "IDSW", "FP", "FN")


def format_table(rows: Sequence[tuple[str, MetricReport]], label: str = "sequence") -> str:
    """Aligned text table, one row per entry."""
    width = max([len(label)] + [len(name) for name, _ in rows])
    head = f"{label:<{width}}  " + "  ".join(f"{c:>7}" for c in TABLE_COLUMNS)
    lines = [head, "-" * len(head)]
    for name, r in rows:
        lines.append(f"{name:<{width}}  {r.hota:7.2f}  {r.idf1:7.2f}  {r.mota:7.2f}  "
                     f"{r.id_switches:7d}  {r.fp:7d}  {r.fn:7d}")
    return "\n".join(lines) + "\n"


def format_csv(rows: Sequence[tuple[str, MetricReport]], label: str = "sequence") -> str:
    buf = io.StringIO()
    buf.write(f"{label},hota,idf1,mota,idsw,fp,fn\n")
    for name, r in rows:
        buf.write(f"{name},{r.hota:.6f},{r.idf1:.6f},{r.mota:.6f},{r.id_switches},{r.fp},{r.fn}\n")
    return buf.getvalue()
