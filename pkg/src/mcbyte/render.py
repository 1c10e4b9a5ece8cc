"""Debug frames as binary portable pixmaps (P6).

Track colors come from a hash of the id: the first three bytes of
``blake2b(str(id), digest_size=8)``, each mapped into [64, 255] so no track
is drawn near-black. Ids are printed above their box in a 3x5 block font.
"""
from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .geometry import BoundingBox
from .maskops import MaskSet, box_intersection_count, foreground_count
from .pipeline import TrackRecord

DEFAULT_SIZE = (640, 480)
MASK_ALPHA = 0.45
UNLINKED_MASK_COLOR = (160, 160, 160)

_GLYPHS = {
    "0": ("111", "101", "101", "101", "111"),
    "1": ("010", "110", "010", "010", "111"),
    "2": ("111", "001", "111", "100", "111"),
    "3": ("111", "001", "111", "001", "111"),
    "4": ("101", "101", "111", "001", "001"),
    "5": ("111", "100", "111", "001", "111"),
    "6": ("111", "100", "111", "101", "111"),
    "7": ("111", "001", "010", "010", "010"),
    "8": ("111", "101", "111", "101", "111"),
    "9": ("111", "101", "111", "001", "111"),
}
_GLYPH_BITS = {d: np.array([[c == "1" for c in row] for row in rows]) for d, rows in _GLYPHS.items()}


def id_color(track_id: int) -> tuple[int, int, int]:
    digest = hashlib.blake2b(str(int(track_id)).encode(), digest_size=8).digest()
    return tuple(64 + b * 191 // 255 for b in digest[:3])


def blank(size: tuple[int, int]) -> np.ndarray:
    w, h = size
    return np.zeros((h, w, 3), np.uint8)


def _clip_box(b: BoundingBox, w: int, h: int) -> Optional[tuple[int, int, int, int]]:
    x1, y1 = max(0, int(np.floor(b.x))), max(0, int(np.floor(b.y)))
    x2, y2 = min(w - 1, int(np.ceil(b.x2)) - 1), min(h - 1, int(np.ceil(b.y2)) - 1)
    if x2 < x1 or y2 < y1:
        return None
    return x1, y1, x2, y2


def draw_box(img: np.ndarray, b: BoundingBox, color, thickness: int = 1) -> None:
    h, w = img.shape[:2]
    r = _clip_box(b, w, h)
    if r is None:
        return
    x1, y1, x2, y2 = r
    t = thickness
    img[y1:min(y1 + t, y2 + 1), x1:x2 + 1] = color
    img[max(y2 - t + 1, y1):y2 + 1, x1:x2 + 1] = color
    img[y1:y2 + 1, x1:min(x1 + t, x2 + 1)] = color
    img[y1:y2 + 1, max(x2 - t + 1, x1):x2 + 1] = color


def draw_number(img: np.ndarray, value: int, x: int, y: int, color, scale: int = 2) -> None:
    """Stamp ``value`` with its top-left corner at (x, y); clipped at the borders."""
    h, w = img.shape[:2]
    for k, ch in enumerate(str(value)):
        bits = np.kron(_GLYPH_BITS[ch], np.ones((scale, scale), bool))
        gx = x + k * 4 * scale
        ys, xs = np.nonzero(bits)
        ys, xs = ys + y, xs + gx
        ok = (ys >= 0) & (ys < h) & (xs >= 0) & (xs < w)
        img[ys[ok], xs[ok]] = color


def _mask_owner(mask, boxes: Sequence[tuple[int, BoundingBox]]) -> Optional[int]:
    # a mask file is keyed by slot, not id; attribute it to the box holding most of it
    fg = foreground_count(mask)
    best, best_n = None, 0
    for tid, box in boxes:
        n = box_intersection_count(mask, box)
        if n > best_n:
            best, best_n = tid, n
    return best if fg and best_n else None


def render_frame(size: tuple[int, int], records: Sequence[TrackRecord],
                 masks: Optional[MaskSet] = None) -> np.ndarray:
    img = blank(size)
    boxes = [(r.track_id, r.box) for r in records]
    if masks is not None:
        for slot in sorted(masks.entries):
            m = masks.entries[slot]
            if (m.width, m.height) != tuple(size):
                continue
            owner = _mask_owner(m, boxes)
            color = np.array(id_color(owner) if owner is not None else UNLINKED_MASK_COLOR, float)
            sel = m.to_array().astype(bool)
            img[sel] = (img[sel] * (1 - MASK_ALPHA) + color * MASK_ALPHA).astype(np.uint8)
    for r in sorted(records, key=lambda r: r.track_id):
        color = id_color(r.track_id)
        draw_box(img, r.box, color)
        draw_number(img, r.track_id, int(r.box.x), int(r.box.y) - 12, color)
    return img


def write_ppm(path, img: np.ndarray) -> None:
    h, w = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(img, np.uint8).tobytes())


def read_ppm(path) -> np.ndarray:
    """Reads the header layout ``write_ppm`` produces (no comments)."""
    data = Path(path).read_bytes()
    magic, dims, maxval, pixels = data.split(b"\n", 3)
    if magic != b"P6" or maxval != b"255":
        raise ValueError(f"{path}: not an 8-bit binary pixmap")
    w, h = (int(v) for v in dims.split())
    return np.frombuffer(pixels, np.uint8, count=w * h * 3).reshape(h, w, 3)


def render_sequence(frames: Sequence[int], size: tuple[int, int],
                    records: Sequence[TrackRecord], out_dir,
                    masks: Optional[Mapping[int, MaskSet]] = None) -> list[Path]:
    """One ``<frame:06d>.ppm`` per frame, including frames without tracks."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    by_frame: dict[int, list[TrackRecord]] = {}
    for r in records:
        by_frame.setdefault(r.frame_index, []).append(r)
    paths = []
    for t in frames:
        img = render_frame(size, by_frame.get(t, []), (masks or {}).get(t))
        p = out / f"{t:06d}.ppm"
        write_ppm(p, img)
        paths.append(p)
    return paths
