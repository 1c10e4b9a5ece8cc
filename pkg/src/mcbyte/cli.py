"""Command-line front end: ``mcbyte track|eval|ablate|synth|render``.

A sequence directory holds ``det.txt`` and optionally ``gt.txt``,
``masks.txt``, ``warp.txt``, ``corr.txt`` and ``manifest.json``; ``synth``
writes exactly that layout. The default config file path can be supplied
through ``MCBYTE_CONFIG``.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy

from . import __version__
from . import providers as pv
from .errors import McByteError
from .metrics import EvalConfig, MetricReport, evaluate, format_csv, format_table, mean_report, \
    tracks_from_records
from .pipeline import (
    ALL_VARIANTS, NoMasks, PipelineConfig, SequenceInputs, TrackRecord, Variant, run_sequence,
    variant_behavior,
)
from .render import DEFAULT_SIZE, render_sequence
from .synth import bundled_suite, generate, scene_from_manifest, write_scene

log = logging.getLogger("mcbyte")

CONFIG_ENV = "MCBYTE_CONFIG"
MASK_MODES = ("auto", "file", "oracle", "none")


class CliError(McByteError):
    pass


# ------------------------------------------------------------------ helpers

def load_config(path: Optional[str] = None, variant: Optional[str] = None,
                seed: Optional[int] = None) -> PipelineConfig:
    path = path or os.environ.get(CONFIG_ENV) or None
    cfg = PipelineConfig.load(path) if path else PipelineConfig()
    if variant is not None:
        cfg = cfg.replace(variant=Variant.parse(variant))
    if seed is not None:
        cfg = cfg.replace(seed=seed)
    return cfg


def sequence_dirs(root) -> list[Path]:
    """``root`` itself if it is a sequence, else its sequence subdirectories by name."""
    root = Path(root)
    if (root / pv.DET_FILE).exists() or (root / pv.GT_FILE).exists():
        return [root]
    if not root.is_dir():
        raise CliError(f"not a directory: {root}")
    return sorted(p for p in root.iterdir()
                  if p.is_dir() and ((p / pv.DET_FILE).exists() or (p / pv.GT_FILE).exists()))


def sequence_inputs(seq: pv.SequenceDir, cfg: PipelineConfig, masks: str = "auto") -> SequenceInputs:
    det_path = seq.file(pv.DET_FILE)
    if det_path is None:
        raise CliError(f"{seq.path}: no {pv.DET_FILE}")
    dets = pv.read_detections(det_path)
    frames = seq.frame_range(dets)

    if not variant_behavior(cfg.variant).uses_masks or masks == "none":
        src = NoMasks()
    else:
        mask_path = seq.file(pv.MASK_FILE)
        if masks == "oracle" or (masks == "auto" and "scenario" in seq.manifest and mask_path is None):
            scene = scene_from_manifest(seq.manifest)
            src = pv.OracleMaskSource(scene.boxes, scene.silhouettes)
        elif mask_path is None:
            raise CliError(f"mask source required: variant {cfg.variant.value} uses masks "
                           f"but {seq.path} has no {pv.MASK_FILE}")
        else:
            src = pv.FileMaskSource.from_file(mask_path)

    warps = pv.WarpSource()
    if cfg.uses_cmc:
        if seq.file(pv.WARP_FILE) is not None:
            warps = pv.WarpSource(pv.read_warps(seq.file(pv.WARP_FILE)))
        elif seq.file(pv.CORR_FILE) is not None:
            warps = pv.WarpSource.from_correspondences(
                pv.read_correspondences(seq.file(pv.CORR_FILE)),
                cfg.ransac_iterations, cfg.ransac_inlier_tol, cfg.seed)
        else:
            log.warning("%s: no %s or %s; camera motion assumed static",
                        seq.path, pv.WARP_FILE, pv.CORR_FILE)
    return SequenceInputs(frames=frames, detections=dets, masks=src, warps=warps)


def track_sequence(path, cfg: PipelineConfig, masks: str = "auto") -> list[TrackRecord]:
    seq = pv.SequenceDir.open(path)
    try:
        return run_sequence(sequence_inputs(seq, cfg, masks), cfg)
    except McByteError as exc:
        raise type(exc)(f"{seq.name}: {exc}") from exc


def _versions() -> dict:
    return {"mcbyte": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def write_run_manifest(path, cfg: Optional[PipelineConfig], inputs, outputs, started: float,
                       extra: Optional[dict] = None) -> None:
    doc = {
        "config": cfg.to_dict() if cfg is not None else None,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "timing": {"started": started, "seconds": round(time.time() - started, 6)},
        "versions": _versions(),
    }
    if extra:
        doc.update(extra)
    pv._atomic_write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _track_job(job) -> tuple[str, str]:
    path, cfg_dict, masks = job
    cfg = PipelineConfig.from_dict(cfg_dict)
    return str(path), pv.format_results(track_sequence(path, cfg, masks))


def _run_jobs(jobs: list, workers: int, chunksize: int = 1) -> list[tuple[str, str]]:
    # results come back in submission order whatever the worker count
    if workers <= 1 or len(jobs) <= 1:
        return [_track_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_track_job, jobs, chunksize=chunksize))


def evaluate_dir(gt_root, results_dir, cfg: EvalConfig = EvalConfig()) -> list[tuple[str, MetricReport]]:
    rows = []
    for d in sequence_dirs(gt_root):
        seq = pv.SequenceDir.open(d)
        gt_path = seq.file(pv.GT_FILE)
        if gt_path is None:
            continue
        res = Path(results_dir) / f"{seq.name}.txt"
        if not res.exists():
            log.warning("no result file for sequence %s (%s); skipped", seq.name, res)
            continue
        rows.append((seq.name, evaluate(pv.read_gt(gt_path),
                                        tracks_from_records(pv.read_results(res)), cfg)))
    return rows


# --------------------------------------------------------------- commands

def cmd_track(args) -> int:
    started = time.time()
    cfg = load_config(args.config, args.variant, args.seed)
    seqs = [Path(s) for s in args.sequences]
    out = Path(args.out)
    as_dir = len(seqs) > 1 or out.is_dir()
    jobs = [(s, cfg.to_dict(), args.masks) for s in seqs]
    outputs = []
    for (path, text), seq in zip(_run_jobs(jobs, args.workers), seqs):
        target = out / f"{pv.SequenceDir.open(seq).name}.txt" if as_dir else out
        target.parent.mkdir(parents=True, exist_ok=True)
        pv._atomic_write(target, text)
        outputs.append(target)
    manifest = (out / "manifest.json") if as_dir else out.with_name(out.name + ".manifest.json")
    write_run_manifest(manifest, cfg, seqs, outputs, started)
    for p in outputs:
        print(p)
    return 0


def cmd_eval(args) -> int:
    gt, res = Path(args.gt), Path(args.results)
    ecfg = EvalConfig(iou_min=args.iou)
    if gt.is_file():
        name = res.stem
        rows = [(name, evaluate(pv.read_gt(gt), tracks_from_records(pv.read_results(res)), ecfg))]
    else:
        if res.is_file():
            seq = pv.SequenceDir.open(gt)
            rows = [(seq.name, evaluate(pv.read_gt(gt / pv.GT_FILE),
                                        tracks_from_records(pv.read_results(res)), ecfg))]
        else:
            rows = evaluate_dir(gt, res, ecfg)
    if not rows:
        raise CliError(f"no ground truth found under {gt}")
    rows.append(("MEAN", mean_report([r for _, r in rows])))
    sys.stdout.write(format_table(rows))
    if args.csv:
        pv._atomic_write(args.csv, format_csv(rows))
    return 0


def ablation(suite, out_dir, base: PipelineConfig, workers: int = 1,
             variants: Sequence[Variant] = ALL_VARIANTS,
             masks: str = "auto") -> list[tuple[str, MetricReport]]:
    """Track every suite sequence with every variant and tabulate suite means.

    Result files land in ``out_dir/<variant>/<sequence>.txt``.
    """
    seqs = sequence_dirs(suite)
    if not seqs:
        raise CliError(f"no sequences under {suite}")
    out_dir = Path(out_dir)
    # synthetic sequences default to live oracle masks: a mask file is baked
    # in one reference run's slot layout, which other variants need not share
    modes = {s: "oracle" if masks == "auto" and "scenario" in pv.SequenceDir.open(s).manifest
             else masks for s in seqs}
    # sequence-major so that a worker regenerates each synthetic scene once
    jobs = [(s, base.replace(variant=v).to_dict(), modes[s]) for s in seqs for v in variants]
    texts = _run_jobs(jobs, workers, chunksize=len(variants))
    rows = []
    for vi, v in enumerate(variants):
        reports = []
        for si, s in enumerate(seqs):
            _, text = texts[si * len(variants) + vi]
            seq = pv.SequenceDir.open(s)
            target = out_dir / v.value / f"{seq.name}.txt"
            target.parent.mkdir(parents=True, exist_ok=True)
            pv._atomic_write(target, text)
            gt = seq.file(pv.GT_FILE)
            if gt is not None:
                reports.append(evaluate(pv.read_gt(gt), tracks_from_records(pv.read_results(target))))
        rows.append((v.value, mean_report(reports)))
    return rows


def cmd_ablate(args) -> int:
    started = time.time()
    base = load_config(args.config, None, args.seed)
    variants = [Variant.parse(args.variant)] if args.variant else list(ALL_VARIANTS)
    out = Path(args.out)
    rows = ablation(args.suite, out, base, args.workers, variants, args.masks)
    table = format_table(rows, label="variant")
    pv._atomic_write(out / "ablation.txt", table)
    outputs = [out / "ablation.txt"]
    if args.csv:
        pv._atomic_write(args.csv, format_csv(rows, label="variant"))
        outputs.append(Path(args.csv))
    write_run_manifest(out / "manifest.json", base, sequence_dirs(args.suite), outputs, started,
                       {"variants": [v.value for v in variants]})
    sys.stdout.write(table)
    return 0


def cmd_synth(args) -> int:
    suite = bundled_suite()
    if args.list:
        for s in suite:
            print(f"{s.name:24s} {','.join(s.tags)}")
        return 0
    if args.scene:
        known = {s.name: s for s in suite}
        missing = [n for n in args.scene if n not in known]
        if missing:
            raise CliError(f"unknown scenes {missing}; see 'mcbyte synth --list'")
        suite = [known[n] for n in args.scene]
    if args.seed is not None:
        suite = [dataclasses.replace(s, seed=s.seed + args.seed) for s in suite]
    for s in suite:
        print(write_scene(generate(s), Path(args.out) / s.name))
    return 0


def cmd_render(args) -> int:
    seq = pv.SequenceDir.open(args.sequence)
    det = seq.file(pv.DET_FILE)
    dets = pv.read_detections(det) if det is not None else pv.DetectionSource({})
    masks = None
    size = seq.image_size
    if seq.file(pv.MASK_FILE) is not None:
        msize, masks = pv.read_masks(seq.file(pv.MASK_FILE))
        size = size or msize
    if args.size:
        w, h = args.size.lower().split("x")
        size = (int(w), int(h))
    size = size or DEFAULT_SIZE
    records = pv.read_results(args.results)
    frames = seq.frame_range(dets)
    if not len(frames) and records:
        frames = range(min(r.frame_index for r in records), max(r.frame_index for r in records) + 1)
    paths = render_sequence(frames, size, records, args.out, masks)
    print(f"{len(paths)} frames written to {args.out}")
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mcbyte", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, variant=True):
        sp.add_argument("--config", help=f"TOML config file (default: ${CONFIG_ENV})")
        if variant:
            sp.add_argument("--variant", help="Baseline, A1..A6, McByte or CBIoU")
        sp.add_argument("--seed", type=int, help="seed for the camera-warp estimator")
        sp.add_argument("--workers", type=int, default=1, help="sequences tracked in parallel")
        sp.add_argument("--masks", choices=MASK_MODES, default="auto",
                        help="mask input: masks.txt, live oracle from the manifest scenario, or none")

    t = sub.add_parser("track", help="track one or more sequence directories")
    t.add_argument("sequences", nargs="+")
    t.add_argument("-o", "--out", required=True,
                   help="result file, or a directory when several sequences are given")
    common(t)
    t.set_defaults(func=cmd_track)

    e = sub.add_parser("eval", help="score results against ground truth")
    e.add_argument("gt", help="gt file, sequence directory or suite directory")
    e.add_argument("results", help="result file or directory of <sequence>.txt files")
    e.add_argument("--iou", type=float, default=0.5, help="IoU threshold for CLEAR and IDF1")
    e.add_argument("--csv", help="also write the table as CSV")
    e.set_defaults(func=cmd_eval)

    a = sub.add_parser("ablate", help="run every variant over a suite and tabulate")
    a.add_argument("suite")
    a.add_argument("-o", "--out", default="ablation", help="output directory")
    a.add_argument("--csv", help="also write the table as CSV")
    common(a)
    a.set_defaults(func=cmd_ablate)

    s = sub.add_parser("synth", help="write the bundled synthetic suite")
    s.add_argument("out", nargs="?", default="suite")
    s.add_argument("--scene", action="append", help="only this scene (repeatable)")
    s.add_argument("--seed", type=int, help="offset added to every scene seed")
    s.add_argument("--list", action="store_true", help="list scene names and exit")
    s.set_defaults(func=cmd_synth)

    r = sub.add_parser("render", help="draw tracks as one PPM image per frame")
    r.add_argument("sequence")
    r.add_argument("results")
    r.add_argument("out")
    r.add_argument("--size", help="WxH when the sequence does not record its image size")
    r.set_defaults(func=cmd_render)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (McByteError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
