import filecmp
import json

import numpy as np
import pytest

from mcbyte import providers as pv
from mcbyte.geometry import iou
from mcbyte.maskops import mm2
from mcbyte.metrics import evaluate, tracks_from_records
from mcbyte.pipeline import PipelineConfig, Variant, run_sequence
from mcbyte.synth import (
    MaskFault, Scenario, SplitMix64, Trajectory, bundled_suite, camera_matrix,
    frame_warp, generate, gt_of, scene_from_manifest, scene_inputs, write_scene, _lin, _obj,
)

SUITE = {s.name: s for s in bundled_suite()}


def test_splitmix_reference_values():
    # published first outputs of SplitMix64 seeded with 0
    r = SplitMix64(0)
    assert [r.next_u64() for _ in range(3)] == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4,
                                                0x06C45D188009454F]
    u = SplitMix64(42)
    vals = [u.uniform() for _ in range(1000)]
    assert min(vals) >= 0.0 and max(vals) < 1.0


def test_suite_shape():
    suite = bundled_suite()
    names = [s.name for s in suite]
    assert len(suite) >= 20 and len(set(names)) == len(names)
    for required in ("id-swap-trap", "long-occlusion", "long-occlusion-dropout"):
        assert required in names
    tags = {t for s in suite for t in s.tags}
    assert {"crossing", "occlusion", "camera", "fault"} <= tags
    assert any(s.camera.zoom != 1.0 for s in suite) and any(s.camera.pan != (0.0, 0.0) for s in suite)
    assert any(s.noise.dropout > 0 for s in suite)
    assert names == [s.name for s in bundled_suite()]


def test_scenario_json_round_trip():
    for s in bundled_suite():
        assert Scenario.from_json(json.loads(json.dumps(s.to_json()))) == s


def test_zero_noise_no_occlusion_detections_equal_gt():
    sc = generate(SUITE["linear-3"])
    for t in sc.frame_range:
        assert sorted((b.as_tuple() for b, _ in sc.detections[t])) == \
            sorted(b.as_tuple() for b in sc.boxes(t).values())
        assert all(s == 1.0 for _, s in sc.detections[t])


def test_fully_hidden_object_has_no_mask():
    s = Scenario("hidden", (100, 100), 3, (
        _obj(40, 40, 1, _lin(50, 50)),
        _obj(20, 20, 2, _lin(50, 50)),
    ))
    sc = generate(s)
    for t in sc.frame_range:
        assert sc.visibility[t][2] == 0.0
        assert 2 not in sc.silhouettes(t) and 1 in sc.silhouettes(t)
        assert len(sc.detections[t]) == 1


def test_nearer_mask_never_clipped():
    for name in ("crowd-occlusion", "ambiguity-cluster", "crossing-ellipse"):
        s = SUITE[name]
        sc = generate(s)
        k = min(range(len(s.objects)), key=lambda k: s.objects[k].depth)
        alone = generate(Scenario("alone", s.image_size, s.frames, (s.objects[k],), seed=s.seed))
        for t in sc.frame_range:
            a, b = sc.visible_array(t, k + 1), alone.visible_array(t, 1)
            assert (a is None) == (b is None)
            if a is not None:
                assert np.array_equal(a, b)


def test_crossing_masks_front_fills_back_box_less():
    s = SUITE["crossing-pass"]
    sc = generate(s)
    t = max((t for t in sc.frame_range if len(sc.boxes(t)) == 2),
            key=lambda t: iou(sc.boxes(t)[1], sc.boxes(t)[2]))
    front, back = sorted((1, 2), key=lambda o: s.objects[o - 1].depth)
    vis = sc.silhouettes(t)
    back_box = sc.boxes(t)[back]
    assert mm2(vis[front], back_box) < mm2(vis[back], back_box)


@pytest.mark.parametrize("name", ["id-swap-trap", "id-swap-trap-vertical"])
def test_trap_boxes_overlap_strongly(name):
    sc = generate(SUITE[name])
    best = max(iou(sc.boxes(t)[1], sc.boxes(t)[2]) for t in sc.frame_range)
    assert best >= 0.6
    b1 = sc.boxes(1)
    assert (b1[1].w, b1[1].h) == (b1[2].w, b1[2].h)


def test_long_occlusion_back_object_undetected_then_back():
    sc = generate(SUITE["long-occlusion"])
    # the walker (1) stops in front of the bystander (2)
    hidden = [t for t in sc.frame_range if sc.visibility[t][2] == 0.0]
    assert len(hidden) >= 5
    assert all(len(sc.detections[t]) == 1 for t in hidden)
    assert len(sc.detections[max(hidden) + 5]) == 2
    # its mask persists whenever any part is visible
    partial = [t for t in sc.frame_range if 0 < sc.visibility[t][2] < 1]
    assert partial and all(2 in sc.silhouettes(t) for t in partial)


def test_score_model():
    sc = generate(SUITE["crowd-occlusion"])
    for t in sc.frame_range:
        for b, s in sc.detections[t]:
            obj = max(sc.boxes(t), key=lambda o: iou(b, sc.boxes(t)[o]))
            assert s == pytest.approx(min(1.0, 0.6 + 0.4 * sc.visibility[t][obj]), abs=1e-6)


def test_camera_warps_consistent():
    s = SUITE["pan-zoom-crossing"]
    sc = generate(s)
    for t in range(2, s.frames + 1):
        w = sc.warps.get(t)
        if w is None:
            continue
        composed = w.compose(camera_matrix(s, t - 1))
        cur = camera_matrix(s, t)
        assert np.allclose([composed.a11, composed.tx, composed.ty], [cur.a11, cur.tx, cur.ty])
    assert frame_warp(SUITE["linear-3"], 5).is_identity()


def test_correspondence_inliers_follow_warp():
    s = SUITE["camera-jerk"]
    sc = generate(s)
    w = sc.warps[20]
    pts = sc.correspondences[20]
    errs = [np.hypot(*(w.apply(c.src)[0] - np.array(c.dst))) for c in pts]
    inliers = sum(e < 1e-6 for e in errs)
    assert 0.5 * len(pts) <= inliers < len(pts)


def test_mask_faults():
    base = SUITE["id-swap-trap"]
    t = 20
    clean = generate(base).silhouettes(t)
    leak = generate(SUITE["mask-leak"]).silhouettes(t)
    assert leak[1].foreground > clean[1].foreground
    low = generate(SUITE["mask-lowconf"]).silhouettes(t)
    assert low[1].mean_confidence == 0.3 and low[2].mean_confidence == 0.3
    rd = generate(SUITE["mask-residue-drop"]).silhouettes(t)
    assert 2 not in rd and rd[1].foreground <= 36
    with pytest.raises(ValueError):
        MaskFault(1, "melt", 1, 2)


def test_generation_is_deterministic(tmp_path):
    for name in ("jitter-5", "long-occlusion-dropout", "pan-zoom-crossing"):
        a = write_scene(generate(SUITE[name]), tmp_path / "a" / name)
        b = write_scene(generate(SUITE[name]), tmp_path / "b" / name)
        cmp = filecmp.dircmp(a, b)
        assert sorted(cmp.same_files) == sorted(p.name for p in a.iterdir())
        assert not filecmp.cmpfiles(a, b, [p.name for p in a.iterdir()], shallow=False)[1]


def test_written_files_parse(tmp_path):
    d = write_scene(generate(SUITE["long-occlusion-dropout"]), tmp_path / "s")
    pv.read_detections(d / pv.DET_FILE)
    gt = pv.read_gt(d / pv.GT_FILE)
    pv.read_masks(d / pv.MASK_FILE)
    pv.read_warps(d / pv.WARP_FILE)
    pv.read_correspondences(d / pv.CORR_FILE)
    manifest = json.loads((d / pv.MANIFEST_FILE).read_text())
    assert manifest["name"] == "long-occlusion-dropout" and gt.frame_range == range(1, 71)
    assert scene_from_manifest(manifest).scenario == SUITE["long-occlusion-dropout"]


def test_clean_scenes_baseline_perfect():
    for s in bundled_suite():
        if "clean" not in s.tags:
            continue
        sc = generate(s)
        r = evaluate(gt_of(sc), tracks_from_records(
            run_sequence(scene_inputs(sc, "none"), PipelineConfig(variant=Variant.BASELINE))))
        assert (r.mota, r.idf1, r.hota) == (100.0, 100.0, 100.0), s.name


def test_invalid_specs():
    with pytest.raises(ValueError):
        Trajectory("spiral")
    with pytest.raises(ValueError):
        Trajectory("waypoints")
    with pytest.raises(ValueError):
        _obj(10, 10, 1, _lin(0, 0), shape="blob")
