"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines and the measured values they are based on.
"""

from __future__ import annotations

import math
import random
import time

import numpy as np
import pytest

from trackeffort import mot_io, synth
from trackeffort.analysis import ScoreTable, correlation_matrix, pearson
from trackeffort.assignment import CostMatrix, brute_force_assign, hungarian_solve
from trackeffort.baselines import evaluate_baselines
from trackeffort.cli import main
from trackeffort.effort import cardinality_weight, evaluate_sequence
from trackeffort.mot_io import Observation, SourceKind, bundle_from_frames
from trackeffort.synth import (BUILTIN_PROFILES, BUILTIN_TRACKERS, PerturbationProfile,
                               inject_id_switches, perturb, reference_track,
                               simulate_scene)

from conftest import random_bundle


def _report(number: int, ok: bool, detail: str) -> None:
    print(f"\n[criterion {number:02d}] {'PASS' if ok else 'FAIL'} - {detail}")


# --------------------------------------------------------------------------
# shared synthetic study: 3 scenes x 5 profiles x 2 trackers, via the CLI

STUDY_SCENES = (("scene-a", 11), ("scene-b", 22), ("scene-c", 33))

MANIFEST_TEMPLATE = """
[dataset]
root = "data"
sequences = [{sequences}]

[detectors]
{detectors}

[trackers]
{trackers}
"""


@pytest.fixture(scope="module")
def study(tmp_path_factory):
    root = tmp_path_factory.mktemp("study")
    data = root / "data"
    started = time.perf_counter()
    for name, seed in STUDY_SCENES:
        gt, meta = simulate_scene(name, frame_count=70, n_objects=12, seed=seed)
        seq = data / name
        (seq / "gt").mkdir(parents=True)
        (seq / "det").mkdir()
        (seq / "trk").mkdir()
        mot_io.write_mot_file([o for v in gt.values() for o in v],
                              seq / "gt" / "gt.txt", SourceKind.GT)
        mot_io.write_seqinfo(meta, seq / "seqinfo.ini")
        for pname, profile in BUILTIN_PROFILES.items():
            det = perturb(gt, profile, meta.image_width, meta.image_height)
            mot_io.write_mot_file([o for v in det.values() for o in v],
                                  seq / "det" / f"{pname}.txt", SourceKind.DET)
            for tname, config in BUILTIN_TRACKERS.items():
                trk = reference_track(det, config, meta.frame_count)
                mot_io.write_mot_file([o for v in trk.values() for o in v],
                                      seq / "trk" / f"{pname}__{tname}.txt",
                                      SourceKind.TRACK)
    manifest = MANIFEST_TEMPLATE.format(
        sequences=", ".join(f'"{name}"' for name, _ in STUDY_SCENES),
        detectors="\n".join(f'{p} = "{{root}}/{{sequence}}/det/{p}.txt"'
                            for p in BUILTIN_PROFILES),
        trackers="\n".join(f'{t} = "{{root}}/{{sequence}}/trk/{{detector}}__{t}.txt"'
                           for t in BUILTIN_TRACKERS),
    )
    (root / "run.toml").write_text(manifest)
    generation_seconds = time.perf_counter() - started

    out = root / "out"
    started = time.perf_counter()
    assert main(["evaluate", "--manifest", str(root / "run.toml"),
                 "--out", str(out)]) == 0
    evaluate_seconds = time.perf_counter() - started
    return {"root": root, "out": out, "generation_seconds": generation_seconds,
            "evaluate_seconds": evaluate_seconds}


def test_criterion_01_assignment_oracle():
    rng = random.Random(20240601)
    started = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        n_rows = rng.randint(0, 6)
        n_cols = rng.randint(0, 6)
        costs = tuple(tuple(rng.random() for _ in range(n_cols)) for _ in range(n_rows))
        feasible = tuple(tuple(rng.random() < 0.7 for _ in range(n_cols))
                         for _ in range(n_rows))
        matrix = CostMatrix(costs=costs, feasible=feasible)
        ours = hungarian_solve(matrix)
        oracle = brute_force_assign(matrix)
        assert ours.pair_count == oracle.pair_count
        worst = max(worst, abs(ours.total_cost - oracle.total_cost))
    elapsed = time.perf_counter() - started
    ok = worst <= 1e-12 and elapsed < 10.0
    _report(1, ok, f"1000 matrices, max |cost delta| = {worst:.2e}, {elapsed:.2f}s")
    assert worst <= 1e-12
    assert elapsed < 10.0


@pytest.mark.filterwarnings("ignore:sequence has a single frame")
def test_criterion_02_range_suite():
    rng = random.Random(777)
    violations = 0
    checked = 0
    for _ in range(500):
        bundle = random_bundle(rng, max_objects=20, max_frames=50)
        scores = evaluate_sequence(bundle)
        for r in scores.per_frame_intra:
            checked += 1
            if not -1.0 <= r.effort <= 1.0:
                violations += 1
        for r in scores.per_frame_inter:
            checked += 1
            if not (-1.0 <= r.effort <= 2.0 and -1.0 <= r.association_gain <= 1.0
                    and 0.0 <= r.id_weight <= 1.0 and 0.0 <= r.switch_score <= 1.0):
                violations += 1
        if not -1.0 <= scores.tem <= 1.5:
            violations += 1
    ok = violations == 0
    _report(2, ok, f"500 bundles, {checked} frame components, {violations} violations")
    assert violations == 0


def test_criterion_03_identity_tracker():
    gt, meta = simulate_scene("identity", frame_count=50, n_objects=10, seed=404)
    det = perturb(gt, BUILTIN_PROFILES["P3"], meta.image_width, meta.image_height)
    tracks = {k: tuple(Observation(o.frame, i + 1, o.box, o.confidence)
                       for i, o in enumerate(v)) for k, v in det.items()}
    bundle = bundle_from_frames(meta, gt, det, tracks)
    scores = evaluate_sequence(bundle)
    gains = [r.association_gain for r in scores.per_frame_inter]
    ok = scores.intra_effort == 0.0 and all(y == 0.0 for y in gains)
    _report(3, ok, f"E_intra = {scores.intra_effort!r}, "
                   f"max |Y| = {max(abs(y) for y in gains)!r}")
    assert scores.intra_effort == 0.0
    assert all(y == 0.0 for y in gains)


def test_criterion_04_perfect_tracker():
    gt, meta = simulate_scene("perfect", frame_count=50, n_objects=10, seed=405)
    det = perturb(gt, PerturbationProfile(), meta.image_width, meta.image_height)
    tracks = {k: tuple(Observation(o.frame, o.identity + 777, o.box) for o in v)
              for k, v in gt.items()}
    bundle = bundle_from_frames(meta, gt, det, tracks)
    scores = evaluate_sequence(bundle)
    base = evaluate_baselines(bundle)
    tracker_quality = [r.tracker.quality for r in scores.per_frame_intra]
    ok = (all(q == 1.0 for q in tracker_quality) and base.idsw_total == 0
          and base.mota == 1.0 and base.motp == 1.0 and base.idf1 == 1.0
          and base.ata == 1.0 and base.ap50 == 1.0)
    _report(4, ok, f"min Q_t = {min(tracker_quality)!r}, idsw = {base.idsw_total}, "
                   f"mota = {base.mota}, motp = {base.motp}, idf1 = {base.idf1}, "
                   f"ata = {base.ata}, ap50 = {base.ap50}")
    assert all(q == 1.0 for q in tracker_quality)
    assert base.idsw_total == 0
    assert (base.mota, base.motp, base.idf1, base.ata, base.ap50) == (1, 1, 1, 1, 1)


def test_criterion_05_id_population_worked_example():
    prev_ids, cur_ids = {1, 2, 3}, {3, 4, 5}
    # population 5 <=> weight 1 at five associations and 1 - 5/5 = 0 at zero
    at_five = cardinality_weight(prev_ids, cur_ids, 5)
    at_zero = cardinality_weight(prev_ids, cur_ids, 0)
    ok = at_five == 1.0 and at_zero == 0.0
    _report(5, ok, f"C(L=5) = {at_five}, C(L=0) = {at_zero} -> |population| = 5")
    assert at_five == 1.0
    assert at_zero == 0.0


def test_criterion_06_switch_monotonicity():
    gt, meta = simulate_scene("switchy", frame_count=60, n_objects=10, seed=406)
    det = perturb(gt, BUILTIN_PROFILES["P2"], meta.image_width, meta.image_height)
    tracks = {k: tuple(Observation(o.frame, o.identity + 50, o.box) for o in v)
              for k, v in gt.items()}
    mean_scores = []
    inter_efforts = []
    for prob in (0.0, 0.05, 0.1, 0.2):
        injected = inject_id_switches(tracks, prob, seed=515)
        for k in injected:
            assert tuple(o.box for o in injected[k]) == tuple(o.box for o in tracks[k])
        bundle = bundle_from_frames(meta, gt, det, injected)
        scores = evaluate_sequence(bundle)
        mean_scores.append(sum(r.switch_score for r in scores.per_frame_inter)
                           / len(scores.per_frame_inter))
        inter_efforts.append(scores.inter_effort)
    score_ok = all(a >= b - 1e-12 for a, b in zip(mean_scores, mean_scores[1:]))
    effort_ok = all(a >= b - 1e-12 for a, b in zip(inter_efforts, inter_efforts[1:]))
    ok = score_ok and effort_ok
    _report(6, ok, f"mean idsw_score = {[round(v, 4) for v in mean_scores]}, "
                   f"E_inter = {[round(v, 4) for v in inter_efforts]}")
    assert score_ok
    assert effort_ok


def test_criterion_07_pearson_oracle():
    rng = np.random.default_rng(707)
    worst = 0.0
    for _ in range(100):
        x = rng.normal(loc=rng.uniform(-5, 5), scale=rng.uniform(0.5, 3), size=352)
        y = rng.normal(loc=rng.uniform(-5, 5), scale=rng.uniform(0.5, 3), size=352)
        n = len(x)
        # independent raw-moment formula
        oracle = ((n * float(np.sum(x * y)) - float(np.sum(x)) * float(np.sum(y)))
                  / math.sqrt((n * float(np.sum(x * x)) - float(np.sum(x)) ** 2)
                              * (n * float(np.sum(y * y)) - float(np.sum(y)) ** 2)))
        worst = max(worst, abs(pearson(x, y) - oracle))
    x = rng.normal(size=352)
    y = rng.normal(size=352)
    base = pearson(x, y)
    affine_ok = (pearson(3.5 * x + 11, y) == pytest.approx(base, abs=1e-12)
                 and pearson(-2.0 * x + 3, y) == pytest.approx(-base, abs=1e-12))
    ok = worst <= 1e-12 and affine_ok
    _report(7, ok, f"100 vector pairs (n = 352), max |delta| = {worst:.2e}, "
                   f"affine invariance {'holds' if affine_ok else 'broken'}")
    assert worst <= 1e-12
    assert affine_ok


def test_criterion_08_detector_decoupling_trend(study):
    started = time.perf_counter()
    table = ScoreTable.read_csv(study["out"] / "scores.csv")
    matrix = correlation_matrix(table)
    correlate_seconds = time.perf_counter() - started
    total = study["evaluate_seconds"] + correlate_seconds
    r_tem_ap = matrix.get("tem", "ap50")
    r_mota_precision = matrix.get("mota", "precision")
    trend_ok = abs(r_tem_ap) < abs(r_mota_precision)
    runtime_ok = total < 120.0
    ok = trend_ok and runtime_ok
    _report(8, ok, f"{len(table.keys)} runs: |r(tem, ap50)| = {abs(r_tem_ap):.3f} "
                   f"{'<' if trend_ok else '>='} |r(mota, precision)| = "
                   f"{abs(r_mota_precision):.3f}; evaluate+correlate = {total:.1f}s")
    assert len(table.keys) == 30
    assert trend_ok, (r_tem_ap, r_mota_precision)
    assert runtime_ok


def test_criterion_09_precision_direction(study):
    # same miss rate and jitter; A floods spurious boxes, B is precise
    profile_a = PerturbationProfile(drop_prob=0.15, fp_per_frame=5.0, jitter_sigma=0.10,
                                    confidence_model="quality_linked", seed=7)
    profile_b = PerturbationProfile(drop_prob=0.15, fp_per_frame=0.3, jitter_sigma=0.10,
                                    confidence_model="quality_linked", seed=7)
    outcomes = []
    for name, seed in STUDY_SCENES:
        gt, meta = simulate_scene(name, frame_count=70, n_objects=12, seed=seed)
        row = {}
        for label, profile in (("A", profile_a), ("B", profile_b)):
            det = perturb(gt, profile, meta.image_width, meta.image_height)
            trk = reference_track(det, BUILTIN_TRACKERS["smoothing"], meta.frame_count)
            bundle = bundle_from_frames(meta, gt, det, trk)
            base = evaluate_baselines(bundle)
            row[label] = (base.ap50, base.precision, evaluate_sequence(bundle).tem)
        outcomes.append(row)
    ap_close = all(abs(row["A"][0] - row["B"][0]) < 0.1 for row in outcomes)
    precision_gap = all(row["B"][1] > row["A"][1] + 0.1 for row in outcomes)
    tem_lower = all(row["B"][2] < row["A"][2] for row in outcomes)
    ok = ap_close and precision_gap and tem_lower
    detail = "; ".join(
        f"{name}: ap {row['A'][0]:.2f}/{row['B'][0]:.2f}, "
        f"prec {row['A'][1]:.2f}/{row['B'][1]:.2f}, tem {row['A'][2]:.3f}/{row['B'][2]:.3f}"
        for (name, _), row in zip(STUDY_SCENES, outcomes))
    _report(9, ok, f"A(noisy)/B(precise) -> {detail}")
    assert ap_close, "profiles should reach similar average precision"
    assert precision_gap, "profile B should be clearly more precise"
    assert tem_lower, "effort should be lower when precision is higher"


def test_criterion_10_evaluate_determinism(study, tmp_path):
    manifest = study["root"] / "run.toml"
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["evaluate", "--manifest", str(manifest), "--out", str(out_a)]) == 0
    assert main(["evaluate", "--manifest", str(manifest), "--out", str(out_b)]) == 0
    bytes_a = (out_a / "scores.csv").read_bytes()
    bytes_b = (out_b / "scores.csv").read_bytes()
    reference = (study["out"] / "scores.csv").read_bytes()
    ok = bytes_a == bytes_b == reference
    _report(10, ok, f"scores.csv identical across runs ({len(bytes_a)} bytes)")
    assert bytes_a == bytes_b
    assert bytes_a == reference
