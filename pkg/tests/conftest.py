"""Shared builders for synthetic bundles used across the test modules."""

from __future__ import annotations

import random

from trackeffort.mot_io import Box, EvaluationBundle, Observation, SequenceMeta, bundle_from_frames

IMAGE_W, IMAGE_H = 640.0, 480.0


def make_obs(frame: int, identity: int | None, left: float, top: float,
             width: float = 10.0, height: float = 10.0, confidence: float = 1.0) -> Observation:
    return Observation(frame, identity, Box(left, top, width, height), confidence=confidence)


def random_box(rng: random.Random) -> Box:
    return Box(rng.uniform(-20, IMAGE_W), rng.uniform(-20, IMAGE_H),
               rng.uniform(2, 90), rng.uniform(2, 120))


def random_ground_truth(rng: random.Random, frame_count: int,
                        n_objects: int) -> dict[int, list[Observation]]:
    frames: dict[int, list[Observation]] = {k: [] for k in range(1, frame_count + 1)}
    for identity in range(1, n_objects + 1):
        start = rng.randint(1, frame_count)
        end = rng.randint(start, frame_count)
        x, y = rng.uniform(0, IMAGE_W), rng.uniform(0, IMAGE_H)
        w, h = rng.uniform(8, 70), rng.uniform(12, 110)
        for k in range(start, end + 1):
            x += rng.uniform(-8, 8)
            y += rng.uniform(-6, 6)
            frames[k].append(Observation(k, identity, Box(x, y, w, h)))
    return frames


def _noisy_copy(rng: random.Random, box: Box, scale: float) -> Box:
    return Box(box.left + rng.uniform(-scale, scale) * box.width,
               box.top + rng.uniform(-scale, scale) * box.height,
               max(1.0, box.width * rng.uniform(0.7, 1.3)),
               max(1.0, box.height * rng.uniform(0.7, 1.3)))


def random_bundle(rng: random.Random, max_objects: int = 20,
                  max_frames: int = 50) -> EvaluationBundle:
    """Adversarial random bundle: GT tracks, degraded detections, and one of
    several tracker behaviours (relabeled copy, noisy follow, pure noise)."""
    frame_count = rng.randint(1, max_frames)
    n_objects = rng.randint(0, max_objects)
    gt = random_ground_truth(rng, frame_count, n_objects)

    det: dict[int, list[Observation]] = {k: [] for k in gt}
    for k, frame_obs in gt.items():
        for obs in frame_obs:
            if rng.random() < 0.75:
                det[k].append(Observation(k, None, _noisy_copy(rng, obs.box, 0.3),
                                          confidence=rng.random()))
        for _ in range(rng.randint(0, 3)):
            det[k].append(Observation(k, None, random_box(rng), confidence=rng.random()))

    style = rng.choice(("relabel", "noisy", "chaos"))
    trk: dict[int, list[Observation]] = {k: [] for k in gt}
    offset = rng.randint(100, 500)
    for k, frame_obs in gt.items():
        if style == "relabel":
            trk[k] = [Observation(k, o.identity + offset, o.box) for o in frame_obs]
        elif style == "noisy":
            for o in frame_obs:
                if rng.random() < 0.8:
                    identity = o.identity + offset if rng.random() < 0.9 else o.identity + 900
                    trk[k].append(Observation(k, identity, _noisy_copy(rng, o.box, 0.4)))
        else:
            used = set()
            for _ in range(rng.randint(0, max_objects)):
                identity = rng.randint(1, 2 * max_objects + 5)
                if identity in used:
                    continue
                used.add(identity)
                trk[k].append(Observation(k, identity, random_box(rng)))

    meta = SequenceMeta(name=f"fuzz-{rng.randint(0, 10**6)}", frame_count=frame_count,
                        image_width=IMAGE_W, image_height=IMAGE_H)
    return bundle_from_frames(meta, gt, det, trk)
