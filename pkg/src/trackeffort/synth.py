"""Synthetic detector degradation and a reference IOU tracker.

Ground truth gets perturbed into detection sets of controllable quality
(drops, spatial jitter, spurious boxes, confidence models), so full
detector -> tracker -> evaluation pipelines run at desk scale without any
neural network. The built-in profile ladder spans roughly AP 0.2 to 1.0
on a typical synthetic scene, from permissive-noisy to conservative-sparse.

Everything is deterministic given the seed; perturbation draws come from
per-frame child generators so frames could be processed in parallel
without changing the output.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .assignment import build_iou_cost, hungarian_solve, iou
from .mot_io import Box, Observation, SequenceMeta

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

CONFIDENCE_MODELS = ("uniform", "quality_linked")


@dataclass(frozen=True)
class PerturbationProfile:
    """Controls how ground truth degrades into a synthetic detection set.

    drop_prob: per-box miss rate. fp_per_frame: expected spurious boxes per
    frame (Poisson). jitter_sigma: center/size noise as a fraction of box
    size. confidence_model "uniform" gives every box confidence 1,
    "quality_linked" ties confidence to the overlap with the source box
    and gives spurious boxes low confidence.
    """

    drop_prob: float = 0.0
    fp_per_frame: float = 0.0
    jitter_sigma: float = 0.0
    confidence_model: str = "uniform"
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.drop_prob <= 1.0:
            raise ValueError("drop_prob must lie in [0, 1]")
        if self.fp_per_frame < 0:
            raise ValueError("fp_per_frame must be >= 0")
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be >= 0")
        if self.confidence_model not in CONFIDENCE_MODELS:
            raise ValueError(f"confidence_model must be one of {CONFIDENCE_MODELS}")


@dataclass(frozen=True)
class TrackerConfig:
    """Lifecycle parameters of the reference IOU tracker."""

    match_gate: float = 0.3
    max_age: int = 10
    min_hits: int = 2
    interpolate_gaps_up_to: int = 5

    def __post_init__(self) -> None:
        if not 0.0 < self.match_gate < 1.0:
            raise ValueError("match_gate must lie in (0, 1)")
        if self.max_age < 0:
            raise ValueError("max_age must be >= 0")
        if self.min_hits < 1:
            raise ValueError("min_hits must be >= 1")
        if not 0 <= self.interpolate_gaps_up_to <= self.max_age:
            raise ValueError("interpolate_gaps_up_to must lie in [0, max_age]")


# Detector-quality ladder, permissive-noisy (P1) to conservative-sparse (P5).
# Miss rate and spurious-box rate vary semi-independently so that precision
# is not just inverse recall across the ladder; AP@0.5 on a typical scene
# spans roughly 0.2 to 1.0.
BUILTIN_PROFILES: dict[str, PerturbationProfile] = {
    "P1": PerturbationProfile(drop_prob=0.03, fp_per_frame=4.0, jitter_sigma=0.08,
                              confidence_model="quality_linked", seed=101),
    "P2": PerturbationProfile(drop_prob=0.10, fp_per_frame=0.3, jitter_sigma=0.06,
                              confidence_model="quality_linked", seed=102),
    "P3": PerturbationProfile(drop_prob=0.30, fp_per_frame=2.0, jitter_sigma=0.12,
                              confidence_model="quality_linked", seed=103),
    "P4": PerturbationProfile(drop_prob=0.50, fp_per_frame=5.0, jitter_sigma=0.10,
                              confidence_model="quality_linked", seed=104),
    "P5": PerturbationProfile(drop_prob=0.70, fp_per_frame=0.3, jitter_sigma=0.08,
                              confidence_model="quality_linked", seed=105),
}

BUILTIN_TRACKERS: dict[str, TrackerConfig] = {
    # Near passthrough: emits every detection immediately, short memory.
    "reactive": TrackerConfig(match_gate=0.3, max_age=2, min_hits=1,
                              interpolate_gaps_up_to=0),
    # Heavy filtering and gap repair: works much harder on bad detections.
    "smoothing": TrackerConfig(match_gate=0.25, max_age=12, min_hits=3,
                               interpolate_gaps_up_to=8),
}


def _frame_rng(seed: int, frame: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(frame,)))


def perturb(ground_truth: Mapping[int, Sequence[Observation]],
            profile: PerturbationProfile, image_width: float,
            image_height: float) -> dict[int, tuple[Observation, ...]]:
    """Degrade ground truth into a synthetic detection set.

    Each box is independently dropped, survivors get zero-mean jitter on
    center and size (clamped so width/height stay positive and the box
    stays within a 4x image bound), and Poisson-many spurious boxes are
    sampled inside the image. Identities are stripped. Deterministic for
    a fixed (input, profile) pair.
    """
    bound_left, bound_right = -1.5 * image_width, 2.5 * image_width
    bound_top, bound_bottom = -1.5 * image_height, 2.5 * image_height
    detections: dict[int, tuple[Observation, ...]] = {}
    for frame in sorted(ground_truth):
        rng = _frame_rng(profile.seed, frame)
        emitted = []
        for obs in ground_truth[frame]:
            if rng.random() < profile.drop_prob:
                continue
            box = obs.box
            noise = rng.normal(0.0, 1.0, size=4) * profile.jitter_sigma
            if profile.jitter_sigma == 0.0:
                jittered = box  # bit-exact passthrough, no rounding drift
            else:
                width = max(box.width + noise[2] * box.width, min(1.0, box.width))
                height = max(box.height + noise[3] * box.height, min(1.0, box.height))
                cx = box.left + box.width / 2 + noise[0] * box.width
                cy = box.top + box.height / 2 + noise[1] * box.height
                left = min(max(cx - width / 2, bound_left), bound_right - width)
                top = min(max(cy - height / 2, bound_top), bound_bottom - height)
                jittered = Box(left, top, width, height)
            if profile.confidence_model == "quality_linked":
                overlap = iou(jittered, box)
                confidence = float(np.clip(0.2 + 0.8 * overlap
                                           + rng.normal(0.0, 0.01), 0.01, 1.0))
            else:
                confidence = 1.0
            emitted.append(Observation(frame, None, jittered, confidence=confidence))
        for _ in range(rng.poisson(profile.fp_per_frame)):
            width = rng.uniform(0.02, 0.10) * image_width
            height = rng.uniform(0.05, 0.20) * image_height
            left = rng.uniform(0.0, max(image_width - width, 1.0))
            top = rng.uniform(0.0, max(image_height - height, 1.0))
            if profile.confidence_model == "quality_linked":
                confidence = float(rng.uniform(0.05, 0.30))
            else:
                confidence = 1.0
            emitted.append(Observation(frame, None, Box(left, top, width, height),
                                       confidence=confidence))
        detections[frame] = tuple(emitted)
    return detections


def inject_id_switches(tracks: Mapping[int, Sequence[Observation]], switch_prob: float,
                       seed: int) -> dict[int, tuple[Observation, ...]]:
    """Swap two co-occurring track identities, frame-onward, at random frames.

    Boxes never change, only identity labels. The random draws are
    consumed identically whether or not a swap fires, so runs with the
    same seed and increasing ``switch_prob`` produce nested swap sets.
    Frames with fewer than two tracks are left unchanged.
    """
    if not 0.0 <= switch_prob <= 1.0:
        raise ValueError("switch_prob must lie in [0, 1]")
    frames = sorted(tracks)
    current: dict[int, list[Observation]] = {f: list(tracks[f]) for f in frames}
    rng = np.random.default_rng(seed)
    for index, frame in enumerate(frames):
        fire = rng.random() < switch_prob
        observations = current[frame]
        if len(observations) < 2:
            continue
        first = int(rng.integers(0, len(observations)))
        second = int(rng.integers(0, len(observations) - 1))
        if second >= first:
            second += 1
        if not fire:
            continue
        id_a = observations[first].identity
        id_b = observations[second].identity
        for later in frames[index:]:
            current[later] = [
                replace(obs, identity=id_b) if obs.identity == id_a
                else replace(obs, identity=id_a) if obs.identity == id_b
                else obs
                for obs in current[later]
            ]
    return {f: tuple(v) for f, v in current.items()}


class _Track:
    __slots__ = ("identity", "box", "hits", "misses", "last_match_frame", "confirmed")

    def __init__(self, identity: int, box: Box, frame: int, confirmed: bool):
        self.identity = identity
        self.box = box
        self.hits = 1
        self.misses = 0
        self.last_match_frame = frame
        self.confirmed = confirmed


def _interpolated(start: Box, end: Box, fraction: float) -> Box:
    def lerp(a: float, b: float) -> float:
        return a + (b - a) * fraction

    return Box(lerp(start.left, end.left), lerp(start.top, end.top),
               lerp(start.width, end.width), lerp(start.height, end.height))


def reference_track(detections: Mapping[int, Sequence[Observation]],
                    config: TrackerConfig,
                    frame_count: int | None = None) -> dict[int, tuple[Observation, ...]]:
    """Frame-ordered IOU tracker with track lifecycle management.

    Detections associate to live tracks by Hungarian matching on IOU cost,
    gated at ``match_gate``. Unmatched detections open tentative tracks
    that start emitting after ``min_hits`` matches; unmatched tracks coast
    (constant position, nothing emitted) for up to ``max_age`` frames.
    When a confirmed track re-matches after a gap of at most
    ``interpolate_gaps_up_to`` frames, the gap is backfilled by linear
    interpolation of the box parameters. Identities are unique and
    assigned in increasing order.
    """
    last_frame = frame_count if frame_count is not None else max(detections, default=0)
    output: dict[int, list[Observation]] = {k: [] for k in range(1, last_frame + 1)}
    live: list[_Track] = []
    next_identity = 1

    def emit(track: _Track, frame: int, box: Box) -> None:
        output[frame].append(Observation(frame, track.identity, box, confidence=1.0))

    for frame in range(1, last_frame + 1):
        frame_dets = list(detections.get(frame, ()))
        det_boxes = [o.box for o in frame_dets]
        track_boxes = [t.box for t in live]
        matrix = build_iou_cost(det_boxes, track_boxes, gate=config.match_gate,
                                inclusive=True)
        assignment = hungarian_solve(matrix)
        matched_dets = set()
        matched_tracks = set()
        for det_index, trk_index, _ in assignment.pairs:
            matched_dets.add(det_index)
            matched_tracks.add(trk_index)
            track = live[trk_index]
            new_box = det_boxes[det_index]
            gap = frame - track.last_match_frame - 1
            if track.confirmed and 0 < gap <= config.interpolate_gaps_up_to:
                for missing in range(track.last_match_frame + 1, frame):
                    fraction = (missing - track.last_match_frame) / (frame - track.last_match_frame)
                    emit(track, missing, _interpolated(track.box, new_box, fraction))
            track.box = new_box
            track.hits += 1
            track.misses = 0
            track.last_match_frame = frame
            if track.hits >= config.min_hits:
                track.confirmed = True
                emit(track, frame, new_box)

        for det_index, obs in enumerate(frame_dets):
            if det_index in matched_dets:
                continue
            track = _Track(next_identity, obs.box, frame,
                           confirmed=config.min_hits <= 1)
            next_identity += 1
            if track.confirmed:
                emit(track, frame, obs.box)
            live.append(track)

        survivors = []
        for index, track in enumerate(live):
            if index not in matched_tracks and track.last_match_frame != frame:
                track.misses += 1
            if track.misses <= config.max_age:
                survivors.append(track)
        live = survivors

    return {k: tuple(sorted(v, key=lambda o: o.identity)) for k, v in output.items()}


def simulate_scene(name: str, frame_count: int, n_objects: int,
                   image_width: float = 1280.0, image_height: float = 720.0,
                   frame_rate: float = 30.0, seed: int = 0,
                   ) -> tuple[dict[int, tuple[Observation, ...]], SequenceMeta]:
    """Generate ground truth for a scene of drifting objects.

    Objects carry constant velocity plus small acceleration noise, enter
    and leave at random frames, and keep their centers inside the image.
    Returns per-frame GT observations plus the sequence metadata.
    """
    rng = np.random.default_rng(seed)
    frames: dict[int, list[Observation]] = {k: [] for k in range(1, frame_count + 1)}
    for identity in range(1, n_objects + 1):
        enter = int(rng.integers(1, max(2, frame_count // 2)))
        leave = int(rng.integers(min(enter + frame_count // 4, frame_count),
                                 frame_count + 1))
        width = float(rng.uniform(30, 90))
        height = float(rng.uniform(60, 160))
        cx = float(rng.uniform(width / 2, image_width - width / 2))
        cy = float(rng.uniform(height / 2, image_height - height / 2))
        vx = float(rng.uniform(-4, 4))
        vy = float(rng.uniform(-2, 2))
        for frame in range(enter, leave + 1):
            cx = min(max(cx + vx + float(rng.normal(0, 0.3)), 0.0), image_width)
            cy = min(max(cy + vy + float(rng.normal(0, 0.3)), 0.0), image_height)
            box = Box(cx - width / 2, cy - height / 2, width, height)
            frames[frame].append(Observation(frame, identity, box,
                                             confidence=1.0, class_id=1, visibility=1.0))
    meta = SequenceMeta(name=name, frame_count=frame_count, image_width=image_width,
                        image_height=image_height, frame_rate=frame_rate)
    return {k: tuple(v) for k, v in frames.items()}, meta


def _profile_from_table(table: Mapping) -> PerturbationProfile:
    known = {"drop_prob", "fp_per_frame", "jitter_sigma", "confidence_model", "seed"}
    unknown = set(table) - known
    if unknown:
        raise ValueError(f"unknown profile keys: {sorted(unknown)}")
    return PerturbationProfile(**table)


def _tracker_from_table(table: Mapping) -> TrackerConfig:
    known = {"match_gate", "max_age", "min_hits", "interpolate_gaps_up_to"}
    unknown = set(table) - known
    if unknown:
        raise ValueError(f"unknown tracker keys: {sorted(unknown)}")
    return TrackerConfig(**table)


def load_config_file(path: str | Path) -> tuple[dict[str, PerturbationProfile],
                                                dict[str, TrackerConfig]]:
    """Read `[profile.NAME]` and `[tracker.NAME]` tables from a TOML file."""
    with open(path, "rb") as handle:
        data = tomllib.load(handle)
    profiles = {name: _profile_from_table(table)
                for name, table in data.get("profile", {}).items()}
    trackers = {name: _tracker_from_table(table)
                for name, table in data.get("tracker", {}).items()}
    return profiles, trackers


def resolve_profile(name: str, config_path: str | Path | None = None) -> PerturbationProfile:
    """Look up a profile by name, from a config file if given, else built-ins."""
    if config_path is not None:
        profiles, _ = load_config_file(config_path)
        if name in profiles:
            return profiles[name]
        raise KeyError(f"profile {name!r} not found in {config_path}")
    if name in BUILTIN_PROFILES:
        return BUILTIN_PROFILES[name]
    raise KeyError(f"unknown built-in profile {name!r} "
                   f"(available: {sorted(BUILTIN_PROFILES)})")


def resolve_tracker(name: str, config_path: str | Path | None = None) -> TrackerConfig:
    """Look up a tracker config by name, from a config file if given, else built-ins."""
    if config_path is not None:
        _, trackers = load_config_file(config_path)
        if name in trackers:
            return trackers[name]
        raise KeyError(f"tracker {name!r} not found in {config_path}")
    if name in BUILTIN_TRACKERS:
        return BUILTIN_TRACKERS[name]
    raise KeyError(f"unknown built-in tracker {name!r} "
                   f"(available: {sorted(BUILTIN_TRACKERS)})")
