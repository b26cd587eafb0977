"""Tracker-effort scoring: how much a tracker improves on its detections.

Two complementary views are computed against ground truth and combined
into a single score:

* intra-frame effort: per frame, the gap between tracker output quality
  and detector output quality, where quality is a product of box
  similarity (one minus the mean matched-association cost) and cardinality
  agreement. Positive effort means the tracker improved the boxes it was
  given; zero means it passed them through; negative means it made them
  worse.
* inter-frame effort: per consecutive frame pair, the tracker's
  association gain over the raw detections, plus an identity-consistency
  score weighted by how well the tracker's association count matches the
  ground-truth population.

All matching is Hungarian on 1 - IOU with a strict positive-overlap gate:
zero-overlap pairs never associate, and no fixed IOU threshold is applied
anywhere in this module.

Empty-set conventions are centralized here and unit-tested: a comparison
against nothing is vacuously perfect when both sides are empty, and
worst-case when only one side is.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal, Sequence

from .assignment import build_iou_cost, hungarian_solve
from .mot_io import Box, EvaluationBundle, Observation

IdCombine = Literal["union", "intersection"]

FRAME_COMPONENT_COLUMNS = ("frame", "Q_d", "Q_t", "E_intra", "Y", "C",
                           "IDSW_score", "E_inter")


@dataclass(frozen=True)
class FrameQuality:
    """Detector- or tracker-output quality against ground truth at one frame."""

    box_similarity: float   # 1 - (association cost / matched pairs)
    count_agreement: float  # 1 - |#truth - #estimates| / max(counts)

    @property
    def quality(self) -> float:
        return self.box_similarity * self.count_agreement


@dataclass(frozen=True)
class FrameIntraResult:
    frame: int
    detector: FrameQuality
    tracker: FrameQuality

    @property
    def effort(self) -> float:
        return self.tracker.quality - self.detector.quality


@dataclass(frozen=True)
class FrameInterResult:
    frame: int                # the later frame of the (frame-1, frame) pair
    association_gain: float   # tracker minus detector association quality
    id_weight: float          # cardinality agreement of tracked identities
    switch_count: int
    switch_score: float

    @property
    def effort(self) -> float:
        return self.association_gain + self.id_weight * self.switch_score


@dataclass(frozen=True)
class TemScores:
    """Sequence-level effort summary plus the per-frame components."""

    intra_effort: float
    inter_effort: float
    alpha: float
    per_frame_intra: tuple[FrameIntraResult, ...]
    per_frame_inter: tuple[FrameInterResult, ...]

    @property
    def tem(self) -> float:
        return tem_score(self.intra_effort, self.inter_effort, self.alpha)


def _boxes(observations: Iterable[Observation]) -> list[Box]:
    return [obs.box for obs in observations]


def _matched_association(set_a: Sequence[Box], set_b: Sequence[Box]) -> tuple[float, int]:
    """Total Hungarian cost and pair count between two box sets (gate 0)."""
    assignment = hungarian_solve(build_iou_cost(set_a, set_b, gate=0.0))
    return assignment.total_cost, assignment.pair_count


def _similarity_from_matching(total_cost: float, pairs: int,
                              n_a: int, n_b: int) -> float:
    # Empty-set conventions: both sides empty is vacuously perfect; no
    # association despite boxes on some side is the worst case.
    if n_a == 0 and n_b == 0:
        return 1.0
    if pairs == 0:
        return 0.0
    return 1.0 - total_cost / pairs


def _count_agreement(n_a: int, n_b: int) -> float:
    if n_a == 0 and n_b == 0:
        return 1.0
    return 1.0 - abs(n_a - n_b) / max(n_a, n_b)


def frame_quality(estimated: Sequence[Box], truth: Sequence[Box]) -> FrameQuality:
    """Quality of one frame's estimated boxes against the ground truth.

    Box similarity is 1 minus the mean matched-pair cost under Hungarian
    association on 1 - IOU; cardinality agreement penalizes the count
    mismatch relative to the larger set.
    """
    total_cost, pairs = _matched_association(estimated, truth)
    return FrameQuality(
        box_similarity=_similarity_from_matching(total_cost, pairs,
                                                 len(estimated), len(truth)),
        count_agreement=_count_agreement(len(truth), len(estimated)),
    )


def intra_frame_effort(detections: Sequence[Box], tracks: Sequence[Box],
                       truth: Sequence[Box], frame: int = 1) -> FrameIntraResult:
    """Tracker-quality minus detector-quality at a single frame."""
    return FrameIntraResult(
        frame=frame,
        detector=frame_quality(detections, truth),
        tracker=frame_quality(tracks, truth),
    )


def sequence_intra(bundle: EvaluationBundle) -> tuple[float, list[FrameIntraResult]]:
    """Mean per-frame intra effort over the whole sequence."""
    results = []
    for k in range(1, bundle.meta.frame_count + 1):
        results.append(intra_frame_effort(_boxes(bundle.det(k)), _boxes(bundle.trk(k)),
                                          _boxes(bundle.gt(k)), frame=k))
    mean = sum(r.effort for r in results) / len(results)
    return mean, results


def association_quality(prev_boxes: Sequence[Box], cur_boxes: Sequence[Box]) -> float:
    """How cheaply two consecutive frames' boxes associate, in [0, 1]."""
    total_cost, pairs = _matched_association(prev_boxes, cur_boxes)
    return _similarity_from_matching(total_cost, pairs, len(prev_boxes), len(cur_boxes))


def association_improvement(det_prev: Sequence[Box], det_cur: Sequence[Box],
                            trk_prev: Sequence[Box], trk_cur: Sequence[Box]) -> float:
    """Tracker association quality minus detector association quality."""
    return association_quality(trk_prev, trk_cur) - association_quality(det_prev, det_cur)


def _identity_match(truth: Sequence[Observation],
                    tracks: Sequence[Observation]) -> dict[int, int]:
    """GT identity -> tracker identity under Hungarian box matching (gate 0)."""
    assignment = hungarian_solve(build_iou_cost(_boxes(truth), _boxes(tracks), gate=0.0))
    mapping = {}
    for gt_index, trk_index, _ in assignment.pairs:
        gt_id = truth[gt_index].identity
        trk_id = tracks[trk_index].identity
        if gt_id is not None and trk_id is not None:
            mapping[gt_id] = trk_id
    return mapping


def count_id_switches(truth_prev: Sequence[Observation], truth_cur: Sequence[Observation],
                      trk_prev: Sequence[Observation],
                      trk_cur: Sequence[Observation]) -> int:
    """Identity switches between two consecutive frames.

    A switch is a ground-truth identity matched to a tracker box in both
    frames whose matched tracker identity differs between them. Objects
    matched in only one of the two frames contribute nothing.
    """
    prev_map = _identity_match(truth_prev, trk_prev)
    cur_map = _identity_match(truth_cur, trk_cur)
    return sum(1 for gt_id, trk_id in cur_map.items()
               if gt_id in prev_map and prev_map[gt_id] != trk_id)


def idsw_score(switches: int, tracker_pairs: int) -> float:
    """Identity-consistency score: 1 - switches / tracker association count.

    With no tracker associations there is nothing to switch, so the score
    is 1. Clamped at 0: pathological geometry can produce more switches
    than consecutive-frame tracker associations.
    """
    if tracker_pairs == 0:
        return 1.0
    return max(0.0, 1.0 - switches / tracker_pairs)


def cardinality_weight(gt_ids_prev: set[int], gt_ids_cur: set[int], tracker_pairs: int,
                       combine: IdCombine = "union") -> float:
    """Agreement between the ground-truth population and tracker associations.

    The population over a frame pair is the union of the two frames'
    ground-truth identity sets (e.g. {1,2,3} and {3,4,5} count as 5
    identities); ``combine="intersection"`` switches to the overlap-only
    reading for comparison.
    """
    if combine == "union":
        population = len(gt_ids_prev | gt_ids_cur)
    elif combine == "intersection":
        population = len(gt_ids_prev & gt_ids_cur)
    else:
        raise ValueError(f"unknown id combine mode {combine!r}")
    if population == 0 and tracker_pairs == 0:
        return 1.0
    return 1.0 - abs(population - tracker_pairs) / max(population, tracker_pairs)


def inter_frame_effort(bundle: EvaluationBundle, frame: int,
                       combine: IdCombine = "union") -> FrameInterResult:
    """Inter-frame effort for the (frame-1, frame) pair, frame >= 2."""
    if not 2 <= frame <= bundle.meta.frame_count:
        raise ValueError("inter-frame effort needs 2 <= frame <= frame_count")
    gt_prev, gt_cur = bundle.gt(frame - 1), bundle.gt(frame)
    trk_prev, trk_cur = bundle.trk(frame - 1), bundle.trk(frame)
    det_prev, det_cur = bundle.det(frame - 1), bundle.det(frame)

    trk_cost, trk_pairs = _matched_association(_boxes(trk_prev), _boxes(trk_cur))
    trk_quality = _similarity_from_matching(trk_cost, trk_pairs,
                                            len(trk_prev), len(trk_cur))
    det_quality = association_quality(_boxes(det_prev), _boxes(det_cur))

    switches = count_id_switches(gt_prev, gt_cur, trk_prev, trk_cur)
    gt_ids_prev = {o.identity for o in gt_prev if o.identity is not None}
    gt_ids_cur = {o.identity for o in gt_cur if o.identity is not None}
    return FrameInterResult(
        frame=frame,
        association_gain=trk_quality - det_quality,
        id_weight=cardinality_weight(gt_ids_prev, gt_ids_cur, trk_pairs, combine),
        switch_count=switches,
        switch_score=idsw_score(switches, trk_pairs),
    )


def sequence_inter(bundle: EvaluationBundle,
                   combine: IdCombine = "union") -> tuple[float, list[FrameInterResult]]:
    """Mean inter-frame effort over frame pairs (2..K).

    A single-frame sequence has no frame pairs; the effort is reported
    as 0 with a warning.
    """
    if bundle.meta.frame_count < 2:
        warnings.warn("sequence has a single frame; inter-frame effort set to 0")
        return 0.0, []
    results = [inter_frame_effort(bundle, k, combine)
               for k in range(2, bundle.meta.frame_count + 1)]
    return sum(r.effort for r in results) / len(results), results


def tem_score(intra_effort: float, inter_effort: float, alpha: float = 0.5) -> float:
    """Weighted combination of the two effort levels, in [-1, 1.5] at alpha 0.5."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    return alpha * intra_effort + (1.0 - alpha) * inter_effort


def evaluate_sequence(bundle: EvaluationBundle, alpha: float = 0.5,
                      combine: IdCombine = "union") -> TemScores:
    """Compute the full effort summary for one sequence."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    intra_mean, intra = sequence_intra(bundle)
    inter_mean, inter = sequence_inter(bundle, combine)
    return TemScores(intra_effort=intra_mean, inter_effort=inter_mean, alpha=alpha,
                     per_frame_intra=tuple(intra), per_frame_inter=tuple(inter))


def write_frame_components(scores: TemScores, path: str | Path) -> None:
    """Export per-frame components as CSV (inter columns empty on frame 1)."""
    inter_by_frame = {r.frame: r for r in scores.per_frame_inter}
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(FRAME_COMPONENT_COLUMNS)
        for intra in scores.per_frame_intra:
            inter = inter_by_frame.get(intra.frame)
            row = [intra.frame, repr(intra.detector.quality), repr(intra.tracker.quality),
                   repr(intra.effort)]
            if inter is None:
                row += ["", "", "", ""]
            else:
                row += [repr(inter.association_gain), repr(inter.id_weight),
                        repr(inter.switch_score), repr(inter.effort)]
            writer.writerow(row)
