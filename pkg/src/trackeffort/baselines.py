"""Reference detection and tracking measures for the correlation study.

Detection side: TP/FP/FN, precision, recall and average precision at a
fixed IOU threshold (0.5 by default, all-point interpolated AP).
Tracking side: CLEAR accuracy/precision with identity switches, identity
F1 over a global trajectory assignment, and average tracking accuracy
from sequence-level trajectory association.

Unlike the effort scores, everything here is thresholded: a pair only
counts as matched when its IOU reaches the threshold.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .assignment import build_iou_cost, hungarian_solve, iou, max_profit_pairs
from .mot_io import Box, EvaluationBundle, Observation

FrameObservations = Mapping[int, Sequence[Observation]]


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class BaselineScores:
    ap50: float
    recall: float
    precision: float
    tp: int
    fp: int
    fn: int
    mota: float
    motp: float
    idf1: float
    ata: float
    idsw_total: int


def _thresholded_pairs(estimated: Sequence[Box], truth: Sequence[Box],
                       iou_threshold: float) -> list[tuple[int, int, float]]:
    matrix = build_iou_cost(estimated, truth, gate=iou_threshold, inclusive=True)
    return list(hungarian_solve(matrix).pairs)


def confusion_counts(estimated: FrameObservations, truth: FrameObservations,
                     iou_threshold: float = 0.5) -> ConfusionCounts:
    """Per-frame Hungarian matching at the threshold, summed over frames."""
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError("iou_threshold must lie in (0, 1]")
    tp = fp = fn = 0
    for frame in sorted(set(estimated) | set(truth)):
        est = [o.box for o in estimated.get(frame, ())]
        gt = [o.box for o in truth.get(frame, ())]
        matched = len(_thresholded_pairs(est, gt, iou_threshold))
        tp += matched
        fp += len(est) - matched
        fn += len(gt) - matched
    return ConfusionCounts(tp=tp, fp=fp, fn=fn)


def precision_recall(counts: ConfusionCounts) -> tuple[float, float]:
    """(precision, recall); each is 1 when its denominator is zero."""
    precision = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 1.0
    recall = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 1.0
    return precision, recall


def average_precision(detections: FrameObservations, truth: FrameObservations,
                      iou_threshold: float = 0.5) -> float:
    """All-point interpolated average precision at one IOU threshold.

    Detections are ranked by descending confidence and matched greedily:
    each takes the highest-IOU unused ground-truth box of its frame,
    provided the overlap reaches the threshold.
    """
    total_gt = sum(len(v) for v in truth.values())
    ranked = sorted(
        ((obs.confidence, frame, index, obs.box)
         for frame, frame_obs in detections.items()
         for index, obs in enumerate(frame_obs)),
        key=lambda item: (-item[0], item[1], item[2]),
    )
    if total_gt == 0:
        return 1.0 if not ranked else 0.0
    if not ranked:
        return 0.0

    used: dict[int, list[bool]] = {frame: [False] * len(obs)
                                   for frame, obs in truth.items()}
    hits = []
    for _, frame, _, box in ranked:
        gt_boxes = truth.get(frame, ())
        best_iou, best_index = 0.0, -1
        for gt_index, gt_obs in enumerate(gt_boxes):
            if used[frame][gt_index]:
                continue
            overlap = iou(box, gt_obs.box)
            if overlap > best_iou:
                best_iou, best_index = overlap, gt_index
        if best_index >= 0 and best_iou >= iou_threshold:
            used[frame][best_index] = True
            hits.append(1)
        else:
            hits.append(0)

    recalls = [0.0]
    precisions = [0.0]
    tp = 0
    for rank, hit in enumerate(hits, start=1):
        tp += hit
        recalls.append(tp / total_gt)
        precisions.append(tp / rank)
    for i in range(len(precisions) - 2, -1, -1):
        precisions[i] = max(precisions[i], precisions[i + 1])
    return sum((recalls[i + 1] - recalls[i]) * precisions[i + 1]
               for i in range(len(recalls) - 1))


def mota_motp(bundle: EvaluationBundle,
              iou_threshold: float = 0.5) -> tuple[float, float, int]:
    """CLEAR-style accuracy, localization precision, and total ID switches.

    Frame-ordered matching with persistence: last frame's GT-track pairs
    are kept while they still overlap above the threshold, the remainder
    is matched by Hungarian. A switch is counted whenever a ground-truth
    identity's matched track differs from its last known match. MOTP is
    the mean IOU over matched pairs (similarity form, higher is better).
    """
    total_gt = sum(len(bundle.gt(k)) for k in range(1, bundle.meta.frame_count + 1))
    if total_gt == 0:
        raise ValueError("MOTA is undefined on a sequence with no ground truth")

    false_negatives = false_positives = switches = 0
    iou_sum = 0.0
    match_count = 0
    prev_pairs: dict[int, int] = {}
    last_known: dict[int, int] = {}

    for k in range(1, bundle.meta.frame_count + 1):
        gt = bundle.gt(k)
        trk = bundle.trk(k)
        gt_by_id = {o.identity: o for o in gt}
        trk_by_id = {o.identity: o for o in trk}

        pairs: dict[int, int] = {}
        for gt_id, trk_id in prev_pairs.items():
            gt_obs = gt_by_id.get(gt_id)
            trk_obs = trk_by_id.get(trk_id)
            if gt_obs is None or trk_obs is None:
                continue
            overlap = iou(gt_obs.box, trk_obs.box)
            if overlap >= iou_threshold:
                pairs[gt_id] = trk_id
                iou_sum += overlap
                match_count += 1

        free_gt = [o for o in gt if o.identity not in pairs]
        taken_tracks = set(pairs.values())
        free_trk = [o for o in trk if o.identity not in taken_tracks]
        for gi, ti, cost in _thresholded_pairs([o.box for o in free_gt],
                                               [o.box for o in free_trk],
                                               iou_threshold):
            pairs[free_gt[gi].identity] = free_trk[ti].identity
            iou_sum += 1.0 - cost
            match_count += 1

        for gt_id, trk_id in pairs.items():
            if gt_id in last_known and last_known[gt_id] != trk_id:
                switches += 1
            last_known[gt_id] = trk_id

        false_negatives += len(gt) - len(pairs)
        false_positives += len(trk) - len(pairs)
        prev_pairs = pairs

    mota = 1.0 - (false_negatives + false_positives + switches) / total_gt
    motp = iou_sum / match_count if match_count else 0.0
    return mota, motp, switches


def _trajectories(frames: FrameObservations) -> dict[int, dict[int, Box]]:
    out: dict[int, dict[int, Box]] = {}
    for frame, observations in frames.items():
        for obs in observations:
            if obs.identity is not None:
                out.setdefault(obs.identity, {})[frame] = obs.box
    return out


def _trajectory_overlap_counts(gt_trajs: Sequence[dict[int, Box]],
                               trk_trajs: Sequence[dict[int, Box]],
                               iou_threshold: float) -> list[list[int]]:
    counts = []
    for gt_traj in gt_trajs:
        row = []
        for trk_traj in trk_trajs:
            shared = gt_traj.keys() & trk_traj.keys()
            row.append(sum(1 for f in shared
                           if iou(gt_traj[f], trk_traj[f]) >= iou_threshold))
        counts.append(row)
    return counts


def idf1(bundle: EvaluationBundle, iou_threshold: float = 0.5) -> float:
    """Identity F1 under a single global trajectory-to-trajectory assignment.

    The assignment maximizes the number of per-frame box matches (IDTP);
    with G ground-truth boxes and T tracker boxes overall,
    idf1 = 2*IDTP / (G + T).
    """
    gt_trajs = list(_trajectories(bundle.ground_truth).values())
    trk_trajs = list(_trajectories(bundle.tracks).values())
    total_gt = sum(len(t) for t in gt_trajs)
    total_trk = sum(len(t) for t in trk_trajs)
    if total_gt + total_trk == 0:
        return 1.0
    counts = _trajectory_overlap_counts(gt_trajs, trk_trajs, iou_threshold)
    idtp = sum(counts[i][j] for i, j in max_profit_pairs(counts))
    return 2.0 * idtp / (total_gt + total_trk)


def ata(bundle: EvaluationBundle, iou_threshold: float = 0.5) -> float:
    """Average tracking accuracy from sequence-level trajectory association.

    Each candidate trajectory pair scores matched-frames over the frames
    where either trajectory exists; the assignment maximizes the summed
    score, normalized by the mean trajectory count.
    """
    gt_trajs = list(_trajectories(bundle.ground_truth).values())
    trk_trajs = list(_trajectories(bundle.tracks).values())
    if not gt_trajs and not trk_trajs:
        return 1.0
    if not gt_trajs or not trk_trajs:
        return 0.0
    counts = _trajectory_overlap_counts(gt_trajs, trk_trajs, iou_threshold)
    scores = [[counts[i][j] / len(gt_trajs[i].keys() | trk_trajs[j].keys())
               for j in range(len(trk_trajs))]
              for i in range(len(gt_trajs))]
    stda = sum(scores[i][j] for i, j in max_profit_pairs(scores))
    return stda / ((len(gt_trajs) + len(trk_trajs)) / 2.0)


def evaluate_baselines(bundle: EvaluationBundle,
                       iou_threshold: float = 0.5) -> BaselineScores:
    """All baseline measures for one sequence.

    Detection measures score the raw detections; tracking measures score
    the identity-carrying tracker output.
    """
    counts = confusion_counts(bundle.detections, bundle.ground_truth, iou_threshold)
    precision, recall = precision_recall(counts)
    ap = average_precision(bundle.detections, bundle.ground_truth, iou_threshold)
    mota, motp, idsw_total = mota_motp(bundle, iou_threshold)
    return BaselineScores(
        ap50=ap, recall=recall, precision=precision,
        tp=counts.tp, fp=counts.fp, fn=counts.fn,
        mota=mota, motp=motp,
        idf1=idf1(bundle, iou_threshold),
        ata=ata(bundle, iou_threshold),
        idsw_total=idsw_total,
    )
