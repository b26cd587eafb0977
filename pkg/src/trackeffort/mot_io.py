"""MOTChallenge-format file ingestion and writing.

Handles the three flavours of per-frame text files used throughout the
toolkit (ground truth, raw detections, tracker output), the ``seqinfo.ini``
sequence metadata file, and the assembly of per-sequence evaluation bundles.

Row layouts (comma separated):

* DET / TRACK: ``frame,id,bb_left,bb_top,bb_width,bb_height,conf,x,y,z``
* GT:          ``frame,id,bb_left,bb_top,bb_width,bb_height,flag,class,visibility``

Raw detections carry ``id = -1`` (no identity). The GT ``flag`` column
(0 = ignore, 1 = evaluate) is stored in ``Observation.confidence``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence


class SourceKind(Enum):
    """Which of the three MOT file flavours a row belongs to."""

    GT = "gt"
    DET = "det"
    TRACK = "track"


class MotParseError(ValueError):
    """Raised for malformed MOT rows; carries file path and line number."""

    def __init__(self, message: str, *, path: str | None = None, line_no: int | None = None):
        self.path = path
        self.line_no = line_no
        where = ""
        if path is not None:
            where = f"{path}:"
        if line_no is not None:
            where += f"{line_no}: "
        elif path is not None:
            where += " "
        super().__init__(where + message)


@dataclass(frozen=True)
class Box:
    """Axis-aligned bounding box in pixel coordinates (top-left origin)."""

    left: float
    top: float
    width: float
    height: float

    def __post_init__(self) -> None:
        for name in ("left", "top", "width", "height"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"box {name} must be finite")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("box width and height must be positive")

    @property
    def right(self) -> float:
        return self.left + self.width

    @property
    def bottom(self) -> float:
        return self.top + self.height

    @property
    def area(self) -> float:
        return self.width * self.height


@dataclass(frozen=True)
class Observation:
    """One bounding box at one frame, optionally carrying a track identity.

    ``identity`` is None for raw detections. ``confidence`` doubles as the
    GT evaluation flag for ground-truth rows. ``class_id`` and
    ``visibility`` are only meaningful for ground truth.
    """

    frame: int
    identity: int | None
    box: Box
    confidence: float = 1.0
    class_id: int = 1
    visibility: float = 1.0

    def __post_init__(self) -> None:
        if self.frame < 1:
            raise ValueError("frame index must be >= 1")


@dataclass(frozen=True)
class SequenceMeta:
    """Sequence-level metadata, normally read from seqinfo.ini."""

    name: str
    frame_count: int
    image_width: float
    image_height: float
    frame_rate: float = 30.0

    def __post_init__(self) -> None:
        if self.frame_count < 1:
            raise ValueError("frame_count must be >= 1")


FrameMap = Mapping[int, tuple[Observation, ...]]


@dataclass(frozen=True)
class EvaluationBundle:
    """Aligned per-frame ground truth, detections and tracker output.

    Every frame index in ``[1, meta.frame_count]`` is present in each map;
    frames without observations hold empty tuples. Bundles are read-only
    after construction and safe to share across parallel workers.
    """

    meta: SequenceMeta
    ground_truth: FrameMap
    detections: FrameMap
    tracks: FrameMap

    def gt(self, frame: int) -> tuple[Observation, ...]:
        return self.ground_truth[frame]

    def det(self, frame: int) -> tuple[Observation, ...]:
        return self.detections[frame]

    def trk(self, frame: int) -> tuple[Observation, ...]:
        return self.tracks[frame]


def _clamp_unit(value: float, what: str) -> float:
    if 0.0 <= value <= 1.0:
        return value
    warnings.warn(f"{what} outside [0,1] clamped", stacklevel=3)
    return min(1.0, max(0.0, value))


def parse_mot_line(line: str, kind: SourceKind, *, line_no: int | None = None,
                   path: str | None = None) -> Observation:
    """Parse one comma-separated MOT row into an Observation.

    Requires at least six numeric fields. ``id = -1`` maps to an absent
    identity. Confidence/visibility values outside [0,1] are clamped with
    a warning. Raises :class:`MotParseError` on malformed rows.
    """
    tokens = [t.strip() for t in line.strip().split(",")]
    while tokens and tokens[-1] == "":
        tokens.pop()
    if len(tokens) < 6:
        raise MotParseError(f"expected >= 6 fields, got {len(tokens)}",
                            path=path, line_no=line_no)
    try:
        values = [float(t) for t in tokens]
    except ValueError:
        raise MotParseError(f"non-numeric field in row {tokens!r}",
                            path=path, line_no=line_no) from None

    frame = int(values[0])
    raw_id = int(values[1])
    left, top, width, height = values[2:6]
    if frame < 1:
        raise MotParseError(f"frame index {frame} < 1", path=path, line_no=line_no)
    if width <= 0 or height <= 0:
        raise MotParseError(f"non-positive box size {width}x{height}",
                            path=path, line_no=line_no)
    if not all(math.isfinite(v) for v in (left, top, width, height)):
        raise MotParseError("non-finite box coordinate", path=path, line_no=line_no)
    identity = None if raw_id == -1 else raw_id
    box = Box(left, top, width, height)

    if kind is SourceKind.GT:
        flag = _clamp_unit(values[6], "GT flag") if len(values) > 6 else 1.0
        class_id = int(values[7]) if len(values) > 7 else 1
        visibility = _clamp_unit(values[8], "GT visibility") if len(values) > 8 else 1.0
        return Observation(frame, identity, box, confidence=flag,
                           class_id=class_id, visibility=visibility)

    confidence = _clamp_unit(values[6], "detection confidence") if len(values) > 6 else 1.0
    return Observation(frame, identity, box, confidence=confidence)


def load_mot_file(path: str | Path, kind: SourceKind) -> list[Observation]:
    """Read a whole MOT file, skipping blank lines."""
    observations = []
    text = Path(path).read_text(encoding="utf-8")
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        observations.append(parse_mot_line(line, kind, line_no=line_no, path=str(path)))
    return observations


def parse_seqinfo(path: str | Path) -> SequenceMeta:
    """Parse a seqinfo-style key-value file (section headers tolerated)."""
    fields: dict[str, str] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith(("[", ";", "#")):
            continue
        if "=" not in line:
            continue
        key, _, value = line.partition("=")
        fields[key.strip()] = value.strip()
    try:
        return SequenceMeta(
            name=fields.get("name", Path(path).parent.name),
            frame_count=int(fields["seqLength"]),
            image_width=float(fields["imWidth"]),
            image_height=float(fields["imHeight"]),
            frame_rate=float(fields.get("frameRate", 30)),
        )
    except KeyError as exc:
        raise MotParseError(f"seqinfo missing key {exc}", path=str(path)) from None


def _observation_sort_key(obs: Observation):
    identity = obs.identity if obs.identity is not None else -1
    return (obs.frame, identity, obs.box.left, obs.box.top,
            obs.box.width, obs.box.height, obs.confidence)


def group_by_frame(observations: Iterable[Observation], frame_count: int,
                   *, source: str = "observations",
                   require_identity: bool = False) -> dict[int, tuple[Observation, ...]]:
    """Bucket observations by frame over 1..frame_count.

    Output is order-insensitive: within each frame, observations are sorted
    by a total key, so shuffled input lines produce an identical map.
    """
    frames: dict[int, list[Observation]] = {k: [] for k in range(1, frame_count + 1)}
    seen_ids: set[tuple[int, int]] = set()
    for obs in observations:
        if obs.frame > frame_count:
            raise MotParseError(
                f"{source}: frame {obs.frame} exceeds sequence length {frame_count}")
        if require_identity:
            if obs.identity is None:
                raise MotParseError(f"{source}: frame {obs.frame} has an observation "
                                    "without an identity")
            key = (obs.frame, obs.identity)
            if key in seen_ids:
                raise MotParseError(f"{source}: duplicate identity {obs.identity} "
                                    f"in frame {obs.frame}")
            seen_ids.add(key)
        frames[obs.frame].append(obs)
    return {k: tuple(sorted(v, key=_observation_sort_key)) for k, v in frames.items()}


def load_bundle(gt_path: str | Path, det_path: str | Path, track_path: str | Path,
                meta: SequenceMeta | str | Path) -> EvaluationBundle:
    """Load the three MOT files of one sequence into an EvaluationBundle.

    ``meta`` is either an explicit :class:`SequenceMeta` or a path to a
    seqinfo file. GT and tracker observations must carry identities that
    are unique within each frame.
    """
    if not isinstance(meta, SequenceMeta):
        meta = parse_seqinfo(meta)
    gt = group_by_frame(load_mot_file(gt_path, SourceKind.GT), meta.frame_count,
                        source=str(gt_path), require_identity=True)
    det = group_by_frame(load_mot_file(det_path, SourceKind.DET), meta.frame_count,
                         source=str(det_path))
    trk = group_by_frame(load_mot_file(track_path, SourceKind.TRACK), meta.frame_count,
                         source=str(track_path), require_identity=True)
    return EvaluationBundle(meta=meta, ground_truth=gt, detections=det, tracks=trk)


def bundle_from_frames(meta: SequenceMeta, ground_truth: Mapping[int, Sequence[Observation]],
                       detections: Mapping[int, Sequence[Observation]],
                       tracks: Mapping[int, Sequence[Observation]]) -> EvaluationBundle:
    """Assemble a bundle from in-memory per-frame observation maps."""
    def normalize(source: Mapping[int, Sequence[Observation]], name: str,
                  require_identity: bool) -> dict[int, tuple[Observation, ...]]:
        flat = [obs for frame in source.values() for obs in frame]
        return group_by_frame(flat, meta.frame_count, source=name,
                              require_identity=require_identity)

    return EvaluationBundle(
        meta=meta,
        ground_truth=normalize(ground_truth, "ground truth", True),
        detections=normalize(detections, "detections", False),
        tracks=normalize(tracks, "tracks", True),
    )


def filter_ground_truth(bundle: EvaluationBundle, allowed_classes: set[int] | None = frozenset({1}),
                        min_visibility: float = 0.0,
                        require_flag: bool = True) -> EvaluationBundle:
    """Drop GT observations that fail the class/visibility/flag filters.

    Defaults match the common MOT train-set convention: pedestrian class
    only, evaluation flag set, no visibility cutoff. Detections and tracks
    are left untouched. Idempotent.
    """
    def keep(obs: Observation) -> bool:
        if allowed_classes is not None and obs.class_id not in allowed_classes:
            return False
        if obs.visibility < min_visibility:
            return False
        if require_flag and obs.confidence == 0.0:
            return False
        return True

    filtered = {k: tuple(o for o in v if keep(o)) for k, v in bundle.ground_truth.items()}
    return replace(bundle, ground_truth=filtered)


def _format_number(value: float) -> str:
    # Integers render bare ("3" not "3.000000"); everything else keeps six
    # decimals, which bounds the write/parse round-trip error by 1e-6.
    text = f"{value:.6f}".rstrip("0").rstrip(".")
    return text if text not in ("", "-0") else "0"


def format_mot_line(obs: Observation, kind: SourceKind) -> str:
    identity = obs.identity if obs.identity is not None else -1
    geometry = [_format_number(v) for v in
                (obs.box.left, obs.box.top, obs.box.width, obs.box.height)]
    if kind is SourceKind.GT:
        tail = [_format_number(obs.confidence), str(obs.class_id),
                _format_number(obs.visibility)]
    else:
        tail = [_format_number(obs.confidence), "-1", "-1", "-1"]
    return ",".join([str(obs.frame), str(identity), *geometry, *tail])


def write_mot_file(observations: Iterable[Observation], path: str | Path,
                   kind: SourceKind) -> None:
    """Write observations as a MOT text file (sorted, deterministic)."""
    rows = [format_mot_line(o, kind) for o in sorted(observations, key=_observation_sort_key)]
    Path(path).write_text("\n".join(rows) + ("\n" if rows else ""), encoding="utf-8")


def write_seqinfo(meta: SequenceMeta, path: str | Path) -> None:
    lines = [
        "[Sequence]",
        f"name={meta.name}",
        f"seqLength={meta.frame_count}",
        f"imWidth={_format_number(meta.image_width)}",
        f"imHeight={_format_number(meta.image_height)}",
        f"frameRate={_format_number(meta.frame_rate)}",
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
