"""Keypoint frame stream parsing and writing.

One frame per line, JSON-encoded::

    {"frame_id": 0, "timestamp": 0.0,
     "persons": [[{"i": 0, "u": 634.2, "v": 210.0, "d": 3.01, "c": 1.0}, ...], ...]}

``d`` is the keypoint depth in meters or ``null`` when unavailable; ``c``
is the detector confidence in [0, 1].  Frame ids must strictly increase
within a stream.  Records whose confidences fall outside [0, 1] are
skipped and reported; structural violations raise FrameParseError with
the offending line number.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

from .errors import FrameParseError
from .skeleton import NUM_KEYPOINTS, Keypoint2D


@dataclass
class FrameRecord:
    frame_id: int
    timestamp: float
    persons: list[list[Keypoint2D]]
    _arrays: tuple | None = field(default=None, repr=False, compare=False)

    def keypoint_arrays(self) -> tuple:
        """Flat array view of the frame's keypoints, built once and cached.

        Returns (u, v, depth, confidence, indices, offsets): four (n,)
        float arrays over all keypoints that carry depth, the matching
        keypoint indices, and per-person offsets into them.  This is the
        recognition pipeline's native input; the keypoint object lists
        are the validation and serialization form.
        """
        if self._arrays is None:
            flat: list[Keypoint2D] = []
            offsets = [0]
            for person in self.persons:
                flat.extend(kp for kp in person if kp.depth is not None)
                offsets.append(len(flat))
            self._arrays = (
                np.array([kp.u for kp in flat]),
                np.array([kp.v for kp in flat]),
                np.array([kp.depth for kp in flat]),
                np.array([kp.confidence for kp in flat]),
                [kp.index for kp in flat],
                offsets,
            )
        return self._arrays


@dataclass(frozen=True)
class SkippedRecord:
    line_number: int
    reason: str


def _parse_keypoint(obj, line_number: int, where: str) -> Keypoint2D | None:
    """Returns None (reject-record signal) for out-of-range confidence."""
    if not isinstance(obj, dict):
        raise FrameParseError(line_number, f"{where}: keypoint must be an object")
    for key in ("i", "u", "v", "c"):
        if key not in obj:
            raise FrameParseError(line_number, f"{where}: keypoint missing {key!r}")
    index = obj["i"]
    if not isinstance(index, int) or isinstance(index, bool) or not 0 <= index < NUM_KEYPOINTS:
        raise FrameParseError(line_number, f"{where}: keypoint index {index!r} out of range")
    u, v, c = obj["u"], obj["v"], obj["c"]
    for name, val in (("u", u), ("v", v), ("c", c)):
        if not isinstance(val, (int, float)) or isinstance(val, bool) or not math.isfinite(val):
            raise FrameParseError(line_number, f"{where}: field {name!r} must be a finite number")
    if not 0.0 <= c <= 1.0:
        return None
    d = obj.get("d")
    if d is not None:
        if not isinstance(d, (int, float)) or isinstance(d, bool) or not math.isfinite(d):
            raise FrameParseError(line_number, f"{where}: depth must be a finite number or null")
        if d <= 0.0:
            raise FrameParseError(line_number, f"{where}: depth must be positive, got {d}")
        d = float(d)
    return Keypoint2D(index=index, u=float(u), v=float(v), depth=d, confidence=float(c))


def parse_frames(stream: Iterable[str] | str) -> tuple[list[FrameRecord], list[SkippedRecord]]:
    """Parse a frame stream.

    Returns (frames, skipped); ``skipped`` lists records dropped for
    out-of-range confidence values.  Raises FrameParseError on the first
    structural violation.
    """
    if isinstance(stream, str):
        stream = stream.splitlines()
    frames: list[FrameRecord] = []
    skipped: list[SkippedRecord] = []
    last_id: int | None = None
    for line_number, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FrameParseError(line_number, f"invalid JSON: {exc.msg}") from exc
        if not isinstance(doc, dict):
            raise FrameParseError(line_number, "record must be an object")
        frame_id = doc.get("frame_id")
        if not isinstance(frame_id, int) or isinstance(frame_id, bool) or frame_id < 0:
            raise FrameParseError(line_number, f"frame_id must be a nonnegative integer")
        if last_id is not None and frame_id <= last_id:
            raise FrameParseError(
                line_number, f"frame_id {frame_id} does not increase past {last_id}"
            )
        timestamp = doc.get("timestamp", 0.0)
        if not isinstance(timestamp, (int, float)) or isinstance(timestamp, bool):
            raise FrameParseError(line_number, "timestamp must be a number")
        persons_doc = doc.get("persons")
        if not isinstance(persons_doc, list):
            raise FrameParseError(line_number, "persons must be a list")
        persons: list[list[Keypoint2D]] = []
        rejected = None
        for p_idx, person_doc in enumerate(persons_doc):
            if not isinstance(person_doc, list):
                raise FrameParseError(line_number, f"person {p_idx} must be a keypoint list")
            keypoints: list[Keypoint2D] = []
            seen: set[int] = set()
            for kp_doc in person_doc:
                kp = _parse_keypoint(kp_doc, line_number, f"person {p_idx}")
                if kp is None:
                    rejected = f"person {p_idx} has a confidence outside [0, 1]"
                    break
                if kp.index in seen:
                    raise FrameParseError(
                        line_number, f"person {p_idx} repeats keypoint index {kp.index}"
                    )
                seen.add(kp.index)
                keypoints.append(kp)
            if rejected:
                break
            persons.append(keypoints)
        last_id = frame_id
        if rejected:
            skipped.append(SkippedRecord(line_number, rejected))
            continue
        frames.append(FrameRecord(frame_id=frame_id, timestamp=float(timestamp), persons=persons))
    return frames, skipped


def parse_frames_file(path: str | Path) -> tuple[list[FrameRecord], list[SkippedRecord]]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_frames(fh)


def frame_to_json(frame: FrameRecord) -> str:
    doc = {
        "frame_id": frame.frame_id,
        "timestamp": frame.timestamp,
        "persons": [
            [
                {"i": kp.index, "u": kp.u, "v": kp.v, "d": kp.depth, "c": kp.confidence}
                for kp in person
            ]
            for person in frame.persons
        ],
    }
    return json.dumps(doc, separators=(",", ":"))


def write_frames(frames: Iterable[FrameRecord], out: TextIO | str | Path) -> None:
    """Write frames as line-delimited JSON; round-trips losslessly."""
    if isinstance(out, (str, Path)):
        with open(out, "w", encoding="utf-8") as fh:
            write_frames(frames, fh)
        return
    for frame in frames:
        out.write(frame_to_json(frame))
        out.write("\n")
