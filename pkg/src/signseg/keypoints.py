"""Keypoint ingestion and sequence preparation.

Recordings arrive as JSON Lines, one frame per non-empty line:

    {"hands": [[[x, y, z], ...21 points], ...]}

with one or two hands per frame. Each hand is made translation and scale
invariant by subtracting the wrist (keypoint 0), dropping it, and dividing
by the largest remaining keypoint radius, which leaves 60 features per
hand. Sequences are then linearly resampled to a fixed window length, and
isolated samples can be concatenated into continuous streams that keep
their ground-truth label order.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    DegenerateFrameError,
    HandCountError,
    KeypointParseError,
    ShapeError,
)
from .seeding import derive_rng

KEYPOINTS_PER_HAND = 21
FEATURES_PER_HAND = 60  # 20 keypoints x 3 coordinates once the wrist is dropped
MIN_HAND_SCALE = 1e-9


@dataclass
class RawHandFrame:
    """One camera frame of raw keypoints, shape (hands, 21, 3)."""

    hands: np.ndarray


@dataclass
class IsolatedSample:
    """A fixed-length feature sequence (window, dim) with its class label."""

    frames: np.ndarray
    label: int


@dataclass
class ContinuousStream:
    """Concatenated frames (n, dim) plus the ordered ground-truth labels.

    boundaries holds the inclusive (start, end) frame span of each source
    sample when the stream was built by concatenation.
    """

    frames: np.ndarray
    gt_labels: list[int]
    boundaries: list[tuple[int, int]] | None = None


def parse_keypoint_file(data: bytes | str) -> list[RawHandFrame]:
    """Parse a JSON Lines keypoint recording.

    Args:
        data: file content, bytes (UTF-8) or already-decoded text.

    Returns:
        One RawHandFrame per non-empty line, in file order.

    Raises:
        KeypointParseError: a line is not valid JSON or violates the frame
            schema (the error carries the 1-based line number).
        HandCountError: the number of hands changes between frames.
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise KeypointParseError(0, f"not valid UTF-8: {exc}") from exc
    else:
        text = data

    frames: list[RawHandFrame] = []
    hand_count: int | None = None
    for line_number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise KeypointParseError(line_number, f"invalid JSON: {exc.msg}") from exc
        if not isinstance(obj, dict) or "hands" not in obj:
            raise KeypointParseError(line_number, 'expected an object with a "hands" key')
        hands = obj["hands"]
        if not isinstance(hands, list) or not 1 <= len(hands) <= 2:
            raise KeypointParseError(line_number, "hands must be a list of 1 or 2 hands")
        arr = np.empty((len(hands), KEYPOINTS_PER_HAND, 3), dtype=np.float64)
        for hand_index, hand in enumerate(hands):
            if not isinstance(hand, list) or len(hand) != KEYPOINTS_PER_HAND:
                count = len(hand) if isinstance(hand, list) else "no"
                raise KeypointParseError(
                    line_number,
                    f"hand {hand_index} has {count} keypoints, expected {KEYPOINTS_PER_HAND}",
                )
            for kp_index, point in enumerate(hand):
                if (
                    not isinstance(point, list)
                    or len(point) != 3
                    or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in point)
                ):
                    raise KeypointParseError(
                        line_number,
                        f"hand {hand_index} keypoint {kp_index} must be [x, y, z] numbers",
                    )
                arr[hand_index, kp_index] = point
        if not np.all(np.isfinite(arr)):
            raise KeypointParseError(line_number, "non-finite coordinate")
        if hand_count is None:
            hand_count = len(hands)
        elif len(hands) != hand_count:
            raise HandCountError(
                f"line {line_number}: frame has {len(hands)} hands, previous frames have {hand_count}"
            )
        frames.append(RawHandFrame(hands=arr))
    return frames


def normalize_frame(raw: RawHandFrame | np.ndarray) -> np.ndarray:
    """Reduce one raw frame to wrist-relative, scale-normalized features.

    Per hand: subtract keypoint 0, drop it, divide the remaining 20 points
    by the largest Euclidean radius. Hands are flattened in order, so the
    result has 60 features per hand.

    Raises:
        DegenerateFrameError: every keypoint of a hand sits on the wrist
            (max radius below 1e-9), so no scale exists.
    """
    hands = raw.hands if isinstance(raw, RawHandFrame) else np.asarray(raw, dtype=np.float64)
    if hands.ndim != 3 or hands.shape[1:] != (KEYPOINTS_PER_HAND, 3):
        raise ShapeError(f"expected (hands, {KEYPOINTS_PER_HAND}, 3) keypoints, got {hands.shape}")
    parts = []
    for hand in hands:
        relative = hand[1:] - hand[0]
        scale = float(np.sqrt((relative**2).sum(axis=1)).max())
        if scale < MIN_HAND_SCALE:
            raise DegenerateFrameError("all keypoints coincide with the wrist")
        parts.append((relative / scale).reshape(-1))
    return np.concatenate(parts)


def resample_sequence(frames: np.ndarray, target: int) -> np.ndarray:
    """Linearly resample a (t, dim) sequence to exactly `target` frames.

    Output frame i sits at input position i * (t - 1) / (target - 1) and is
    the linear interpolation of its two neighbours, so the endpoints are
    preserved exactly and target == t returns a copy of the input.
    """
    if target < 1:
        raise ValueError(f"target length must be >= 1, got {target}")
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2:
        raise ShapeError(f"expected a (frames, features) array, got shape {frames.shape}")
    t = frames.shape[0]
    if t == 0:
        raise ValueError("cannot resample an empty sequence")
    if target == t:
        return frames.copy()
    if t == 1:
        return np.repeat(frames, target, axis=0)
    positions = np.linspace(0.0, t - 1.0, target)
    idx = np.minimum(np.floor(positions).astype(int), t - 2)
    frac = (positions - idx)[:, None]
    return (1.0 - frac) * frames[idx] + frac * frames[idx + 1]


def concat_isolated(samples: list[IsolatedSample], order: list[int] | None = None) -> ContinuousStream:
    """Concatenate isolated samples into one continuous stream.

    Args:
        samples: source samples; all must share the feature dimension.
        order: indices into `samples` giving the concatenation order,
            default is the given order. Repeats are allowed.
    """
    if not samples:
        raise ValueError("need at least one sample to build a stream")
    indices = list(range(len(samples))) if order is None else list(order)
    if not indices:
        raise ValueError("order must name at least one sample")
    for i in indices:
        if not 0 <= i < len(samples):
            raise ValueError(f"order index {i} out of range for {len(samples)} samples")
    dims = {samples[i].frames.shape[1] for i in indices}
    if len(dims) != 1:
        raise ShapeError(f"samples have mixed feature dimensions: {sorted(dims)}")

    frames = np.concatenate([samples[i].frames for i in indices], axis=0)
    labels = [int(samples[i].label) for i in indices]
    boundaries = []
    start = 0
    for i in indices:
        length = samples[i].frames.shape[0]
        boundaries.append((start, start + length - 1))
        start += length
    return ContinuousStream(frames=frames, gt_labels=labels, boundaries=boundaries)


def build_streams(
    samples: list[IsolatedSample],
    n_streams: int,
    signs_per_stream: int,
    seed: int,
) -> list[ContinuousStream]:
    """Assemble continuous test streams from a pool of isolated samples.

    Each stream draws `signs_per_stream` distinct classes in random order
    and one random sample per drawn class, so no two adjacent signs share a
    label (run collapse in the decoder cannot tell adjacent repeats apart).
    """
    if n_streams < 1 or signs_per_stream < 1:
        raise ValueError("n_streams and signs_per_stream must be >= 1")
    by_label: dict[int, list[int]] = {}
    for i, sample in enumerate(samples):
        by_label.setdefault(int(sample.label), []).append(i)
    labels = sorted(by_label)
    if signs_per_stream > len(labels):
        raise ValueError(
            f"signs_per_stream {signs_per_stream} exceeds the {len(labels)} distinct labels available"
        )
    rng = derive_rng(seed, "streams")
    streams = []
    for _ in range(n_streams):
        chosen = rng.permutation(len(labels))[:signs_per_stream]
        picks = [by_label[labels[c]][rng.integers(len(by_label[labels[c]]))] for c in chosen]
        streams.append(concat_isolated(samples, picks))
    return streams


def load_isolated_dataset(manifest_path: str | Path, window: int) -> list[IsolatedSample]:
    """Load a labelled dataset from a manifest of keypoint recordings.

    The manifest is a JSON array of {"file": path, "label": int}; file
    paths are resolved relative to the manifest location. Each recording
    is parsed, normalized per frame, and resampled to `window` frames.
    """
    manifest_path = Path(manifest_path)
    try:
        entries = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"manifest {manifest_path}: invalid JSON: {exc}") from exc
    if not isinstance(entries, list):
        raise ConfigError(f"manifest {manifest_path}: expected a JSON array")
    samples = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict) or "file" not in entry or "label" not in entry:
            raise ConfigError(f"manifest entry {i}: expected an object with file and label")
        label = entry["label"]
        if not isinstance(label, int) or isinstance(label, bool) or label < 0:
            raise ConfigError(f"manifest entry {i}: label must be a non-negative integer")
        path = manifest_path.parent / entry["file"]
        frames = parse_keypoint_file(path.read_bytes())
        if not frames:
            raise ConfigError(f"manifest entry {i}: {path} holds no frames")
        features = np.stack([normalize_frame(f) for f in frames])
        samples.append(IsolatedSample(frames=resample_sequence(features, window), label=label))
    return samples


def load_stream_features(path: str | Path) -> np.ndarray:
    """Parse and normalize a continuous recording, without resampling."""
    frames = parse_keypoint_file(Path(path).read_bytes())
    if not frames:
        raise ValueError(f"{path} holds no frames")
    return np.stack([normalize_frame(f) for f in frames])
