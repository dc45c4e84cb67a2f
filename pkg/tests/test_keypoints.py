import json

import numpy as np
import pytest

from signseg import (
    DegenerateFrameError,
    HandCountError,
    IsolatedSample,
    KeypointParseError,
    ShapeError,
    build_streams,
    concat_isolated,
    load_isolated_dataset,
    normalize_frame,
    parse_keypoint_file,
    resample_sequence,
)
from signseg.keypoints import FEATURES_PER_HAND, KEYPOINTS_PER_HAND
from signseg.seeding import derive_rng


def frame_line(hands):
    return json.dumps({"hands": [np.asarray(h).tolist() for h in hands]})


def make_hand(rng, scale=1.0, offset=0.0):
    return rng.normal(size=(KEYPOINTS_PER_HAND, 3)) * scale + offset


class TestParse:
    def test_round_trip_single_hand(self):
        rng = derive_rng(1, "parse")
        hands = [make_hand(rng) for _ in range(3)]
        text = "\n".join(frame_line([h]) for h in hands)
        frames = parse_keypoint_file(text)
        assert len(frames) == 3
        for got, want in zip(frames, hands):
            assert got.hands.shape == (1, 21, 3)
            np.testing.assert_allclose(got.hands[0], want)

    def test_blank_lines_skipped(self):
        rng = derive_rng(2, "parse")
        text = "\n\n" + frame_line([make_hand(rng)]) + "\n\n"
        assert len(parse_keypoint_file(text)) == 1

    def test_bad_json_reports_line_number(self):
        rng = derive_rng(3, "parse")
        text = frame_line([make_hand(rng)]) + "\n{oops\n"
        with pytest.raises(KeypointParseError) as exc:
            parse_keypoint_file(text)
        assert exc.value.line_number == 2

    def test_wrong_keypoint_count(self):
        text = json.dumps({"hands": [[[0.0, 0.0, 0.0]] * 20]})
        with pytest.raises(KeypointParseError):
            parse_keypoint_file(text)

    def test_non_finite_coordinate_rejected(self):
        rng = derive_rng(4, "parse")
        hand = make_hand(rng)
        hand[5, 1] = np.nan
        with pytest.raises(KeypointParseError):
            parse_keypoint_file(frame_line([hand]))

    def test_inconsistent_hand_count_across_frames(self):
        rng = derive_rng(5, "parse")
        text = frame_line([make_hand(rng)]) + "\n" + frame_line([make_hand(rng), make_hand(rng)])
        with pytest.raises(HandCountError):
            parse_keypoint_file(text)

    def test_three_hands_rejected(self):
        rng = derive_rng(6, "parse")
        with pytest.raises(KeypointParseError):
            parse_keypoint_file(frame_line([make_hand(rng)] * 3))


class TestNormalize:
    def test_forced_single_point(self):
        # wrist at (1,1,1), one point offset by +x, the rest on the wrist
        hand = np.ones((21, 3))
        hand[1] = [2.0, 1.0, 1.0]
        out = normalize_frame(hand[None])
        assert out.shape == (FEATURES_PER_HAND,)
        np.testing.assert_allclose(out[:3], [1.0, 0.0, 0.0])
        np.testing.assert_allclose(out[3:], 0.0)

    def test_all_points_equal_is_degenerate(self):
        with pytest.raises(DegenerateFrameError):
            normalize_frame(np.ones((1, 21, 3)))

    def test_matches_straight_line_formula(self):
        rng = derive_rng(7, "norm")
        for _ in range(50):
            hand = make_hand(rng, scale=rng.uniform(0.1, 5.0))
            rel = hand[1:] - hand[0]
            expected = (rel / np.linalg.norm(rel, axis=1).max()).reshape(-1)
            np.testing.assert_allclose(normalize_frame(hand[None]), expected, atol=1e-12)

    def test_translation_invariance(self):
        rng = derive_rng(8, "norm")
        for _ in range(25):
            hand = make_hand(rng)
            shifted = hand + rng.normal(size=3)
            np.testing.assert_allclose(
                normalize_frame(hand[None]), normalize_frame(shifted[None]), atol=1e-12
            )

    def test_scale_invariance(self):
        rng = derive_rng(9, "norm")
        for _ in range(25):
            hand = make_hand(rng)
            k = rng.uniform(1e-3, 1e3)
            np.testing.assert_allclose(
                normalize_frame(hand[None]), normalize_frame((hand * k)[None]), atol=1e-9
            )

    def test_two_hands_concatenate(self):
        rng = derive_rng(10, "norm")
        a, b = make_hand(rng), make_hand(rng)
        out = normalize_frame(np.stack([a, b]))
        assert out.shape == (2 * FEATURES_PER_HAND,)
        np.testing.assert_allclose(out[:FEATURES_PER_HAND], normalize_frame(a[None]))
        np.testing.assert_allclose(out[FEATURES_PER_HAND:], normalize_frame(b[None]))


class TestResample:
    def test_identity_when_lengths_match(self):
        rng = derive_rng(11, "resample")
        x = rng.normal(size=(50, 6))
        out = resample_sequence(x, 50)
        assert np.array_equal(out, x)
        assert out is not x

    def test_constant_pair_expands(self):
        x = np.ones((2, 3)) * 0.7
        out = resample_sequence(x, 7)
        np.testing.assert_allclose(out, 0.7)

    def test_linear_ramp(self):
        x = np.array([[0.0], [1.0], [2.0]])
        np.testing.assert_allclose(
            resample_sequence(x, 5), [[0.0], [0.5], [1.0], [1.5], [2.0]]
        )

    def test_single_frame_repeats(self):
        x = np.array([[3.0, 4.0]])
        out = resample_sequence(x, 4)
        assert out.shape == (4, 2)
        np.testing.assert_allclose(out, [[3.0, 4.0]] * 4)

    def test_endpoints_preserved_and_bounded(self):
        rng = derive_rng(12, "resample")
        for _ in range(30):
            t = int(rng.integers(2, 40))
            w = int(rng.integers(2, 80))
            x = rng.normal(size=(t, 4))
            out = resample_sequence(x, w)
            assert out.shape == (w, 4)
            np.testing.assert_allclose(out[0], x[0], atol=1e-12)
            np.testing.assert_allclose(out[-1], x[-1], atol=1e-12)
            # interpolation never leaves the per-feature envelope
            assert (out.max(axis=0) <= x.max(axis=0) + 1e-12).all()
            assert (out.min(axis=0) >= x.min(axis=0) - 1e-12).all()

    def test_bad_target(self):
        with pytest.raises(ValueError):
            resample_sequence(np.zeros((3, 2)), 0)

    def test_bad_rank(self):
        with pytest.raises(ShapeError):
            resample_sequence(np.zeros(5), 3)


class TestConcat:
    def test_three_samples(self):
        rng = derive_rng(13, "concat")
        samples = [
            IsolatedSample(rng.normal(size=(50, 6)), label)
            for label in (4, 7, 2)
        ]
        stream = concat_isolated(samples)
        assert stream.frames.shape == (150, 6)
        assert stream.gt_labels == [4, 7, 2]
        assert stream.boundaries == [(0, 49), (50, 99), (100, 149)]

    def test_single_sample_identity(self):
        rng = derive_rng(14, "concat")
        s = IsolatedSample(rng.normal(size=(10, 3)), 5)
        stream = concat_isolated([s])
        assert np.array_equal(stream.frames, s.frames)
        assert stream.gt_labels == [5]

    def test_order_reindexes(self):
        rng = derive_rng(15, "concat")
        samples = [IsolatedSample(rng.normal(size=(4, 2)), i) for i in range(3)]
        stream = concat_isolated(samples, [2, 0, 2])
        assert stream.gt_labels == [2, 0, 2]
        np.testing.assert_allclose(stream.frames[:4], samples[2].frames)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            concat_isolated([])

    def test_mixed_dims_rejected(self):
        rng = derive_rng(16, "concat")
        with pytest.raises(ShapeError):
            concat_isolated(
                [IsolatedSample(rng.normal(size=(4, 2)), 0), IsolatedSample(rng.normal(size=(4, 3)), 1)]
            )


class TestBuildStreams:
    def setup_method(self):
        rng = derive_rng(17, "pool")
        self.pool = [
            IsolatedSample(rng.normal(size=(6, 2)), label) for label in range(5) for _ in range(3)
        ]

    def test_deterministic(self):
        a = build_streams(self.pool, 4, 3, seed=99)
        b = build_streams(self.pool, 4, 3, seed=99)
        assert len(a) == 4
        for s, t in zip(a, b):
            assert s.gt_labels == t.gt_labels
            assert np.array_equal(s.frames, t.frames)

    def test_labels_distinct_within_stream(self):
        for stream in build_streams(self.pool, 10, 5, seed=3):
            assert len(set(stream.gt_labels)) == len(stream.gt_labels)

    def test_too_many_signs_rejected(self):
        with pytest.raises(ValueError):
            build_streams(self.pool, 1, 6, seed=0)


def test_load_isolated_dataset(tmp_path):
    rng = derive_rng(18, "dataset")
    manifest = []
    for i, label in enumerate([0, 1, 1]):
        lines = []
        for _ in range(int(rng.integers(3, 9))):
            lines.append(frame_line([make_hand(rng)]))
        name = f"clip_{i}.jsonl"
        (tmp_path / name).write_text("\n".join(lines))
        manifest.append({"file": name, "label": label})
    (tmp_path / "manifest.json").write_text(json.dumps(manifest))

    samples = load_isolated_dataset(tmp_path / "manifest.json", window=12)
    assert [s.label for s in samples] == [0, 1, 1]
    for s in samples:
        assert s.frames.shape == (12, FEATURES_PER_HAND)
        assert np.isfinite(s.frames).all()
