import math

import numpy as np
import pytest

from oracles import naive_dilated_conv_1d, naive_dilated_conv_2d
from spattermon.imaging import Frame, LabelMap, threshold_segment
from spattermon.pgmio import FormatError, read_labelmap, write_labelmap, write_pgm
from spattermon.rng import Xorshift64Star
from spattermon.segmentation import (
    ClassProbabilities,
    DegenerateInputError,
    DilatedKernel,
    SegmenterConfig,
    SizeMismatchError,
    cross_entropy,
    dilated_conv,
    ingest_labelmap,
    kmeans_segment,
    pixel_accuracy,
    reference_segment,
    suppress_flare,
)
from spattermon.synth import FlareSpec, SceneSpec, synth_frame


class TestIngest:
    def test_all_zero_file(self, tmp_path):
        path = tmp_path / "zeros.pgm"
        write_pgm(path, np.zeros((4, 4), np.uint8))
        lm = ingest_labelmap(path)
        assert lm.labels.shape == (4, 4)
        assert (lm.labels == 0).all()

    def test_out_of_range_class_rejected(self, tmp_path):
        path = tmp_path / "bad.pgm"
        write_pgm(path, np.full((4, 4), 3, np.uint8))
        with pytest.raises(FormatError):
            ingest_labelmap(path)

    def test_size_mismatch_rejected(self, tmp_path):
        path = tmp_path / "lm.pgm"
        write_pgm(path, np.zeros((4, 4), np.uint8))
        with pytest.raises(SizeMismatchError):
            ingest_labelmap(path, paired_frame=Frame(np.zeros((5, 4), np.uint8)))

    def test_simulator_label_map_round_trips_bit_exact(self, tmp_path):
        _, labels, _ = synth_frame(SceneSpec(image_size=(96, 96), spatter_count=4, rng_seed=9))
        path = tmp_path / "sim.pgm"
        write_labelmap(path, labels)
        again = read_labelmap(path)
        assert np.array_equal(labels.labels, again.labels)


class TestReferenceSegment:
    def test_flare_free_scene_keeps_all_spatters(self):
        spec = SceneSpec(image_size=(128, 128), spatter_count=5, rng_seed=21)
        frame, _, truth = synth_frame(spec)
        lm = reference_segment(frame)
        from spattermon.registration import count_spatters

        count, _ = count_spatters(lm)
        assert count == truth.spatter_count == 5

    def test_flare_column_is_suppressed(self):
        spec = SceneSpec(
            image_size=(128, 128),
            spatter_count=0,
            flare=FlareSpec(column_x=30.0, spot_count=4, spot_spacing=20.0),
            rng_seed=3,
        )
        frame, _, _ = synth_frame(spec)
        raw = threshold_segment(frame, 200.0, 100.0)
        assert (raw.labels == 2).sum() > 0  # flare lands in the spatter band
        lm = reference_segment(frame)
        from spattermon.registration import count_spatters

        count, _ = count_spatters(lm)
        assert count == 0

    def test_all_background_frame(self):
        lm = reference_segment(Frame(np.zeros((32, 32), np.uint8)))
        assert (lm.labels == 0).all()

    def test_equals_threshold_segment_without_collinear_spatter(self):
        spec = SceneSpec(image_size=(128, 128), spatter_count=4, rng_seed=33)
        frame, _, _ = synth_frame(spec)
        cfg = SegmenterConfig()
        assert np.array_equal(
            reference_segment(frame, cfg).labels,
            threshold_segment(frame, cfg.t_mp, cfg.t_spatter).labels,
        )

    def test_two_collinear_spots_survive_default_k(self):
        labels = np.zeros((40, 40), np.uint8)
        labels[5:8, 10:13] = 2
        labels[20:23, 10:13] = 2
        out = suppress_flare(LabelMap(labels), flare_k=3, flare_tol_x=1.5)
        assert (out.labels == 2).sum() == 18
        out2 = suppress_flare(LabelMap(labels), flare_k=2, flare_tol_x=1.5)
        assert (out2.labels == 2).sum() == 0


class TestKmeansSegment:
    def test_three_levels_map_by_intensity(self):
        px = np.array([[0] * 6 + [120] * 3 + [255] * 2], np.uint8).reshape(1, 11)
        lm = kmeans_segment(Frame(px), 3)
        assert lm.labels.tolist()[0] == [0] * 6 + [2] * 3 + [1] * 2

    def test_k4_middle_clusters_both_map_to_spatter(self):
        px = np.array([[5] * 8 + [90] * 4 + [170] * 4 + [250] * 3], np.uint8)
        lm = kmeans_segment(Frame(px), 4)
        assert lm.labels.tolist()[0] == [0] * 8 + [2] * 8 + [1] * 3

    def test_flare_classified_as_spatter(self):
        # Flare spots share the spatter intensity band, so intensity
        # clustering cannot separate them: every flare pixel comes out
        # labeled spatter.
        px = np.full((64, 64), 12, np.uint8)
        ys, xs = np.mgrid[0:64, 0:64]
        px[(xs - 40) ** 2 + (ys - 32) ** 2 <= 36] = 250  # melt pool
        px[(xs - 55) ** 2 + (ys - 10) ** 2 <= 4] = 150  # real spatter
        flare = [(10, 12), (10, 28), (10, 44)]
        for fx, fy in flare:
            px[(xs - fx) ** 2 + (ys - fy) ** 2 <= 4] = 155
        lm = kmeans_segment(Frame(px), 3)
        assert all(lm.labels[fy, fx] == 2 for fx, fy in flare)
        assert lm.labels[10, 55] == 2

    def test_false_spatter_clusters_on_noisy_flare_scene(self):
        # On realistic noisy frames the baseline floods the spatter class
        # with clusters that match no true spatter.
        spec = SceneSpec(
            image_size=(128, 128),
            spatter_count=2,
            flare=FlareSpec(column_x=30.0),
            rng_seed=8,
        )
        frame, _, truth = synth_frame(spec)
        lm = kmeans_segment(frame, 3)
        from spattermon.registration import count_spatters

        count, centroids = count_spatters(lm)
        false = [
            c
            for c in centroids
            if all(
                (c[0] - t[0]) ** 2 + (c[1] - t[1]) ** 2 > 9.0
                for t in truth.spatter_centroids
            )
        ]
        assert len(false) >= 1

    def test_uniform_frame_degenerate(self):
        with pytest.raises(DegenerateInputError):
            kmeans_segment(Frame(np.full((8, 8), 7, np.uint8)), 3)

    def test_pixel_order_invariance(self):
        rng = Xorshift64Star(4)
        px = np.array(
            [[int(rng.uniform(0, 256)) for _ in range(30)] for _ in range(30)], np.uint8
        )
        frame = Frame(px)
        lm = kmeans_segment(frame, 3)
        perm = np.argsort([rng.random() for _ in range(px.size)])
        shuffled = px.ravel()[perm].reshape(px.shape)
        lm2 = kmeans_segment(Frame(shuffled), 3)
        assert np.array_equal(lm.labels.ravel()[perm], lm2.labels.ravel())


class TestMetrics:
    def test_one_hot_correct_gives_zero(self):
        lm = LabelMap(np.array([[0, 1], [2, 1]], np.uint8))
        assert cross_entropy(ClassProbabilities.one_hot(lm), lm) == 0.0

    def test_uniform_prediction_gives_ln3(self):
        lm = LabelMap(np.array([[0, 1], [2, 1]], np.uint8))
        probs = ClassProbabilities(np.full((2, 2, 3), 1.0 / 3.0))
        assert cross_entropy(probs, lm) == pytest.approx(math.log(3.0), abs=1e-12)

    def test_single_pixel_value(self):
        lm = LabelMap(np.zeros((1, 1), np.uint8))
        probs = ClassProbabilities(np.array([[[0.7, 0.2, 0.1]]]))
        assert cross_entropy(probs, lm) == pytest.approx(0.356675, abs=1e-6)

    def test_zero_probability_on_truth_is_infinite(self):
        lm = LabelMap(np.zeros((1, 1), np.uint8))
        probs = ClassProbabilities(np.array([[[0.0, 0.5, 0.5]]]))
        assert cross_entropy(probs, lm) == math.inf

    def test_moving_mass_toward_truth_decreases_loss(self):
        lm = LabelMap(np.zeros((1, 1), np.uint8))
        losses = []
        for p_true in np.linspace(0.1, 0.9, 9):
            rest = (1.0 - p_true) / 2.0
            losses.append(cross_entropy(ClassProbabilities(np.array([[[p_true, rest, rest]]])), lm))
        assert all(a > b for a, b in zip(losses, losses[1:]))

    def test_dimension_mismatch(self):
        lm = LabelMap(np.zeros((2, 2), np.uint8))
        with pytest.raises(SizeMismatchError):
            cross_entropy(ClassProbabilities(np.full((1, 2, 3), 1 / 3)), lm)

    def test_probability_validation(self):
        with pytest.raises(ValueError):
            ClassProbabilities(np.array([[[0.5, 0.2, 0.1]]]))
        with pytest.raises(ValueError):
            ClassProbabilities(np.array([[[-0.1, 0.6, 0.5]]]))

    def test_pixel_accuracy_cases(self):
        a = LabelMap(np.array([[0, 1], [2, 1]], np.uint8))
        assert pixel_accuracy(a, a) == 1.0
        b = LabelMap(np.array([[1, 2], [0, 2]], np.uint8))
        assert pixel_accuracy(a, b) == 0.0
        c = LabelMap(np.array([[0, 1], [2, 0]], np.uint8))
        assert pixel_accuracy(c, a) == 0.75
        with pytest.raises(SizeMismatchError):
            pixel_accuracy(a, LabelMap(np.zeros((1, 2), np.uint8)))


class TestDilatedConv:
    def test_delta_kernel_is_identity_slice(self):
        x = np.arange(10.0)
        y = dilated_conv(x, DilatedKernel(np.array([0.0, 1.0, 0.0]), rate=1))
        assert np.array_equal(y, x[1:-1])

    def test_documented_rate2_example(self):
        y = dilated_conv(np.array([1.0, 2, 3, 4, 5]), DilatedKernel(np.ones(3), rate=2))
        assert y.tolist() == [9.0]

    def test_matches_naive_oracle_rate1(self):
        rng = Xorshift64Star(66)
        for _ in range(100):
            n = 5 + rng.randint(20)
            k = 2 + rng.randint(3)
            x = [rng.uniform(-5, 5) for _ in range(n)]
            w = [rng.uniform(-2, 2) for _ in range(k)]
            ours = dilated_conv(np.array(x), DilatedKernel(np.array(w), rate=1))
            assert np.allclose(ours, naive_dilated_conv_1d(x, w, 1), atol=1e-12)

    def test_matches_naive_oracle_any_rate(self):
        rng = Xorshift64Star(67)
        for _ in range(50):
            r = 1 + rng.randint(3)
            k = 2 + rng.randint(3)
            n = r * (k - 1) + 1 + rng.randint(15)
            x = [rng.uniform(-5, 5) for _ in range(n)]
            w = [rng.uniform(-2, 2) for _ in range(k)]
            ours = dilated_conv(np.array(x), DilatedKernel(np.array(w), rate=r))
            assert np.allclose(ours, naive_dilated_conv_1d(x, w, r), atol=1e-12)

    def test_2d_matches_naive_oracle(self):
        rng = Xorshift64Star(68)
        x = np.array([[rng.uniform(-1, 1) for _ in range(9)] for _ in range(8)])
        w = np.array([[rng.uniform(-1, 1) for _ in range(3)] for _ in range(3)])
        ours = dilated_conv(x, DilatedKernel(w, rate=2))
        assert np.allclose(ours, naive_dilated_conv_2d(x, w, 2), atol=1e-12)

    def test_input_too_short(self):
        with pytest.raises(ValueError):
            dilated_conv(np.ones(4), DilatedKernel(np.ones(3), rate=2))

    def test_kernel_validation(self):
        with pytest.raises(ValueError):
            DilatedKernel(np.ones(3), rate=0)
        with pytest.raises(ValueError):
            DilatedKernel(np.ones((2, 3)), rate=1)
