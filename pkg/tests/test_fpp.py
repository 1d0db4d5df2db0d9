import math

import numpy as np
import pytest

from spattermon.fpp import (
    FringeStack,
    HeightMap,
    NoValidOverlapError,
    PhaseShiftSchedule,
    append_roughness_csv,
    compute_sa,
    gamma_correct,
    load_fringe_stack,
    load_heightmap,
    make_height_field,
    phase_to_height,
    save_fringe_stack,
    save_heightmap,
    synth_fringes,
    unwrap_reference,
    wrap_phase,
)
from spattermon.rng import Xorshift64Star

TWO_PI = 2.0 * math.pi


def stack_from_phase(phase, bias=120.0, amplitude=90.0, schedule=PhaseShiftSchedule()):
    frames = np.stack([bias + amplitude * np.cos(phase + d) for d in schedule.shifts])
    return FringeStack(frames, schedule)


class TestSchedule:
    def test_default_is_balanced_three_step(self):
        s = PhaseShiftSchedule()
        assert len(s) == 3
        assert s.is_balanced

    def test_too_few_shifts_rejected(self):
        with pytest.raises(ValueError):
            PhaseShiftSchedule((0.0, math.pi))


class TestSynthFringes:
    def test_zero_height_gives_identical_stacks(self):
        flat = make_height_field("flat", 32, 32)
        obj, ref = synth_fringes(flat, noise_sigma=0.0, gamma=1.8, seed=4)
        assert np.array_equal(obj.frames, ref.frames)

    def test_intensities_match_cosine_model_to_quantization(self):
        flat = make_height_field("flat", 64, 16)
        obj, _ = synth_fringes(
            flat, fringe_period=32.0, gamma=1.0, noise_sigma=0.0, bias=128.0, amplitude=100.0
        )
        xs = np.arange(64, dtype=float)
        for i, delta in enumerate(obj.schedule.shifts):
            model = 128.0 + 100.0 * np.cos(TWO_PI * xs / 32.0 + delta)
            assert np.abs(obj.frames[i].astype(float) - model).max() <= 0.5

    def test_parameter_validation(self):
        flat = make_height_field("flat", 8, 8)
        with pytest.raises(ValueError):
            synth_fringes(flat, fringe_period=1.5)
        with pytest.raises(ValueError):
            synth_fringes(flat, k_h=0.0)
        with pytest.raises(ValueError):
            synth_fringes(flat, bias=200.0, amplitude=100.0)

    def test_seeded_noise_is_reproducible(self):
        field = make_height_field("bumps", 24, 24, 20.0)
        a, _ = synth_fringes(field, noise_sigma=2.0, seed=11)
        b, _ = synth_fringes(field, noise_sigma=2.0, seed=11)
        c, _ = synth_fringes(field, noise_sigma=2.0, seed=12)
        assert np.array_equal(a.frames, b.frames)
        assert not np.array_equal(a.frames, c.frames)


class TestGammaCorrect:
    def test_gamma_one_is_identity(self):
        stack = stack_from_phase(np.zeros((4, 4)))
        out = gamma_correct(stack)
        assert np.allclose(out.frames, stack.frames.astype(float))

    def test_255_is_fixed_point(self):
        for gamma in (1.0, 1.8, 2.2, 2.6):
            stack = FringeStack(np.full((3, 2, 2), 255, np.uint8), gamma=gamma)
            assert np.allclose(gamma_correct(stack).frames, 255.0)

    def test_half_scale_value(self):
        stack = FringeStack(np.full((3, 1, 1), 128, np.uint8), gamma=2.2)
        assert gamma_correct(stack).frames[0, 0, 0] == pytest.approx(186.41505945392097, abs=1e-9)

    def test_undoes_distortion_within_quantization(self):
        xs = np.arange(128, dtype=float)
        clean = 120.0 + 90.0 * np.cos(TWO_PI * xs / 16.0)
        for gamma in (1.0, 1.8, 2.2, 2.6):
            distorted = np.clip(np.rint(255.0 * (clean / 255.0) ** gamma), 0, 255)
            stack = FringeStack(np.stack([distorted] * 3)[:, None, :], gamma=gamma)
            recovered = gamma_correct(stack).frames[0, 0]
            # Inverting after rounding costs more than a level where the
            # distorted curve is flat; bright half stays within one level.
            bright = clean >= 120.0
            assert np.abs(recovered[bright] - clean[bright]).max() <= 1.0


class TestWrapPhase:
    def test_uniform_intensity_pixel_is_invalid(self):
        stack = FringeStack(np.full((3, 2, 2), 77.0))
        pm = wrap_phase(stack)
        assert not pm.valid_mask.any()
        assert np.allclose(pm.modulation, 0.0, atol=1e-9)

    def test_symmetric_tail_cancellation(self):
        stack = FringeStack(np.array([3.0, 1.5, 1.5]).reshape(3, 1, 1))
        pm = wrap_phase(stack, modulation_threshold=0.1)
        assert pm.phase[0, 0] == pytest.approx(0.0, abs=1e-12)

    def test_quarter_turn_example(self):
        stack = FringeStack(np.array([2.0, 1.1340, 2.8660]).reshape(3, 1, 1))
        pm = wrap_phase(stack, modulation_threshold=0.1)
        assert pm.phase[0, 0] == pytest.approx(math.pi / 2.0, abs=1e-4)

    def test_recovers_random_phases_exactly(self):
        rng = Xorshift64Star(2718)
        phases = np.array([rng.uniform(-math.pi, math.pi) for _ in range(10_000)])
        phases = np.nextafter(phases, 0.0).reshape(100, 100)
        pm = wrap_phase(stack_from_phase(phases))
        err = np.abs(pm.phase - phases)
        err = np.minimum(err, TWO_PI - err)
        assert err.max() < 1e-9
        assert pm.valid_mask.all()
        assert np.allclose(pm.modulation, 90.0, atol=1e-9)

    def test_output_range_half_open(self):
        phases = np.array([[math.pi, -math.pi + 1e-12, 0.0, 1.0]])
        pm = wrap_phase(stack_from_phase(phases))
        assert (pm.phase > -math.pi).all()
        assert (pm.phase <= math.pi + 1e-12).all()


class TestUnwrapReference:
    def test_identical_maps_give_zero(self):
        phases = np.array([[0.3, 1.1], [-2.0, 2.9]])
        pm = wrap_phase(stack_from_phase(phases))
        out = unwrap_reference(pm, pm)
        assert np.allclose(out.phase, 0.0, atol=1e-12)

    def test_smooth_ramp_spanning_three_wraps(self):
        xs = np.broadcast_to(np.linspace(0.0, 3.0 * TWO_PI, 128), (32, 128))
        truth = xs - np.median(xs)
        carrier = np.broadcast_to(TWO_PI * np.arange(128) / 16.0, (32, 128))
        obj = wrap_phase(stack_from_phase(carrier + truth))
        ref = wrap_phase(stack_from_phase(carrier))
        out = unwrap_reference(obj, ref)
        rms = math.sqrt(float(np.mean((out.phase - truth) ** 2)))
        assert rms < 1e-6
        assert out.ambiguous == []

    def test_half_turn_steps_are_flagged_ambiguous(self):
        delta = np.zeros((1, 4))
        delta[0, 2:] = math.pi  # exact Nyquist step between columns 1 and 2
        obj = wrap_phase(stack_from_phase(delta))
        ref = wrap_phase(stack_from_phase(np.zeros((1, 4))))
        out = unwrap_reference(obj, ref)
        assert (2, 0) in out.ambiguous

    def test_no_overlap_raises(self):
        pm = wrap_phase(stack_from_phase(np.zeros((2, 2))))
        dead = wrap_phase(FringeStack(np.full((3, 2, 2), 10.0)))
        with pytest.raises(NoValidOverlapError):
            unwrap_reference(pm, dead)

    def test_global_offset_fixed_by_zero_median(self):
        # Feed an object whose true difference contains a uniform +2*2pi;
        # the unwrapped result must land back on the median-zero branch.
        base = np.broadcast_to(np.linspace(-1.0, 1.0, 64), (16, 64))
        obj = wrap_phase(stack_from_phase(base + 2.0 * TWO_PI))
        ref = wrap_phase(stack_from_phase(np.zeros((16, 64))))
        out = unwrap_reference(obj, ref)
        assert np.allclose(out.phase, base, atol=1e-9)

    def test_disconnected_valid_regions_each_unwrap(self):
        phases = np.zeros((3, 7))
        phases[:, 4:] = 1.0
        frames = np.stack(
            [120.0 + 90.0 * np.cos(phases + d) for d in PhaseShiftSchedule().shifts]
        )
        frames[:, :, 3] = 50.0  # kill the middle column's modulation
        pm = wrap_phase(FringeStack(frames))
        out = unwrap_reference(pm, pm)
        assert not out.valid_mask[:, 3].any()
        assert np.allclose(out.phase[out.valid_mask], 0.0, atol=1e-12)


class TestPhaseToHeight:
    def test_zero_phase_zero_height(self):
        pm = wrap_phase(stack_from_phase(np.zeros((4, 4))))
        h = phase_to_height(pm, 10.0)
        assert np.allclose(h.heights, 0.0)

    def test_direct_product(self):
        pm = wrap_phase(stack_from_phase(np.zeros((1, 1))))
        pm.phase[0, 0] = math.pi
        h = phase_to_height(pm, 10.0)
        assert h.heights[0, 0] == pytest.approx(31.41592653589793, abs=1e-9)

    def test_invalid_ratio(self):
        pm = wrap_phase(stack_from_phase(np.zeros((1, 1))))
        with pytest.raises(ValueError):
            phase_to_height(pm, 0.0)


def reconstruct(obj_stack, ref_stack, k_h):
    op = wrap_phase(gamma_correct(obj_stack))
    rp = wrap_phase(gamma_correct(ref_stack))
    return phase_to_height(unwrap_reference(op, rp), k_h)


class TestRoundTrip:
    def test_full_chain_recovers_heights(self):
        truth = make_height_field("bumps", 128, 128, 80.0)
        obj, ref = synth_fringes(truth, fringe_period=32.0, k_h=2.0, gamma=2.2, noise_sigma=0.0)
        recon = reconstruct(obj, ref, 2.0)
        rms = math.sqrt(float(np.mean((recon.heights - truth.heights) ** 2)))
        assert rms < 0.001 * 80.0
        sa_truth = compute_sa(truth).sa
        sa_recon = compute_sa(recon).sa
        assert abs(sa_recon - sa_truth) / sa_truth < 0.005


class TestComputeSa:
    def test_constant_field_zero(self):
        h = HeightMap(np.full((8, 8), 3.7), np.ones((8, 8), bool))
        assert compute_sa(h).sa == pytest.approx(0.0, abs=1e-12)

    def test_symmetric_two_level_field(self):
        data = np.concatenate([np.full((4, 8), 2.5), np.full((4, 8), -2.5)])
        h = HeightMap(data, np.ones((8, 8), bool))
        result = compute_sa(h)
        assert result.sa == pytest.approx(2.5)
        assert result.z_std == pytest.approx(2.5)

    def test_two_by_two_example(self):
        h = HeightMap(np.array([[0.0, 1.0], [2.0, 3.0]]), np.ones((2, 2), bool))
        assert compute_sa(h).sa == pytest.approx(1.0)

    def test_region_selection_and_validity(self):
        data = np.zeros((6, 6))
        data[:, 3:] = 4.0
        mask = np.ones((6, 6), bool)
        mask[0, 0] = False
        h = HeightMap(data, mask)
        left = compute_sa(h, (0, 0, 3, 6))
        assert left.sa == 0.0
        assert left.n_valid == 17
        with pytest.raises(ValueError):
            compute_sa(h, (0, 0, 1, 1))
        with pytest.raises(ValueError):
            compute_sa(h, (0, 0, 9, 9))

    def test_offset_invariance_and_homogeneity(self):
        rng = Xorshift64Star(12)
        data = np.array([[rng.normal(0, 5) for _ in range(12)] for _ in range(9)])
        h = HeightMap(data, np.ones((9, 12), bool))
        base = compute_sa(h).sa
        shifted = compute_sa(HeightMap(data + 123.4, np.ones((9, 12), bool))).sa
        scaled = compute_sa(HeightMap(-2.5 * data, np.ones((9, 12), bool))).sa
        assert abs(shifted - base) <= 1e-12 * max(1.0, abs(base))
        assert scaled == pytest.approx(2.5 * base, rel=1e-12)


class TestIo:
    def test_fringe_stack_round_trip(self, tmp_path):
        truth = make_height_field("bumps", 24, 24, 30.0)
        obj, _ = synth_fringes(truth, gamma=2.2, noise_sigma=1.0, seed=3)
        header = save_fringe_stack(tmp_path, "object", obj, {"k_h": 2.0})
        again, meta = load_fringe_stack(header)
        assert np.array_equal(obj.frames, again.frames)
        assert again.gamma == 2.2
        assert meta["k_h"] == 2.0

    def test_heightmap_round_trip(self, tmp_path):
        truth = make_height_field("ramp", 16, 8, 40.0)
        save_heightmap(tmp_path / "h.raw", truth, {"k_h": 2.0})
        again, meta = load_heightmap(tmp_path / "h.raw")
        assert np.allclose(truth.heights, again.heights, atol=1e-5)
        assert again.valid_mask.all()

    def test_roughness_append(self, tmp_path):
        path = tmp_path / "roughness.csv"
        append_roughness_csv(path, [(66, 2, 7.84, 1.2, 1000)])
        append_roughness_csv(path, [(67, 2, 18.09, 2.0, 990)])
        lines = path.read_text().splitlines()
        assert lines[0] == "layer,bar,sa_um,z_std_um,n_valid"
        assert len(lines) == 3
