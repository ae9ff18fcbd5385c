"""Fidelity metrics: PSNR, structural similarity, threshold agreement, rate."""

import numpy as np
import pytest

from sincodec.metrics import RateReport, accuracy, bpv, evaluate, psnr, ssim
from sincodec.volume import IntensityNorm, VolumeTensor, default_norm


def _vol(data, dtype="u8"):
    arr = np.asarray(data)
    if arr.ndim == 2:
        arr = arr[..., None]
    if arr.ndim == 3 and arr.shape[-1] not in (1,):
        arr = arr[..., None]
    np_dtype = np.uint8 if dtype == "u8" else np.uint16
    return VolumeTensor(arr.astype(np_dtype), default_norm(dtype))


class TestPSNR:
    def test_identical_is_infinite(self):
        rng = np.random.default_rng(0)
        v = _vol(rng.integers(0, 256, size=(16, 16)))
        assert psnr(v, v) == np.inf

    def test_uniform_off_by_one(self):
        """MSE of exactly 1 on u8: 10 log10(255^2) = 48.1308 dB."""
        a = _vol(np.full((16, 16), 100))
        b = _vol(np.full((16, 16), 101))
        assert psnr(a, b) == pytest.approx(48.130803608679344, abs=1e-10)

    def test_u16_uses_wider_range(self):
        a = _vol(np.full((16, 16), 1000), dtype="u16")
        b = _vol(np.full((16, 16), 1001), dtype="u16")
        assert psnr(a, b) == pytest.approx(20 * np.log10(65535.0), abs=1e-9)

    def test_matches_direct_formula(self):
        rng = np.random.default_rng(1)
        a = _vol(rng.integers(0, 256, size=(12, 12)))
        b = _vol(rng.integers(0, 256, size=(12, 12)))
        mse = np.mean(
            (a.data.astype(np.float64) - b.data.astype(np.float64)) ** 2
        )
        assert psnr(a, b) == pytest.approx(10 * np.log10(255.0**2 / mse), rel=1e-12)

    def test_shape_mismatch_rejected(self):
        a = _vol(np.zeros((16, 16)))
        b = _vol(np.zeros((16, 8)))
        with pytest.raises(ValueError):
            psnr(a, b)

    def test_dtype_mismatch_rejected(self):
        a = _vol(np.zeros((16, 16)), dtype="u8")
        b = _vol(np.zeros((16, 16)), dtype="u16")
        with pytest.raises(ValueError):
            psnr(a, b)


class TestSSIM:
    def test_identical_is_one(self):
        rng = np.random.default_rng(2)
        v = _vol(rng.integers(0, 256, size=(32, 32)))
        assert ssim(v, v) == pytest.approx(1.0, abs=1e-12)

    def test_structure_beats_noise_at_matched_mse(self):
        """A constant intensity shift keeps structure; noise of the same MSE
        destroys it. SSIM must rank them accordingly (PSNR cannot)."""
        rng = np.random.default_rng(3)
        g = np.indices((32, 32)).sum(0) * 3 + 40
        orig = _vol(g)
        shift = _vol(g + 10)
        noise_sign = rng.choice([-10, 10], size=(32, 32))
        noisy = _vol(g + noise_sign)
        p_shift = psnr(orig, shift)
        p_noise = psnr(orig, noisy)
        assert p_shift == pytest.approx(p_noise, abs=0.5)
        assert ssim(orig, shift) > ssim(orig, noisy) + 0.1

    def test_bounded_by_one(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            a = _vol(rng.integers(0, 256, size=(16, 16)))
            b = _vol(rng.integers(0, 256, size=(16, 16)))
            assert ssim(a, b) <= 1.0 + 1e-12

    def test_symmetric(self):
        rng = np.random.default_rng(5)
        a = _vol(rng.integers(0, 256, size=(24, 24)))
        b = _vol(rng.integers(0, 256, size=(24, 24)))
        assert ssim(a, b) == pytest.approx(ssim(b, a), rel=1e-12)

    def test_volume_averages_over_leading_axis_slices(self):
        """A 3-D stack of identical slices scores the same as one slice."""
        rng = np.random.default_rng(6)
        sl = rng.integers(0, 256, size=(24, 24))
        a3 = _vol(np.stack([sl] * 4))
        n = rng.integers(0, 9, size=(24, 24))
        b3 = _vol(np.stack([np.clip(sl + n, 0, 255)] * 4))
        a2 = _vol(sl)
        b2 = _vol(np.clip(sl + n, 0, 255))
        assert ssim(a3, b3) == pytest.approx(ssim(a2, b2), rel=1e-12)

    def test_window_needs_room(self):
        a = _vol(np.zeros((8, 8)))
        with pytest.raises(ValueError):
            ssim(a, a)  # smaller than the 11-tap window


class TestAccuracy:
    def test_hand_counted_agreement(self):
        a = _vol(np.array([[0, 100], [200, 255]]).repeat(8, 0).repeat(8, 1))
        b = _vol(np.array([[0, 160], [90, 255]]).repeat(8, 0).repeat(8, 1))
        # threshold 150: a binarizes to [0,0,1,1], b to [0,1,0,1] -> 2/4 agree
        assert accuracy(a, b, 150.0) == pytest.approx(0.5)

    def test_identical_volumes_score_one(self):
        rng = np.random.default_rng(7)
        v = _vol(rng.integers(0, 256, size=(16, 16)))
        assert accuracy(v, v, 128.0) == 1.0

    def test_threshold_outside_range_is_vacuous(self):
        """Out-of-range thresholds binarize both sides identically; the
        agreement is 1.0 rather than an error."""
        rng = np.random.default_rng(8)
        a = _vol(rng.integers(0, 256, size=(16, 16)))
        b = _vol(rng.integers(0, 256, size=(16, 16)))
        assert accuracy(a, b, 500.0) == 1.0
        assert accuracy(a, b, -1.0) == 1.0


class TestRate:
    def test_bits_per_voxel(self):
        assert bpv(32768 * 8, 2**20) == pytest.approx(0.25)

    def test_zero_voxels_rejected(self):
        with pytest.raises(ValueError):
            bpv(100, 0)

    def test_report_csv_layout(self):
        report = RateReport(0.25, 38.5, 0.9312, {200.0: 0.98, 500.0: 0.9})
        header, row = report.csv().splitlines()
        assert header == "bpv,psnr,ssim,acc@200,acc@500"
        cells = row.split(",")
        assert cells[0] == "0.250000"
        assert cells[1] == "38.5000"
        assert len(cells) == 5

    def test_report_without_rate(self):
        report = RateReport(None, 30.0, 0.5, {})
        _, row = report.csv().splitlines()
        assert row.startswith(",30.0000")

    def test_evaluate_bundles_metrics(self):
        rng = np.random.default_rng(9)
        base = rng.integers(0, 256, size=(16, 16))
        a = _vol(base)
        b = _vol(np.clip(base + rng.integers(-3, 4, size=(16, 16)), 0, 255))
        report = evaluate(a, b, archive_bits=1024, taus=(100.0,))
        assert report.bpv == pytest.approx(1024 / 256)
        assert report.psnr_db == pytest.approx(psnr(a, b))
        assert 100.0 in report.accuracy
