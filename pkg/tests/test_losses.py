import math

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from mirrorseg.losses import (bce_loss, hybrid_loss, hybrid_loss_oracle,
                              soft_iou_loss)


def _random_case(gen, h=8, w=8):
    m = [torch.randn(1, 1, h, w, generator=gen) for _ in range(3)]
    p = [torch.randn(1, 1, h, w, generator=gen) for _ in range(3)]
    g = [(torch.rand(1, 1, h, w, generator=gen) > 0.5).float() for _ in range(3)]
    return m, p, g


class TestComponents:
    def test_half_probability_bce_is_ln2(self):
        g = (torch.rand(1, 1, 8, 8) > 0.5).float()
        assert float(bce_loss(torch.zeros(1, 1, 8, 8), g)) == \
            pytest.approx(math.log(2), abs=1e-6)

    def test_perfect_prediction_limit(self):
        g = (torch.rand(1, 1, 8, 8) > 0.5).float()
        logits = torch.where(g > 0, 50.0, -50.0)
        assert float(bce_loss(logits, g)) < 1e-6
        assert float(soft_iou_loss(logits, g)) < 1e-6

    def test_soft_iou_range(self):
        g = (torch.rand(1, 1, 8, 8) > 0.5).float()
        val = float(soft_iou_loss(torch.randn(1, 1, 8, 8), g))
        assert 0.0 <= val <= 1.0


class TestHybridLoss:
    def test_half_probability_total(self):
        gen = torch.Generator().manual_seed(0)
        g = [(torch.rand(1, 1, 8, 8, generator=gen) > 0.5).float()
             for _ in range(3)]
        zeros = [torch.zeros(1, 1, 8, 8) for _ in range(3)]
        out = hybrid_loss(zeros, zeros, g)
        for fl in out.per_frame:
            assert float(fl.bce_final) == pytest.approx(math.log(2), abs=1e-6)
            assert float(fl.bce_inter) == pytest.approx(math.log(2), abs=1e-6)

    def test_total_is_sum_of_components(self):
        gen = torch.Generator().manual_seed(1)
        out = hybrid_loss(*_random_case(gen))
        s = sum(float(fl.bce_final + fl.iou_final + fl.bce_inter + fl.iou_inter)
                for fl in out.per_frame)
        assert float(out.total) == pytest.approx(s, rel=1e-6)

    def test_matches_pixel_loop_oracle(self):
        gen = torch.Generator().manual_seed(2)
        m, p, g = _random_case(gen)
        got = float(hybrid_loss(m, p, g).total)
        ref = hybrid_loss_oracle(m, p, g)
        assert got == pytest.approx(ref, abs=1e-5)

    def test_intermediate_maps_upsampled(self):
        gen = torch.Generator().manual_seed(3)
        m = [torch.randn(1, 1, 8, 8, generator=gen) for _ in range(3)]
        p = [torch.randn(1, 1, 4, 4, generator=gen) for _ in range(3)]
        g = [(torch.rand(1, 1, 8, 8, generator=gen) > 0.5).float()
             for _ in range(3)]
        got = float(hybrid_loss(m, p, g).total)
        assert got == pytest.approx(hybrid_loss_oracle(m, p, g), abs=1e-5)

    def test_nonbinary_gt_rejected(self):
        m = [torch.randn(1, 1, 4, 4)] * 3
        g = [torch.full((1, 1, 4, 4), 0.5)] * 3
        with pytest.raises(ValueError):
            hybrid_loss(m, m, g)

    def test_wrong_frame_count_rejected(self):
        m = [torch.randn(1, 1, 4, 4)] * 2
        g = [torch.zeros(1, 1, 4, 4)] * 2
        with pytest.raises(ValueError):
            hybrid_loss(m, m, g)

    def test_pixel_permutation_invariance(self):
        gen = torch.Generator().manual_seed(4)
        m = torch.randn(1, 1, 1, 16, generator=gen)
        g = (torch.rand(1, 1, 1, 16, generator=gen) > 0.5).float()
        perm = torch.randperm(16, generator=gen)
        a = hybrid_loss([m] * 3, [m] * 3, [g] * 3).total
        b = hybrid_loss([m[..., perm]] * 3, [m[..., perm]] * 3,
                        [g[..., perm]] * 3).total
        assert float(a) == pytest.approx(float(b), rel=1e-6)

    @given(st.integers(0, 10_000))
    @settings(max_examples=25, deadline=None)
    def test_total_positive_and_finite(self, seed):
        gen = torch.Generator().manual_seed(seed)
        out = hybrid_loss(*_random_case(gen, 4, 4))
        assert math.isfinite(float(out.total))
        assert float(out.total) > 0
