import pytest
import torch

from mirrorseg.backbone import Encoder, TwoStreamBackbone
from mirrorseg.config import RunConfig


def _cfg():
    return RunConfig(profile="toy", input_size=64, c_low=32, c_high=64)


class TestShapes:
    def test_pyramid_strides(self):
        bb = TwoStreamBackbone(_cfg())
        pyr = bb.extract_features(torch.rand(1, 3, 64, 64), "rgb")
        assert pyr.low.shape == (1, 32, 16, 16)
        assert pyr.high.shape == (1, 64, 4, 4)
        dpyr = bb.extract_features(torch.rand(1, 1, 64, 64), "depth")
        assert dpyr.low.shape == (1, 32, 16, 16)
        assert dpyr.high.shape == (1, 64, 4, 4)

    def test_indivisible_size_rejected(self):
        bb = TwoStreamBackbone(_cfg())
        with pytest.raises(ValueError):
            bb.extract_features(torch.rand(1, 3, 60, 60), "rgb")

    def test_unknown_stream_rejected(self):
        bb = TwoStreamBackbone(_cfg())
        with pytest.raises(ValueError):
            bb.extract_features(torch.rand(1, 3, 64, 64), "ir")


class TestParameters:
    def test_streams_share_no_parameters(self):
        bb = TwoStreamBackbone(_cfg())
        rgb_ids = {id(p) for p in bb.rgb.parameters()}
        dep_ids = {id(p) for p in bb.depth.parameters()}
        assert not rgb_ids & dep_ids

    def test_all_zero_weights_give_zero_features(self):
        enc = Encoder(3, 32, 64)
        with torch.no_grad():
            for p in enc.parameters():
                p.zero_()
        pyr = enc(torch.rand(1, 3, 64, 64))
        assert torch.all(pyr.low == 0)
        assert torch.all(pyr.high == 0)


class TestGradient:
    def test_finite_difference_single_pixel(self):
        torch.manual_seed(0)
        enc = Encoder(3, 8, 8).double()
        x = torch.rand(1, 3, 16, 16, dtype=torch.float64, requires_grad=True)
        out = enc(x)
        scalar = out.low.sum() + out.high.sum()
        (grad,) = torch.autograd.grad(scalar, x)
        eps = 1e-5
        idx = (0, 1, 7, 9)
        with torch.no_grad():
            xp = x.detach().clone()
            xp[idx] += eps
            up = enc(xp)
            xm = x.detach().clone()
            xm[idx] -= eps
            um = enc(xm)
            fd = float((up.low.sum() + up.high.sum()
                        - um.low.sum() - um.high.sum()) / (2 * eps))
        an = float(grad[idx])
        assert abs(an - fd) / max(abs(an), abs(fd), 1e-6) <= 1e-3
