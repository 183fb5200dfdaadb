import pytest
import torch

from mirrorseg.config import RunConfig


@pytest.fixture(autouse=True)
def _single_thread():
    torch.set_num_threads(2)


@pytest.fixture
def tiny_cfg():
    return RunConfig(profile="toy", input_size=32, c_low=8, c_high=8,
                     decoder_dim=16, fdaf_heads=2, decoder_rounds=1,
                     num_mask_tokens=3, corr_radius_low=1, corr_radius_high=1,
                     num_prompts=4, min_point_dist=2.0)
