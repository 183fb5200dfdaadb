"""RGB-D video mirror segmentation: depth warping, depth-guided point prompts,
frequency-detail attention fusion, and a mirror-token mask decoder."""

__version__ = "0.1.0"

from .config import RunConfig, build_config, profile_config
from .data import SceneConfig, VideoClip, prepare_inputs, sample_clip, \
    synthesize_clip
from .model import MirrorSegModel

__all__ = [
    "RunConfig", "build_config", "profile_config",
    "SceneConfig", "VideoClip", "prepare_inputs", "sample_clip",
    "synthesize_clip", "MirrorSegModel",
]
