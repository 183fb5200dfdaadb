"""Finite-difference verification of analytic gradients for the core modules."""

import torch

from .config import RunConfig
from .decoder import MirrorDecoder
from .depth_warp import DepthWarpLevel
from .fdaf import FDAF
from .losses import hybrid_loss
from .prompts import ResponseMapHead

EPS = 1e-5
TOL = 1e-3
SURFACES = ("depth_warping", "response_map", "fdaf", "mirror_decoder",
            "hybrid_loss")


def _tiny_cfg():
    return RunConfig(profile="toy", input_size=16, c_low=8, c_high=8,
                     decoder_dim=16, fdaf_heads=2, decoder_rounds=1,
                     num_mask_tokens=3)


def _max_rel_err(fn, inputs, n_coords=6, seed=0):
    """Compare autograd gradients against central differences at sampled coords."""
    gen = torch.Generator().manual_seed(seed)
    inputs = [x.detach().double().requires_grad_(True) for x in inputs]
    out = fn(*inputs)
    proj = torch.randn(out.shape, generator=gen, dtype=torch.float64)
    scalar = (out * proj).sum()
    grads = torch.autograd.grad(scalar, inputs)
    worst = 0.0
    for i, (x, g) in enumerate(zip(inputs, grads)):
        flat = x.detach().reshape(-1)
        idxs = torch.randperm(flat.numel(), generator=gen)[:n_coords]
        for idx in idxs.tolist():
            def f(val):
                y = flat.clone()
                y[idx] = val
                args = [a.detach() for a in inputs]
                args[i] = y.reshape(x.shape)
                with torch.no_grad():
                    return float((fn(*args) * proj).sum())
            v = float(flat[idx])
            fd = (f(v + EPS) - f(v - EPS)) / (2 * EPS)
            an = float(g.reshape(-1)[idx])
            rel = abs(an - fd) / max(abs(fd), abs(an), 1e-6)
            worst = max(worst, rel)
    return worst


def check_depth_warping(seed=0):
    torch.manual_seed(seed)
    mod = DepthWarpLevel(8, 8, 8, radius=1).double()
    f_img = torch.randn(1, 8, 6, 6, dtype=torch.float64)
    f_dep = torch.randn(1, 8, 6, 6, dtype=torch.float64)
    return _max_rel_err(lambda a, b: mod(a, b)[2], [f_img, f_dep], seed=seed)


def check_response_map(seed=0):
    torch.manual_seed(seed)
    mod = ResponseMapHead(8, 8).double()
    low = torch.randn(1, 8, 8, 8, dtype=torch.float64)
    high = torch.randn(1, 8, 2, 2, dtype=torch.float64)
    return _max_rel_err(mod, [low, high], seed=seed)


def check_fdaf(seed=0, broken_residual=False):
    torch.manual_seed(seed)
    mod = FDAF(_tiny_cfg()).double()
    mod._detach_residual = broken_residual
    low = torch.randn(1, 8, 4, 4, dtype=torch.float64)
    high = torch.randn(1, 8, 2, 2, dtype=torch.float64)
    return _max_rel_err(lambda a, b: mod(a, b)["enhanced"], [low, high],
                        seed=seed)


def check_mirror_decoder(seed=0):
    torch.manual_seed(seed)
    cfg = _tiny_cfg()
    mod = MirrorDecoder(cfg).double()
    sparse = torch.randn(1, 4, cfg.decoder_dim, dtype=torch.float64)
    f_src = torch.randn(1, cfg.decoder_dim, 2, 2, dtype=torch.float64)
    fused_low = torch.randn(1, cfg.c_low, 8, 8, dtype=torch.float64)
    fused_high = torch.randn(1, cfg.c_high, 2, 2, dtype=torch.float64)
    freq_map = torch.rand(1, 1, 8, 8, dtype=torch.float64)

    def fn(s, fs, fl, fh, fm):
        return mod(s, fs, fl, fh, fm, out_size=(16, 16))["logits"]

    return _max_rel_err(fn, [sparse, f_src, fused_low, fused_high, freq_map],
                        n_coords=4, seed=seed)


def check_hybrid_loss(seed=0):
    torch.manual_seed(seed)
    gen = torch.Generator().manual_seed(seed + 1)
    gts = [(torch.rand(1, 1, 6, 6, generator=gen) > 0.5).double()
           for _ in range(3)]

    def fn(*flat):
        m = list(flat[:3])
        p = list(flat[3:])
        return hybrid_loss(m, p, gts).total.reshape(1)

    maps = [torch.randn(1, 1, 6, 6, dtype=torch.float64) for _ in range(6)]
    return _max_rel_err(fn, maps, seed=seed)


def run_gradcheck(seed=0):
    """Returns {surface: max relative error} for the five checked surfaces."""
    return {
        "depth_warping": check_depth_warping(seed),
        "response_map": check_response_map(seed),
        "fdaf": check_fdaf(seed),
        "mirror_decoder": check_mirror_decoder(seed),
        "hybrid_loss": check_hybrid_loss(seed),
    }
