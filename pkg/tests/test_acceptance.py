"""End-of-build acceptance gate.

Each test exercises one release criterion and prints a single
``[PASS] <criterion>`` line on success (pytest reports failures itself).
Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines.
"""

import math
import time

import pytest
import torch

from mirrorseg.config import RunConfig
from mirrorseg.data import SceneConfig, prepare_inputs, synthesize_clip
from mirrorseg.decoder import ContextContrast, MirrorDecoder
from mirrorseg.depth_warp import correlation_oracle, joint_correlation
from mirrorseg.fdaf import FrequencyCrossAttention, SpectralFeature, \
    channel_fft, dft_oracle
from mirrorseg.gradcheck import TOL, run_gradcheck
from mirrorseg.losses import hybrid_loss, hybrid_loss_oracle
from mirrorseg.metrics import compute_metrics, metrics_oracle
from mirrorseg.model import MirrorSegModel
from mirrorseg.prompts import select_points, select_points_oracle
from mirrorseg.train import clip_iou, synthetic_training_clips, train


def _ok(name):
    print(f"\n[PASS] {name}")


def test_correlation_oracle_equivalence():
    start = time.monotonic()
    gen = torch.Generator().manual_seed(0)
    worst = 0.0
    for trial in range(50):
        h = int(torch.randint(3, 9, (1,), generator=gen))
        w = int(torch.randint(3, 9, (1,), generator=gen))
        c = int(torch.randint(1, 5, (1,), generator=gen))
        r = int(torch.randint(1, 4, (1,), generator=gen))
        a = torch.randn(1, c, h, w, generator=gen)
        b = torch.randn(1, c, h, w, generator=gen)
        got = joint_correlation(a, b, r).values
        ref = correlation_oracle(a, b, r)
        worst = max(worst, float((got - ref).abs().max()))
    elapsed = time.monotonic() - start
    assert worst <= 1e-6, worst
    assert elapsed < 30.0, elapsed
    _ok("oracle equivalence: correlation "
        f"(50 instances, max abs err {worst:.2e}, {elapsed:.1f}s)")


def test_point_selection_oracle_equivalence():
    start = time.monotonic()
    gen = torch.Generator().manual_seed(1)
    for trial in range(1000):
        h = int(torch.randint(1, 65, (1,), generator=gen))
        w = int(torch.randint(1, 65, (1,), generator=gen))
        r = torch.randn(h, w, generator=gen)
        if trial % 25 == 0:
            r[:] = float("nan")  # center-fallback path
        n = int(torch.randint(1, 12, (1,), generator=gen))
        d = float(torch.rand(1, generator=gen)) * 10
        ps = select_points(r, n, d)
        got = [tuple(p) for p in ps.pixels.tolist()]
        assert got == select_points_oracle(r, n, d)
        pts = ps.pixels.tolist()
        for i in range(len(pts)):          # delta-distance invariant
            for j in range(i + 1, len(pts)):
                assert math.dist(pts[i], pts[j]) >= d
    elapsed = time.monotonic() - start
    assert elapsed < 60.0, elapsed
    _ok(f"oracle equivalence: point selection (1000 maps, exact, {elapsed:.1f}s)")


def test_fft_oracle_equivalence_and_parseval():
    gen = torch.Generator().manual_seed(2)
    worst_dft = 0.0
    worst_parseval = 0.0
    for trial in range(100):
        c = (4, 8, 16, 32)[trial % 4]
        f = torch.randn(c, generator=gen, dtype=torch.float64)
        spec = channel_fft(f[None, None])
        mag = spec.magnitude[0, 0]
        mag_ref, ph_ref = dft_oracle(f.tolist())
        for k in range(c // 2 + 1):
            worst_dft = max(worst_dft, abs(float(mag[k]) - mag_ref[k]))
            if mag_ref[k] > 1e-9:
                dph = abs(float(spec.phase[0, 0, k]) - ph_ref[k])
                worst_dft = max(worst_dft, min(dph, 2 * math.pi - dph))
        w = torch.full((c // 2 + 1,), 2.0, dtype=torch.float64)
        w[0] = 1.0
        if c % 2 == 0:
            w[-1] = 1.0
        lhs = float((f ** 2).sum())
        rhs = float((w * mag ** 2).sum()) / c
        worst_parseval = max(worst_parseval, abs(lhs - rhs) / max(abs(lhs), 1e-12))
    assert worst_dft <= 1e-6, worst_dft
    assert worst_parseval <= 1e-6, worst_parseval
    _ok("oracle equivalence: channel FFT + Parseval "
        f"(100 tokens, dft err {worst_dft:.2e}, parseval {worst_parseval:.2e})")


def test_metrics_and_loss_oracle_equivalence():
    gen = torch.Generator().manual_seed(3)
    worst = 0.0
    for trial in range(100):
        p = torch.rand(1, 8, 8, generator=gen)
        g = (torch.rand(1, 8, 8, generator=gen) > 0.5).float()
        a = compute_metrics(p, g)
        b = metrics_oracle(p, g)
        worst = max(worst, max(abs(x - y) for x, y in zip(a.as_row(), b.as_row())))
    assert worst <= 1e-6, worst
    worst_loss = 0.0
    for trial in range(25):
        m = [torch.randn(1, 1, 8, 8, generator=gen) for _ in range(3)]
        pi = [torch.randn(1, 1, 8, 8, generator=gen) for _ in range(3)]
        g = [(torch.rand(1, 1, 8, 8, generator=gen) > 0.5).float()
             for _ in range(3)]
        got = float(hybrid_loss(m, pi, g).total)
        ref = hybrid_loss_oracle(m, pi, g)
        worst_loss = max(worst_loss, abs(got - ref) / max(abs(ref), 1.0))
    assert worst_loss <= 1e-6, worst_loss
    _ok("oracle equivalence: metrics + hybrid loss "
        f"(metric err {worst:.2e}, loss err {worst_loss:.2e})")


def test_gradient_suite():
    start = time.monotonic()
    report = run_gradcheck(seed=0)
    elapsed = time.monotonic() - start
    assert set(report) == {"depth_warping", "response_map", "fdaf",
                           "mirror_decoder", "hybrid_loss"}
    for name, err in report.items():
        assert err <= TOL, f"{name}: {err}"
    assert elapsed < 300.0, elapsed
    worst = max(report.values())
    _ok(f"gradient suite (5 surfaces, worst rel err {worst:.2e}, {elapsed:.1f}s)")


def test_structural_invariants():
    cfg = RunConfig(profile="toy", input_size=32, c_low=8, c_high=8,
                    decoder_dim=16, fdaf_heads=2, decoder_rounds=1,
                    num_mask_tokens=3)
    dec = MirrorDecoder(cfg)
    # token layout for several sparse-prompt counts
    for n in (1, 5, 10):
        seq = dec.assemble_tokens(torch.randn(1, n, 16))
        assert seq.tokens.shape[1] == 2 + 3 + 1 + n
        assert seq.mirror_index == 5
    # residual identity with a zeroed feedforward output projection
    torch.manual_seed(0)
    fca = FrequencyCrossAttention(channels=8, dim=16, heads=2)
    with torch.no_grad():
        fca.ffn[-1].weight.zero_()
        fca.ffn[-1].bias.zero_()
    mem = torch.randn(1, 4, 16)
    spec = SpectralFeature(magnitude=torch.rand(1, 9, 5),
                           phase=torch.rand(1, 9, 5))
    assert torch.equal(fca(mem, spec), mem)
    # mask-weight linear algebra: one-hot / zero / scaling
    ctx = torch.randn(2, 8, 6, 6)
    onehot = torch.zeros(2, 8)
    onehot[:, 3] = 1.0
    assert torch.equal(torch.einsum("bc,bchw->bhw", onehot, ctx), ctx[:, 3])
    assert torch.all(torch.einsum("bc,bchw->bhw", torch.zeros(2, 8), ctx) == 0)
    wv = torch.randn(2, 8)
    assert torch.allclose(torch.einsum("bc,bchw->bhw", wv, 3.0 * ctx),
                          3.0 * torch.einsum("bc,bchw->bhw", wv, ctx),
                          atol=1e-5)
    # self-contrast null
    cc = ContextContrast(4)
    x = torch.randn(1, 4, 6, 6)
    assert torch.all(cc(x, x.clone()) == 0)
    _ok("structural invariants (token layout, residual identity, "
        "mask-weight algebra, self-contrast null)")


def _overfit_run(cfg, out_dir, ablate):
    torch.manual_seed(cfg.seed)
    model = MirrorSegModel(cfg)
    if ablate:
        model.ablate_dw = True
        model.ablate_fdaf = True
    model, _ = train(cfg, out_dir, synthetic=True, model=model)
    clips = synthetic_training_clips(cfg)
    return [clip_iou(model, c) for c in clips]


@pytest.mark.slow
def test_end_to_end_overfit_with_ablation_control(tmp_path):
    start = time.monotonic()
    cfg = RunConfig(profile="toy", input_size=64, c_low=32, c_high=64,
                    decoder_dim=128, lr=2e-3, max_steps=500, seed=0,
                    checkpoint_every=0)
    full = _overfit_run(cfg, str(tmp_path / "full"), ablate=False)
    ablated = _overfit_run(cfg, str(tmp_path / "ablated"), ablate=True)
    elapsed = time.monotonic() - start
    mean_iou = sum(full) / len(full)
    assert mean_iou >= 0.90, full
    lower = sum(a < f for a, f in zip(ablated, full))
    assert lower >= 3, (full, ablated)
    assert elapsed < 900.0, elapsed
    _ok(f"end-to-end overfit (mean IoU {mean_iou:.3f} >= 0.90; ablated "
        f"strictly lower on {lower}/4 clips; {elapsed / 60:.1f} min)")


def test_determinism(tmp_path):
    cfg = RunConfig(profile="toy", input_size=32, c_low=8, c_high=8,
                    decoder_dim=16, fdaf_heads=2, decoder_rounds=1,
                    max_steps=10, seed=123, checkpoint_every=0)
    _, losses_a = train(cfg, str(tmp_path / "a"), synthetic=True)
    model_b, losses_b = train(cfg, str(tmp_path / "b"), synthetic=True)
    assert len(losses_a) == len(losses_b) == 10
    assert abs(losses_a[9] - losses_b[9]) <= 1e-6
    # identical prompt sets on a shared input after both runs
    model_a, _ = train(cfg, str(tmp_path / "c"), synthetic=True)
    clip = prepare_inputs(synthesize_clip(
        SceneConfig(height=32, width=32, mirror_size=(8, 8), drift=(1, 0)),
        seed=7), 32)
    with torch.no_grad():
        pa = model_a(clip.rgb[1][None], clip.depth[1][None])["prompts"][0]
        pb = model_b(clip.rgb[1][None], clip.depth[1][None])["prompts"][0]
    assert pa.pixels.tolist() == pb.pixels.tolist()
    assert torch.equal(pa.coords, pb.coords)
    _ok("determinism (step-10 losses within 1e-6, identical prompt sets)")
