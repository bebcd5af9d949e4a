import numpy as np
import pytest

from icfsr.losses import color_loss, consistency_loss
from icfsr.model import ModelConfig, forward, init_parameters
from icfsr.training import (
    AdamState,
    TrainConfig,
    adam_update,
    init_adam,
    lr_for_epoch,
    step_gradients,
    steps_per_epoch_auto,
    train,
    train_step,
    train_step_multiscale,
)


def tiny_setup(scale_set=(2,), dtype=np.float64, seed=3, channels=4, blocks=1):
    cfg = ModelConfig(n_resblocks=blocks, n_channels=channels, scale_set=scale_set)
    params = init_parameters(cfg, seed=seed, dtype=dtype)
    return params, init_adam(params)


def test_lr_schedule_halving():
    cfg = TrainConfig()
    assert lr_for_epoch(cfg, 0) == 1e-4
    assert lr_for_epoch(cfg, 199) == 1e-4
    assert lr_for_epoch(cfg, 200) == pytest.approx(5e-5)
    assert lr_for_epoch(cfg, 400) == pytest.approx(2.5e-5)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(patch_size=50, scale_set=(4,))
    with pytest.raises(ValueError):
        TrainConfig(patch_size=6)
    with pytest.raises(ValueError):
        TrainConfig(precision=16)


def test_adam_single_step_oracle():
    cfg = TrainConfig()
    params, opt = tiny_setup()
    name = "head.w"
    grads = {k: np.zeros_like(v) for k, v in params.tensors.items()}
    grads[name] = np.ones_like(params.tensors[name])
    new_params, new_opt = adam_update(params, opt, grads, lr=1e-3, cfg=cfg)

    # canonical first-step update: m_hat = g, v_hat = g^2, step = lr*g/(|g|+eps)
    expect = params.tensors[name] - 1e-3 * 1.0 / (1.0 + 1e-8)
    assert np.allclose(new_params.tensors[name], expect, atol=1e-15)
    assert new_opt.step == 1
    other = "body.0.c1.w"
    assert np.array_equal(new_params.tensors[other], params.tensors[other])


def test_train_step_bitwise_deterministic(rng):
    batch = [rng.random((8, 8, 3)) for _ in range(2)]
    cfg = TrainConfig(patch_size=8, batch_size=2)
    outs = []
    for _ in range(2):
        params, opt = tiny_setup(dtype=np.float32)
        p2, o2, rep = train_step(params, opt, batch, 2, cfg)
        outs.append((p2, rep))
    for name in outs[0][0].tensors:
        assert np.array_equal(outs[0][0].tensors[name], outs[1][0].tensors[name])
    assert outs[0][1].l_total == outs[1][1].l_total


def test_train_step_constant_batch_finite():
    cfg = TrainConfig(patch_size=8, batch_size=2)
    params, opt = tiny_setup()
    batch = [np.full((8, 8, 3), 0.5)] * 2
    p2, o2, report = train_step(params, opt, batch, 2, cfg)
    assert np.isfinite(report.l_total)
    assert report.l_total == report.l_cons + report.lambda_color * report.l_color


def test_train_step_report_matches_numeric_losses(rng):
    # the taped losses agree with the standalone numeric loss functions
    params, opt = tiny_setup()
    batch = rng.random((2, 8, 8, 3))
    report, _ = step_gradients(params, batch, (2,), 0.2)

    l_cons = 0.0
    l_color = 0.0
    for i in range(2):
        x = batch[i]
        x_s = forward(params, x, 2)
        x_inv = forward(params, x, 1 / 2)
        x_check = forward(params, x_s, 1 / 2)
        x_hat = forward(params, x_inv, 2)
        # per-sample contribution of the batch means
        l_cons += consistency_loss(x_hat, x_check, x) / 2
        l_color += color_loss(x_s, x_inv, x, 2) / 2
    assert report.l_cons == pytest.approx(l_cons, rel=1e-9)
    assert report.l_color == pytest.approx(l_color, rel=1e-9)


def test_gradient_stop_up_tail_unreached_without_color(rng):
    # up-down chain alone, color weight 0: the up tail only feeds the
    # detached first pass, so its gradients are exactly zero
    params, _ = tiny_setup()
    batch = rng.random((2, 8, 8, 3))
    report, grads = step_gradients(params, batch, (2,), 0.0, chains=("ud",))
    for name in ("up2.expand.w", "up2.expand.b", "up2.out.w", "up2.out.b"):
        assert np.all(grads[name] == 0.0), name
    # while the down tail and trunk do receive gradient
    assert np.any(grads["down2.out.w"] != 0.0)
    assert np.any(grads["body.0.c1.w"] != 0.0)


def test_gradient_stop_color_reaches_first_pass(rng):
    params, _ = tiny_setup()
    batch = rng.random((2, 8, 8, 3))
    report, grads = step_gradients(params, batch, (2,), 0.2, chains=("ud",))
    for name in ("up2.expand.w", "up2.out.w"):
        assert np.any(grads[name] != 0.0), name


def test_multiscale_single_scale_equals_train_step(rng):
    batch = [rng.random((8, 8, 3)) for _ in range(2)]
    cfg = TrainConfig(patch_size=8, batch_size=2, scale_set=(2,))
    params, opt = tiny_setup(dtype=np.float32)
    a_params, a_opt, a_rep = train_step(params, opt, batch, 2, cfg)
    params, opt = tiny_setup(dtype=np.float32)
    b_params, b_opt, b_rep = train_step_multiscale(params, opt, batch, cfg)
    for name in a_params.tensors:
        assert np.array_equal(a_params.tensors[name], b_params.tensors[name])
    assert a_rep.l_total == b_rep.l_total


def test_multiscale_per_scale_components_sum(rng):
    batch = [rng.random((16, 16, 3)) for _ in range(2)]
    cfg = TrainConfig(patch_size=16, batch_size=2, scale_set=(2, 4))
    params, opt = tiny_setup(scale_set=(2, 4))
    p2, o2, report = train_step_multiscale(params, opt, batch, cfg)
    assert set(report.per_scale) == {2, 4}
    cons_sum = sum(v["l_cons"] for v in report.per_scale.values())
    color_sum = sum(v["l_color"] for v in report.per_scale.values())
    assert report.l_cons == pytest.approx(cons_sum, abs=1e-12)
    assert report.l_color == pytest.approx(color_sum, abs=1e-12)
    assert report.l_total == report.l_cons + report.lambda_color * report.l_color


def test_scale_eight_shapes(rng):
    # 48 patch with s = 8 runs the chains on a 6x6 intermediate
    params, _ = tiny_setup(scale_set=(8,), channels=4)
    x = rng.random((48, 48, 3))
    x_inv = forward(params, x, 1 / 8)
    assert x_inv.shape == (6, 6, 3)
    assert forward(params, x_inv, 8).shape == (48, 48, 3)


def test_train_rejects_small_images(rng):
    cfg = TrainConfig(epochs=1, steps_per_epoch=1)
    with pytest.raises(ValueError):
        train([rng.random((32, 32, 3))], cfg)


def test_train_rejects_empty_dataset():
    with pytest.raises(ValueError):
        train([], TrainConfig())


def test_train_runs_and_logs(rng, tmp_path):
    cfg = TrainConfig(
        patch_size=8, batch_size=2, epochs=2, steps_per_epoch=3, seed=9
    )
    model_cfg = ModelConfig(n_resblocks=1, n_channels=4, scale_set=(2,))
    rows = []
    ckpt = train(
        [rng.random((24, 24, 3))],
        cfg,
        model_cfg=model_cfg,
        out_dir=str(tmp_path),
        on_step=lambda *a: rows.append(a),
    )
    assert ckpt.epoch == 2
    assert len(rows) == 6
    assert (tmp_path / "checkpoint_final.ckpt").exists()
    assert all(np.isfinite(r[2].l_total) for r in rows)


def test_train_retries_then_aborts(rng, monkeypatch):
    cfg = TrainConfig(patch_size=8, batch_size=2, epochs=1, steps_per_epoch=1)
    model_cfg = ModelConfig(n_resblocks=1, n_channels=4, scale_set=(2,))

    import icfsr.training as train_mod

    calls = {"n": 0}
    real = train_mod.train_step

    def poisoned(params, opt, batch, s, cfg, lr=None):
        calls["n"] += 1
        p2, o2, rep = real(params, opt, batch, s, cfg, lr)
        rep.l_total = float("nan")
        return params, opt, rep

    monkeypatch.setattr(train_mod, "train_step", poisoned)
    with pytest.raises(RuntimeError, match="non-finite"):
        train([rng.random((16, 16, 3))], cfg, model_cfg=model_cfg)
    assert calls["n"] == 4  # initial draw plus 3 retries


def test_steps_per_epoch_auto(rng):
    cfg = TrainConfig(patch_size=8, batch_size=2, steps_per_epoch=0)
    images = [np.zeros((24, 16, 3)), np.zeros((8, 8, 3))]
    # (3*2 + 1*1) patches / batch 2 -> ceil(7/2) = 4
    assert steps_per_epoch_auto(images, cfg) == 4
