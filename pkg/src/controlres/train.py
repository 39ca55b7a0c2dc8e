"""Losses and the two-step training protocol.

Step 1 trains only the main branch (control fixed at 0, so the tuning branch
and coefficient mapper are never executed). Step 2 freezes the main branch
and jointly trains the tuning blocks and the mapper with the control fixed
at 1 on the second endpoint objective. Optionally Step 2 adds a Wasserstein
adversarial term with gradient penalty (one critic step per generator step).

The engine has no second-order gradients, so the gradient penalty uses a
first-order surrogate: the per-sample input gradient of the critic is
measured with one extra backward pass, and the penalty is rebuilt from a
central difference of critic outputs along that (stop-gradient) direction,
which makes it differentiable w.r.t. the critic parameters only.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .tensor import Tensor
from .optim import Adam
from .model import CfsModel, forward, forward_sa, forward_main
from .degrade import DegradationSpec, PatchSet

logger = logging.getLogger("controlres.train")


class TrainingDiverged(RuntimeError):
    """Loss went non-finite; the model was rolled back to the last snapshot."""

    def __init__(self, step: int, message: str = "training diverged"):
        super().__init__(f"{message} at step {step}")
        self.step = step


@dataclass
class LossConfig:
    step1_loss: str = "mae"                  # mae | mse
    step2_loss: str = "mae"                  # mae | mse | mae+adv | mse+adv
    adv_weight: float = 0.01
    gp_weight: float = 10.0
    spec_a: DegradationSpec | None = None    # endpoint degradation for step 1
    spec_b: DegradationSpec | None = None    # endpoint degradation for step 2

    def validate(self):
        if self.adv_weight < 0 or self.gp_weight < 0:
            raise ValueError("loss weights must be >= 0")
        if self.step1_loss not in ("mae", "mse"):
            raise ValueError(f"bad step1_loss {self.step1_loss!r}")
        base = self.step2_loss.removesuffix("+adv")
        if base not in ("mae", "mse"):
            raise ValueError(f"bad step2_loss {self.step2_loss!r}")
        return self


@dataclass
class TrainRun:
    step: int = 1
    iterations: int = 1000
    batch_size: int = 16
    lr: float = 1e-4
    lr_decay: float = 0.1
    decay_interval: int | None = None        # default: iterations // 3
    seed: int = 0
    loss_history: list = field(default_factory=list)
    critic_history: list = field(default_factory=list)

    def interval(self) -> int:
        if self.decay_interval is not None:
            if self.decay_interval < 1:
                raise ValueError("decay_interval must be positive")
            return self.decay_interval
        return max(self.iterations // 3, 1)


def lr_at(run: TrainRun, t: int) -> float:
    """Exact schedule: lr0 * decay^floor(t / interval), t counted from 0."""
    return run.lr * run.lr_decay ** (t // run.interval())


def pixel_loss(pred: Tensor, target: Tensor, kind: str = "mae") -> Tensor:
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    diff = pred - target
    if kind == "mae":
        return diff.abs().mean()
    if kind == "mse":
        return (diff * diff).mean()
    raise ValueError(f"unknown loss kind {kind!r}")


# -- critic -------------------------------------------------------------------


@dataclass
class Critic:
    convs: list                     # ConvParams, stride-2 each
    head_w: Tensor = None
    head_b: Tensor = None

    def parameters(self) -> list[Tensor]:
        ps = []
        for cp in self.convs:
            ps += [cp.w, cp.b]
        ps += [self.head_w, self.head_b]
        return ps


def build_critic(in_channels: int, widths=(32, 64, 64, 64), seed=0) -> Critic:
    from .model import _he_conv, _he_fc

    rng = np.random.default_rng(seed)
    convs = []
    cin = in_channels
    for w in widths:
        convs.append(_he_conv(rng, w, cin, 3))
        cin = w
    head_w = _he_fc(rng, 1, cin)
    head_b = Tensor(np.zeros(1, dtype=np.float32), requires_grad=True)
    return Critic(convs=convs, head_w=head_w, head_b=head_b)


def critic_forward(critic: Critic, x: Tensor) -> Tensor:
    """One real score per image: strided convs, global pool, linear head."""
    h = x
    for cp in critic.convs:
        h = T.leaky_relu(T.conv2d(h, cp.w, cp.b, stride=2, pad=1))
    pooled = h.mean(axis=(2, 3))
    return T.fully_connected(pooled, critic.head_w, critic.head_b)


def _critic_fn(critic):
    """Accept a Critic or any callable Tensor -> (N,1) scores."""
    if isinstance(critic, Critic):
        return (lambda x: critic_forward(critic, x)), critic.parameters()
    params = critic.parameters() if hasattr(critic, "parameters") else []
    return critic, list(params)


def wgan_gp_losses(critic, real, fake, gp_weight: float, rng,
                   fd_step: float = 1e-3):
    """(critic_loss, generator_adversarial_loss) for one batch.

    critic_loss = E[D(fake)] - E[D(real)] + gp * E[(||grad_x D(x_hat)|| - 1)^2]
    with x_hat a per-sample uniform mix of real and fake. The penalty's
    gradient norm is re-expressed as a central difference of D along the
    measured gradient direction (step ``fd_step``) so it stays differentiable
    w.r.t. the critic without second-order autodiff. ``fake`` may carry the
    generator graph; it is detached for the critic-side losses.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    dfn, params = _critic_fn(critic)
    real_t = real if isinstance(real, Tensor) else Tensor(real)
    fake_t = fake if isinstance(fake, Tensor) else Tensor(fake)
    if real_t.shape != fake_t.shape:
        raise ValueError("real/fake batch shapes differ")
    fake_d = fake_t.detach()
    n = real_t.shape[0]

    penalty = None
    if gp_weight > 0:
        eps = rng.uniform(size=(n, 1, 1, 1)).astype(real_t.dtype)
        xhat_data = eps * real_t.data + (1.0 - eps) * fake_d.data
        # measure grad_x D(x_hat) without polluting the parameter grads
        saved = [p.grad for p in params]
        xhat = Tensor(xhat_data, requires_grad=True)
        T.backward(dfn(xhat).sum())
        g = xhat.grad if xhat.grad is not None else np.zeros_like(xhat_data)
        for p, s in zip(params, saved):
            p.grad = s
        norms = np.sqrt((g.astype(np.float64) ** 2).sum(axis=(1, 2, 3)))
        safe = np.maximum(norms, 1e-300)
        u = (g.astype(np.float64) / safe[:, None, None, None])
        u[norms == 0] = 0.0
        u = u.astype(g.dtype)
        d_plus = dfn(Tensor(xhat_data + fd_step * u))
        d_minus = dfn(Tensor(xhat_data - fd_step * u))
        norm_est = (d_plus - d_minus) * (1.0 / (2.0 * fd_step))
        dev = norm_est - 1.0
        penalty = gp_weight * (dev * dev).mean()

    d_fake = dfn(fake_d)
    if not np.isfinite(d_fake.data).all():
        raise T.NumericsError("non-finite critic output")
    d_real = dfn(real_t)
    critic_loss = d_fake.mean() - d_real.mean()
    if penalty is not None:
        critic_loss = critic_loss + penalty
    gen_adv_loss = -dfn(fake_t).mean()
    return critic_loss, gen_adv_loss


# -- training loops -------------------------------------------------------------


class _JsonlLog:
    def __init__(self, path):
        self.fp = open(path, "w") if path else None

    def write(self, record: dict):
        if self.fp:
            self.fp.write(json.dumps(record) + "\n")

    def close(self):
        if self.fp:
            self.fp.close()


class _Snapshot:
    """Rolling copy of trainable parameters + optimizer state for rollback."""

    def __init__(self, params, opt):
        self.params, self.opt = params, opt
        self.take(0)

    def take(self, step):
        self.step = step
        self.data = [p.data.copy() for p in self.params]
        self.m = [m.copy() for m in self.opt.m]
        self.v = [v.copy() for v in self.opt.v]
        self.t = self.opt.t

    def restore(self):
        for p, d in zip(self.params, self.data):
            p.data = d
        self.opt.m = [m.copy() for m in self.m]
        self.opt.v = [v.copy() for v in self.v]
        self.opt.t = self.t


def _minibatch(data: PatchSet, idx):
    x = Tensor(data.inputs[idx].astype(np.float32) / 255.0)
    y = Tensor(data.targets[idx].astype(np.float32) / 255.0)
    return x, y


def train_step1(model: CfsModel, data: PatchSet, cfg: LossConfig, run: TrainRun,
                log_path=None, snapshot_interval: int = 500) -> TrainRun:
    """Train the main branch alone; tuning branch and mapper stay untouched."""
    cfg.validate()
    params = model.theta_main()
    opt = Adam(params, lr=run.lr)
    rng = np.random.default_rng(run.seed)
    snap = _Snapshot(params, opt)
    log = _JsonlLog(log_path)
    run.loss_history = []
    try:
        for t in range(run.iterations):
            opt.lr = lr_at(run, t)
            idx = rng.integers(0, len(data), run.batch_size)
            x, y = _minibatch(data, idx)
            try:
                loss = pixel_loss(forward_main(model, x), y, cfg.step1_loss)
            except T.NumericsError:
                snap.restore()
                raise TrainingDiverged(t, "non-finite activations") from None
            lv = float(loss.data)
            if not np.isfinite(lv):
                snap.restore()
                raise TrainingDiverged(t, "non-finite loss")
            opt.zero_grad()
            T.backward(loss, leaves=params)
            opt.step()
            run.loss_history.append(lv)
            log.write({"step": t, "lr": opt.lr, "loss": lv})
            if (t + 1) % snapshot_interval == 0:
                snap.take(t + 1)
            if (t + 1) % 1000 == 0:
                logger.info("step1 %d/%d loss=%.5f", t + 1, run.iterations, lv)
    finally:
        log.close()
    return run


def train_step2(model: CfsModel, data: PatchSet, cfg: LossConfig, run: TrainRun,
                sa: bool = False, log_path=None, snapshot_interval: int = 500) -> TrainRun:
    """Train tuning blocks (+ mapper) at control value 1; main branch frozen.

    ``sa`` switches to the fixed-coefficient ablation: the mapper is bypassed
    (and not trained), every coefficient equals the control scalar directly.
    """
    cfg.validate()
    main_params = model.theta_main()
    trainables = model.theta_tun() + ([] if sa else model.theta_alpha())
    if not trainables:
        raise ValueError("model has no tuning parameters to train")
    base_kind = cfg.step2_loss.removesuffix("+adv")
    adversarial = cfg.step2_loss.endswith("+adv")
    net = forward_sa if sa else forward

    opt = Adam(trainables, lr=run.lr)
    rng = np.random.default_rng(run.seed)
    critic = critic_opt = gp_rng = None
    if adversarial:
        critic = build_critic(model.config.image_channels, seed=np.random.default_rng((run.seed, 202)).integers(2 ** 31))
        critic_opt = Adam(critic.parameters(), lr=run.lr, beta1=0.0, beta2=0.9)
        gp_rng = np.random.default_rng((run.seed, 101))

    saved_flags = [p.requires_grad for p in main_params]
    model.set_requires_grad(main_params, False)
    snap = _Snapshot(trainables, opt)
    log = _JsonlLog(log_path)
    run.loss_history = []
    run.critic_history = []
    try:
        for t in range(run.iterations):
            opt.lr = lr_at(run, t)
            idx = rng.integers(0, len(data), run.batch_size)
            x, y = _minibatch(data, idx)
            try:
                pred = net(model, x, 1.0)
                loss = pixel_loss(pred, y, base_kind)
                cv = None
                if adversarial:
                    critic_opt.lr = opt.lr
                    c_loss, g_adv = wgan_gp_losses(critic, y, pred, cfg.gp_weight, gp_rng)
                    cv = float(c_loss.data)
                    if not np.isfinite(cv):
                        raise T.NumericsError("non-finite critic loss")
                    critic_opt.zero_grad()
                    T.backward(c_loss, leaves=critic.parameters())
                    critic_opt.step()
                    if cfg.adv_weight:
                        loss = loss + cfg.adv_weight * g_adv
            except T.NumericsError:
                snap.restore()
                raise TrainingDiverged(t, "non-finite activations") from None
            lv = float(loss.data)
            if not np.isfinite(lv):
                snap.restore()
                raise TrainingDiverged(t, "non-finite loss")
            opt.zero_grad()
            T.backward(loss, leaves=trainables)
            opt.step()
            run.loss_history.append(lv)
            if cv is not None:
                run.critic_history.append(cv)
                log.write({"step": t, "lr": opt.lr, "loss": lv, "critic_loss": cv})
            else:
                log.write({"step": t, "lr": opt.lr, "loss": lv})
            if (t + 1) % snapshot_interval == 0:
                snap.take(t + 1)
            if (t + 1) % 1000 == 0:
                logger.info("step2 %d/%d loss=%.5f", t + 1, run.iterations, lv)
    finally:
        log.close()
        for p, f in zip(main_params, saved_flags):
            p.requires_grad = f
    return run
