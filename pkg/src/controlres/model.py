"""Two-branch controllable restoration network.

The network is a chain of coupling modules. Module ``m`` runs a main
residual block and a tuning residual block on the same input and blends the
two feature maps per channel:

    B_m = (1 - a_m) * R_m + a_m * T_m          a_m in R^C

The blend coefficients are not user-set directly: a single control scalar is
expanded to a constant vector, pushed through three shared fully-connected
layers (ReLU between them) and, per coupling module, two independent linear
layers. All mapper layers are bias-free, which pins the endpoint exactly:
control 0 produces all-zero coefficients, so the network collapses to the
main branch alone.

Denoising/deblocking use a global skip (input features added back before the
tail conv). Super-resolution instead routes through one extra coupling
module made of conv + pixel-shuffle upscalers, with no global skip.

Three parameter groups are kept disjoint: ``theta_main`` (head conv, main
blocks, tail conv, main upscaler), ``theta_tun`` (tuning blocks and tuning
upscaler) and ``theta_alpha`` (the coefficient mapper).
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from . import tensor as T
from .tensor import Tensor


class ConfigError(ValueError):
    pass


TASKS = ("denoise", "deblock", "sr")


@dataclass
class ModelConfig:
    task: str = "denoise"
    num_modules: int = 10          # M, coupling modules in the trunk
    channels: int = 64             # C, filters per conv layer
    kernel_size: int = 3
    image_channels: int = 1        # 1 grayscale, 3 color
    sr_scale: int | None = None    # required iff task == "sr"
    control_dim: int = 512         # width of the constant control vector
    tuning_placement: str = "all"  # "all" | "top-K" | "last-K"
    mapper_hidden: tuple = (512, 512, 512)
    # head output layers start near zero so step-2 optimization departs from
    # the main-branch solution and grows only the useful coefficients; full
    # He scale here makes intermediate control values extrapolate wildly
    mapper_head_init_scale: float = 0.05

    def validate(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}")
        if self.num_modules < 1:
            raise ConfigError("num_modules must be >= 1")
        if self.channels < 1:
            raise ConfigError("channels must be >= 1")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ConfigError("kernel_size must be odd and positive")
        if self.image_channels not in (1, 3):
            raise ConfigError("image_channels must be 1 or 3")
        if (self.task == "sr") != (self.sr_scale is not None):
            raise ConfigError("sr_scale must be present exactly when task == 'sr'")
        if self.sr_scale is not None and self.sr_scale < 2:
            raise ConfigError("sr_scale must be >= 2")
        if self.control_dim < 1:
            raise ConfigError("control_dim must be >= 1")
        if len(self.mapper_hidden) != 3 or any(h < 1 for h in self.mapper_hidden):
            raise ConfigError("mapper_hidden must list the 3 shared layer widths")
        self._placement_k()  # validates the placement string
        return self

    def _placement_k(self):
        """Return (kind, K) parsed from tuning_placement."""
        p = self.tuning_placement
        if p == "all":
            return "all", self.num_modules
        for kind in ("top", "last"):
            if p.startswith(kind + "-"):
                try:
                    k = int(p[len(kind) + 1:])
                except ValueError:
                    raise ConfigError(f"bad tuning_placement {p!r}") from None
                if not 1 <= k <= self.num_modules:
                    raise ConfigError("placement K must satisfy 1 <= K <= num_modules")
                return kind, k
        raise ConfigError(f"bad tuning_placement {p!r}")

    def coupled_indices(self) -> list[int]:
        """Indices of main blocks that carry a tuning block."""
        kind, k = self._placement_k()
        if kind == "last":
            return list(range(self.num_modules - k, self.num_modules))
        return list(range(k))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mapper_hidden"] = list(self.mapper_hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        if "mapper_hidden" in d:
            d["mapper_hidden"] = tuple(d["mapper_hidden"])
        return cls(**d).validate()


def sr_stages(scale: int) -> list[int]:
    """Factor an upscale ratio into pixel-shuffle stages (prefer x2 steps)."""
    stages = []
    s = scale
    while s % 2 == 0:
        stages.append(2)
        s //= 2
    while s % 3 == 0:
        stages.append(3)
        s //= 3
    if s > 1:
        stages.append(s)
    return stages


@dataclass
class ConvParams:
    w: Tensor
    b: Tensor | None = None


@dataclass
class BlockParams:
    conv1: ConvParams
    conv2: ConvParams


@dataclass
class CfsModel:
    config: ModelConfig
    f_in: ConvParams = None
    main_blocks: list = field(default_factory=list)       # BlockParams x M
    f_out: ConvParams = None
    main_up: list = field(default_factory=list)           # ConvParams per stage (sr)
    tun_blocks: dict = field(default_factory=dict)        # index -> BlockParams
    tun_up: list = field(default_factory=list)
    mapper_shared: list = field(default_factory=list)     # 3 bias-free weights
    mapper_heads: dict = field(default_factory=dict)      # key -> (w1, w2); keys: int index, "up"
    provenance: dict = field(default_factory=dict)

    # -- parameter groups ----------------------------------------------------

    def theta_main(self) -> list[Tensor]:
        ps = [self.f_in.w, self.f_in.b]
        for blk in self.main_blocks:
            ps += [blk.conv1.w, blk.conv1.b, blk.conv2.w, blk.conv2.b]
        for cp in self.main_up:
            ps += [cp.w, cp.b]
        ps += [self.f_out.w, self.f_out.b]
        return ps

    def theta_tun(self) -> list[Tensor]:
        ps = []
        for i in sorted(self.tun_blocks):
            blk = self.tun_blocks[i]
            ps += [blk.conv1.w, blk.conv1.b, blk.conv2.w, blk.conv2.b]
        for cp in self.tun_up:
            ps += [cp.w, cp.b]
        return ps

    def theta_alpha(self) -> list[Tensor]:
        ps = list(self.mapper_shared)
        for key in self._head_keys():
            ps += list(self.mapper_heads[key])
        return ps

    def _head_keys(self):
        keys = sorted(k for k in self.mapper_heads if isinstance(k, int))
        if "up" in self.mapper_heads:
            keys.append("up")
        return keys

    def parameters(self) -> list[Tensor]:
        return self.theta_main() + self.theta_tun() + self.theta_alpha()

    def named_parameters(self) -> dict:
        named = {"main.f_in.w": self.f_in.w, "main.f_in.b": self.f_in.b}
        for i, blk in enumerate(self.main_blocks):
            for j, cp in ((1, blk.conv1), (2, blk.conv2)):
                named[f"main.block{i}.conv{j}.w"] = cp.w
                named[f"main.block{i}.conv{j}.b"] = cp.b
        for s, cp in enumerate(self.main_up):
            named[f"main.up{s}.w"] = cp.w
            named[f"main.up{s}.b"] = cp.b
        named["main.f_out.w"] = self.f_out.w
        named["main.f_out.b"] = self.f_out.b
        for i in sorted(self.tun_blocks):
            blk = self.tun_blocks[i]
            for j, cp in ((1, blk.conv1), (2, blk.conv2)):
                named[f"tun.block{i}.conv{j}.w"] = cp.w
                named[f"tun.block{i}.conv{j}.b"] = cp.b
        for s, cp in enumerate(self.tun_up):
            named[f"tun.up{s}.w"] = cp.w
            named[f"tun.up{s}.b"] = cp.b
        for s, w in enumerate(self.mapper_shared):
            named[f"alpha.shared{s}.w"] = w
        for key in self._head_keys():
            w1, w2 = self.mapper_heads[key]
            named[f"alpha.head_{key}.w1"] = w1
            named[f"alpha.head_{key}.w2"] = w2
        return named

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def set_requires_grad(self, params, flag: bool):
        for p in params:
            p.requires_grad = flag


def param_checksum(model: CfsModel) -> str:
    """sha256 over all parameter bytes in named order (bitwise identity)."""
    import hashlib

    h = hashlib.sha256()
    for name, p in sorted(model.named_parameters().items()):
        h.update(name.encode())
        h.update(np.ascontiguousarray(p.data).tobytes())
    return h.hexdigest()


# -- construction ------------------------------------------------------------


def _he_conv(rng, cout, cin, k) -> ConvParams:
    std = np.sqrt(2.0 / (cin * k * k))
    w = Tensor(rng.normal(0.0, std, (cout, cin, k, k)).astype(np.float32), requires_grad=True)
    b = Tensor(np.zeros(cout, dtype=np.float32), requires_grad=True)
    return ConvParams(w, b)


def _he_fc(rng, dout, din, scale: float = 1.0) -> Tensor:
    std = scale * np.sqrt(2.0 / din)
    return Tensor(rng.normal(0.0, std, (dout, din)).astype(np.float32), requires_grad=True)


def build_model(config: ModelConfig, seed: int = 0) -> CfsModel:
    """Deterministically initialized model (He init, bias-free mapper)."""
    config.validate()
    rng = np.random.default_rng(seed)
    c, k, ic = config.channels, config.kernel_size, config.image_channels
    m = CfsModel(config=config)

    m.f_in = _he_conv(rng, c, ic, k)
    m.main_blocks = [
        BlockParams(_he_conv(rng, c, c, k), _he_conv(rng, c, c, k))
        for _ in range(config.num_modules)
    ]
    if config.task == "sr":
        m.main_up = [_he_conv(rng, c * f * f, c, k) for f in sr_stages(config.sr_scale)]
    m.f_out = _he_conv(rng, ic, c, k)

    coupled = config.coupled_indices()
    m.tun_blocks = {
        i: BlockParams(_he_conv(rng, c, c, k), _he_conv(rng, c, c, k)) for i in coupled
    }
    if config.task == "sr":
        m.tun_up = [_he_conv(rng, c * f * f, c, k) for f in sr_stages(config.sr_scale)]

    h1, h2, h3 = config.mapper_hidden
    m.mapper_shared = [
        _he_fc(rng, h1, config.control_dim),
        _he_fc(rng, h2, h1),
        _he_fc(rng, h3, h2),
    ]
    gain = config.mapper_head_init_scale
    for i in coupled:
        m.mapper_heads[i] = (_he_fc(rng, c, h3), _he_fc(rng, c, c, gain))
    if config.task == "sr":
        m.mapper_heads["up"] = (_he_fc(rng, c, h3), _he_fc(rng, c, c, gain))
    return m


# -- forward passes ----------------------------------------------------------


def _conv(x, cp: ConvParams, pad):
    return T.conv2d(x, cp.w, cp.b, stride=1, pad=pad)


def _res_block(x, blk: BlockParams, pad):
    return x + _conv(T.relu(_conv(x, blk.conv1, pad)), blk.conv2, pad)


def _upscale(x, stages, scales, pad):
    for cp, f in zip(stages, scales):
        x = T.pixel_shuffle(T.conv2d(x, cp.w, cp.b, stride=1, pad=pad), f)
    return x


def map_control(model: CfsModel, alpha_in: float) -> list[Tensor]:
    """Coupling coefficient vectors (length C) for every coupling module.

    The control input is a constant vector of ones scaled by ``alpha_in``;
    three shared bias-free layers with ReLU in between feed per-module pairs
    of bias-free linear layers. Returned in coupling-module order (trunk
    modules by index, then the upscaling module for SR).
    """
    alpha_in = float(alpha_in)
    if not np.isfinite(alpha_in):
        raise ValueError("control value must be finite")
    cfg = model.config
    x = Tensor(np.full((1, cfg.control_dim), alpha_in, dtype=np.float32))
    w1, w2, w3 = model.mapper_shared
    h = T.relu(T.fully_connected(x, w1))
    h = T.relu(T.fully_connected(h, w2))
    h = T.fully_connected(h, w3)
    coeffs = []
    for key in model._head_keys():
        wa, wb = model.mapper_heads[key]
        coeffs.append(T.fully_connected(T.fully_connected(h, wa), wb).reshape(cfg.channels))
    return coeffs


def couple(r: Tensor, t: Tensor, alpha_m: Tensor) -> Tensor:
    """Per-channel affine blend (1 - a) * R + a * T, exact at both endpoints."""
    if r.shape != t.shape:
        raise ValueError("branch feature shapes differ")
    c = r.shape[1]
    if alpha_m.size != c:
        raise ValueError(f"coefficient vector length {alpha_m.size} != channels {c}")
    a = alpha_m.reshape(1, c, 1, 1)
    return (1.0 - a) * r + a * t


def _walk(model: CfsModel, image: Tensor, coeffs: list | None) -> Tensor:
    """Shared trunk. coeffs=None runs the main branch alone."""
    cfg = model.config
    if image.data.ndim != 4 or image.shape[1] != cfg.image_channels:
        raise ValueError(
            f"expected input [N,{cfg.image_channels},H,W], got {tuple(image.shape)}"
        )
    pad = cfg.kernel_size // 2
    coupled = set(cfg.coupled_indices()) if coeffs is not None else set()
    it = iter(coeffs) if coeffs is not None else None

    b0 = _conv(image, model.f_in, pad)
    b = b0
    for i, blk in enumerate(model.main_blocks):
        r = _res_block(b, blk, pad)
        if i in coupled:
            t = _res_block(b, model.tun_blocks[i], pad)
            b = couple(r, t, next(it))
        else:
            b = r
    if cfg.task == "sr":
        scales = sr_stages(cfg.sr_scale)
        r = _upscale(b, model.main_up, scales, pad)
        if coeffs is not None:
            t = _upscale(b, model.tun_up, scales, pad)
            b = couple(r, t, next(it))
        else:
            b = r
        out = _conv(b, model.f_out, pad)
    else:
        out = _conv(b + b0, model.f_out, pad)
    T.check_finite(out, "model output")
    return out


def forward(model: CfsModel, image, alpha_in: float) -> Tensor:
    """Full two-branch pass; coefficients learned from ``alpha_in``."""
    image = image if isinstance(image, Tensor) else Tensor(image)
    return _walk(model, image, map_control(model, alpha_in))


def forward_sa(model: CfsModel, image, alpha_in: float) -> Tensor:
    """Ablation pass: every coupling coefficient equals ``alpha_in`` directly
    (the mapper is bypassed)."""
    image = image if isinstance(image, Tensor) else Tensor(image)
    alpha_in = float(alpha_in)
    if not np.isfinite(alpha_in):
        raise ValueError("control value must be finite")
    c = model.config.channels
    n_coeff = len(model._head_keys())
    const = [Tensor(np.full(c, alpha_in, dtype=np.float32)) for _ in range(n_coeff)]
    return _walk(model, image, const)


def forward_main(model: CfsModel, image) -> Tensor:
    """Main branch only; the tuning branch and mapper are never executed."""
    image = image if isinstance(image, Tensor) else Tensor(image)
    return _walk(model, image, None)


MODES = ("adaptive", "sa", "main")


def run_model(model: CfsModel, image, alpha_in: float, mode: str = "adaptive") -> Tensor:
    if mode == "adaptive":
        return forward(model, image, alpha_in)
    if mode == "sa":
        return forward_sa(model, image, alpha_in)
    if mode == "main":
        return forward_main(model, image)
    raise ValueError(f"unknown mode {mode!r}")


def restore_image(model: CfsModel, image, alpha_in: float = 0.0,
                  mode: str = "adaptive") -> np.ndarray:
    """Restore one image given on the 0-255 scale; returns float 0-255.

    Normalization to [0,1] happens here, at the model boundary. The result is
    not clipped; clip when exporting to 8-bit.
    """
    arr = np.asarray(image, dtype=np.float32)
    squeeze = arr.ndim == 3
    if squeeze:
        arr = arr[None]
    with T.no_grad():
        out = run_model(model, Tensor(arr / 255.0), alpha_in, mode)
    res = out.data * 255.0
    return res[0] if squeeze else res


# -- baselines and exports -----------------------------------------------------


def dni_interpolate(model_a: CfsModel, model_b: CfsModel, alpha: float) -> CfsModel:
    """Parameter-space interpolation baseline: every parameter of the result
    is (1 - alpha) * p_A + alpha * p_B. Both models must share a config.
    Evaluate the result with :func:`forward_main` (the baseline has no
    meaningful tuning branch)."""
    if model_a.config.to_dict() != model_b.config.to_dict():
        raise ValueError("parameter interpolation requires identical architectures")
    alpha = float(alpha)
    out = build_model(model_a.config, seed=0)
    pa = model_a.named_parameters()
    pb = model_b.named_parameters()
    for name, p in out.named_parameters().items():
        p.data = (1.0 - alpha) * pa[name].data + alpha * pb[name].data
    out.provenance = {"interpolated": True, "alpha": alpha}
    return out


def export_coefficients(model: CfsModel, alpha_grid) -> np.ndarray:
    """Coefficient table, shape (len(grid), n_modules, C); deterministic."""
    with T.no_grad():
        rows = []
        for a in alpha_grid:
            coeffs = map_control(model, float(a))
            rows.append(np.stack([c.data for c in coeffs]))
    return np.stack(rows)


def write_coefficients_csv(fp, model: CfsModel, alpha_grid):
    """CSV export: header alpha,module,channel,value with \\n newlines."""
    table = export_coefficients(model, alpha_grid)
    keys = model._head_keys()
    fp.write("alpha,module,channel,value\n")
    for ai, a in enumerate(alpha_grid):
        for mi, key in enumerate(keys):
            for ci in range(table.shape[2]):
                fp.write(f"{float(a):g},{key},{ci},{table[ai, mi, ci]:.9g}\n")
    return table
