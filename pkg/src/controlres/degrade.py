"""Synthetic degradations, patch datasets and image I/O.

Images are float32 arrays shaped (C, H, W) on the 0-255 scale throughout
this module; normalization to [0,1] happens at the model boundary, and
clipping to 8 bits only on export. All operators are pure and deterministic
given their spec and seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict, field
from pathlib import Path

import numpy as np
import scipy.fft
import scipy.ndimage

KINDS = ("awgn", "jpeg", "bicubic_down", "blur_then_down")


@dataclass
class DegradationSpec:
    kind: str = "awgn"
    sigma: float = 25.0        # awgn noise std, 0-255 scale
    quality: int = 10          # jpeg quality factor 1-100
    scale: int = 1             # downsampling factor
    blur_size: int = 17        # blur kernel size (odd)
    blur_std: float = 2.6
    seed: int = 0

    def validate(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown degradation kind {self.kind!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if not 1 <= self.quality <= 100:
            raise ValueError("quality must be in 1..100")
        if self.scale < 1:
            raise ValueError("scale must be >= 1")
        if self.blur_size % 2 == 0:
            raise ValueError("blur kernel size must be odd")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DegradationSpec":
        return cls(**d).validate()


# -- additive white Gaussian noise -------------------------------------------


def add_awgn(image: np.ndarray, sigma: float, seed) -> np.ndarray:
    """image + N(0, sigma^2) i.i.d. per pixel; no clipping here."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    image = np.asarray(image, dtype=np.float32)
    if sigma == 0:
        return image.copy()
    rng = np.random.default_rng(seed)
    return image + rng.normal(0.0, sigma, image.shape).astype(np.float32)


# -- JPEG-style quantization ---------------------------------------------------

# Standard luminance quantization table (zigzag-free, row-major).
LUMA_QTABLE = np.array([
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
], dtype=np.float64)


def jpeg_qtable(quality: int) -> np.ndarray:
    """Quality-scaled luminance table.

    Uses the common 5000/q (q<50) / 200-2q scaling with entries clamped to
    [1, 255]. The DC step is additionally capped at its unscaled value so a
    constant image always reconstructs within one gray level; without the cap
    low qualities shift flat regions by several levels.
    """
    if not 1 <= quality <= 100:
        raise ValueError("quality must be in 1..100")
    scale = 5000.0 / quality if quality < 50 else 200.0 - 2.0 * quality
    table = np.clip(np.floor((LUMA_QTABLE * scale + 50.0) / 100.0), 1.0, 255.0)
    table[0, 0] = min(table[0, 0], LUMA_QTABLE[0, 0])
    return table


def quantize_dct(coeffs: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Round DCT coefficients to integer multiples of the table entries."""
    return np.round(coeffs / table) * table


def _to_blocks(plane: np.ndarray):
    h, w = plane.shape
    ph = (8 - h % 8) % 8
    pw = (8 - w % 8) % 8
    padded = np.pad(plane, ((0, ph), (0, pw)), mode="edge")
    hb, wb = padded.shape[0] // 8, padded.shape[1] // 8
    blocks = padded.reshape(hb, 8, wb, 8).transpose(0, 2, 1, 3)
    return blocks, (h, w)


def _from_blocks(blocks: np.ndarray, size) -> np.ndarray:
    hb, wb = blocks.shape[0], blocks.shape[1]
    plane = blocks.transpose(0, 2, 1, 3).reshape(hb * 8, wb * 8)
    return plane[: size[0], : size[1]]


def jpeg_degrade(image: np.ndarray, quality: int) -> np.ndarray:
    """Blocking artifacts via 8x8 DCT quantization (luminance only).

    Quantization is the only lossy step: block DCT, quantize with the scaled
    table, dequantize, inverse DCT, clip to [0, 255]. No subsampling, no
    entropy coding.
    """
    image = np.asarray(image, dtype=np.float32)
    squeeze = image.ndim == 2
    if squeeze:
        image = image[None]
    if image.shape[0] != 1:
        raise ValueError("jpeg degradation operates on single-channel images")
    table = jpeg_qtable(quality)
    blocks, size = _to_blocks(image[0].astype(np.float64) - 128.0)
    coeffs = scipy.fft.dctn(blocks, axes=(2, 3), norm="ortho")
    rec = scipy.fft.idctn(quantize_dct(coeffs, table), axes=(2, 3), norm="ortho")
    plane = np.clip(_from_blocks(rec, size) + 128.0, 0.0, 255.0).astype(np.float32)
    out = plane[None]
    return out[0] if squeeze else out


# -- resampling ----------------------------------------------------------------


def _cubic_kernel(x: np.ndarray) -> np.ndarray:
    # Keys kernel, a = -0.5
    ax = np.abs(x)
    ax2 = ax * ax
    ax3 = ax2 * ax
    return np.where(
        ax <= 1.0,
        1.5 * ax3 - 2.5 * ax2 + 1.0,
        np.where(ax < 2.0, -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0, 0.0),
    )


def _resize_weights(n_in: int, n_out: int, ratio: float):
    """Sample positions and normalized weights for one axis.

    Antialias: when shrinking, the kernel is stretched by 1/ratio. Out-of-range
    taps are clamped (edge replication) before weight normalization collapses
    duplicates.
    """
    kscale = min(ratio, 1.0)
    support = 2.0 / kscale
    u = (np.arange(n_out) + 0.5) / ratio - 0.5
    left = np.floor(u - support).astype(int) + 1
    taps = int(np.ceil(2 * support)) + 1
    idx = left[:, None] + np.arange(taps)[None, :]
    weights = _cubic_kernel((u[:, None] - idx) * kscale)
    weights /= weights.sum(axis=1, keepdims=True)
    idx = np.clip(idx, 0, n_in - 1)
    return idx, weights


def _resize_axis(arr: np.ndarray, n_out: int, ratio: float, axis: int) -> np.ndarray:
    arr = np.moveaxis(arr, axis, -1)
    idx, w = _resize_weights(arr.shape[-1], n_out, ratio)
    out = (arr[..., idx] * w).sum(axis=-1)
    return np.moveaxis(out, -1, axis)


def bicubic_resize(image: np.ndarray, scale_num: int, scale_den: int) -> np.ndarray:
    """Separable bicubic resize by the rational factor num/den.

    Keys a=-0.5 kernel, antialias pre-filtering when downscaling, edge
    replication at the borders. At ratio 1 the kernel interpolates the
    samples exactly and the image is returned unchanged.
    """
    if scale_num < 1 or scale_den < 1:
        raise ValueError("scale must be a positive rational")
    image = np.asarray(image, dtype=np.float32)
    squeeze = image.ndim == 2
    if squeeze:
        image = image[None]
    c, h, w = image.shape
    ratio = scale_num / scale_den
    h_out = int(np.ceil(h * scale_num / scale_den))
    w_out = int(np.ceil(w * scale_num / scale_den))
    if h_out < 1 or w_out < 1:
        raise ValueError("output dimension would be < 1")
    out = image.astype(np.float64)
    if h_out != h or ratio != 1.0:
        out = _resize_axis(out, h_out, ratio, 1)
    if w_out != w or ratio != 1.0:
        out = _resize_axis(out, w_out, ratio, 2)
    out = out.astype(np.float32)
    return out[0] if squeeze else out


def gaussian_blur(image: np.ndarray, size: int, std: float) -> np.ndarray:
    """Separable truncated Gaussian (kernel sums to 1), edge replication."""
    if size % 2 == 0:
        raise ValueError("kernel size must be odd")
    if std <= 0:
        raise ValueError("std must be > 0")
    image = np.asarray(image, dtype=np.float32)
    squeeze = image.ndim == 2
    if squeeze:
        image = image[None]
    half = size // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / std) ** 2)
    k /= k.sum()
    out = image.astype(np.float64)
    out = scipy.ndimage.correlate1d(out, k, axis=1, mode="nearest")
    out = scipy.ndimage.correlate1d(out, k, axis=2, mode="nearest")
    out = out.astype(np.float32)
    return out[0] if squeeze else out


def degrade_image(image: np.ndarray, spec: DegradationSpec, salt: int = 0) -> np.ndarray:
    """Apply one degradation; ``salt`` varies the noise stream per image."""
    spec.validate()
    if spec.kind == "awgn":
        return add_awgn(image, spec.sigma, seed=(spec.seed, salt))
    if spec.kind == "jpeg":
        return jpeg_degrade(image, spec.quality)
    if spec.kind == "bicubic_down":
        return bicubic_resize(image, 1, spec.scale)
    blurred = gaussian_blur(image, spec.blur_size, spec.blur_std)
    return bicubic_resize(blurred, 1, spec.scale)


# -- patch pipeline -------------------------------------------------------------


@dataclass
class PatchSet:
    inputs: np.ndarray          # (P, C, h, w) degraded
    targets: np.ndarray         # (P, C, H, W) ground truth
    patch: int
    stride: int
    source_ids: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __len__(self):
        return self.targets.shape[0]


def _grid(extent: int, patch: int, stride: int) -> np.ndarray:
    if patch > extent:
        raise ValueError(f"patch {patch} larger than image extent {extent}")
    return np.arange(0, extent - patch + 1, stride)


def extract_patches(images, patch: int, stride: int, seed=None) -> PatchSet:
    """Regular-grid patches from a list of (C,H,W) images.

    Input and target patches are identical here (no degradation applied);
    pass a seed to shuffle patch order deterministically.
    """
    chunks, ids = [], []
    for i, img in enumerate(images):
        img = np.asarray(img, dtype=np.float32)
        c, h, w = img.shape
        ys, xs = _grid(h, patch, stride), _grid(w, patch, stride)
        for y in ys:
            for x in xs:
                chunks.append(img[:, y:y + patch, x:x + patch])
                ids.append(i)
    patches = np.stack(chunks)
    ids = np.asarray(ids, dtype=np.int64)
    if seed is not None:
        order = np.random.default_rng(seed).permutation(len(patches))
        patches, ids = patches[order], ids[order]
    return PatchSet(inputs=patches, targets=patches.copy(), patch=patch,
                    stride=stride, source_ids=ids)


def build_pairs(images, spec: DegradationSpec, patch: int, stride: int,
                seed=None) -> PatchSet:
    """Aligned (degraded, clean) training pairs.

    The degradation runs on full images first so block/blur structure crosses
    patch boundaries naturally; for downscaling tasks, input patches live on
    the low-resolution grid (patch must be a multiple of the scale).
    """
    spec.validate()
    scale = spec.scale if spec.kind in ("bicubic_down", "blur_then_down") else 1
    if patch % scale != 0:
        raise ValueError("patch size must be divisible by the downscale factor")
    ins, tgts, ids = [], [], []
    for i, img in enumerate(images):
        img = np.asarray(img, dtype=np.float32)
        deg = degrade_image(img, spec, salt=i)
        c, h, w = img.shape
        ys = _grid(h - h % scale, patch, stride)
        xs = _grid(w - w % scale, patch, stride)
        for y in ys:
            for x in xs:
                if (y % scale) or (x % scale):
                    continue
                tgts.append(img[:, y:y + patch, x:x + patch])
                p, yy, xx = patch // scale, y // scale, x // scale
                ins.append(deg[:, yy:yy + p, xx:xx + p])
                ids.append(i)
    inputs, targets = np.stack(ins), np.stack(tgts)
    ids = np.asarray(ids, dtype=np.int64)
    if seed is not None:
        order = np.random.default_rng(seed).permutation(len(targets))
        inputs, targets, ids = inputs[order], targets[order], ids[order]
    return PatchSet(inputs=inputs, targets=targets, patch=patch, stride=stride,
                    source_ids=ids)


# -- procedural textures --------------------------------------------------------


def _upsample_bilinear(grid: np.ndarray, size: int) -> np.ndarray:
    n = grid.shape[0]
    pos = (np.arange(size) + 0.5) * (n - 1) / size
    i0 = np.clip(np.floor(pos).astype(int), 0, n - 2)
    f = pos - i0
    rows = grid[i0][:, i0] * np.outer(1 - f, 1 - f)
    rows += grid[i0 + 1][:, i0] * np.outer(f, 1 - f)
    rows += grid[i0][:, i0 + 1] * np.outer(1 - f, f)
    rows += grid[i0 + 1][:, i0 + 1] * np.outer(f, f)
    return rows


def make_texture(size: int, seed, channels: int = 1) -> np.ndarray:
    """Seeded multi-octave value-noise image, (C, size, size) in 0-255.

    A smooth cloud field is mixed with a level-quantized field so the images
    carry both gradients and sharp region boundaries; the test suite uses
    these instead of an external photo dataset.
    """
    rng = np.random.default_rng(seed)
    # persistence 0.7 keeps real energy in the fine octaves; smoother fields
    # make restoration too easy to tell noise levels apart
    cloud = np.zeros((size, size))
    amp, f = 1.0, 4
    while f <= size:
        cloud += amp * _upsample_bilinear(rng.standard_normal((f + 1, f + 1)), size)
        amp *= 0.7
        f *= 2
    rough = np.zeros((size, size))
    amp, f = 1.0, 4
    while f <= size:
        rough += amp * _upsample_bilinear(rng.standard_normal((f + 1, f + 1)), size)
        amp *= 0.7
        f *= 2
    flat = np.round(rough / max(rough.std(), 1e-9) * 1.5) / 1.5
    base = 0.8 * cloud / max(cloud.std(), 1e-9) + 0.3 * flat
    base = (base - base.mean()) / max(base.std(), 1e-9)
    plane = np.clip(128.0 + 46.0 * base, 0.0, 255.0)
    if channels == 1:
        return plane[None].astype(np.float32)
    tint = rng.uniform(-18.0, 18.0, size=(channels, 1, 1))
    return np.clip(plane[None] + tint, 0.0, 255.0).astype(np.float32)


def make_texture_set(count: int, size: int, seed: int, channels: int = 1):
    return [make_texture(size, (seed, i), channels) for i in range(count)]


# -- image I/O -------------------------------------------------------------------


def _read_pnm(data: bytes) -> np.ndarray:
    fields = []
    pos = 0
    while len(fields) < 4:
        # tokenizer that skips whitespace and '#' comments
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    magic, w, h, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    if magic not in (b"P5", b"P6"):
        raise ValueError(f"unsupported PNM magic {magic!r}")
    if maxval != 255:
        raise ValueError("only 8-bit PNM images are supported")
    pos += 1  # single whitespace byte after maxval
    channels = 1 if magic == b"P5" else 3
    count = w * h * channels
    raw = np.frombuffer(data, dtype=np.uint8, count=count, offset=pos)
    img = raw.reshape(h, w, channels).transpose(2, 0, 1)
    return img.astype(np.float32)


def _write_pnm(arr: np.ndarray) -> bytes:
    c, h, w = arr.shape
    if c not in (1, 3):
        raise ValueError("PNM supports 1 or 3 channels")
    magic = b"P5" if c == 1 else b"P6"
    u8 = to_uint8(arr)
    header = magic + b"\n%d %d\n255\n" % (w, h)
    return header + u8.transpose(1, 2, 0).tobytes()


def to_uint8(arr: np.ndarray) -> np.ndarray:
    """Final 8-bit export: clip to [0,255] and round to nearest."""
    return np.clip(np.rint(arr), 0, 255).astype(np.uint8)


def read_image_bytes(data: bytes) -> np.ndarray:
    if data[:2] in (b"P5", b"P6"):
        return _read_pnm(data)
    try:
        import io
        from PIL import Image
    except ImportError as exc:  # pragma: no cover
        raise ValueError("PNG support requires Pillow") from exc
    img = Image.open(io.BytesIO(data))
    if img.mode not in ("L", "RGB"):
        img = img.convert("RGB" if "A" in img.mode or len(img.getbands()) > 1 else "L")
    arr = np.asarray(img, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[None]
    else:
        arr = arr.transpose(2, 0, 1)
    return arr


def write_image_bytes(arr: np.ndarray, fmt: str) -> bytes:
    fmt = fmt.lower().lstrip(".")
    if fmt in ("pgm", "ppm", "pnm"):
        return _write_pnm(arr)
    if fmt == "png":
        import io
        from PIL import Image
        u8 = to_uint8(arr)
        pil = Image.fromarray(u8[0] if u8.shape[0] == 1 else u8.transpose(1, 2, 0))
        buf = io.BytesIO()
        pil.save(buf, format="PNG")
        return buf.getvalue()
    raise ValueError(f"unsupported image format {fmt!r}")


def read_image(path) -> np.ndarray:
    return read_image_bytes(Path(path).read_bytes())


def write_image(path, arr: np.ndarray):
    path = Path(path)
    path.write_bytes(write_image_bytes(arr, path.suffix or "pgm"))


IMAGE_SUFFIXES = (".pgm", ".ppm", ".png")


def load_images(path) -> list:
    """Load a dataset: a directory of images or a JSON manifest of paths."""
    path = Path(path)
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    elif path.suffix == ".json":
        entries = json.loads(path.read_text())
        files = [path.parent / e for e in entries]
    else:
        files = [path]
    if not files:
        raise ValueError(f"no images found at {path}")
    return [read_image(p) for p in files]
