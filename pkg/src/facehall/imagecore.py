"""Image buffers, file I/O, color conversion, and the scale-change operators.

Images are numpy float64 arrays. Grayscale buffers have shape (H, W) with
values in [0, 1]; color images have shape (H, W, 3). High-frequency residual
buffers share the grayscale layout but hold signed, unbounded values.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


class ImageFormatError(ValueError):
    """Raised for unreadable or unsupported image files."""


# BT.601 full-range luma weights; chroma is stored with its neutral at 0.5 so
# every channel of a color buffer stays inside [0, 1].
_KR = 0.299
_KG = 0.587
_KB = 0.114
_CB_SCALE = 0.5 / (1.0 - _KB)
_CR_SCALE = 0.5 / (1.0 - _KR)


def _require_gray(img: np.ndarray, name: str = "image") -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 2D array, got shape {arr.shape}")
    return arr


def _require_color(img: np.ndarray, name: str = "image") -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty (H, W, 3) array, got shape {arr.shape}")
    return arr


def degrade(hr: np.ndarray, scale: int) -> np.ndarray:
    """Average-smooth and down-sample by an integer factor.

    Each output pixel is the mean of the corresponding non-overlapping
    scale x scale block, which equals uniform smoothing followed by
    block-aligned stride sampling. Works on (H, W) or (H, W, 3) arrays.
    """
    arr = np.asarray(hr, dtype=np.float64)
    if scale < 2:
        raise ValueError(f"scale must be >= 2, got {scale}")
    h, w = arr.shape[:2]
    if h % scale or w % scale:
        raise ValueError(
            f"image dims {h}x{w} are not divisible by scale {scale}"
        )
    # accumulate strided planes in row-major block order so results are
    # bit-identical to a naive per-block loop
    total = np.zeros((h // scale, w // scale) + arr.shape[2:], dtype=np.float64)
    for di in range(scale):
        for dj in range(scale):
            total += arr[di::scale, dj::scale]
    return total / scale**2


def _keys_taps(n_out: int, scale: int, n_in: int) -> tuple[np.ndarray, np.ndarray]:
    """Tap indices and Keys a=-0.5 weights for one axis of the upscale.

    Output coordinate x maps to source coordinate x / scale, so output
    samples at multiples of `scale` land exactly on source pixels.
    """
    x = np.arange(n_out, dtype=np.float64) / scale
    base = np.floor(x).astype(np.int64)
    t = x - base
    # taps at base-1 .. base+2, clamped to the edge
    idx = base[:, None] + np.arange(-1, 3)[None, :]
    np.clip(idx, 0, n_in - 1, out=idx)
    d = np.abs(t[:, None] - np.arange(-1, 3)[None, :])
    near = (1.5 * d - 2.5) * d * d + 1.0
    far = ((-0.5 * d + 2.5) * d - 4.0) * d + 2.0
    wts = np.where(d <= 1.0, near, np.where(d < 2.0, far, 0.0))
    return idx, wts


def bicubic_upscale(lr: np.ndarray, scale: int) -> np.ndarray:
    """Upscale by an integer factor with separable Keys a=-0.5 convolution.

    Edges are handled by clamp-to-edge replication and the result is clamped
    to [0, 1]. Sampling the output at stride `scale` from the origin returns
    the input values. Works on (H, W) or (H, W, 3) arrays.
    """
    arr = np.asarray(lr, dtype=np.float64)
    if scale < 2:
        raise ValueError(f"scale must be >= 2, got {scale}")
    if arr.size == 0:
        raise ValueError("cannot upscale an empty image")
    if arr.ndim == 3:
        return np.stack(
            [bicubic_upscale(arr[..., c], scale) for c in range(arr.shape[2])], axis=-1
        )
    h, w = arr.shape
    col_idx, col_wts = _keys_taps(w * scale, scale, w)
    out = np.einsum("hwk,wk->hw", arr[:, col_idx], col_wts)
    row_idx, row_wts = _keys_taps(h * scale, scale, h)
    out = np.einsum("hkw,hk->hw", out[row_idx, :], row_wts)
    return np.clip(out, 0.0, 1.0)


def rgb_to_yuv(img: np.ndarray) -> np.ndarray:
    """Convert an RGB image to full-range BT.601 YUV (chroma neutral at 0.5)."""
    arr = _require_color(img)
    r, g, b = arr[..., 0], arr[..., 1], arr[..., 2]
    y = _KR * r + _KG * g + _KB * b
    u = 0.5 + (b - y) * _CB_SCALE
    v = 0.5 + (r - y) * _CR_SCALE
    return np.clip(np.stack([y, u, v], axis=-1), 0.0, 1.0)


def yuv_to_rgb(img: np.ndarray) -> np.ndarray:
    """Invert rgb_to_yuv; the result is clamped to [0, 1]."""
    arr = _require_color(img)
    y, u, v = arr[..., 0], arr[..., 1], arr[..., 2]
    r = y + (v - 0.5) / _CR_SCALE
    b = y + (u - 0.5) / _CB_SCALE
    g = (y - _KR * r - _KB * b) / _KG
    return np.clip(np.stack([r, g, b], axis=-1), 0.0, 1.0)


def to_luminance(img: np.ndarray) -> np.ndarray:
    """Grayscale view of an image: pass-through for 2D, BT.601 luma for color."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        return arr
    return rgb_to_yuv(arr)[..., 0]


# ---------------------------------------------------------------------------
# File I/O: 8-bit PNG (via Pillow) and binary PGM (P5) / PPM (P6).
# Byte values map to reals by v / 255; writing rounds clip(v, 0, 1) * 255.
# ---------------------------------------------------------------------------

_WHITESPACE = b" \t\r\n\x0b\x0c"


class _NetpbmReader:
    def __init__(self, data: bytes, path: str):
        self.data = data
        self.pos = 0
        self.path = path

    def fail(self, message: str) -> None:
        raise ImageFormatError(f"{self.path}: {message} at byte offset {self.pos}")

    def _skip_separators(self) -> None:
        data = self.data
        while self.pos < len(data):
            c = data[self.pos : self.pos + 1]
            if c in (b"#",):
                while self.pos < len(data) and data[self.pos : self.pos + 1] != b"\n":
                    self.pos += 1
            elif c in _WHITESPACE:
                self.pos += 1
            else:
                return

    def token(self, what: str) -> bytes:
        self._skip_separators()
        start = self.pos
        data = self.data
        while self.pos < len(data) and data[self.pos : self.pos + 1] not in _WHITESPACE:
            self.pos += 1
        if self.pos == start:
            self.fail(f"missing {what}")
        return data[start : self.pos]

    def int_token(self, what: str) -> int:
        tok = self.token(what)
        try:
            return int(tok)
        except ValueError:
            self.pos -= len(tok)
            self.fail(f"invalid {what} {tok!r}")
            raise AssertionError  # unreachable

    def raster(self, count: int) -> np.ndarray:
        # exactly one whitespace byte separates the header from the raster
        if self.pos >= len(self.data) or self.data[self.pos : self.pos + 1] not in _WHITESPACE:
            self.fail("missing raster separator")
        self.pos += 1
        raw = self.data[self.pos : self.pos + count]
        if len(raw) < count:
            self.pos += len(raw)
            self.fail(f"truncated raster, expected {count} bytes")
        return np.frombuffer(raw, dtype=np.uint8)


def _load_netpbm(path: Path) -> np.ndarray:
    reader = _NetpbmReader(path.read_bytes(), str(path))
    magic = reader.token("magic number")
    if magic not in (b"P5", b"P6"):
        reader.pos = 0
        reader.fail(f"unsupported magic {magic!r} (expected P5 or P6)")
    width = reader.int_token("width")
    height = reader.int_token("height")
    maxval = reader.int_token("maxval")
    if width <= 0 or height <= 0:
        reader.fail(f"invalid dimensions {width}x{height}")
    if maxval != 255:
        reader.fail(f"unsupported bit depth (maxval {maxval}, only 255 supported)")
    channels = 1 if magic == b"P5" else 3
    raw = reader.raster(width * height * channels)
    arr = raw.astype(np.float64) / 255.0
    if channels == 1:
        return arr.reshape(height, width)
    return arr.reshape(height, width, 3)


def _load_png(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode == "L":
                return np.asarray(im, dtype=np.uint8).astype(np.float64) / 255.0
            if mode == "RGB":
                return np.asarray(im, dtype=np.uint8).astype(np.float64) / 255.0
    except ImageFormatError:
        raise
    except Exception as exc:
        raise ImageFormatError(f"{path}: unreadable image file ({exc})") from exc
    raise ImageFormatError(
        f"{path}: unsupported bit depth or mode {mode!r} (only 8-bit L/RGB supported)"
    )


def load_image(path: str | Path) -> np.ndarray:
    """Load an 8-bit grayscale or RGB image as a float array in [0, 1].

    PNG, binary PGM (P5), and binary PPM (P6) are supported. Returns a
    (H, W) array for grayscale files and (H, W, 3) for color.
    """
    path = Path(path)
    if not path.is_file():
        raise ImageFormatError(f"{path}: no such file")
    suffix = path.suffix.lower()
    if suffix in (".pgm", ".ppm", ".pnm"):
        return _load_netpbm(path)
    if suffix == ".png":
        return _load_png(path)
    raise ImageFormatError(f"{path}: unsupported file type {suffix!r}")


def _quantize(img: np.ndarray) -> np.ndarray:
    return np.rint(np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)


def save_image(path: str | Path, img: np.ndarray) -> None:
    """Write an image as 8-bit PNG, PGM (grayscale), or PPM (color)."""
    path = Path(path)
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim not in (2, 3) or (arr.ndim == 3 and arr.shape[2] != 3):
        raise ValueError(f"cannot save array of shape {arr.shape}")
    data = _quantize(arr)
    suffix = path.suffix.lower()
    if suffix == ".png":
        mode = "L" if data.ndim == 2 else "RGB"
        Image.fromarray(data, mode=mode).save(path, format="PNG")
    elif suffix == ".pgm":
        if data.ndim != 2:
            raise ValueError("PGM stores grayscale images; got 3 channels")
        h, w = data.shape
        path.write_bytes(b"P5\n%d %d\n255\n" % (w, h) + data.tobytes())
    elif suffix == ".ppm":
        if data.ndim != 3:
            raise ValueError("PPM stores color images; got a single channel")
        h, w = data.shape[:2]
        path.write_bytes(b"P6\n%d %d\n255\n" % (w, h) + data.tobytes())
    else:
        raise ValueError(f"unsupported output file type {suffix!r}")
