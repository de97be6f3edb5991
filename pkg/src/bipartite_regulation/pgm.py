"""Netpbm greyscale images (P5 binary, P2 ASCII)."""

import numpy as np


class PGMError(ValueError):
    pass


def quantize(values):
    """Map [-1, 1] affinely onto 0..255, rounding half up and clamping."""
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise PGMError("pixel values must be finite")
    scaled = np.floor((values + 1.0) * 127.5 + 0.5)
    return np.clip(scaled, 0, 255).astype(np.uint8)


def render_pgm(bitmap):
    """Binary P5 bytes for a (height, width) array of values in [-1, 1]."""
    bitmap = np.asarray(bitmap, dtype=float)
    if bitmap.ndim != 2 or 0 in bitmap.shape:
        raise PGMError("bitmap must be a non-empty 2-D array")
    h, w = bitmap.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + quantize(bitmap).tobytes()


def encode_pgm(pixels, maxval=255):
    """P5 bytes for an integer (height, width) array."""
    pixels = np.asarray(pixels)
    h, w = pixels.shape
    header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
    dtype = ">u2" if maxval > 255 else np.uint8
    return header + pixels.astype(dtype).tobytes()


def _tokens(data, count, pos):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    out = []
    n = len(data)
    while len(out) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise PGMError("truncated PGM header")
        out.append(data[start:pos])
    return out, pos


def parse_pgm(data):
    """Decode P5 or P2 bytes into ``(pixels, maxval)`` with pixels (height, width)."""
    if data[:2] not in (b"P5", b"P2"):
        raise PGMError("not a PGM file (expected P5 or P2 magic)")
    magic = data[:2]
    try:
        (w, h, maxval), pos = _tokens(data, 3, 2)
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise PGMError("malformed PGM header") from None
    if w <= 0 or h <= 0 or not 0 < maxval < 65536:
        raise PGMError("bad PGM dimensions or maxval")
    if magic == b"P5":
        pos += 1  # single whitespace byte after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
        body = data[pos:pos + w * h * dtype.itemsize]
        if len(body) != w * h * dtype.itemsize:
            raise PGMError("truncated PGM raster")
        pixels = np.frombuffer(body, dtype=dtype).reshape(h, w)
    else:
        raw = data[pos:].split()
        if len(raw) < w * h:
            raise PGMError("truncated PGM raster")
        pixels = np.array([int(t) for t in raw[: w * h]]).reshape(h, w)
    if pixels.max(initial=0) > maxval:
        raise PGMError("pixel value exceeds maxval")
    return pixels.astype(np.int64), maxval


def read_pgm(path):
    with open(path, "rb") as fh:
        return parse_pgm(fh.read())


def threshold_dark(pixels, maxval=255, level=128):
    """Boolean mask of dark pixels (below ``level`` on a 0..255 scale)."""
    scaled = np.asarray(pixels, dtype=float) * (255.0 / maxval)
    return scaled < level
