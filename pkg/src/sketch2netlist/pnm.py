"""Binary PGM (P5) read/write and PPM (P6) write, 8-bit only."""

from __future__ import annotations

import os

import numpy as np


class PNMError(ValueError):
    pass


def _tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping ``#`` comments.

    Returns the tokens and the offset of the single whitespace byte that
    terminates the last one.
    """
    tokens = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        start = i
        while i < n and not data[i : i + 1].isspace() and data[i : i + 1] != b"#":
            i += 1
        if start == i:
            raise PNMError("truncated header")
        tokens.append(data[start:i])
    if i >= n:
        raise PNMError("missing raster data")
    return tokens, i


def decode_pgm(data: bytes) -> np.ndarray:
    tokens, end = _tokens(data, 4)
    if tokens[0] != b"P5":
        raise PNMError(f"not a binary PGM (magic {tokens[0]!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise PNMError(f"bad header field: {exc}") from None
    if width <= 0 or height <= 0:
        raise PNMError(f"bad dimensions {width}x{height}")
    if maxval != 255:
        raise PNMError(f"only maxval 255 is supported, got {maxval}")
    raster = data[end + 1 : end + 1 + width * height]
    if len(raster) != width * height:
        raise PNMError("truncated raster")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy()


def encode_pgm(img: np.ndarray) -> bytes:
    img = np.ascontiguousarray(img, dtype=np.uint8)
    if img.ndim != 2:
        raise PNMError("PGM needs a 2-D array")
    h, w = img.shape
    return b"P5\n%d %d\n255\n" % (w, h) + img.tobytes()


def encode_ppm(rgb: np.ndarray) -> bytes:
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise PNMError("PPM needs an (H, W, 3) array")
    h, w, _ = rgb.shape
    return b"P6\n%d %d\n255\n" % (w, h) + rgb.tobytes()


def read_pgm(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as f:
        return decode_pgm(f.read())


def write_pgm(path: str | os.PathLike, img: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(encode_pgm(img))


def write_ppm(path: str | os.PathLike, rgb: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(encode_ppm(rgb))
