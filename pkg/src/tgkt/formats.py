"""On-disk formats: T3B binary tensors, PGM/PPM images, key=value sidecars.

T3B is the bit-exact tensor container: magic ``T3B1``, three little-endian
32-bit unsigned dims (l, m, n), then ``l*m*n`` little-endian float64 values
in face-major order (face k contiguous, column-major within each l-by-m
face).  PGM (P5) carries grayscale and PPM (P6) RGB, 8-bit only; pixel
values are scaled to [0, 1] on read and quantized back by round-half-even
on write, so an 8-bit image survives a round trip byte-identically.
Sidecars are plain ``key=value`` text, one pair per line.
"""

from __future__ import annotations

import struct

import numpy as np

from .tensor import _as_tensor3

T3B_MAGIC = b"T3B1"


def write_t3b(path, t):
    """Write a tensor to the T3B binary container."""
    t = _as_tensor3(t)
    l, m, n = t.shape
    with open(path, "wb") as fh:
        fh.write(T3B_MAGIC)
        fh.write(struct.pack("<3I", l, m, n))
        fh.write(np.ascontiguousarray(t.ravel(order="F"), dtype="<f8").tobytes())


def read_t3b(path):
    """Read a tensor from the T3B binary container."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16 or blob[:4] != T3B_MAGIC:
        raise ValueError(f"{path}: not a T3B file")
    l, m, n = struct.unpack("<3I", blob[4:16])
    count = l * m * n
    payload = blob[16:]
    if len(payload) != 8 * count:
        raise ValueError(f"{path}: payload holds {len(payload)} bytes, "
                         f"expected {8 * count} for dims ({l}, {m}, {n})")
    data = np.frombuffer(payload, dtype="<f8", count=count)
    return np.ascontiguousarray(data.reshape((l, m, n), order="F"))


# -- PGM / PPM ----------------------------------------------------------------

def _read_pnm_tokens(blob, count):
    """Header tokens of a PNM file, skipping whitespace and # comments.

    Returns the tokens and the offset of the raster (one whitespace byte
    after the last header token).
    """
    tokens = []
    pos = 0
    while len(tokens) < count:
        if pos >= len(blob):
            raise ValueError("truncated image header")
        c = blob[pos:pos + 1]
        if c in b" \t\r\n":
            pos += 1
        elif c == b"#":
            end = blob.find(b"\n", pos)
            if end < 0:
                raise ValueError("unterminated comment in image header")
            pos = end + 1
        else:
            end = pos
            while end < len(blob) and blob[end:end + 1] not in b" \t\r\n":
                end += 1
            tokens.append(blob[pos:end])
            pos = end
    return tokens, pos + 1


def read_image(path):
    """Read a P5/P6 image into a float array scaled to [0, 1].

    Grayscale comes back as (rows, cols); RGB as (rows, cols, 3).
    Only 8-bit data (maxval <= 255) is accepted.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:2] not in (b"P5", b"P6"):
        raise ValueError(f"{path}: unsupported image magic {blob[:2]!r}")
    channels = 1 if blob[:2] == b"P5" else 3
    tokens, offset = _read_pnm_tokens(blob[2:], 3)
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise ValueError(f"{path}: malformed image header") from exc
    if maxval <= 0 or maxval > 255:
        raise ValueError(f"{path}: only 8-bit images supported (maxval {maxval})")
    raster = blob[2 + offset:]
    need = width * height * channels
    if len(raster) < need:
        raise ValueError(f"{path}: raster truncated ({len(raster)} < {need} bytes)")
    data = np.frombuffer(raster[:need], dtype=np.uint8).astype(np.float64) / maxval
    if channels == 1:
        return data.reshape(height, width)
    return data.reshape(height, width, 3)


def _quantize(img):
    # round-half-even, clipped to the 8-bit range
    return np.rint(np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0) * 255.0
                   ).astype(np.uint8)


def write_pgm(path, img):
    """Write a [0, 1] float matrix as an 8-bit P5 grayscale image."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"grayscale image must be a matrix, got {img.shape}")
    rows, cols = img.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (cols, rows))
        fh.write(_quantize(img).tobytes())


def write_ppm(path, img):
    """Write a [0, 1] float (rows, cols, 3) array as an 8-bit P6 RGB image."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"RGB image must be (rows, cols, 3), got {img.shape}")
    rows, cols = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (cols, rows))
        fh.write(_quantize(img).tobytes())


# -- key=value sidecars --------------------------------------------------------

def write_sidecar(path, mapping):
    """Write a metadata sidecar: one ``key=value`` line per entry.

    Floats are rendered with repr (full precision round trip); insertion
    order is preserved.
    """
    lines = []
    for key, value in mapping.items():
        if isinstance(value, float):
            value = repr(value)
        lines.append(f"{key}={value}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_sidecar(path):
    """Read a key=value sidecar into a dict of strings."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out
