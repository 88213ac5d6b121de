"""Binary PPM (P6) and PGM (P5) reading and writing, 8-bit only.

Images are ``(C, H, W)`` float arrays in ``[0, 1]``. Reading divides by
255; writing clamps to ``[0, 1]`` and rounds ``value * 255`` to the
nearest integer, so ``ppm_read(ppm_write(x))`` equals the 8-bit
quantisation of ``x`` exactly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


class NetpbmError(ValueError):
    """Malformed or truncated netpbm data."""


def _header(data: bytes, magic: bytes):
    """Parse ``magic width height maxval`` and return them with the payload offset."""
    if data[:2] != magic:
        raise NetpbmError(f"byte 0: expected magic {magic.decode()!r}, found {data[:2]!r}")
    pos = 2
    fields = []
    while len(fields) < 3:
        # whitespace and comments
        while pos < len(data) and (data[pos:pos + 1].isspace() or data[pos:pos + 1] == b"#"):
            if data[pos:pos + 1] == b"#":
                end = data.find(b"\n", pos)
                pos = len(data) if end < 0 else end + 1
            else:
                pos += 1
        start = pos
        while pos < len(data) and data[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            got = data[pos:pos + 1] or b"end of file"
            raise NetpbmError(f"byte {pos}: expected a header integer, found {got!r}")
        fields.append(int(data[start:pos]))
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise NetpbmError(f"byte {pos}: expected one whitespace byte after maxval")
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise NetpbmError(f"header: invalid size {width}x{height}")
    if maxval != 255:
        raise NetpbmError(f"header: only maxval 255 is supported, found {maxval}")
    return width, height, pos + 1


def _decode(data: bytes, magic: bytes, channels: int) -> np.ndarray:
    width, height, offset = _header(data, magic)
    need = width * height * channels
    have = len(data) - offset
    if have < need:
        raise NetpbmError(
            f"truncated payload: expected {need} bytes after header at byte {offset}, found {have}")
    pix = np.frombuffer(data, dtype=np.uint8, count=need, offset=offset)
    pix = pix.reshape(height, width, channels).transpose(2, 0, 1)
    return pix.astype(np.float64) / 255.0


def _quantize(x) -> np.ndarray:
    return np.rint(np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)


def ppm_decode(data: bytes) -> np.ndarray:
    return _decode(data, b"P6", 3)


def pgm_decode(data: bytes) -> np.ndarray:
    """Returns ``(H, W)``."""
    return _decode(data, b"P5", 1)[0]


def ppm_encode(image) -> bytes:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[0] != 3:
        raise ValueError(f"PPM needs a (3, H, W) image, got {image.shape}")
    _, h, w = image.shape
    body = _quantize(image).transpose(1, 2, 0).tobytes()
    return f"P6\n{w} {h}\n255\n".encode() + body


def pgm_encode(field) -> bytes:
    field = np.asarray(field)
    if field.ndim == 3 and field.shape[0] == 1:
        field = field[0]
    if field.ndim != 2:
        raise ValueError(f"PGM needs an (H, W) field, got {field.shape}")
    h, w = field.shape
    return f"P5\n{w} {h}\n255\n".encode() + _quantize(field).tobytes()


def ppm_read(path) -> np.ndarray:
    return ppm_decode(Path(path).read_bytes())


def pgm_read(path) -> np.ndarray:
    return pgm_decode(Path(path).read_bytes())


def ppm_write(image, path) -> None:
    Path(path).write_bytes(ppm_encode(image))


def pgm_write(field, path) -> None:
    Path(path).write_bytes(pgm_encode(field))
