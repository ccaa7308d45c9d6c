"""8-bit grayscale image files: binary PGM always, PNG when Pillow is present."""
from __future__ import annotations

import os

import numpy as np


class ImageFormatError(ValueError):
    pass


def _header_tokens(data, count):
    # whitespace-separated tokens with '#' comments; returns tokens and data offset
    toks, pos, n = [], 0, len(data)
    while len(toks) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        if pos >= n:
            raise ImageFormatError(f"truncated header at byte {pos}")
        start = pos
        while pos < n and not data[pos : pos + 1].isspace():
            pos += 1
        toks.append((data[start:pos], start))
    if pos >= n or not data[pos : pos + 1].isspace():
        raise ImageFormatError(f"missing whitespace after header at byte {pos}")
    return toks, pos + 1


def decode_pgm(data):
    """Decode binary P5 bytes to a float image in ``[0, 1]``."""
    toks, off = _header_tokens(data, 4)
    magic, _ = toks[0]
    if magic != b"P5":
        raise ImageFormatError(f"bad magic {magic!r} at byte 0, expected b'P5'")
    vals = []
    for name, (tok, at) in zip(("width", "height", "maxval"), toks[1:]):
        if not tok.isdigit() or int(tok) < 1:
            raise ImageFormatError(f"bad {name} {tok!r} at byte {at}")
        vals.append(int(tok))
    w, h, maxval = vals
    if maxval != 255:
        raise ImageFormatError(f"maxval {maxval} at byte {toks[3][1]} unsupported, only 8-bit images")
    body = data[off:]
    if len(body) < w * h:
        raise ImageFormatError(f"pixel data truncated at byte {off + len(body)}: {len(body)} of {w * h} bytes")
    return np.frombuffer(body[: w * h], dtype=np.uint8).reshape(h, w).astype(float) / 255.0


def encode_pgm(img):
    """Encode ``img`` as P5, clamped to ``[0, 1]`` and quantised by ``round(v * 255)``."""
    img = np.asarray(img, dtype=float)
    if img.ndim != 2:
        raise ValueError("expected a 2-D image")
    q = np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    h, w = q.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + q.tobytes()


def _pil():
    try:
        from PIL import Image
    except ImportError:
        raise ImageFormatError("PNG support needs Pillow (install the 'png' extra)") from None
    return Image


def load_image(path):
    path = os.fspath(path)
    if path.lower().endswith(".png"):
        with _pil().open(path) as im:
            if im.mode not in ("L", "I;16", "I"):
                im = im.convert("L")
            a = np.asarray(im)
        return a.astype(float) / (255.0 if a.dtype == np.uint8 else 65535.0)
    with open(path, "rb") as fh:
        return decode_pgm(fh.read())


def save_image(path, img):
    path = os.fspath(path)
    if path.lower().endswith(".png"):
        q = np.rint(np.clip(np.asarray(img, dtype=float), 0.0, 1.0) * 255.0).astype(np.uint8)
        _pil().fromarray(q).save(path)
        return
    with open(path, "wb") as fh:
        fh.write(encode_pgm(img))
