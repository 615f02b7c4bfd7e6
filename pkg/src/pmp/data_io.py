"""Dataset ingestion, synthetic data generation, and sample persistence.

IDX parsing covers the classic big-endian image/label container (gzip
transparent).  Synthetic generators provide desk-scale stand-ins for the
digit-contour and stripe datasets.  The deconvolution helpers implement the
binary OR-convolution forward model X = OR_f (W_f placed at S_f) and its
factor-graph encoding with pairwise AND nodes feeding per-pixel OR factors.

Binary sample format (files written by save_samples):
    magic  b"PMPS" | version u8 = 1 | dtype u8 (1 = uint8) |
    ndim u16 LE | dims u32 LE each | payload row-major
"""

from __future__ import annotations

import gzip
import json
import os
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import convolve2d

from .graph import (AndFactor, Factor, FactorGraph, GraphError, NEG_LARGE,
                    OrFactor)

DATA_DIR_ENV = "PMP_DATA_DIR"


def data_dir() -> Path:
    """Dataset cache directory (override with the PMP_DATA_DIR env var)."""
    return Path(os.environ.get(DATA_DIR_ENV, "~/.cache/pmp-data")).expanduser()


@dataclass
class BinaryImageSet:
    images: np.ndarray                 # (count, height, width) in {0,1}
    labels: np.ndarray = None

    def __post_init__(self):
        if not np.isin(self.images, (0, 1)).all():
            raise GraphError("BinaryImageSet entries must be 0/1")


@dataclass
class DeconvTruth:
    """Ground truth of the OR-convolution model: X = forward(W, S)."""
    W: np.ndarray                      # (n_feat, fh, fw) binary
    S: np.ndarray                      # (n_images, n_feat, h, w) binary
    X: np.ndarray                      # (n_images, h+fh-1, w+fw-1) binary


# ---------------------------------------------------------------------------
# IDX container
# ---------------------------------------------------------------------------

def read_idx(source) -> np.ndarray:
    """Parse an IDX byte string or file (gzip transparent) into a u8 array.

    The header is 0x00 0x00 <dtype> <ndim> followed by ndim big-endian u32
    dimensions; only the u8 payload family (dtype 0x08) is supported.
    """
    if isinstance(source, (str, Path)):
        raw = Path(source).read_bytes()
    else:
        raw = bytes(source)
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    if len(raw) < 4:
        raise GraphError(f"IDX header truncated: {len(raw)} bytes")
    zero, dtype, ndim = raw[0] << 8 | raw[1], raw[2], raw[3]
    if zero != 0 or dtype != 0x08:
        raise GraphError(f"bad IDX magic {raw[:4].hex()} at offset 0")
    offset = 4 + 4 * ndim
    if len(raw) < offset:
        raise GraphError(f"IDX dims truncated at offset {len(raw)}, "
                         f"expected {offset}")
    dims = struct.unpack(f">{ndim}I", raw[4:offset])
    count = int(np.prod(dims)) if dims else 1
    if len(raw) - offset != count:
        raise GraphError(f"IDX payload at offset {offset}: expected {count} "
                         f"bytes, got {len(raw) - offset}")
    return np.frombuffer(raw, dtype=np.uint8, offset=offset).reshape(dims).copy()


def write_idx(array: np.ndarray) -> bytes:
    """Inverse of :func:`read_idx` for u8 arrays."""
    a = np.ascontiguousarray(array, dtype=np.uint8)
    header = bytes([0, 0, 0x08, a.ndim]) + struct.pack(f">{a.ndim}I", *a.shape)
    return header + a.tobytes()


# ---------------------------------------------------------------------------
# contours and synthetic image sets
# ---------------------------------------------------------------------------

def binary_contours(binary: np.ndarray) -> np.ndarray:
    """Boundary pixels: on-pixels with at least one 4-neighbor off.

    Pixels outside the frame count as off, so a solid full-frame image
    keeps exactly its border.
    """
    b = np.asarray(binary).astype(np.uint8)
    padded = np.pad(b, [(0, 0)] * (b.ndim - 2) + [(1, 1), (1, 1)])
    up = padded[..., :-2, 1:-1]
    down = padded[..., 2:, 1:-1]
    left = padded[..., 1:-1, :-2]
    right = padded[..., 1:-1, 2:]
    interior = (up & down & left & right).astype(np.uint8)
    return (b & (1 - interior)).astype(np.uint8)


def extract_zero_contours(images: np.ndarray, labels: np.ndarray) -> BinaryImageSet:
    """Contours of the label-0 digits: binarize at >= 128, keep boundary."""
    images = np.asarray(images)
    labels = np.asarray(labels)
    zeros = images[labels == 0]
    binarized = (zeros >= 128).astype(np.uint8)
    return BinaryImageSet(images=binary_contours(binarized),
                          labels=np.zeros(len(zeros), dtype=np.int64))


def synthetic_contour_images(n_images: int, side: int, rng) -> BinaryImageSet:
    """Closed-curve images: contours of randomly placed filled ellipses."""
    yy, xx = np.mgrid[0:side, 0:side]
    out = np.zeros((n_images, side, side), dtype=np.uint8)
    for k in range(n_images):
        cy, cx = rng.uniform(0.3 * side, 0.7 * side, size=2)
        ry, rx = rng.uniform(0.2 * side, 0.45 * side, size=2)
        phi = rng.uniform(0.0, np.pi)
        dy, dx = yy - cy, xx - cx
        u = dy * np.cos(phi) + dx * np.sin(phi)
        v = -dy * np.sin(phi) + dx * np.cos(phi)
        out[k] = ((u / ry) ** 2 + (v / rx) ** 2 <= 1.0).astype(np.uint8)
    return BinaryImageSet(images=binary_contours(out))


def striped_patterns(n_samples: int, side: int, rng) -> BinaryImageSet:
    """Axis-aligned stripe images with random orientation, period, phase."""
    out = np.zeros((n_samples, side, side), dtype=np.uint8)
    idx = np.arange(side)
    for k in range(n_samples):
        period = int(rng.integers(2, 5))
        phase = int(rng.integers(0, period))
        thickness = max(1, period // 2)
        bars = (((idx + phase) % period) < thickness).astype(np.uint8)
        if rng.random() < 0.5:
            out[k] = np.broadcast_to(bars[:, None], (side, side))
        else:
            out[k] = np.broadcast_to(bars[None, :], (side, side))
    return BinaryImageSet(images=out)


# ---------------------------------------------------------------------------
# OR-convolution model
# ---------------------------------------------------------------------------

def deconv_forward(W: np.ndarray, S: np.ndarray) -> np.ndarray:
    """X[m] = OR over features f of (S[m,f] * W[f]) placed by convolution.

    Overlapping stamps saturate (OR, not sum).  Output spatial size is
    (h + fh - 1, w + fw - 1).
    """
    W = np.asarray(W).astype(np.int64)
    S = np.asarray(S).astype(np.int64)
    n_images, n_feat = S.shape[:2]
    fh, fw = W.shape[1:]
    h, w = S.shape[2:]
    X = np.zeros((n_images, h + fh - 1, w + fw - 1), dtype=np.uint8)
    for m in range(n_images):
        acc = np.zeros((h + fh - 1, w + fw - 1), dtype=np.int64)
        for f in range(n_feat):
            acc += convolve2d(S[m, f], W[f], mode="full")
        X[m] = (acc > 0).astype(np.uint8)
    return X


def gen_deconv_dataset(n_images: int, n_feat: int, fh: int, fw: int,
                       h: int, w: int, feature_density: float,
                       location_density: float, rng) -> DeconvTruth:
    """Bernoulli features and placements plus their OR-convolution output."""
    if not (0.0 < feature_density < 1.0 and 0.0 < location_density < 1.0):
        raise GraphError("densities must lie in (0, 1)")
    W = (rng.random((n_feat, fh, fw)) < feature_density).astype(np.uint8)
    S = (rng.random((n_images, n_feat, h, w)) < location_density).astype(np.uint8)
    return DeconvTruth(W=W, S=S, X=deconv_forward(W, S))


def build_deconv_graph(X: np.ndarray, n_feat: int, fh: int, fw: int,
                       prior_w: float = -3.0, prior_s: float = -3.0) -> FactorGraph:
    """Factor graph of the posterior over (W, S) given images X.

    Variable order: all W entries (f, u, v row-major), all S entries
    (m, f, y, x), one AND output per (m, f, y, x, u, v), then the X pixels
    (clamped to the observed values).  Each AND pairs one feature bit with
    one placement bit; each pixel's OR collects every AND that lands on it.
    """
    X = np.asarray(X)
    if X.ndim == 2:
        X = X[np.newaxis]
    n_images, H, Wd = X.shape
    h, w = H - fh + 1, Wd - fw + 1
    if h < 1 or w < 1:
        raise GraphError("feature larger than image")
    n_w = n_feat * fh * fw
    n_s = n_images * n_feat * h * w
    n_and = n_s * fh * fw
    n_x = n_images * H * Wd

    def w_id(f, u, v):
        return (f * fh + u) * fw + v

    def s_id(m, f, y, x):
        return n_w + ((m * n_feat + f) * h + y) * w + x

    def a_id(m, f, y, x, u, v):
        return n_w + n_s + ((((m * n_feat + f) * h + y) * w + x) * fh + u) * fw + v

    def x_id(m, r, c):
        return n_w + n_s + n_and + (m * H + r) * Wd + c

    n_vars = n_w + n_s + n_and + n_x
    unaries = [np.zeros(2) for _ in range(n_vars)]
    for k in range(n_w):
        unaries[k] = np.array([0.0, prior_w])
    for k in range(n_w, n_w + n_s):
        unaries[k] = np.array([0.0, prior_s])
    xflat = X.reshape(-1)
    for k in range(n_x):
        obs = int(xflat[k])
        u = np.full(2, NEG_LARGE)
        u[obs] = 0.0
        unaries[n_w + n_s + n_and + k] = u

    factors = []
    or_tops = {}
    for m in range(n_images):
        for f in range(n_feat):
            for y in range(h):
                for x in range(w):
                    for u in range(fh):
                        for v in range(fw):
                            aid = a_id(m, f, y, x, u, v)
                            factors.append(Factor(
                                (w_id(f, u, v), s_id(m, f, y, x), aid),
                                AndFactor()))
                            or_tops.setdefault((m, y + u, x + v), []).append(aid)
    for m in range(n_images):
        for r in range(H):
            for c in range(Wd):
                tops = or_tops.get((m, r, c), [])
                if not tops:
                    if xflat[(m * H + r) * Wd + c]:
                        warnings.warn(f"pixel ({m},{r},{c}) is on but has no "
                                      "contributing placements; clamp infeasible")
                    continue
                factors.append(Factor(tuple(tops) + (x_id(m, r, c),),
                                      OrFactor()))
    return FactorGraph(cardinalities=[2] * n_vars, factors=factors,
                       unaries=unaries)


# ---------------------------------------------------------------------------
# binary sample persistence
# ---------------------------------------------------------------------------

_SAMPLE_MAGIC = b"PMPS"


def save_samples(path, array: np.ndarray) -> None:
    a = np.ascontiguousarray(array, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(_SAMPLE_MAGIC)
        fh.write(struct.pack("<BBH", 1, 1, a.ndim))
        fh.write(struct.pack(f"<{a.ndim}I", *a.shape))
        fh.write(a.tobytes())


def load_samples(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != _SAMPLE_MAGIC:
        raise GraphError(f"bad sample magic {raw[:4]!r}")
    version, dtype, ndim = struct.unpack("<BBH", raw[4:8])
    if version != 1 or dtype != 1:
        raise GraphError(f"unsupported sample format v{version} dtype {dtype}")
    dims = struct.unpack(f"<{ndim}I", raw[8:8 + 4 * ndim])
    count = int(np.prod(dims)) if dims else 1
    payload = raw[8 + 4 * ndim:]
    if len(payload) != count:
        raise GraphError(f"sample payload: expected {count} bytes, "
                         f"got {len(payload)}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims).copy()


def save_deconv_truth(directory, truth: DeconvTruth) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    save_samples(d / "W.bin", truth.W)
    save_samples(d / "S.bin", truth.S)
    save_samples(d / "X.bin", truth.X)
    meta = {"format": "pmp-deconv-truth-v1",
            "W_shape": list(truth.W.shape),
            "S_shape": list(truth.S.shape),
            "X_shape": list(truth.X.shape)}
    (d / "meta.json").write_text(json.dumps(meta, indent=2))


def load_deconv_truth(directory) -> DeconvTruth:
    d = Path(directory)
    meta = json.loads((d / "meta.json").read_text())
    if meta.get("format") != "pmp-deconv-truth-v1":
        raise GraphError("not a deconv truth directory")
    return DeconvTruth(W=load_samples(d / "W.bin"),
                       S=load_samples(d / "S.bin"),
                       X=load_samples(d / "X.bin"))
