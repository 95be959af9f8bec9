"""Frequency transforms: binomial blur, Laplacian pyramid, single-level Haar DWT.

Both transforms are linear and exactly invertible, which is what lets a
per-band guidance update commute with decomposition/reconstruction.
Boundary handling is reflect padding (border pixel not repeated) so band
norms are not contaminated by edge energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, UsageError
from .tensor import Tensor4

# Burt-Adelson binomial kernel; sums to 1.
BLUR_KERNEL = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0

_INV_SQRT2 = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class Pyramid:
    """Detail bands L_0..L_{N-1} (fine to coarse) plus the low-pass residual G_N."""

    bands: tuple[Tensor4, ...]
    residual: Tensor4

    @property
    def levels(self) -> int:
        return len(self.bands)


@dataclass(frozen=True)
class WaveletBands:
    ll: Tensor4
    lh: Tensor4
    hl: Tensor4
    hh: Tensor4


@dataclass(frozen=True)
class TransformKind:
    """Which decomposition a guidance config operates on."""

    kind: str
    levels: int = 1

    def __post_init__(self):
        if self.kind not in ("pyramid", "haar"):
            raise UsageError(f"unknown transform kind {self.kind!r}")
        if self.levels < 1:
            raise UsageError("levels must be >= 1")
        if self.kind == "haar" and self.levels != 1:
            raise UsageError("haar transform is single-level")

    @classmethod
    def pyramid(cls, levels: int = 1) -> "TransformKind":
        return cls("pyramid", levels)

    @classmethod
    def haar(cls) -> "TransformKind":
        return cls("haar")

    @property
    def band_count(self) -> int:
        # detail bands then residual for the pyramid; (lh|hl|hh, ll) for haar
        return self.levels + 1 if self.kind == "pyramid" else 2


def _conv_axis(arr: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    pad = [(0, 0)] * arr.ndim
    pad[axis] = (2, 2)
    padded = np.pad(arr, pad, mode="reflect")
    out = np.zeros_like(arr)
    index = [slice(None)] * arr.ndim
    n = arr.shape[axis]
    for j in range(kernel.shape[0]):  # fixed order keeps reductions deterministic
        index[axis] = slice(j, j + n)
        out += kernel[j] * padded[tuple(index)]
    return out


def _blur(arr: np.ndarray, gain: float = 1.0) -> np.ndarray:
    h, w = arr.shape[2], arr.shape[3]
    if h < 5 or w < 5:
        raise ShapeError(f"blur needs spatial dims >= 5, got {h}x{w}")
    kernel = BLUR_KERNEL * gain
    return _conv_axis(_conv_axis(arr, kernel, 2), kernel, 3)


def gaussian_blur(x: Tensor4) -> Tensor4:
    """Separable 5-tap binomial blur with reflect padding."""
    return Tensor4(_blur(x.data))


def _down(arr: np.ndarray) -> np.ndarray:
    h, w = arr.shape[2], arr.shape[3]
    if h < 8 or w < 8:
        raise ShapeError(f"pyr_down needs spatial dims >= 8, got {h}x{w}")
    return _blur(arr)[:, :, ::2, ::2]


def pyr_down(x: Tensor4) -> Tensor4:
    """Blur then keep even-indexed rows/cols; output is ceil(H/2) x ceil(W/2)."""
    return Tensor4(_down(x.data))


def _up(arr: np.ndarray, target_hw: tuple[int, int]) -> np.ndarray:
    b, c, h, w = arr.shape
    th, tw = target_hw
    if th not in (2 * h, 2 * h - 1) or tw not in (2 * w, 2 * w - 1):
        raise ShapeError(f"pyr_up target {th}x{tw} incompatible with input {h}x{w}")
    stuffed = np.zeros((b, c, 2 * h, 2 * w), dtype=arr.dtype)
    stuffed[:, :, ::2, ::2] = arr
    # per-axis gain 2 (x4 total) restores unit DC gain over the zero-stuffed grid
    return _blur(stuffed, gain=2.0)[:, :, :th, :tw]


def pyr_up(x: Tensor4, target_dims) -> Tensor4:
    """Zero-insert to double size, blur with x4-scaled kernel, crop to target."""
    th, tw = int(target_dims[-2]), int(target_dims[-1])
    return Tensor4(_up(x.data, (th, tw)))


def max_pyramid_levels(height: int, width: int) -> int:
    side = min(height, width)
    levels = 0
    while side / 2 ** (levels + 1) >= 4:
        levels += 1
    return levels


def build_laplacian_pyramid(x: Tensor4, levels: int) -> Pyramid:
    """bands[i] = G_i - pyr_up(G_{i+1}); residual is the coarsest G_N."""
    if levels < 1:
        raise ShapeError("levels must be >= 1")
    b, c, h, w = x.dims
    if min(h, w) / (2**levels) < 4:
        raise ShapeError(
            f"{levels} levels infeasible for {h}x{w}; max feasible is {max_pyramid_levels(h, w)}"
        )
    bands = []
    g = x.data
    for _ in range(levels):
        down = _down(g)
        bands.append(Tensor4(g - _up(down, g.shape[2:])))
        g = down
    return Pyramid(bands=tuple(bands), residual=Tensor4(g))


def reconstruct_from_pyramid(p: Pyramid) -> Tensor4:
    """Exact inverse of build: G_i = L_i + pyr_up(G_{i+1}), coarse to fine."""
    g = p.residual.data
    for band in reversed(p.bands):
        tb, tc, th, tw = band.dims
        if (tb, tc) != g.shape[:2]:
            raise ShapeError(f"band dims {band.dims} inconsistent with residual chain {g.shape}")
        g = band.data + _up(g, (th, tw))
    return Tensor4(g)


def haar_dwt(x: Tensor4) -> WaveletBands:
    """Orthonormal single-level Haar analysis (L=(1,1)/sqrt2, H=(1,-1)/sqrt2), stride 2."""
    _, _, h, w = x.dims
    if h % 2 or w % 2:
        raise ShapeError(f"haar transform needs even spatial dims, got {h}x{w}")
    a = x.data[:, :, 0::2, 0::2]
    b = x.data[:, :, 0::2, 1::2]
    c = x.data[:, :, 1::2, 0::2]
    d = x.data[:, :, 1::2, 1::2]
    return WaveletBands(
        ll=Tensor4((a + b + c + d) * 0.5),
        lh=Tensor4((a - b + c - d) * 0.5),
        hl=Tensor4((a + b - c - d) * 0.5),
        hh=Tensor4((a - b - c + d) * 0.5),
    )


def haar_idwt(bands: WaveletBands) -> Tensor4:
    ll, lh, hl, hh = bands.ll.data, bands.lh.data, bands.hl.data, bands.hh.data
    for other in (lh, hl, hh):
        if other.shape != ll.shape:
            raise ShapeError("wavelet bands must share dims")
    b, c, h, w = ll.shape
    out = np.empty((b, c, 2 * h, 2 * w), dtype=np.float64)
    out[:, :, 0::2, 0::2] = (ll + lh + hl + hh) * 0.5
    out[:, :, 0::2, 1::2] = (ll - lh + hl - hh) * 0.5
    out[:, :, 1::2, 0::2] = (ll + lh - hl - hh) * 0.5
    out[:, :, 1::2, 1::2] = (ll - lh - hl + hh) * 0.5
    return Tensor4(out)


def transform_bands(x: Tensor4, kind: TransformKind) -> list[Tensor4]:
    """Decompose into bands ordered high to low frequency; last entry is the
    pyramid residual (or ll).  Haar detail bands are stacked along channels."""
    if kind.kind == "pyramid":
        p = build_laplacian_pyramid(x, kind.levels)
        return list(p.bands) + [p.residual]
    w = haar_dwt(x)
    details = Tensor4(np.concatenate([w.lh.data, w.hl.data, w.hh.data], axis=1))
    return [details, w.ll]


def inverse_bands(bands: list[Tensor4], kind: TransformKind) -> Tensor4:
    if len(bands) != kind.band_count:
        raise ShapeError(f"expected {kind.band_count} bands, got {len(bands)}")
    if kind.kind == "pyramid":
        return reconstruct_from_pyramid(Pyramid(bands=tuple(bands[:-1]), residual=bands[-1]))
    details, ll = bands
    c = ll.dims[1]
    if details.dims[1] != 3 * c:
        raise ShapeError("haar detail stack must have 3x the ll channels")
    lh = Tensor4(details.data[:, :c])
    hl = Tensor4(details.data[:, c : 2 * c])
    hh = Tensor4(details.data[:, 2 * c :])
    return haar_idwt(WaveletBands(ll=ll, lh=lh, hl=hl, hh=hh))
