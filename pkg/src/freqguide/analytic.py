"""Closed-form denoisers from isotropic Gaussian mixtures, plus a synthetic
blob+texture image family whose position information is low-frequency and
whose class texture is high-frequency.

These replace neural denoisers: the posterior mean under the mixture is the
exact x0 prediction at every noise level, so sampler- and guidance-level
claims can be tested without approximation error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, ShapeError, UsageError
from .guidance import DenoiserPair
from .tensor import Tensor4

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class IsotropicGaussianMixture:
    """Components (weight, mean image, isotropic scale); weights sum to 1."""

    weights: np.ndarray  # (K,)
    means: np.ndarray  # (K, C, H, W)
    scales: np.ndarray  # (K,)

    def __post_init__(self):
        weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        means = np.ascontiguousarray(self.means, dtype=np.float64)
        scales = np.ascontiguousarray(self.scales, dtype=np.float64)
        if weights.ndim != 1 or means.ndim != 4 or scales.ndim != 1:
            raise ShapeError("weights (K,), means (K,C,H,W), scales (K,) required")
        k = weights.shape[0]
        if means.shape[0] != k or scales.shape[0] != k or k < 1:
            raise ShapeError("component counts disagree")
        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(means)) and np.all(np.isfinite(scales))):
            raise ShapeError("non-finite mixture parameters")
        if np.any(weights <= 0):
            raise DomainError("weights must be positive")
        if np.any(scales <= 0):
            raise DomainError("scales must be positive")
        weights = weights / weights.sum()
        for arr in (weights, means, scales):
            arr.flags.writeable = False
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "scales", scales)

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return self.means.shape[1:]

    @property
    def dim(self) -> int:
        c, h, w = self.image_shape
        return c * h * w

    def restricted(self, indices) -> "IsotropicGaussianMixture":
        idx = np.asarray(indices, dtype=int)
        if idx.size == 0:
            raise ConfigError("component subset is empty")
        return IsotropicGaussianMixture(
            weights=self.weights[idx], means=self.means[idx], scales=self.scales[idx]
        )

    def mixture_mean(self) -> np.ndarray:
        return np.tensordot(self.weights, self.means, axes=(0, 0))


def posterior_mean(z: Tensor4, sigma: float, mix: IsotropicGaussianMixture) -> Tensor4:
    """Exact E[x | z] under z = x + sigma * eps, x ~ mix.

    Responsibilities are computed in log space with max subtraction so tiny
    sigma against distant components stays finite.  At sigma = 0 returns z.
    """
    if sigma < 0:
        raise DomainError(f"sigma must be >= 0, got {sigma}")
    if z.dims[1:] != mix.image_shape:
        raise ShapeError(f"z image shape {z.dims[1:]} != mixture shape {mix.image_shape}")
    if sigma == 0.0:
        return z
    zf = z.data.reshape(z.dims[0], -1)  # (B, D)
    mf = mix.means.reshape(mix.n_components, -1)  # (K, D)
    var = mix.scales**2 + sigma**2  # (K,)
    sq_dist = (
        np.einsum("bd,bd->b", zf, zf)[:, None]
        - 2.0 * zf @ mf.T
        + np.einsum("kd,kd->k", mf, mf)[None, :]
    )  # (B, K)
    logits = np.log(mix.weights)[None, :] - 0.5 * (
        mix.dim * (LOG_2PI + np.log(var))[None, :] + sq_dist / var[None, :]
    )
    logits -= logits.max(axis=1, keepdims=True)
    resp = np.exp(logits)
    resp /= resp.sum(axis=1, keepdims=True)
    z_coef = resp @ (mix.scales**2 / var)  # (B,)
    mean_part = (resp * (sigma**2 / var)[None, :]) @ mf  # (B, D)
    out = z_coef[:, None] * zf + mean_part
    return Tensor4(out.reshape(z.dims))


def make_denoiser_pair(mix: IsotropicGaussianMixture, labels) -> DenoiserPair:
    """cond = posterior mean under the class-restricted renormalized mixture;
    uncond = posterior mean under the full mixture.  ``labels`` assigns one
    class id per component; a null condition selects the full mixture."""
    labels = np.asarray(labels, dtype=int)
    if labels.shape != (mix.n_components,):
        raise ConfigError(f"labels must cover all {mix.n_components} components")
    by_class = {}
    for class_id in np.unique(labels):
        idx = np.flatnonzero(labels == class_id)
        if idx.size == 0:
            raise ConfigError(f"class {class_id} is empty")
        by_class[int(class_id)] = mix.restricted(idx)

    def cond(z: Tensor4, sigma: float, condition=None) -> Tensor4:
        if condition is None:
            return posterior_mean(z, sigma, mix)
        if condition not in by_class:
            raise ConfigError(f"unknown class {condition}; have {sorted(by_class)}")
        return posterior_mean(z, sigma, by_class[condition])

    def uncond(z: Tensor4, sigma: float) -> Tensor4:
        return posterior_mean(z, sigma, mix)

    return DenoiserPair(cond=cond, uncond=uncond)


def degrade(
    mix: IsotropicGaussianMixture, jitter_scale: float, inflate_factor: float, seed: int
) -> IsotropicGaussianMixture:
    """Deliberately worsened mixture: means jittered by seeded Gaussian noise,
    scales inflated; weights untouched."""
    if jitter_scale < 0:
        raise DomainError("jitter_scale must be >= 0")
    if inflate_factor < 1:
        raise DomainError("inflate_factor must be >= 1")
    gen = np.random.Generator(np.random.Philox(key=int(seed)))
    means = mix.means + jitter_scale * gen.standard_normal(mix.means.shape)
    return IsotropicGaussianMixture(
        weights=mix.weights, means=means, scales=mix.scales * inflate_factor
    )


@dataclass(frozen=True)
class BlobTextureSpec:
    """Recipe for mixture means blob(center_j) + texture(center_j, class_k).

    The blob is a broad Gaussian bump (position = global structure); the
    texture is a Nyquist-rate grating whose orientation alternates per class
    and whose phase alternates per center.  ``class_center_weights`` optionally
    skews each class toward particular centers (rows sum to 1); by default the
    component weights form the uniform Cartesian product.
    """

    height: int = 32
    width: int = 32
    channels: int = 3
    centers: tuple[tuple[float, float], ...] = ((8.0, 8.0), (8.0, 24.0), (24.0, 8.0), (24.0, 24.0))
    blob_radius: float = 8.0
    blob_amplitude: float = 1.0
    texture_freq: float = 0.5
    texture_amplitude: float = 0.02
    n_classes: int = 2
    noise_scale: float = 0.05
    class_center_weights: tuple[tuple[float, ...], ...] | None = None
    blob_block: int = 1

    def __post_init__(self):
        if min(self.height, self.width, self.channels) < 1:
            raise ConfigError("image dims must be positive")
        if not self.centers:
            raise ConfigError("need at least one blob center")
        for cy, cx in self.centers:
            if not (0 <= cy < self.height and 0 <= cx < self.width):
                raise ConfigError(f"center ({cy}, {cx}) outside {self.height}x{self.width}")
        if self.blob_radius < 8:
            raise ConfigError("blob_radius must be >= 8 px")
        if not 0.25 <= self.texture_freq <= 0.5:
            raise ConfigError("texture_freq must be in [0.25, 0.5] cycles/px")
        if self.n_classes < 1:
            raise ConfigError("n_classes must be >= 1")
        if self.noise_scale <= 0:
            raise ConfigError("noise_scale must be > 0")
        if self.blob_block < 1:
            raise ConfigError("blob_block must be >= 1")
        if self.height % self.blob_block or self.width % self.blob_block:
            raise ConfigError("blob_block must divide the image dims")
        if self.class_center_weights is not None:
            ccw = tuple(tuple(float(v) for v in row) for row in self.class_center_weights)
            object.__setattr__(self, "class_center_weights", ccw)
            if len(ccw) != self.n_classes:
                raise ConfigError("class_center_weights needs one row per class")
            for row in ccw:
                if len(row) != len(self.centers):
                    raise ConfigError("class_center_weights rows must match center count")
                if any(v <= 0 for v in row) or abs(sum(row) - 1.0) > 1e-9:
                    raise ConfigError("each class_center_weights row must be positive and sum to 1")

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return (self.channels, self.height, self.width)

    def blob_image(self, center) -> np.ndarray:
        # blob_block > 1 evaluates the bump at block centers and duplicates
        # pixels, pinning the blob exactly inside the block-average subspace
        cy, cx = center
        block = self.blob_block
        yy = block * (np.arange(self.height // block, dtype=np.float64)[:, None] + 0.5) - 0.5
        xx = block * (np.arange(self.width // block, dtype=np.float64)[None, :] + 0.5) - 0.5
        bump = self.blob_amplitude * np.exp(
            -((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * self.blob_radius**2)
        )
        bump = np.kron(bump, np.ones((block, block)))
        return np.broadcast_to(bump, self.image_shape).copy()

    def texture_image(self, center_index: int, class_index: int) -> np.ndarray:
        phase = math.pi * (center_index % 2)
        if class_index % 2 == 0:
            coord = np.arange(self.width, dtype=np.float64)[None, :]
        else:
            coord = np.arange(self.height, dtype=np.float64)[:, None]
        wave = self.texture_amplitude * np.cos(2.0 * math.pi * self.texture_freq * coord + phase)
        grid = np.broadcast_to(wave, (self.height, self.width))
        return np.broadcast_to(grid, self.image_shape).copy()

    def mean_image(self, center_index: int, class_index: int) -> np.ndarray:
        return self.blob_image(self.centers[center_index]) + self.texture_image(
            center_index, class_index
        )

    def center_weights(self, class_index: int) -> np.ndarray:
        if self.class_center_weights is None:
            n = len(self.centers)
            return np.full(n, 1.0 / n)
        return np.array(self.class_center_weights[class_index], dtype=np.float64)


def class_labels(spec: BlobTextureSpec) -> np.ndarray:
    """Class id per mixture component, matching blob_mixture_from_spec order
    (component index = center_index * n_classes + class_index)."""
    return np.tile(np.arange(spec.n_classes), len(spec.centers))


def blob_mixture_from_spec(spec: BlobTextureSpec, centers=None) -> IsotropicGaussianMixture:
    """Cartesian (center x class) mixture with deterministic means and the
    spec noise scale on every component."""
    if centers is not None:
        spec = replace_centers(spec, centers)
    means = []
    weights = []
    for j in range(len(spec.centers)):
        for k in range(spec.n_classes):
            means.append(spec.mean_image(j, k))
            weights.append(spec.center_weights(k)[j] / spec.n_classes)
    return IsotropicGaussianMixture(
        weights=np.array(weights),
        means=np.stack(means),
        scales=np.full(len(means), spec.noise_scale),
    )


def replace_centers(spec: BlobTextureSpec, centers) -> BlobTextureSpec:
    from dataclasses import replace

    centers = tuple((float(cy), float(cx)) for cy, cx in centers)
    weights = spec.class_center_weights
    if weights is not None and len(weights[0]) != len(centers):
        weights = None
    return replace(spec, centers=centers, class_center_weights=weights)


def sample_blob_texture(spec: BlobTextureSpec, class_index: int, seed: int, n: int) -> Tensor4:
    """n seeded draws from class ``class_index``: pick a center by the class
    center weights, then add isotropic noise at the spec scale."""
    if not 0 <= class_index < spec.n_classes:
        raise UsageError(f"class_index {class_index} outside [0, {spec.n_classes})")
    if n < 1:
        raise UsageError("n must be >= 1")
    gen = np.random.Generator(np.random.Philox(key=int(seed)))
    probs = spec.center_weights(class_index)
    picks = gen.choice(len(spec.centers), size=n, p=probs)
    eps = gen.standard_normal((n,) + spec.image_shape)
    means = np.stack([spec.mean_image(int(j), class_index) for j in picks])
    return Tensor4(means + spec.noise_scale * eps)
