import numpy as np
import pytest

from freqguide import (
    BlobTextureSpec,
    NoiseSchedule,
    blob_mixture_from_spec,
    class_labels,
    make_denoiser_pair,
)


def acceptance_spec() -> BlobTextureSpec:
    """Blob-texture model used by the trend checks.

    Class-conditional center weights skew each class toward different blob
    positions (the class carries global-structure information), while the
    per-class grating orientation carries the high-frequency identity.  The
    block-constant blobs and Nyquist gratings split exactly between the Haar
    ll and detail bands.  Alternating per-center grating phases make the
    early, position-ambiguous texture guidance nearly cancel so the
    high-band guidance norm grows as positions resolve.
    """
    return BlobTextureSpec(
        height=32,
        width=32,
        channels=3,
        centers=((8.0, 8.0), (8.0, 24.0), (24.0, 8.0), (24.0, 24.0)),
        blob_radius=8.0,
        blob_amplitude=1.0,
        texture_freq=0.5,
        texture_amplitude=2e-4,
        n_classes=2,
        noise_scale=0.01,
        class_center_weights=((0.45, 0.3, 0.05, 0.2), (0.2, 0.05, 0.3, 0.45)),
        blob_block=2,
    )


ACCEPTANCE_SCHEDULE = NoiseSchedule.karras(sigma_min=0.02, sigma_max=80.0, rho=7.0)


@pytest.fixture(scope="session")
def blob_model():
    spec = acceptance_spec()
    mix = blob_mixture_from_spec(spec)
    labels = class_labels(spec)
    pair = make_denoiser_pair(mix, labels)
    return spec, mix, labels, pair


def spearman(series: np.ndarray) -> float:
    """Rank correlation of a series against its index."""
    order = np.argsort(series, kind="stable")
    ranks = np.empty(len(series))
    ranks[order] = np.arange(len(series))
    idx = np.arange(len(series))
    rc = np.corrcoef(ranks, idx)[0, 1]
    return float(rc)


def smoothed(series: np.ndarray, window: int = 5) -> np.ndarray:
    return np.convolve(series, np.ones(window) / window, mode="valid")
