"""Shared synthetic fixtures.

All images are generated, never loaded from disk, so every expected value in
the tests can be derived from the construction parameters by an independent
oracle (pixel scans, brute-force counts, closed forms).
"""

import numpy as np
import pytest

from deckinspect.core import BinaryMask, BoundingBox
from deckinspect.geometry import PlanarScale


def blob_image(size=(200, 200), background=240, blobs=()):
    """Uniform background with axis-aligned rectangular blobs.

    blobs: iterable of (row0, col0, height, width, intensity).
    """
    img = np.full(size, background, dtype=np.uint8)
    for r0, c0, h, w, value in blobs:
        img[r0 : r0 + h, c0 : c0 + w] = value
    return img


@pytest.fixture
def two_spall_image():
    """Strong and faint square blobs; contrasts 210/255 and 90/255.

    With the reference confidence formula (background mean minus blob mean,
    over 255) the strong blob scores ~0.8235 and the faint one ~0.3529, so a
    0.5 threshold shows one detection and 0.2 shows both.
    """
    return blob_image(
        blobs=[(30, 30, 20, 20, 30), (130, 130, 20, 20, 150)]
    )


@pytest.fixture
def single_blob_image():
    return blob_image(blobs=[(40, 60, 30, 25, 50)])


@pytest.fixture
def crack_image():
    """Horizontal dark bar 300 px long, 16 px thick, on a light field."""
    return blob_image(size=(120, 400), background=235, blobs=[(50, 30, 16, 300, 40)])


@pytest.fixture
def speckle_image():
    """A dark blob inside a known box plus dark speckle noise outside it."""
    img = blob_image(size=(200, 200), background=230, blobs=[(50, 50, 30, 30, 60)])
    rng = np.random.default_rng(7)
    for _ in range(12):
        r = int(rng.integers(0, 197))
        c = int(rng.integers(0, 197))
        # keep speckles clear of the target box (with margin for its padding)
        if 30 <= r <= 95 or 30 <= c <= 95:
            continue
        img[r : r + 3, c : c + 3] = 40
    return img, BoundingBox(45.0, 45.0, 85.0, 85.0)


@pytest.fixture
def unit_scale():
    return PlanarScale(1.0, "ReferenceObject")


def make_mask(foreground: np.ndarray, x0: float = 0.0, y0: float = 0.0) -> BinaryMask:
    """Wrap a boolean array as a BinaryMask with a matching box."""
    h, w = foreground.shape
    return BinaryMask(
        box=BoundingBox(x0, y0, x0 + float(w), y0 + float(h)),
        foreground=foreground.astype(bool),
    )


def random_inspection_image(rng: np.random.Generator):
    """Randomized multi-blob image guaranteed to yield proposals.

    Blob intensities are sampled so at least one lands above the default
    0.5 confidence threshold and the rest are spread across [0.2, 0.9].
    """
    img = np.full((160, 160), 240, dtype=np.uint8)
    n = int(rng.integers(1, 4))
    anchors = [(20, 20), (20, 100), (100, 20), (100, 100)]
    rng.shuffle(anchors)
    for i in range(n):
        r0, c0 = anchors[i]
        h = int(rng.integers(12, 30))
        w = int(rng.integers(12, 30))
        # contrast at least ~90 levels keeps every blob above tau=0.2
        value = int(rng.integers(20, 150)) if i else int(rng.integers(20, 90))
        img[r0 : r0 + h, c0 : c0 + w] = value
    return img
