"""Helpers shared by the demo scripts: synthetic scenes and overlay drawing."""

from pathlib import Path

import numpy as np

OUTPUT = Path(__file__).parent / "output"

BAND_COLORS = {
    "None": (46, 160, 67),
    "Hairline-Minor": (9, 105, 218),
    "Narrow-Moderate": (212, 167, 44),
    "Medium-Severe": (207, 34, 46),
}


def ensure_output() -> Path:
    OUTPUT.mkdir(exist_ok=True)
    return OUTPUT


def to_rgb(image: np.ndarray) -> np.ndarray:
    if image.ndim == 2:
        return np.stack([image] * 3, axis=2).copy()
    return image.copy()


def draw_box(rgb: np.ndarray, box, color, thickness=2) -> None:
    h, w = rgb.shape[:2]
    x0, y0, x1, y1 = (int(round(v)) for v in box.as_tuple())
    x0, y0 = max(x0, 0), max(y0, 0)
    x1, y1 = min(x1, w), min(y1, h)
    t = thickness
    rgb[y0 : y0 + t, x0:x1] = color
    rgb[max(y1 - t, 0) : y1, x0:x1] = color
    rgb[y0:y1, x0 : x0 + t] = color
    rgb[y0:y1, max(x1 - t, 0) : x1] = color


def fill_mask(rgb: np.ndarray, mask, color, alpha=0.45) -> None:
    x0, y0, w, h = mask.box.pixel_extent()
    region = rgb[y0 : y0 + h, x0 : x0 + w]
    overlay = np.array(color, dtype=np.float64)
    fg = mask.foreground
    region[fg] = ((1 - alpha) * region[fg] + alpha * overlay).astype(np.uint8)


def two_spall_scene() -> np.ndarray:
    img = np.full((200, 200), 240, dtype=np.uint8)
    img[30:50, 30:50] = 30     # strong contrast: confidence ~0.82
    img[130:150, 130:150] = 150  # faint: confidence ~0.35
    return img


def crack_scene() -> np.ndarray:
    img = np.full((140, 420), 235, dtype=np.uint8)
    img[60:76, 30:390] = 40
    return img


def speckle_scene():
    from deckinspect import BoundingBox

    img = np.full((200, 200), 230, dtype=np.uint8)
    img[50:80, 50:80] = 60
    rng = np.random.default_rng(7)
    placed = 0
    while placed < 8:
        r = int(rng.integers(0, 197))
        c = int(rng.integers(0, 197))
        if 30 <= r <= 95 or 30 <= c <= 95:
            continue
        img[r : r + 3, c : c + 3] = 40
        placed += 1
    return img, BoundingBox(45.0, 45.0, 85.0, 85.0)
