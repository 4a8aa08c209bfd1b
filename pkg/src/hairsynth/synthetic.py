"""Synthetic portrait corpus: smooth face/hair/background compositions with
binary hair masks, used for desk-scale experiments, benchmarks and tests."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


def make_portrait(seed: int, size: int = 128) -> tuple[np.ndarray, np.ndarray]:
    """One portrait-like RGB image and its binary hair mask (both 8-bit).

    Background is a soft gradient, the face an ellipse of skin tone, the hair
    a textured crescent around the upper face.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / (size - 1)

    c0 = rng.uniform(0.05, 0.95, size=3)
    c1 = rng.uniform(0.05, 0.95, size=3)
    direction = rng.uniform(-1.0, 1.0, size=2)
    t = np.clip((direction[0] * xx + direction[1] * yy + 1.5) / 3.0, 0.0, 1.0)
    img = c0[None, None, :] + (c1 - c0)[None, None, :] * t[..., None]

    cx = 0.5 + rng.uniform(-0.04, 0.04)
    cy = 0.60 + rng.uniform(-0.03, 0.03)
    ax = 0.20 + rng.uniform(-0.02, 0.03)
    ay = 0.27 + rng.uniform(-0.02, 0.03)
    face = ((xx - cx) / ax) ** 2 + ((yy - cy) / ay) ** 2 <= 1.0
    skin = np.clip(np.array([0.9, 0.72, 0.58]) * rng.uniform(0.35, 1.2), 0.0, 1.0)
    shade = 1.0 - 0.25 * ((yy - cy) / ay).clip(-1, 1) ** 2
    img[face] = (skin[None, :] * shade[face, None]).clip(0.0, 1.0)

    hair_ax = ax * (1.7 + rng.uniform(0.0, 0.5))
    hair_ay = ay * (1.3 + rng.uniform(0.0, 0.4))
    hair_cy = cy - 0.14 + rng.uniform(-0.03, 0.03)
    hair = ((xx - cx) / hair_ax) ** 2 + ((yy - hair_cy) / hair_ay) ** 2 <= 1.0
    inner = ((xx - cx) / (ax * 0.92)) ** 2 + ((yy - cy - 0.04) / (ay * 0.92)) ** 2 <= 1.0
    hair &= ~inner
    hair &= yy < cy + rng.uniform(0.15, 0.45)

    # full dynamic range, biased dark the way real hair is
    base = rng.uniform(0.02, 0.9) ** rng.uniform(1.0, 2.2) \
        * np.array([1.0, 0.78, 0.58]) ** rng.uniform(0.2, 2.0)
    strands = 0.5 + 0.5 * np.sin(xx * rng.uniform(20, 60) + yy * rng.uniform(-15, 15)
                                 + rng.uniform(0, 6.28))
    hair_rgb = np.clip(base[None, None, :] * (0.7 + 0.55 * strands[..., None]), 0.0, 1.0)
    img[hair] = hair_rgb[hair]

    image = np.round(img * 255.0).astype(np.uint8)
    mask = np.where(hair, 255, 0).astype(np.uint8)
    return image, mask


def write_corpus(root: Path | str, n: int, size: int = 128, seed: int = 0) -> tuple[Path, Path]:
    """Write n portrait/mask pairs under root/images and root/masks."""
    root = Path(root)
    image_dir = root / "images"
    mask_dir = root / "masks"
    image_dir.mkdir(parents=True, exist_ok=True)
    mask_dir.mkdir(parents=True, exist_ok=True)
    for i in range(n):
        image, mask = make_portrait(seed + i, size=size)
        name = f"face_{i:05d}.png"
        Image.fromarray(image).save(image_dir / name)
        Image.fromarray(mask).save(mask_dir / name)
    return image_dir, mask_dir
