"""Dataset ingestion, preprocessing and deterministic splitting.

Images are face portraits paired with binary hair masks. Everything downstream
works on 128x128 tensors in [-1, 1]; masks are re-binarized after every resize
so hair/background decompositions stay exact.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

log = logging.getLogger(__name__)

WORKING_RESOLUTION = 128
MASK_THRESHOLD = 0.5
DEFAULT_TRAIN_FRACTION = 0.8  # reproduces the 56000/14000 split on 70000 ids
DEFAULT_MIN_HAIR_FRACTION = 0.03

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SampleRecord:
    """One preprocessed dataset item.

    `hair_region` and `background` are complementary maskings of `image`;
    because the mask is exactly {0, 1} they sum back to `image` bit-exactly.
    """

    id: str
    image: torch.Tensor        # 1x3x128x128, values in [-1, 1]
    mask: torch.Tensor         # 1x1x128x128, values in {0, 1}
    hair_region: torch.Tensor  # image * mask
    background: torch.Tensor   # image * (1 - mask)
    hair_fraction: float


@dataclass(frozen=True)
class DatasetSplit:
    train_ids: list[str]
    test_ids: list[str]
    seed: int
    train_fraction: float = DEFAULT_TRAIN_FRACTION


def _splitmix64(state: int) -> tuple[int, int]:
    """One step of the splitmix64 generator; returns (output, next_state)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31), state


def seeded_shuffle(items: list, seed: int) -> list:
    """Fisher-Yates shuffle driven by splitmix64.

    Pure-integer arithmetic, so the permutation for a given (items, seed) is
    identical on every platform and Python/NumPy version.
    """
    out = list(items)
    state = seed & _MASK64
    for i in range(len(out) - 1, 0, -1):
        z, state = _splitmix64(state)
        j = z % (i + 1)
        out[i], out[j] = out[j], out[i]
    return out


def _decodable(path: Path) -> bool:
    try:
        with Image.open(path) as im:
            im.verify()
        return True
    except Exception:
        return False


def ingest_corpus(image_dir: Path | str, mask_dir: Path | str,
                  manifest_out: Path | str) -> list[dict]:
    """Pair images with same-named masks and write a JSON-lines manifest.

    Entries are {"id", "image_path", "mask_path"}, ordered lexicographically
    by id. Images without a mask, and files that fail to decode, are skipped
    with a warning. An empty result is a hard error.
    """
    image_dir, mask_dir = Path(image_dir), Path(mask_dir)
    manifest_out = Path(manifest_out)

    entries = []
    images = sorted(p for p in image_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    for image_path in images:
        sample_id = image_path.stem
        mask_path = mask_dir / f"{sample_id}.png"
        if not mask_path.exists():
            log.warning("no mask for image %s; skipped", image_path.name)
            continue
        if not _decodable(image_path) or not _decodable(mask_path):
            log.warning("undecodable file for id %s; skipped", sample_id)
            continue
        entries.append({"id": sample_id,
                        "image_path": str(image_path),
                        "mask_path": str(mask_path)})

    if not entries:
        raise ValueError(f"no usable image/mask pairs under {image_dir} / {mask_dir}")

    entries.sort(key=lambda e: e["id"])
    manifest_out.parent.mkdir(parents=True, exist_ok=True)
    with open(manifest_out, "w") as f:
        for entry in entries:
            f.write(json.dumps(entry) + "\n")
    return entries


def read_manifest(path: Path | str) -> list[dict]:
    with open(path) as f:
        return [json.loads(line) for line in f if line.strip()]


def _resize_bilinear(array: np.ndarray, size: int) -> torch.Tensor:
    """Bilinear resize (half-pixel centers, no antialias) of HxW[xC] float data."""
    tensor = torch.from_numpy(array.astype(np.float32))
    if tensor.ndim == 2:
        tensor = tensor.unsqueeze(-1)
    tensor = tensor.permute(2, 0, 1).unsqueeze(0)
    if tensor.shape[-2:] != (size, size):
        tensor = F.interpolate(tensor, size=(size, size), mode="bilinear",
                               align_corners=False, antialias=False)
    return tensor


def preprocess_sample(raw_image: np.ndarray, raw_mask: np.ndarray,
                      sample_id: str = "") -> SampleRecord:
    """Turn an 8-bit RGB image + 8-bit gray mask into a SampleRecord.

    Resize to 128x128 first, then map pixels to [-1, 1] via v/127.5 - 1 and
    re-binarize the mask at 0.5 of the [0, 1] gray scale. Binarizing after the
    resize keeps mask and image geometrically aligned.
    """
    if raw_image.dtype != np.uint8 or raw_mask.dtype != np.uint8:
        raise ValueError("expected 8-bit image and mask")
    if raw_image.ndim != 3 or raw_image.shape[2] != 3:
        raise ValueError(f"expected HxWx3 RGB image, got {raw_image.shape}")
    if raw_mask.ndim != 2:
        raise ValueError(f"expected HxW gray mask, got {raw_mask.shape}")
    if raw_image.shape[:2] != raw_mask.shape[:2]:
        raise ValueError(f"image {raw_image.shape[:2]} and mask "
                         f"{raw_mask.shape[:2]} dimensions differ")

    image = _resize_bilinear(raw_image, WORKING_RESOLUTION) / 127.5 - 1.0
    mask_gray = _resize_bilinear(raw_mask, WORKING_RESOLUTION) / 255.0
    mask = (mask_gray >= MASK_THRESHOLD).to(torch.float32)

    if not torch.isfinite(image).all():
        raise ValueError(f"non-finite pixel values after conversion for id {sample_id!r}")

    hair_region = image * mask
    background = image * (1.0 - mask)
    return SampleRecord(
        id=sample_id,
        image=image,
        mask=mask,
        hair_region=hair_region,
        background=background,
        hair_fraction=float(mask.mean()),
    )


def load_sample(entry: dict) -> SampleRecord:
    """Load one manifest entry from disk and preprocess it."""
    with Image.open(entry["image_path"]) as im:
        raw_image = np.asarray(im.convert("RGB"))
    with Image.open(entry["mask_path"]) as im:
        raw_mask = np.asarray(im.convert("L"))
    return preprocess_sample(raw_image, raw_mask, sample_id=entry["id"])


def make_split(manifest: list[dict], train_fraction: float = DEFAULT_TRAIN_FRACTION,
               seed: int = 0) -> DatasetSplit:
    """Deterministic train/test split: pinned shuffle, first floor(n*f) ids train."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    ids = sorted(entry["id"] for entry in manifest)
    if len(ids) < 2:
        raise ValueError(f"corpus too small to split: {len(ids)} ids")
    shuffled = seeded_shuffle(ids, seed)
    n_train = math.floor(len(ids) * train_fraction)
    return DatasetSplit(train_ids=shuffled[:n_train], test_ids=shuffled[n_train:],
                        seed=seed, train_fraction=train_fraction)


def save_split(split: DatasetSplit, path: Path | str) -> None:
    payload = {"seed": split.seed, "train_fraction": split.train_fraction,
               "train": split.train_ids, "test": split.test_ids}
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(payload, f)


def load_split(path: Path | str) -> DatasetSplit:
    with open(path) as f:
        payload = json.load(f)
    return DatasetSplit(train_ids=payload["train"], test_ids=payload["test"],
                        seed=payload["seed"], train_fraction=payload["train_fraction"])


def tensor_to_uint8(image: torch.Tensor) -> np.ndarray:
    """[-1, 1] image tensor (1x3xHxW or 3xHxW) -> HxWx3 uint8 array."""
    if image.ndim == 4:
        image = image[0]
    array = ((image.detach().clamp(-1, 1) + 1.0) * 127.5).round().to(torch.uint8)
    return array.permute(1, 2, 0).cpu().numpy()


def save_image_png(image: torch.Tensor, path: Path | str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(tensor_to_uint8(image)).save(path)


def eval_filter(records: list[SampleRecord],
                min_hair_fraction: float = DEFAULT_MIN_HAIR_FRACTION) -> list[SampleRecord]:
    """Keep records whose hair fraction is >= the threshold (order preserved)."""
    if not 0.0 <= min_hair_fraction <= 1.0:
        raise ValueError(f"min_hair_fraction must be in [0, 1], got {min_hair_fraction}")
    kept = [r for r in records if r.hair_fraction >= min_hair_fraction]
    if not kept:
        log.warning("eval_filter(%.3f) kept no records", min_hair_fraction)
    return kept
