"""Image-quality evaluation (PSNR, SSIM, FID) over task outputs and the
single-stream runtime benchmark."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from scipy.signal import convolve2d

from . import tasks
from .data import SampleRecord, eval_filter, load_sample, preprocess_sample, save_image_png
from .features import ExtractorUnavailable, InceptionFeatures
from .models import HairSynthesisModel, count_params

log = logging.getLogger(__name__)

PSNR_CAP_DB = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = (0.01 * 255) ** 2
SSIM_C2 = (0.03 * 255) ** 2
LUMA_WEIGHTS = (0.299, 0.587, 0.114)  # ITU-R 601


@dataclass(frozen=True)
class MetricsReport:
    task: str
    fid: float | None
    psnr_mean: float
    ssim_mean: float
    n_pairs: int
    fid_skipped: bool = False

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class BenchReport:
    images_per_second: float
    n_images: int
    param_count_generator: int
    resolution: int
    total_seconds: float

    def as_dict(self) -> dict:
        return asdict(self)


def _to_255(image: torch.Tensor) -> np.ndarray:
    return ((image.detach().cpu().numpy() + 1.0) * 127.5)


def psnr(a: torch.Tensor, b: torch.Tensor) -> float:
    """Peak signal-to-noise ratio in dB on the 8-bit scale, capped at 100."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    mse = float(np.mean((_to_255(a) - _to_255(b)) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(20.0 * math.log10(255.0 / math.sqrt(mse)), PSNR_CAP_DB)


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords ** 2) / (2.0 * sigma ** 2))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def _luma(image: torch.Tensor) -> np.ndarray:
    x = _to_255(image)
    if x.ndim == 3:
        x = x[None]
    r, g, b = x[:, 0], x[:, 1], x[:, 2]
    return LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b


def ssim(a: torch.Tensor, b: torch.Tensor) -> float:
    """Mean local structural similarity on the luma channel.

    11x11 Gaussian window (sigma 1.5), valid-region windows only, weighted
    (population) moments.
    """
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    if a.shape[-1] < SSIM_WINDOW or a.shape[-2] < SSIM_WINDOW:
        raise ValueError(f"images smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    ya, yb = _luma(a), _luma(b)
    window = _gaussian_window()
    values = []
    for i in range(ya.shape[0]):
        xa, xb = ya[i], yb[i]
        mu_a = convolve2d(xa, window, mode="valid")
        mu_b = convolve2d(xb, window, mode="valid")
        var_a = convolve2d(xa * xa, window, mode="valid") - mu_a ** 2
        var_b = convolve2d(xb * xb, window, mode="valid") - mu_b ** 2
        cov = convolve2d(xa * xb, window, mode="valid") - mu_a * mu_b
        num = (2 * mu_a * mu_b + SSIM_C1) * (2 * cov + SSIM_C2)
        den = (mu_a ** 2 + mu_b ** 2 + SSIM_C1) * (var_a + var_b + SSIM_C2)
        values.append(float(np.mean(num / den)))
    return float(np.mean(values))


def fid(real_features: np.ndarray, fake_features: np.ndarray) -> float:
    """Frechet distance between Gaussian fits of two feature sets.

    Tr(sqrt(Sr Sf)) via the eigenvalues of the covariance product, with
    negative eigenvalue artifacts clipped at zero.
    """
    real = np.asarray(real_features, dtype=np.float64)
    fake = np.asarray(fake_features, dtype=np.float64)
    if real.ndim != 2 or fake.ndim != 2 or real.shape[1] != fake.shape[1]:
        raise ValueError(f"expected [n, d] feature arrays with matching d, got "
                         f"{real.shape} and {fake.shape}")
    d = real.shape[1]
    if min(real.shape[0], fake.shape[0]) < d:
        log.warning("FID with fewer samples (%d, %d) than feature dim %d: "
                    "covariance estimate is rank-deficient",
                    real.shape[0], fake.shape[0], d)
    mu_r, mu_f = real.mean(axis=0), fake.mean(axis=0)
    sigma_r = np.atleast_2d(np.cov(real, rowvar=False))
    sigma_f = np.atleast_2d(np.cov(fake, rowvar=False))
    if not (np.isfinite(sigma_r).all() and np.isfinite(sigma_f).all()):
        raise FloatingPointError("non-finite covariance")
    delta = mu_r - mu_f
    eigvals = np.linalg.eigvals(sigma_r @ sigma_f)
    trace_sqrt = float(np.sum(np.sqrt(np.clip(eigvals.real, 0.0, None))))
    value = float(delta @ delta + np.trace(sigma_r) + np.trace(sigma_f) - 2.0 * trace_sqrt)
    return max(value, 0.0)


class PoolingFeatures:
    """Weight-free stand-in feature extractor: average-pooled pixels.

    Not comparable to published FID numbers; for offline smoke runs and the
    identity-model oracle only.
    """

    def __init__(self, grid: int = 4):
        self.grid = grid

    def embed(self, images: torch.Tensor) -> np.ndarray:
        pooled = torch.nn.functional.adaptive_avg_pool2d(images, self.grid)
        return pooled.reshape(images.shape[0], -1).detach().cpu().numpy()


def _default_synthesizer(model: HairSynthesisModel):
    def synth(source: SampleRecord, reference: SampleRecord | None, seed: int):
        if reference is None:
            return tasks.reconstruct(source, model, seed=seed)
        return tasks.transfer_style(source, reference, model, seed=seed)
    return synth


def evaluate_task(model: HairSynthesisModel | None, test_records: list[SampleRecord],
                  task: str, n_pairs: int = 5000, seed: int = 0,
                  feature_extractor=None, synthesizer=None,
                  min_hair_fraction: float = 0.03) -> MetricsReport:
    """Score reconstruction or transfer outputs against the originals.

    Pairs are drawn from records passing the hair-fraction filter;
    reconstruction pairs are (x, x), transfer pairs (x, random other
    reference). FID compares output features against the sampled originals;
    if no feature extractor can be provisioned it is skipped and marked.
    """
    if task not in ("reconstruction", "transfer"):
        raise ValueError(f"unknown task {task!r}")
    records = eval_filter(test_records, min_hair_fraction)
    if not records:
        raise ValueError("no records pass the hair-fraction filter")
    if len(records) < n_pairs:
        log.warning("only %d records after filtering; using all (asked for %d)",
                    len(records), n_pairs)
        n_pairs = len(records)
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(records), size=n_pairs, replace=False)

    if synthesizer is None:
        synthesizer = _default_synthesizer(model)
    if feature_extractor is None:
        try:
            feature_extractor = InceptionFeatures()
        except ExtractorUnavailable as exc:
            log.warning("FID skipped: %s", exc)
            feature_extractor = None

    psnr_values, ssim_values = [], []
    real_feats, fake_feats = [], []
    for i, idx in enumerate(chosen):
        source = records[int(idx)]
        reference = None
        if task == "transfer":
            if len(records) < 2:
                raise ValueError("transfer evaluation needs at least 2 records")
            ref_idx = int(rng.integers(len(records) - 1))
            if ref_idx >= idx:
                ref_idx += 1
            reference = records[ref_idx]
        output = synthesizer(source, reference, seed + i)
        psnr_values.append(psnr(source.image, output))
        ssim_values.append(ssim(source.image, output))
        if feature_extractor is not None:
            real_feats.append(feature_extractor.embed(source.image))
            fake_feats.append(feature_extractor.embed(output))

    fid_value = None
    if feature_extractor is not None:
        fid_value = fid(np.concatenate(real_feats), np.concatenate(fake_feats))
    return MetricsReport(task=task, fid=fid_value,
                         psnr_mean=float(np.mean(psnr_values)),
                         ssim_mean=float(np.mean(ssim_values)),
                         n_pairs=n_pairs, fid_skipped=feature_extractor is None)


def benchmark_fps(model: HairSynthesisModel, image_dir: Path | str, mask_dir: Path | str,
                  out_dir: Path | str, n_images: int = 500, seed: int = 0) -> BenchReport:
    """Single-stream synthesis throughput.

    The model is loaded before the timer starts; the timed loop covers, per
    image: read image+mask from disk, preprocess, reconstruct, write PNG.
    """
    image_dir, mask_dir, out_dir = Path(image_dir), Path(mask_dir), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not out_dir.is_dir():
        raise ValueError(f"output dir {out_dir} is unusable")
    images = sorted(p for p in image_dir.iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg"))
    if not images:
        raise ValueError(f"no images under {image_dir}")
    model.eval()

    start = time.perf_counter()
    for i in range(n_images):
        image_path = images[i % len(images)]
        entry = {"id": f"{image_path.stem}_{i}", "image_path": str(image_path),
                 "mask_path": str(mask_dir / f"{image_path.stem}.png")}
        record = load_sample(entry)
        output = tasks.reconstruct(record, model, seed=seed)
        save_image_png(output, out_dir / f"{entry['id']}.png")
    total = time.perf_counter() - start
    return BenchReport(images_per_second=n_images / total, n_images=n_images,
                       param_count_generator=count_params(model.generator),
                       resolution=model.config.stage_resolutions[-1],
                       total_seconds=total)


def write_report(report, path: Path | str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(report.as_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
