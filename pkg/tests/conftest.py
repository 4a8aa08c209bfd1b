import numpy as np
import pytest
import torch

from hairsynth.data import SampleRecord, preprocess_sample
from hairsynth.models import HairSynthesisModel, ModelConfig
from hairsynth.synthetic import make_portrait

TINY_CONFIG = ModelConfig(base_channels=4)


@pytest.fixture
def tiny_config() -> ModelConfig:
    return TINY_CONFIG


@pytest.fixture
def tiny_model(tiny_config) -> HairSynthesisModel:
    torch.manual_seed(0)
    return HairSynthesisModel(tiny_config)


def make_record(seed: int = 0, size: int = 128) -> SampleRecord:
    image, mask = make_portrait(seed, size=size)
    return preprocess_sample(image, mask, sample_id=f"synth_{seed:04d}")


def record_with_fraction(fraction: float, sample_id: str = "x") -> SampleRecord:
    """Minimal record carrying a prescribed hair fraction (filter tests)."""
    image = torch.zeros(1, 3, 8, 8)
    mask = torch.zeros(1, 1, 8, 8)
    return SampleRecord(id=sample_id, image=image, mask=mask, hair_region=image,
                        background=image, hair_fraction=float(fraction))


@pytest.fixture
def portrait_record() -> SampleRecord:
    return make_record(seed=3)


def finite_diff_grad(fn, tensor: torch.Tensor, h: float = 1e-3) -> torch.Tensor:
    """Central finite differences of a scalar-valued fn w.r.t. every element."""
    grad = torch.zeros_like(tensor)
    flat = tensor.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.numel()):
        orig = flat[i].item()
        flat[i] = orig + h
        up = float(fn())
        flat[i] = orig - h
        down = float(fn())
        flat[i] = orig
        gflat[i] = (up - down) / (2.0 * h)
    return grad


def assert_grads_close(analytic: torch.Tensor, numeric: torch.Tensor,
                       rel: float = 1e-2, floor: float = 1e-4) -> None:
    denom = torch.maximum(torch.maximum(analytic.abs(), numeric.abs()),
                          torch.full_like(analytic, floor))
    err = ((analytic - numeric).abs() / denom).max().item()
    assert err <= rel, f"finite-difference mismatch: max relative error {err:.3e}"


def random_image(shape, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(0, 256, size=shape, dtype=np.uint8)
