"""The four training loss terms and their weighted combination.

All L1 terms are mean-reduced so unit weights are resolution-independent.
The generator's adversarial term uses the non-saturating surrogate
-log D(fake), which shares the minimax equilibrium but keeps gradients alive
early in training.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import torch

from .features import FeatureExtractor

SIGMOID_CLIP = 1e-7


@dataclass(frozen=True)
class LossWeights:
    pixel: float = 1.0
    style: float = 1.0
    perceptual: float = 1.0
    adversarial: float = 1.0

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if value < 0:
                raise ValueError(f"loss weight {name} must be nonnegative, got {value}")


class GeneratorLossTerms(NamedTuple):
    pixel: torch.Tensor | float
    style: torch.Tensor | float
    perceptual: torch.Tensor | float
    adversarial: torch.Tensor | float


@dataclass(frozen=True)
class LossReport:
    pixel: float
    style: float
    perceptual: float
    adversarial_g: float
    adversarial_d: float
    total_g: float

    def as_dict(self) -> dict[str, float]:
        return dict(self.__dict__)


def l1_distance(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference over all elements."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    return (a - b).abs().mean()


def pixel_loss(x: torch.Tensor, x_hat: torch.Tensor) -> torch.Tensor:
    return l1_distance(x, x_hat)


def perceptual_loss(x: torch.Tensor, x_hat: torch.Tensor,
                    extractor: FeatureExtractor) -> torch.Tensor:
    """Equal-weight sum of L1 distances between tap activations."""
    feats_x = extractor.features(x)
    feats_hat = extractor.features(x_hat)
    total = None
    for name, fx in feats_x.items():
        term = l1_distance(fx, feats_hat[name])
        total = term if total is None else total + term
    return total


def style_loss(real_hair: torch.Tensor, fake_hair: torch.Tensor,
               mask_real: torch.Tensor, mask_fake: torch.Tensor,
               encoder) -> torch.Tensor:
    """L1 between the encodings of the real and generated hair regions.

    Gradients flow into both the encoder and (through fake_hair) the
    generator; the encoder is trained jointly by this term.
    """
    return l1_distance(encoder(real_hair, mask_real), encoder(fake_hair, mask_fake))


def adversarial_losses(d_real: torch.Tensor, d_fake_for_d: torch.Tensor,
                       d_fake_for_g: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """(discriminator loss, generator loss) from raw patch scores.

    Sigmoid outputs are clipped to [1e-7, 1 - 1e-7] before the logs; means run
    over the batch and all patches.
    """
    for name, scores in (("d_real", d_real), ("d_fake_for_d", d_fake_for_d),
                         ("d_fake_for_g", d_fake_for_g)):
        if not torch.isfinite(scores).all():
            raise FloatingPointError(f"non-finite discriminator scores in {name}")
    p_real = torch.sigmoid(d_real).clamp(SIGMOID_CLIP, 1.0 - SIGMOID_CLIP)
    p_fake_d = torch.sigmoid(d_fake_for_d).clamp(SIGMOID_CLIP, 1.0 - SIGMOID_CLIP)
    p_fake_g = torch.sigmoid(d_fake_for_g).clamp(SIGMOID_CLIP, 1.0 - SIGMOID_CLIP)
    loss_d = -torch.log(p_real).mean() - torch.log(1.0 - p_fake_d).mean()
    loss_g = -torch.log(p_fake_g).mean()
    return loss_d, loss_g


def total_generator_loss(terms: GeneratorLossTerms, weights: LossWeights):
    """Weighted sum of the four generator loss terms."""
    for name in ("pixel", "style", "perceptual", "adversarial"):
        if getattr(weights, name) < 0:
            raise ValueError(f"negative loss weight: {name}")
    return (weights.pixel * terms.pixel
            + weights.style * terms.style
            + weights.perceptual * terms.perceptual
            + weights.adversarial * terms.adversarial)
