"""Pretrained feature extractors used by the perceptual loss and FID.

Pretrained weights are provisioned as local files (no downloads at runtime):
point HAIRSYNTH_VGG19_WEIGHTS / HAIRSYNTH_INCEPTION_WEIGHTS at torchvision
state-dict files, or pass paths explicitly. `IdentityExtractor` is the
documented stub for offline testing; with it the perceptual loss coincides
with the pixel loss.
"""

from __future__ import annotations

import os
from typing import Protocol

import numpy as np
import torch
from torch import nn

VGG19_ENV = "HAIRSYNTH_VGG19_WEIGHTS"
INCEPTION_ENV = "HAIRSYNTH_INCEPTION_WEIGHTS"

# first activation of each of the five VGG19 conv stages
VGG19_TAP_INDICES = {"relu1_1": 1, "relu2_1": 6, "relu3_1": 11, "relu4_1": 20, "relu5_1": 29}

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


class ExtractorUnavailable(RuntimeError):
    pass


class FeatureExtractor(Protocol):
    def features(self, images: torch.Tensor) -> dict[str, torch.Tensor]: ...


class IdentityExtractor:
    """Stub extractor: the image itself is the single feature map."""

    def features(self, images: torch.Tensor) -> dict[str, torch.Tensor]:
        return {"identity": images}


class RandomFeatures(nn.Module):
    """Fixed random-convolution feature pyramid for offline perceptual losses.

    No pretrained weights needed: five frozen stride-2 ReLU convs give
    multi-scale taps, mirroring the five-stage tap layout of the provisioned
    backbone. Tap outputs are scaled so distances between mismatched natural
    images land at the magnitudes pretrained-backbone features produce
    (several units, versus ~1e-1 for unit-variance random features); the
    perceptual term then carries the same early-training weight either way.
    Not a substitute for provisioned VGG19 features when comparing against
    published numbers.
    """

    def __init__(self, seed: int = 0,
                 widths: tuple[int, ...] = (16, 32, 64, 128, 128),
                 tap_gain: float = 20.0):
        super().__init__()
        self.tap_gain = tap_gain
        generator = torch.Generator().manual_seed(seed)
        layers = []
        in_ch = 3
        for width in widths:
            conv = nn.Conv2d(in_ch, width, 3, 2, 1)
            with torch.no_grad():
                weight = torch.randn(conv.weight.shape, generator=generator)
                conv.weight.copy_(weight * (2.0 / (9 * in_ch)) ** 0.5)
                conv.bias.zero_()
            layers.append(conv)
            in_ch = width
        self.layers = nn.ModuleList(layers)
        for p in self.parameters():
            p.requires_grad_(False)

    def features(self, images: torch.Tensor) -> dict[str, torch.Tensor]:
        taps = {}
        x = images
        for i, layer in enumerate(self.layers):
            x = torch.relu(layer(x))
            taps[f"scale{i}"] = self.tap_gain * x
        return taps


def _resolve_weights(weights_path: str | os.PathLike | None, env_var: str,
                     what: str) -> str:
    path = str(weights_path) if weights_path else os.environ.get(env_var, "")
    if not path or not os.path.exists(path):
        raise ExtractorUnavailable(
            f"{what} weights not found. On a networked machine run torchvision "
            f"to fetch them, save the state dict with torch.save, and point "
            f"{env_var} (or the weights_path argument) at the file.")
    return path


def _imagenet_normalize(images: torch.Tensor) -> torch.Tensor:
    x = (images + 1.0) / 2.0
    mean = torch.tensor(IMAGENET_MEAN, device=images.device).view(1, 3, 1, 1)
    std = torch.tensor(IMAGENET_STD, device=images.device).view(1, 3, 1, 1)
    return (x - mean) / std


class Vgg19Features(nn.Module):
    """VGG19 tap activations for the perceptual loss.

    Inputs are [-1, 1] images; remapping to the ImageNet normalization happens
    internally. `untrained=True` builds a randomly initialized backbone (tap
    plumbing tests only, never for real training).
    """

    def __init__(self, weights_path: str | os.PathLike | None = None,
                 untrained: bool = False):
        super().__init__()
        path = None if untrained else _resolve_weights(weights_path, VGG19_ENV, "VGG19")
        from torchvision.models import vgg19

        backbone = vgg19(weights=None)
        if path is not None:
            backbone.load_state_dict(torch.load(path, map_location="cpu"))
        last_tap = max(VGG19_TAP_INDICES.values())
        self.layers = backbone.features[:last_tap + 1]
        self.layers.eval()
        for p in self.layers.parameters():
            p.requires_grad_(False)

    def features(self, images: torch.Tensor) -> dict[str, torch.Tensor]:
        taps = {}
        by_index = {idx: name for name, idx in VGG19_TAP_INDICES.items()}
        x = _imagenet_normalize(images)
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i in by_index:
                taps[by_index[i]] = x
        return taps

    forward = features


class InceptionFeatures(nn.Module):
    """2048-d pool features of the standard inception-style extractor (FID)."""

    INPUT_SIZE = 299

    def __init__(self, weights_path: str | os.PathLike | None = None,
                 untrained: bool = False):
        super().__init__()
        path = None if untrained else _resolve_weights(weights_path, INCEPTION_ENV,
                                                       "InceptionV3")
        from torchvision.models import inception_v3

        backbone = inception_v3(weights=None, aux_logits=True, init_weights=untrained)
        if path is not None:
            backbone.load_state_dict(torch.load(path, map_location="cpu"))
        backbone.fc = nn.Identity()
        backbone.aux_logits = False
        backbone.AuxLogits = None
        backbone.eval()
        for p in backbone.parameters():
            p.requires_grad_(False)
        self.backbone = backbone

    @torch.no_grad()
    def embed(self, images: torch.Tensor) -> np.ndarray:
        """[-1, 1] images -> [N, 2048] feature rows."""
        x = torch.nn.functional.interpolate(
            images, size=(self.INPUT_SIZE, self.INPUT_SIZE), mode="bilinear",
            align_corners=False)
        x = _imagenet_normalize(x)
        return self.backbone(x).cpu().numpy()
