"""Networks: style encoder, AdaIN-residual generator with a hair-blending
output stage, and a patch discriminator.

Conventions: images are [B, 3, H, W] in [-1, 1], masks [B, 1, H, W] in {0, 1},
style and noise vectors are 512-d. LeakyReLU(0.2) everywhere except the tanh
that bounds the final output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import torch
import torch.nn.functional as F
from torch import nn

STATS_EPS = 1e-5
LEAKY_SLOPE = 0.2


@dataclass(frozen=True)
class ModelConfig:
    base_channels: int = 64
    stage_resolutions: tuple[int, ...] = (8, 16, 32, 64, 128)
    style_dim: int = 512
    noise_dim: int = 512
    disc_layers: int = 4
    disc_channels: int | None = None  # None: match base_channels
    param_budget: int = 40_000_000

    def __post_init__(self):
        if self.style_dim != 512 or self.noise_dim != 512:
            raise ValueError("style_dim and noise_dim are fixed at 512")
        res = self.stage_resolutions
        if any(b <= a for a, b in zip(res, res[1:])):
            raise ValueError(f"stage_resolutions must be strictly increasing: {res}")
        if res[-1] != 128:
            raise ValueError(f"last stage resolution must be 128, got {res[-1]}")

    def disc_base(self) -> int:
        return self.disc_channels if self.disc_channels is not None else self.base_channels

    def stage_channels(self) -> tuple[int, ...]:
        # widest (8x base) at the coarsest stage, halving as resolution doubles
        top = self.stage_resolutions[-1]
        return tuple(min(self.base_channels * (top // r), 8 * self.base_channels)
                     for r in self.stage_resolutions)


def conv_output_size(n: int, p: int, f: int, s: int = 1) -> int:
    """Spatial size after a convolution: floor((n + 2p - f) / s) + 1."""
    if n < 1 or f < 1:
        raise ValueError(f"input size {n} and filter size {f} must be >= 1")
    if p < 0 or s < 1:
        raise ValueError(f"padding {p} must be >= 0 and stride {s} >= 1")
    out = (n + 2 * p - f) // s + 1
    if out < 1:
        raise ValueError(f"filter {f} larger than padded input {n + 2 * p}")
    return out


def instance_stats(x: torch.Tensor, eps: float = STATS_EPS) -> tuple[torch.Tensor, torch.Tensor]:
    """Per-sample per-channel mean and (stabilized) std over the spatial dims.

    The returned sigma is std + eps, the exact denominator `adain` divides by,
    so adain(x, instance_stats(x)) reproduces x.
    """
    if x.ndim != 4:
        raise ValueError(f"expected [B, C, H, W] feature map, got shape {tuple(x.shape)}")
    mu = x.mean(dim=(2, 3))
    sigma = x.std(dim=(2, 3), unbiased=False) + eps
    return mu, sigma


def adain(content: torch.Tensor, style_stats: tuple[torch.Tensor, torch.Tensor],
          eps: float = STATS_EPS) -> torch.Tensor:
    """Align a feature map's per-channel statistics to the style's (mu, sigma)."""
    mu_s, sigma_s = style_stats
    if mu_s.shape[-1] != content.shape[1] or sigma_s.shape[-1] != content.shape[1]:
        raise ValueError(f"style stats have {mu_s.shape[-1]} channels, "
                         f"content has {content.shape[1]}")
    if not (torch.isfinite(mu_s).all() and torch.isfinite(sigma_s).all()):
        raise ValueError("non-finite style statistics")
    mu_c, sigma_c = instance_stats(content, eps)
    shape = (content.shape[0], content.shape[1], 1, 1) if mu_s.ndim == 2 else (1, content.shape[1], 1, 1)
    normalized = (content - mu_c.view(content.shape[0], -1, 1, 1)) / sigma_c.view(content.shape[0], -1, 1, 1)
    return sigma_s.view(shape) * normalized + mu_s.view(shape)


def _softplus_inverse(y: float) -> float:
    return math.log(math.expm1(y))


class StyleAffine(nn.Module):
    """Learned per-stage projection of the style vector to AdaIN (mu, sigma).

    Bias starts at (0, softplus^-1(1)) so a zero style vector yields (0, 1)
    and AdaIN degenerates to plain instance normalization at init.
    """

    def __init__(self, style_dim: int, channels: int):
        super().__init__()
        self.channels = channels
        self.proj = nn.Linear(style_dim, 2 * channels)
        # large enough that reconstruction gradients reach the encoder early
        nn.init.normal_(self.proj.weight, std=0.1)
        with torch.no_grad():
            self.proj.bias.zero_()
            self.proj.bias[channels:] = _softplus_inverse(1.0)

    def forward(self, s: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        out = self.proj(s)
        mu = out[..., :self.channels]
        sigma = F.softplus(out[..., self.channels:])
        return mu, sigma


class AdaINResBlock(nn.Module):
    """Residual block with style-conditioned normalization.

    Main path: two rounds of (AdaIN, LeakyReLU, 3x3 conv); skip path a 1x1
    conv so the channel count may change. Spatial dims are preserved.
    """

    def __init__(self, in_channels: int, out_channels: int, style_dim: int):
        super().__init__()
        self.affine1 = StyleAffine(style_dim, in_channels)
        self.conv1 = nn.Conv2d(in_channels, out_channels, 3, 1, 1)
        self.affine2 = StyleAffine(style_dim, out_channels)
        self.conv2 = nn.Conv2d(out_channels, out_channels, 3, 1, 1)
        self.skip = nn.Conv2d(in_channels, out_channels, 1, 1, 0)

    def forward(self, x: torch.Tensor, s: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.leaky_relu(adain(x, self.affine1(s)), LEAKY_SLOPE))
        h = self.conv2(F.leaky_relu(adain(h, self.affine2(s)), LEAKY_SLOPE))
        return h + self.skip(x)


@dataclass(frozen=True)
class MaskPyramid:
    """Hair mask downsampled to every generator stage resolution.

    Levels are area-averaged then re-binarized at 0.5, ordered coarse to fine;
    the last level is the full-resolution mask itself.
    """

    levels: tuple[torch.Tensor, ...]

    @classmethod
    def build(cls, mask: torch.Tensor,
              resolutions: tuple[int, ...] = ModelConfig().stage_resolutions) -> "MaskPyramid":
        if mask.ndim != 4 or mask.shape[1] != 1:
            raise ValueError(f"expected [B, 1, H, W] mask, got {tuple(mask.shape)}")
        full = mask.shape[-1]
        levels = []
        for res in resolutions:
            if res == full:
                levels.append(mask)
            else:
                pooled = F.avg_pool2d(mask, kernel_size=full // res)
                levels.append((pooled >= 0.5).to(mask.dtype))
        return cls(levels=tuple(levels))


class GeneratorResult(NamedTuple):
    output: torch.Tensor          # final image, [-1, 1]
    pre_blend_hair: torch.Tensor  # hair branch RGB before compositing
    composite: torch.Tensor       # hair*mask + background, pre final conv


class HairBlendLayer(nn.Module):
    """Output stage: restyle hair features, composite over the preserved
    background, then refine the seam with one 3x3 conv + tanh.

    Compositing before the final conv lets the discriminator police the
    hair/background transition region.
    """

    REFINE_INIT_GAIN = 1.25  # tanh(1.25 x) ~ x over the bulk of the pixel range

    def __init__(self, channels: int, style_dim: int):
        super().__init__()
        self.resblock = AdaINResBlock(channels, channels, style_dim)
        self.to_rgb = nn.Conv2d(channels, 3, 1, 1, 0)
        self.refine = nn.Conv2d(3, 3, 3, 1, 1)
        # identity pass-through at init: the composited background survives the
        # bounded activation from step 0, and upstream gradients are not
        # filtered through a random color mixing
        with torch.no_grad():
            self.refine.weight.zero_()
            for c in range(3):
                self.refine.weight[c, c, 1, 1] = self.REFINE_INIT_GAIN
            self.refine.bias.zero_()

    def forward(self, features: torch.Tensor, s: torch.Tensor, mask: torch.Tensor,
                background: torch.Tensor) -> GeneratorResult:
        if features.shape[-2:] != mask.shape[-2:] or mask.shape[-2:] != background.shape[-2:]:
            raise ValueError(f"spatial dims disagree: features {tuple(features.shape)}, "
                             f"mask {tuple(mask.shape)}, background {tuple(background.shape)}")
        pre_blend = self.to_rgb(self.resblock(features, s))
        composite = pre_blend * mask + background
        output = torch.tanh(self.refine(composite))
        return GeneratorResult(output=output, pre_blend_hair=pre_blend, composite=composite)


class HairGenerator(nn.Module):
    """Noise seeds an 8x8 feature map; AdaIN residual stages grow it to 128,
    each stage seeing its mask-pyramid level as an extra input channel; the
    blend layer composites the synthesized hair over the background.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        channels = config.stage_channels()
        seed_res = config.stage_resolutions[0]
        self.seed_res = seed_res
        self.seed_channels = channels[0]
        self.seed_proj = nn.Linear(config.noise_dim, channels[0] * seed_res * seed_res)
        # the bias is a learned base pattern; fresh noise perturbs it gently at
        # init instead of dominating the seed map
        nn.init.normal_(self.seed_proj.weight, std=0.005)
        nn.init.normal_(self.seed_proj.bias, std=1.0)
        stages = []
        in_ch = channels[0]
        for out_ch in channels:
            stages.append(AdaINResBlock(in_ch + 1, out_ch, config.style_dim))
            in_ch = out_ch
        self.stages = nn.ModuleList(stages)
        self.blend = HairBlendLayer(channels[-1], config.style_dim)

    def style_to_stats(self, s: torch.Tensor, stage: int) -> tuple[torch.Tensor, torch.Tensor]:
        """Stats the given stage's first AdaIN would use for style vector s."""
        if not 0 <= stage < len(self.stages):
            raise IndexError(f"stage {stage} out of range [0, {len(self.stages)})")
        return self.stages[stage].affine1(s)

    def forward(self, z: torch.Tensor, s: torch.Tensor, masks: MaskPyramid,
                background: torch.Tensor) -> GeneratorResult:
        if z.shape[-1] != self.config.noise_dim:
            raise ValueError(f"noise vector must be {self.config.noise_dim}-d, got {z.shape[-1]}")
        if s.shape[-1] != self.config.style_dim:
            raise ValueError(f"style vector must be {self.config.style_dim}-d, got {s.shape[-1]}")
        if len(masks.levels) != len(self.stages):
            raise ValueError(f"mask pyramid has {len(masks.levels)} levels, "
                             f"generator has {len(self.stages)} stages")
        batch = z.shape[0]
        x = self.seed_proj(z).view(batch, self.seed_channels, self.seed_res, self.seed_res)
        resolutions = self.config.stage_resolutions
        for i, (block, res) in enumerate(zip(self.stages, resolutions)):
            level = masks.levels[i]
            if level.shape[-1] != x.shape[-1]:
                raise ValueError(f"stage {i}: mask level {level.shape[-1]} does not match "
                                 f"feature map {x.shape[-1]}")
            x = block(torch.cat([x, level], dim=1), s)
            if not torch.isfinite(x).all():
                raise FloatingPointError(f"non-finite activations after generator stage {i}")
            if i + 1 < len(resolutions):
                x = F.interpolate(x, scale_factor=resolutions[i + 1] // res, mode="nearest")
        return self.blend(x, s, masks.levels[-1], background)


class StyleEncoder(nn.Module):
    """Masked hair region -> 512-d style vector.

    The mask rides along as a 4th input channel so the network knows the
    region support; strided convs take 128 down to 8, then global average
    pooling and a linear head.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        base = config.base_channels
        widths = [base, 2 * base, 4 * base, 8 * base]
        layers = []
        in_ch = 4
        for out_ch in widths:
            conv = nn.Conv2d(in_ch, out_ch, 4, 2, 1)
            # scale-preserving init: keeps the head sensitive to its input, so
            # distinct hair regions encode distinctly from the start
            nn.init.kaiming_normal_(conv.weight, a=LEAKY_SLOPE,
                                    nonlinearity="leaky_relu")
            nn.init.zeros_(conv.bias)
            layers.append(conv)
            layers.append(nn.LeakyReLU(LEAKY_SLOPE))
            in_ch = out_ch
        self.features = nn.Sequential(*layers)
        self.head = nn.Linear(in_ch, config.style_dim)

    def forward(self, hair_region: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        if hair_region.shape[1] != 3 or mask.shape[1] != 1:
            raise ValueError(f"expected RGB hair region and 1-channel mask, got "
                             f"{hair_region.shape[1]} and {mask.shape[1]} channels")
        x = self.features(torch.cat([hair_region, mask], dim=1))
        s = self.head(x.mean(dim=(2, 3)))
        if not torch.isfinite(s).all():
            raise FloatingPointError("non-finite style vector from encoder")
        return s


class PatchDiscriminator(nn.Module):
    """Stride-2 4x4 conv stack mapping an image to an NxN grid of raw
    per-patch realism scores (squashing happens inside the loss)."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        base = config.disc_base()
        layers = []
        in_ch = 3
        for i in range(config.disc_layers):
            out_ch = min(base * 2 ** i, 8 * base)
            conv = nn.Conv2d(in_ch, out_ch, 4, 2, 1)
            # scale-preserving init so patch scores carry signal from the start
            nn.init.kaiming_normal_(conv.weight, a=LEAKY_SLOPE,
                                    nonlinearity="leaky_relu")
            nn.init.zeros_(conv.bias)
            layers.append(conv)
            layers.append(nn.LeakyReLU(LEAKY_SLOPE))
            in_ch = out_ch
        layers.append(nn.Conv2d(in_ch, 1, 3, 1, 1))
        self.net = nn.Sequential(*layers)

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        if image.ndim != 4 or image.shape[1] != 3:
            raise ValueError(f"expected [B, 3, H, W] image, got {tuple(image.shape)}")
        return self.net(image)


class HairSynthesisModel(nn.Module):
    """Container bundling the three networks behind one config/state_dict."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.encoder = StyleEncoder(config)
        self.generator = HairGenerator(config)
        self.discriminator = PatchDiscriminator(config)


def sample_noise(batch: int, seed: int | None = None, noise_dim: int = 512,
                 generator: torch.Generator | None = None) -> torch.Tensor:
    """I.i.d. standard-normal noise vectors, reproducible when seeded."""
    if batch < 1:
        raise ValueError(f"batch must be >= 1, got {batch}")
    if generator is None and seed is not None:
        generator = torch.Generator().manual_seed(seed)
    return torch.randn(batch, noise_dim, generator=generator)


def count_params(network: nn.Module) -> int:
    """Number of trainable parameter elements."""
    return sum(p.numel() for p in network.parameters() if p.requires_grad)
