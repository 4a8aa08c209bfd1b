"""Pseudo-supervised adversarial training: each image's own hair is the
reference, so the original image is ground truth for the pixel/perceptual
terms and style transfer emerges at inference by swapping the reference.

Per batch: one discriminator update, then one generator+encoder update; the
two groups have separate Adam instances with identical hyperparameters.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple

import torch

from .checkpoint import flatten_optimizer, load_checkpoint, restore_optimizer, save_checkpoint
from .data import SampleRecord, seeded_shuffle
from .features import FeatureExtractor, IdentityExtractor
from .losses import (GeneratorLossTerms, LossReport, LossWeights, adversarial_losses,
                     perceptual_loss, pixel_loss, style_loss, total_generator_loss)
from .models import HairSynthesisModel, MaskPyramid, ModelConfig, sample_noise

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    epochs: int = 55
    batch_size: int = 8
    weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 0
    checkpoint_every: int = 5   # epochs
    log_every: int = 1          # steps
    grad_clip: float | None = None

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if not 0 <= self.beta1 < self.beta2 < 1:
            raise ValueError(f"need 0 <= beta1 < beta2 < 1, got {self.beta1}, {self.beta2}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "TrainConfig":
        payload = dict(payload)
        if isinstance(payload.get("weights"), dict):
            payload["weights"] = LossWeights(**payload["weights"])
        return cls(**payload)


class TrainingBatch(NamedTuple):
    ids: tuple[str, ...]
    z: torch.Tensor            # fresh noise, one row per record
    hair: torch.Tensor         # style source: each record's own hair region
    mask: torch.Tensor
    pyramid: MaskPyramid
    background: torch.Tensor
    target: torch.Tensor       # ground truth: the record's own image


@dataclass
class TrainState:
    model: HairSynthesisModel
    opt_g: torch.optim.Adam    # generator + encoder (they co-minimize)
    opt_d: torch.optim.Adam
    noise_rng: torch.Generator
    extractor: FeatureExtractor
    step: int = 0
    epoch: int = 0
    running: dict = field(default_factory=dict)


def make_training_batch(records: list[SampleRecord],
                        noise_rng: torch.Generator | None = None,
                        resolutions: tuple[int, ...] | None = None) -> TrainingBatch:
    if not records:
        raise ValueError("empty training batch")
    mask = torch.cat([r.mask for r in records])
    resolutions = resolutions or ModelConfig().stage_resolutions
    return TrainingBatch(
        ids=tuple(r.id for r in records),
        z=sample_noise(len(records), generator=noise_rng),
        hair=torch.cat([r.hair_region for r in records]),
        mask=mask,
        pyramid=MaskPyramid.build(mask, resolutions),
        background=torch.cat([r.background for r in records]),
        target=torch.cat([r.image for r in records]),
    )


def _new_state(model_config: ModelConfig, config: TrainConfig,
               extractor: FeatureExtractor | None) -> TrainState:
    torch.manual_seed(config.seed)
    model = HairSynthesisModel(model_config)
    betas = (config.beta1, config.beta2)
    opt_g = torch.optim.Adam(list(model.generator.parameters())
                             + list(model.encoder.parameters()),
                             lr=config.lr, betas=betas)
    opt_d = torch.optim.Adam(model.discriminator.parameters(), lr=config.lr, betas=betas)
    noise_rng = torch.Generator().manual_seed(config.seed + 1)
    return TrainState(model=model, opt_g=opt_g, opt_d=opt_d, noise_rng=noise_rng,
                      extractor=extractor or IdentityExtractor())


def train_step(batch: TrainingBatch, state: TrainState, config: TrainConfig) -> LossReport:
    model = state.model
    model.train()

    s = model.encoder(batch.hair, batch.mask)
    result = model.generator(batch.z, s, batch.pyramid, batch.background)
    fake = result.output

    # discriminator update (generator side detached)
    d_real = model.discriminator(batch.target)
    d_fake_detached = model.discriminator(fake.detach())
    loss_d, _ = adversarial_losses(d_real, d_fake_detached, d_fake_detached)
    state.opt_d.zero_grad(set_to_none=True)
    loss_d.backward()
    if config.grad_clip:
        torch.nn.utils.clip_grad_norm_(model.discriminator.parameters(), config.grad_clip)
    state.opt_d.step()

    # generator + encoder update against the refreshed discriminator
    d_fake = model.discriminator(fake)
    _, adv_g = adversarial_losses(d_fake.detach(), d_fake.detach(), d_fake)
    terms = GeneratorLossTerms(
        pixel=pixel_loss(batch.target, fake),
        style=style_loss(batch.hair, fake * batch.mask, batch.mask, batch.mask,
                         model.encoder),
        perceptual=perceptual_loss(batch.target, fake, state.extractor),
        adversarial=adv_g,
    )
    total_g = total_generator_loss(terms, config.weights)
    state.opt_g.zero_grad(set_to_none=True)
    total_g.backward()
    if config.grad_clip:
        torch.nn.utils.clip_grad_norm_(
            list(model.generator.parameters()) + list(model.encoder.parameters()),
            config.grad_clip)
    state.opt_g.step()

    report = LossReport(
        pixel=terms.pixel.item(), style=terms.style.item(),
        perceptual=terms.perceptual.item(), adversarial_g=adv_g.item(),
        adversarial_d=loss_d.item(), total_g=total_g.item(),
    )
    bad = [k for k, v in report.as_dict().items() if not math.isfinite(v)]
    if bad:
        raise FloatingPointError(
            f"non-finite loss terms {bad} at step {state.step}: {report.as_dict()}")
    state.step += 1
    return report


def epoch_order(n: int, seed: int, epoch: int) -> list[int]:
    """Deterministic per-epoch permutation of record indices."""
    return seeded_shuffle(list(range(n)), seed ^ (epoch * 0x9E3779B97F4A7C15))


def _save_train_checkpoint(state: TrainState, config: TrainConfig, path: Path) -> Path:
    arrays = {"rng.noise": state.noise_rng.get_state().numpy()}
    opt_meta = {}
    for prefix, opt in (("opt_g", state.opt_g), ("opt_d", state.opt_d)):
        opt_arrays, meta = flatten_optimizer(opt, prefix)
        arrays.update(opt_arrays)
        opt_meta[prefix] = meta
    meta = {"step": state.step, "epoch": state.epoch, "running": state.running,
            "train_config": config.to_dict(), "optimizers": opt_meta}
    return save_checkpoint(path, state.model, meta=meta, arrays=arrays)


def load_train_state(path: Path | str, config: TrainConfig,
                     extractor: FeatureExtractor | None = None) -> TrainState:
    model, meta, arrays = load_checkpoint(path)
    state = _new_state(model.config, config, extractor)
    state.model.load_state_dict(model.state_dict())
    restore_optimizer(state.opt_g, arrays, meta["optimizers"]["opt_g"], "opt_g")
    restore_optimizer(state.opt_d, arrays, meta["optimizers"]["opt_d"], "opt_d")
    state.noise_rng.set_state(torch.from_numpy(arrays["rng.noise"].copy()))
    state.step = meta["step"]
    state.epoch = meta["epoch"]
    state.running = meta.get("running", {})
    return state


def _assert_params_finite(model: HairSynthesisModel, step: int) -> None:
    for name, param in model.named_parameters():
        if not torch.isfinite(param).all():
            raise FloatingPointError(f"parameter {name} became non-finite at step {step}")


def train(records: list[SampleRecord], config: TrainConfig,
          model_config: ModelConfig | None = None,
          out_dir: Path | str = "runs/default",
          extractor: FeatureExtractor | None = None,
          resume_from: Path | str | None = None,
          max_steps: int | None = None) -> Path:
    """Run the full loop; returns the final checkpoint path.

    Checkpoints land in out_dir/checkpoints, the loss log (JSON lines, one
    record per logged step) in out_dir/losses.jsonl. Training resumes from a
    checkpoint at the epoch boundary it was written at.
    """
    if not records:
        raise ValueError("training dataset is empty")
    out_dir = Path(out_dir)
    ckpt_dir = out_dir / "checkpoints"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "losses.jsonl"

    if resume_from is not None:
        state = load_train_state(resume_from, config, extractor)
        log_mode = "a"
    else:
        state = _new_state(model_config or ModelConfig(), config, extractor)
        log_mode = "w"

    final_path = ckpt_dir / "final.npz"
    with open(log_path, log_mode) as log_file:
        while state.epoch < config.epochs:
            order = epoch_order(len(records), config.seed, state.epoch)
            epoch_losses: list[LossReport] = []
            for start in range(0, len(order), config.batch_size):
                chunk = [records[i] for i in order[start:start + config.batch_size]]
                batch = make_training_batch(chunk, state.noise_rng,
                                            state.model.config.stage_resolutions)
                report = train_step(batch, state, config)
                epoch_losses.append(report)
                if state.step % config.log_every == 0:
                    _assert_params_finite(state.model, state.step)
                    entry = {"step": state.step, "epoch": state.epoch,
                             "pixel": report.pixel, "style": report.style,
                             "perceptual": report.perceptual,
                             "adv_g": report.adversarial_g,
                             "adv_d": report.adversarial_d,
                             "total_g": report.total_g}
                    log_file.write(json.dumps(entry) + "\n")
                    log_file.flush()
                if max_steps is not None and state.step >= max_steps:
                    break
            state.running = {
                key: sum(getattr(r, key) for r in epoch_losses) / max(len(epoch_losses), 1)
                for key in ("pixel", "style", "perceptual", "total_g")}
            state.epoch += 1
            if state.epoch % config.checkpoint_every == 0 or state.epoch == config.epochs:
                path = ckpt_dir / f"epoch_{state.epoch:05d}.npz"
                _save_train_checkpoint(state, config, path)
                log.info("checkpoint: %s (step %d)", path, state.step)
            if max_steps is not None and state.step >= max_steps:
                break
    _save_train_checkpoint(state, config, final_path)
    return final_path
