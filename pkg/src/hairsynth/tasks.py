"""The three user-facing syntheses over a trained model: reconstruct a
sample's own hair, transfer a reference's hair style, and synthesize hair
under an edited mask. All are pure, seeded functions of their inputs."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import torch

from .data import SampleRecord, save_image_png
from .models import GeneratorResult, HairSynthesisModel, MaskPyramid, sample_noise

log = logging.getLogger(__name__)

DEFAULT_TASK_SEED = 0


@dataclass(frozen=True)
class EditRequest:
    source: SampleRecord
    reference: SampleRecord | None = None   # None -> style from the source itself
    edited_mask: torch.Tensor | None = None  # None -> the source's own mask
    seed: int | None = None

    @property
    def task(self) -> str:
        if self.edited_mask is not None:
            return "edit"
        if self.reference is not None:
            return "transfer"
        return "reconstruct"


def synthesize(model: HairSynthesisModel, mask: torch.Tensor, background: torch.Tensor,
               style_hair: torch.Tensor, style_mask: torch.Tensor,
               seed: int | None) -> GeneratorResult:
    """Shared inference path: encode the style source, seed noise, generate."""
    model.eval()
    with torch.no_grad():
        z = sample_noise(mask.shape[0], seed=DEFAULT_TASK_SEED if seed is None else seed)
        s = model.encoder(style_hair, style_mask)
        pyramid = MaskPyramid.build(mask, model.config.stage_resolutions)
        return model.generator(z, s, pyramid, background)


def reconstruct(source: SampleRecord, model: HairSynthesisModel,
                seed: int | None = None, full: bool = False):
    """Regenerate the sample's own hair; with a trained model the output
    approximates the original image."""
    result = synthesize(model, source.mask, source.background,
                        source.hair_region, source.mask, seed)
    return result if full else result.output


def transfer_style(source: SampleRecord, reference: SampleRecord,
                   model: HairSynthesisModel, seed: int | None = None,
                   full: bool = False):
    """Source's mask and background, reference's hair appearance."""
    if reference.hair_fraction == 0:
        raise ValueError("reference has no hair region")
    result = synthesize(model, source.mask, source.background,
                        reference.hair_region, reference.mask, seed)
    return result if full else result.output


def edit_shape(source: SampleRecord, reference: SampleRecord | None,
               edited_mask: torch.Tensor, model: HairSynthesisModel,
               seed: int | None = None, full: bool = False):
    """Synthesize hair under a user-edited mask.

    The background is recomputed from the edited mask: pixels newly claimed
    for hair are zeroed out of the background, while pixels released by a
    shrunken mask expose zeros the final conv must fill plausibly.
    """
    if edited_mask.shape != source.mask.shape:
        raise ValueError(f"edited mask shape {tuple(edited_mask.shape)} does not match "
                         f"source mask {tuple(source.mask.shape)}")
    unique = torch.unique(edited_mask)
    if not all(v in (0.0, 1.0) for v in unique.tolist()):
        raise ValueError("edited mask must be binary")
    if bool(edited_mask.min() >= 1.0):
        log.warning("edited mask is all ones: no background anchor remains")
    style = reference if reference is not None else source
    background = source.image * (1.0 - edited_mask)
    result = synthesize(model, edited_mask, background,
                        style.hair_region, style.mask, seed)
    return result if full else result.output


def run_request(request: EditRequest, model: HairSynthesisModel) -> torch.Tensor:
    if request.task == "edit":
        return edit_shape(request.source, request.reference, request.edited_mask,
                          model, request.seed)
    if request.task == "transfer":
        return transfer_style(request.source, request.reference, model, request.seed)
    return reconstruct(request.source, model, request.seed)


def run_requests(requests: list[EditRequest], model: HairSynthesisModel,
                 out_dir: Path | str) -> list[Path]:
    """Batch runner: one PNG per request, named <source>__<ref>__<task>.png."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for request in requests:
        ref_id = request.reference.id if request.reference is not None else request.source.id
        output = run_request(request, model)
        path = out_dir / f"{request.source.id}__{ref_id}__{request.task}.png"
        save_image_png(output, path)
        written.append(path)
    return written
