"""Fine-tuning loop for the extraction prompts.

The configuration mirrors the published training recipe: five epochs,
batch size 4, gradient accumulation 1, Adafactor with scale_parameter,
relative_step and warmup_init enabled and no fixed learning rate, with
the matching schedule.  Every field is echoed into manifest.json before
the first step so a run is identifiable even if it dies mid-training.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path

import torch
from transformers import AutoModelForSeq2SeqLM, AutoTokenizer
from transformers.optimization import Adafactor, AdafactorSchedule

from .data import TrainExample, load_examples

logger = logging.getLogger(__name__)

OPTIMIZER_SETTINGS = {
    "name": "adafactor",
    "schedule": "adafactor",
    "scale_parameter": True,
    "relative_step": True,
    "warmup_init": True,
    "lr": None,
}


@dataclass(frozen=True)
class TrainConfig:
    checkpoint: str
    epochs: int = 5
    batch_size: int = 4
    grad_accumulation: int = 1
    max_source_length: int = 512
    max_target_length: int = 256
    seed: int = 13
    max_steps: int | None = None  # cap optimizer steps, for smoke runs

    def __post_init__(self) -> None:
        for name in ("epochs", "batch_size", "grad_accumulation"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    def manifest(self) -> dict:
        payload = asdict(self)
        payload["optimizer"] = dict(OPTIMIZER_SETTINGS)
        return payload


@dataclass
class TrainResult:
    steps: int
    losses: list[float]            # one entry per optimizer step
    truncated_sources: int
    checkpoint_dir: Path
    manifest_path: Path
    epochs_completed: int = 0
    epoch_losses: list[float] = field(default_factory=list)


def _write_manifest(out_dir: Path, config: TrainConfig) -> Path:
    path = out_dir / "manifest.json"
    path.write_text(
        json.dumps(config.manifest(), sort_keys=True, indent=2,
                   ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def _count_truncated(tokenizer, examples: list[TrainExample],
                     limit: int) -> int:
    lengths = (len(ids) for ids in
               tokenizer([x.input_text for x in examples]).input_ids)
    return sum(1 for n in lengths if n > limit)


def _batch_tensors(tokenizer, batch: list[TrainExample],
                   config: TrainConfig) -> dict[str, torch.Tensor]:
    encoded = tokenizer(
        [x.input_text for x in batch], padding=True, truncation=True,
        max_length=config.max_source_length, return_tensors="pt")
    targets = tokenizer(
        text_target=[x.target_text for x in batch], padding=True,
        truncation=True, max_length=config.max_target_length,
        return_tensors="pt")
    labels = targets.input_ids.masked_fill(
        targets.input_ids == tokenizer.pad_token_id, -100)
    return {"input_ids": encoded.input_ids,
            "attention_mask": encoded.attention_mask,
            "labels": labels}


def train(dataset_path: str | Path, config: TrainConfig,
          out_dir: str | Path) -> TrainResult:
    """Fine-tune the configured checkpoint on a prompt-instance file.

    Raises DatasetSchemaError before any side effect when the dataset is
    unusable; afterwards the manifest is the first artifact written.
    """
    examples = load_examples(dataset_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = _write_manifest(out_dir, config)

    tokenizer = AutoTokenizer.from_pretrained(config.checkpoint)
    model = AutoModelForSeq2SeqLM.from_pretrained(config.checkpoint)
    model.train()
    torch.manual_seed(config.seed)

    truncated = _count_truncated(tokenizer, examples,
                                 config.max_source_length)
    if truncated:
        logger.warning("%d of %d sources exceed %d tokens and are truncated",
                       truncated, len(examples), config.max_source_length)

    optimizer = Adafactor(
        model.parameters(), scale_parameter=True, relative_step=True,
        warmup_init=True, lr=None)
    scheduler = AdafactorSchedule(optimizer)

    losses: list[float] = []
    epoch_losses: list[float] = []
    order_rng = random.Random(config.seed)
    step = 0
    epochs_completed = 0
    done = False
    for epoch in range(config.epochs):
        order = list(range(len(examples)))
        order_rng.shuffle(order)
        epoch_sum = 0.0
        epoch_batches = 0
        pending = 0
        for start in range(0, len(order), config.batch_size):
            batch = [examples[i] for i in order[start:start +
                                                config.batch_size]]
            tensors = _batch_tensors(tokenizer, batch, config)
            loss = model(**tensors).loss
            (loss / config.grad_accumulation).backward()
            pending += 1
            epoch_sum += float(loss.detach())
            epoch_batches += 1
            if pending == config.grad_accumulation:
                optimizer.step()
                scheduler.step()
                optimizer.zero_grad()
                step += 1
                losses.append(float(loss.detach()))
                logger.info("step %d: loss %.4f", step, losses[-1])
                pending = 0
                if config.max_steps is not None and step >= config.max_steps:
                    done = True
                    break
        if epoch_batches:
            epoch_losses.append(epoch_sum / epoch_batches)
            logger.info("epoch %d: mean loss %.4f", epoch + 1,
                        epoch_losses[-1])
        if not done:
            epochs_completed = epoch + 1
        if done:
            break

    model.save_pretrained(out_dir)
    tokenizer.save_pretrained(out_dir)
    return TrainResult(
        steps=step, losses=losses, truncated_sources=truncated,
        checkpoint_dir=out_dir, manifest_path=manifest_path,
        epochs_completed=epochs_completed, epoch_losses=epoch_losses)
