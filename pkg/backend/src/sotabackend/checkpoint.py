"""Build a tiny local seq2seq checkpoint for tests and smoke runs.

The real service loads any seq2seq checkpoint by name or path; CI cannot
download one, so this constructs a word-level tokenizer from sample text
plus a randomly initialized two-layer encoder-decoder, saved in the
standard checkpoint directory layout (config.json, model weights,
tokenizer files).
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable

import torch
from tokenizers import Tokenizer, models, pre_tokenizers, trainers
from transformers import (PreTrainedTokenizerFast, T5Config,
                          T5ForConditionalGeneration)

PAD, EOS, UNK = "<pad>", "</s>", "<unk>"

DEFAULT_TEXTS = (
    "Title: a paper Abstract: we evaluate parsing ExpSetup: one gpu "
    "TableInfo: Model | Accuracy",
    "What are the values for the following properties to construct a "
    "Leaderboard for the model introduced in this article: task, dataset, "
    "metric, and score?",
    '[{"task":"Parsing","dataset":"PTB","metric":"UAS","score":"95.8"}]',
    "unanswerable",
)


def build_tokenizer(texts: Iterable[str]) -> PreTrainedTokenizerFast:
    """Word-level tokenizer over whitespace, vocabulary from texts."""
    tokenizer = Tokenizer(models.WordLevel(unk_token=UNK))
    tokenizer.pre_tokenizer = pre_tokenizers.WhitespaceSplit()
    trainer = trainers.WordLevelTrainer(special_tokens=[PAD, EOS, UNK])
    tokenizer.train_from_iterator(texts, trainer)
    return PreTrainedTokenizerFast(
        tokenizer_object=tokenizer, pad_token=PAD, eos_token=EOS,
        unk_token=UNK, model_max_length=512)


def build_toy_checkpoint(
    out_dir: str | Path,
    texts: Iterable[str] = DEFAULT_TEXTS,
    seed: int = 0,
    d_model: int = 64,
    num_layers: int = 2,
    num_heads: int = 4,
) -> Path:
    """Write a loadable random checkpoint to out_dir and return the path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tokenizer = build_tokenizer(texts)
    config = T5Config(
        vocab_size=tokenizer.vocab_size,
        d_model=d_model,
        d_kv=d_model // num_heads,
        d_ff=2 * d_model,
        num_layers=num_layers,
        num_decoder_layers=num_layers,
        num_heads=num_heads,
        # Smoke runs compare losses across a handful of steps; dropout
        # noise would swamp that trend, so the toy model trains without it.
        dropout_rate=0.0,
        decoder_start_token_id=tokenizer.pad_token_id,
        pad_token_id=tokenizer.pad_token_id,
        eos_token_id=tokenizer.eos_token_id,
    )
    torch.manual_seed(seed)
    model = T5ForConditionalGeneration(config)
    model.save_pretrained(out_dir)
    tokenizer.save_pretrained(out_dir)
    return out_dir
