from __future__ import annotations

import json
from pathlib import Path

import pytest
from transformers import AutoModelForSeq2SeqLM

from sotabackend.data import DatasetSchemaError
from sotabackend.training import TrainConfig, train


def test_config_defaults_match_recipe():
    config = TrainConfig(checkpoint="anything")
    assert config.epochs == 5
    assert config.batch_size == 4
    assert config.grad_accumulation == 1
    assert config.max_source_length == 512
    manifest = config.manifest()
    assert manifest["optimizer"] == {
        "name": "adafactor", "schedule": "adafactor",
        "scale_parameter": True, "relative_step": True,
        "warmup_init": True, "lr": None}


def test_config_rejects_nonpositive_sizes():
    with pytest.raises(ValueError):
        TrainConfig(checkpoint="x", epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(checkpoint="x", batch_size=0)


def test_short_run_trains_and_saves(toy_data: Path, toy_checkpoint: Path,
                                    tmp_path: Path):
    config = TrainConfig(checkpoint=str(toy_checkpoint), max_steps=2)
    result = train(toy_data, config, tmp_path / "run")
    assert result.steps == 2
    assert len(result.losses) == 2
    assert result.truncated_sources == 0
    reloaded = AutoModelForSeq2SeqLM.from_pretrained(result.checkpoint_dir)
    assert reloaded.config.model_type == "t5"


def test_manifest_written_before_first_step(toy_data: Path,
                                            toy_checkpoint: Path,
                                            tmp_path: Path):
    manifest_path = tmp_path / "run" / "manifest.json"
    config = TrainConfig(checkpoint=str(toy_checkpoint), max_steps=1)
    result = train(toy_data, config, tmp_path / "run")
    assert result.manifest_path == manifest_path
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    assert manifest["epochs"] == 5
    assert manifest["batch_size"] == 4
    assert manifest["grad_accumulation"] == 1
    assert manifest["seed"] == 13
    assert manifest["max_steps"] == 1


def test_manifest_survives_bad_checkpoint(toy_data: Path, tmp_path: Path):
    config = TrainConfig(checkpoint=str(tmp_path / "no-such-checkpoint"))
    with pytest.raises(Exception):
        train(toy_data, config, tmp_path / "run")
    assert (tmp_path / "run" / "manifest.json").exists()


def test_empty_dataset_fails_before_side_effects(toy_checkpoint: Path,
                                                 tmp_path: Path):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("", encoding="utf-8")
    config = TrainConfig(checkpoint=str(toy_checkpoint))
    with pytest.raises(DatasetSchemaError):
        train(empty, config, tmp_path / "run")
    assert not (tmp_path / "run").exists()


def test_overlength_sources_are_counted(toy_checkpoint: Path,
                                        tmp_path: Path):
    data = tmp_path / "long.jsonl"
    with open(data, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({
            "paper_id": "p1", "template_id": "T1",
            "input": "word " * 40, "target": "unanswerable"}) + "\n")
        fh.write(json.dumps({
            "paper_id": "p1", "template_id": "T2",
            "input": "short input", "target": "unanswerable"}) + "\n")
    config = TrainConfig(checkpoint=str(toy_checkpoint),
                         max_source_length=16, max_steps=1)
    result = train(data, config, tmp_path / "run")
    assert result.truncated_sources == 1


def test_epoch_cap_without_max_steps(toy_data: Path, toy_checkpoint: Path,
                                     tmp_path: Path):
    config = TrainConfig(checkpoint=str(toy_checkpoint), epochs=1)
    result = train(toy_data, config, tmp_path / "run")
    assert result.epochs_completed == 1
    assert result.steps == 8
    assert len(result.epoch_losses) == 1
