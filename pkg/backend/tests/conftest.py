from __future__ import annotations

import json
from pathlib import Path

import pytest

from sotabackend.checkpoint import build_toy_checkpoint
from sotabackend.data import load_examples

QUESTION = ("What are the values for the following properties to construct "
            "a Leaderboard for the model introduced in this article: task, "
            "dataset, metric, and score?")

# Four paper ids crossed with eight pseudo-templates give 32 rows, but
# every row carries the same input and target text: batches are then
# identical regardless of shuffling, so a 10-step smoke run shows the
# optimizer's effect rather than batch-composition noise.
CONTEXT = "Title: parsing paper Abstract: accuracy gains on the benchmark"
TARGET = '[{"task":"Parsing","dataset":"PTB","metric":"UAS","score":"95.8"}]'

PAPER_IDS = ("p-a", "p-b", "p-c", "p-d")


@pytest.fixture(scope="session")
def toy_data(tmp_path_factory: pytest.TempPathFactory) -> Path:
    path = tmp_path_factory.mktemp("data") / "instances.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        for paper_id in PAPER_IDS:
            for t in range(1, 9):
                fh.write(json.dumps({
                    "paper_id": paper_id,
                    "template_id": f"T{t}",
                    "input": f"{CONTEXT} \n {QUESTION}",
                    "target": TARGET,
                }, sort_keys=True) + "\n")
    return path


@pytest.fixture(scope="session")
def toy_checkpoint(tmp_path_factory: pytest.TempPathFactory,
                   toy_data: Path) -> Path:
    examples = load_examples(toy_data)
    texts = [x.input_text for x in examples] + \
        [x.target_text for x in examples]
    return build_toy_checkpoint(tmp_path_factory.mktemp("ckpt"), texts=texts)
