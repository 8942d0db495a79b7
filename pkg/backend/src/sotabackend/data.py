"""Reader for the prompt-instance JSONL files the pipeline exports.

One record per line with string fields paper_id, template_id, input and
target.  Anything else is a schema error raised before training touches
a model.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

REQUIRED_KEYS = ("paper_id", "template_id", "input", "target")


class DatasetSchemaError(Exception):
    pass


@dataclass(frozen=True)
class TrainExample:
    paper_id: str
    template_id: str
    input_text: str
    target_text: str


def load_examples(path: str | Path) -> list[TrainExample]:
    """Parse a prompt-instance JSONL file, validating every record."""
    examples: list[TrainExample] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetSchemaError(
                    f"{path}:{line_no}: not valid JSON ({exc})")
            if not isinstance(record, dict):
                raise DatasetSchemaError(
                    f"{path}:{line_no}: expected an object, "
                    f"got {type(record).__name__}")
            missing = [k for k in REQUIRED_KEYS if k not in record]
            if missing:
                raise DatasetSchemaError(
                    f"{path}:{line_no}: missing keys {missing}")
            bad = [k for k in REQUIRED_KEYS
                   if not isinstance(record[k], str)]
            if bad:
                raise DatasetSchemaError(
                    f"{path}:{line_no}: non-string values for {bad}")
            if not record["input"]:
                raise DatasetSchemaError(f"{path}:{line_no}: empty input")
            examples.append(TrainExample(
                paper_id=record["paper_id"],
                template_id=record["template_id"],
                input_text=record["input"],
                target_text=record["target"],
            ))
    if not examples:
        raise DatasetSchemaError(f"{path}: dataset is empty")
    return examples
