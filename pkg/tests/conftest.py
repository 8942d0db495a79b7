from __future__ import annotations

from pathlib import Path

import pytest

from sotakit import latex

FIXTURES = Path(__file__).parent / "fixtures"
PAPERS = FIXTURES / "papers"


def load_source(paper_id: str, main_file: str) -> latex.PaperSource:
    paper_dir = PAPERS / paper_id
    files = {
        str(f.relative_to(paper_dir)): f.read_text(encoding="utf-8")
        for f in sorted(paper_dir.rglob("*.tex"))
    }
    return latex.PaperSource(paper_id=paper_id, files=files, main_file=main_file)


@pytest.fixture(scope="session")
def sample_doc() -> latex.StructuredDoc:
    return latex.parse_bundle(load_source("p-parse-01", "main.tex"))
