"""Parse LaTeX source bundles into structured documents.

This is a deliberately small extraction parser, not a TeX engine: it resolves
\\input/\\include splices, strips comments, and pulls out the title, abstract,
section bodies and table captions/headers.  Math is replaced by a placeholder
token and unknown commands are reduced to their braced argument text.  A short
drop-list removes commands whose arguments are not prose (labels, citation
keys, graphics paths and the like).
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

logger = logging.getLogger(__name__)

MATH_PLACEHOLDER = "<math>"

# Environments whose body is math: replaced wholesale by the placeholder.
_MATH_ENVS = {
    "equation", "equation*", "align", "align*", "alignat", "alignat*",
    "math", "displaymath", "eqnarray", "eqnarray*", "gather", "gather*",
    "multline", "multline*",
}

# Environments dropped with their entire content.
_SKIP_ENVS = {
    "figure", "figure*", "thebibliography", "verbatim", "lstlisting",
    "tikzpicture", "filecontents", "filecontents*", "comment",
}

# Commands whose arguments carry no prose and are discarded with them.
_DROP_COMMANDS = {
    "label", "cite", "citep", "citet", "citealp", "citealt", "citeauthor",
    "citeyear", "ref", "eqref", "autoref", "cref", "Cref", "pageref",
    "includegraphics", "usepackage", "documentclass", "bibliography",
    "bibliographystyle", "graphicspath", "vspace", "hspace", "setlength",
    "addtolength", "newcommand", "renewcommand", "def", "input", "include",
}

_ESCAPES = {
    "%": "%", "&": "&", "_": "_", "$": "$", "#": "#",
    "{": "{", "}": "}", " ": " ",
}

_COMMENT_RE = re.compile(r"(?<!\\)%[^\n]*")
_INCLUDE_RE = re.compile(r"\\(?:input|include)\{([^}]*)\}")


class LatexIngestError(Exception):
    """Base class for bundle parsing failures; carries the paper id."""

    def __init__(self, paper_id: str, message: str) -> None:
        super().__init__(f"{paper_id}: {message}")
        self.paper_id = paper_id


class MissingMainFile(LatexIngestError):
    def __init__(self, paper_id: str, main_file: str) -> None:
        super().__init__(paper_id, f"main file {main_file!r} not in bundle")
        self.main_file = main_file


class UnparsableSource(LatexIngestError):
    def __init__(self, paper_id: str) -> None:
        super().__init__(paper_id, "no title, abstract or sections recoverable")


@dataclass(frozen=True)
class PaperSource:
    """One paper's LaTeX bundle: relative path -> file text."""

    paper_id: str
    files: dict[str, str]
    main_file: str

    def __post_init__(self) -> None:
        if not self.paper_id:
            raise ValueError("paper_id must be non-empty")


@dataclass(frozen=True)
class TableInfo:
    caption: str
    header_cells: tuple[str, ...]
    column_count: int


@dataclass
class StructuredDoc:
    title: str
    abstract: str
    sections: list[tuple[str, str]] = field(default_factory=list)
    tables: list[TableInfo] = field(default_factory=list)


def _resolve_includes(source: PaperSource) -> str:
    """Splice \\input/\\include files into the main file, depth-first."""

    seen: set[str] = set()

    def resolve(name: str) -> str:
        text = source.files[name]
        seen.add(name)

        def splice(match: re.Match[str]) -> str:
            target = match.group(1).strip()
            for candidate in (target, target + ".tex"):
                candidate = candidate.lstrip("./")
                if candidate in source.files:
                    if candidate in seen:
                        logger.warning(
                            "%s: circular include of %r skipped",
                            source.paper_id, candidate)
                        return " "
                    return resolve(candidate)
            logger.warning(
                "%s: include target %r not in bundle, skipped",
                source.paper_id, target)
            return " "

        return _INCLUDE_RE.sub(splice, text)

    return resolve(source.main_file)


def _find_group(text: str, start: int) -> tuple[str, int] | None:
    """Return (content, end) for the brace group opening at text[start]."""
    if start >= len(text) or text[start] != "{":
        return None
    depth = 0
    i = start
    while i < len(text):
        c = text[i]
        if c == "\\":
            i += 2
            continue
        if c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
            if depth == 0:
                return text[start + 1:i], i + 1
        i += 1
    return None


def _skip_optional(text: str, i: int) -> int:
    if i < len(text) and text[i] == "[":
        end = text.find("]", i)
        if end != -1:
            return end + 1
    return i


def _group_after(text: str, pos: int) -> tuple[str, int] | None:
    """Brace group following pos, skipping whitespace and one [..] block."""
    i = pos
    while i < len(text) and text[i].isspace():
        i += 1
    i = _skip_optional(text, i)
    while i < len(text) and text[i].isspace():
        i += 1
    return _find_group(text, i)


def _find_env_end(text: str, env: str, start: int) -> int:
    """Index just past \\end{env}, honouring nesting of the same env."""
    begin_tok = "\\begin{" + env + "}"
    end_tok = "\\end{" + env + "}"
    depth = 1
    i = start
    while i < len(text):
        nb = text.find(begin_tok, i)
        ne = text.find(end_tok, i)
        if ne == -1:
            return len(text)
        if nb != -1 and nb < ne:
            depth += 1
            i = nb + len(begin_tok)
            continue
        depth -= 1
        i = ne + len(end_tok)
        if depth == 0:
            return i
    return len(text)


_CMD_NAME_RE = re.compile(r"[A-Za-z]+\*?")


def strip_latex(text: str) -> str:
    """Reduce a LaTeX fragment to plain text.

    Math becomes MATH_PLACEHOLDER, generic commands keep their argument
    text, drop-listed commands disappear with their arguments, and
    whitespace runs collapse to single spaces.
    """
    out: list[str] = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "$":
            if i + 1 < n and text[i + 1] == "$":
                end = text.find("$$", i + 2)
                i = (end + 2) if end != -1 else n
            else:
                end = text.find("$", i + 1)
                i = (end + 1) if end != -1 else n
            out.append(" %s " % MATH_PLACEHOLDER)
            continue
        if c == "~":
            out.append(" ")
            i += 1
            continue
        if c in "{}":
            i += 1
            continue
        if c != "\\":
            out.append(c)
            i += 1
            continue

        # Backslash: escape, line break, inline math, or command.
        if i + 1 >= n:
            break
        nxt = text[i + 1]
        if nxt in _ESCAPES:
            out.append(_ESCAPES[nxt])
            i += 2
            continue
        if nxt == "\\":
            out.append(" ")
            i += 2
            continue
        if nxt in "([":
            closer = "\\)" if nxt == "(" else "\\]"
            end = text.find(closer, i + 2)
            i = (end + 2) if end != -1 else n
            out.append(" %s " % MATH_PLACEHOLDER)
            continue
        m = _CMD_NAME_RE.match(text, i + 1)
        if m is None:
            # Unknown control symbol (\-, \' etc.): drop it.
            i += 2
            continue
        name = m.group(0)
        i = m.end()

        if name == "begin":
            grp = _find_group(text, i)
            if grp is None:
                continue
            env, i = grp
            env = env.strip()
            if env in _MATH_ENVS:
                i = _find_env_end(text, env, i)
                out.append(" %s " % MATH_PLACEHOLDER)
            elif env in _SKIP_ENVS:
                i = _find_env_end(text, env, i)
            # Other environments: markers removed, content scanned inline.
            continue
        if name == "end":
            grp = _find_group(text, i)
            if grp is not None:
                i = grp[1]
            continue
        if name == "item":
            out.append(" ")
            continue
        if name in _DROP_COMMANDS:
            i = _skip_optional(text, i)
            while True:
                grp = _find_group(text, i)
                if grp is None:
                    break
                i = grp[1]
            continue
        if name == "href":
            grp = _find_group(text, i)
            if grp is not None:
                i = grp[1]
                grp = _find_group(text, i)
                if grp is not None:
                    out.append(strip_latex(grp[0]))
                    i = grp[1]
            continue

        # Generic command: keep the text of its brace groups, which abut
        # the following text like TeX group output does.
        i = _skip_optional(text, i)
        took_group = False
        while True:
            grp = _find_group(text, i)
            if grp is None:
                break
            out.append(strip_latex(grp[0]))
            took_group = True
            i = grp[1]
        if not took_group:
            out.append(" ")
    return " ".join("".join(out).split())


def _extract_env_blocks(text: str, env: str) -> tuple[list[str], str]:
    """Return the bodies of all env blocks and the text with them removed."""
    begin_tok = "\\begin{" + env + "}"
    blocks: list[str] = []
    remaining: list[str] = []
    i = 0
    while True:
        start = text.find(begin_tok, i)
        if start == -1:
            remaining.append(text[i:])
            break
        remaining.append(text[i:start])
        body_start = start + len(begin_tok)
        end = _find_env_end(text, env, body_start)
        end_tok = "\\end{" + env + "}"
        body_end = end - len(end_tok) if text[:end].endswith(end_tok) else end
        blocks.append(text[body_start:body_end])
        i = end
    return blocks, "".join(remaining)


def _split_cells(row: str) -> list[str]:
    """Split a tabular row on unescaped & at brace depth zero."""
    cells: list[str] = []
    depth = 0
    cur: list[str] = []
    i = 0
    while i < len(row):
        c = row[i]
        if c == "\\" and i + 1 < len(row):
            cur.append(row[i:i + 2])
            i += 2
            continue
        if c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
        if c == "&" and depth == 0:
            cells.append("".join(cur))
            cur = []
        else:
            cur.append(c)
        i += 1
    cells.append("".join(cur))
    return cells


def _colspec_count(spec: str) -> int:
    return len(re.findall(r"[lcrX]|[pmb]\{[^}]*\}", spec))


def _parse_tabular(body: str) -> tuple[tuple[str, ...], int]:
    """First data row of a tabular body as stripped cells, plus column count."""
    spec_cols = 0
    grp = _find_group(body, _skip_optional(body, 0))
    if grp is not None:
        spec_cols = _colspec_count(grp[0])
        body = body[grp[1]:]
    for raw_row in body.split("\\\\"):
        cells = [strip_latex(c) for c in _split_cells(raw_row)]
        cells = [c for c in cells if c]
        if cells:
            return tuple(cells), (len(cells) or spec_cols)
    return (), spec_cols


def _extract_tables(text: str) -> tuple[list[TableInfo], str]:
    tables: list[TableInfo] = []

    def table_from_block(block: str) -> None:
        caption = ""
        cap_m = re.search(r"\\caption(?![A-Za-z])", block)
        if cap_m is not None:
            grp = _group_after(block, cap_m.end())
            if grp is not None:
                caption = strip_latex(grp[0])
        header: tuple[str, ...] = ()
        cols = 0
        tab_blocks, _ = _extract_env_blocks(block, "tabular")
        if tab_blocks:
            header, cols = _parse_tabular(tab_blocks[0])
        if caption or header:
            tables.append(TableInfo(caption, header, max(cols, len(header), 1)))

    for env in ("table", "table*"):
        blocks, text = _extract_env_blocks(text, env)
        for block in blocks:
            table_from_block(block)
    # Bare tabulars outside any table environment.
    bare, text = _extract_env_blocks(text, "tabular")
    for body in bare:
        header, cols = _parse_tabular(body)
        if header:
            tables.append(TableInfo("", header, max(cols, len(header), 1)))
    return tables, text


_SECTION_RE = re.compile(r"\\(?:sub)?section(\*?)\s*(?=\{)")


def parse_bundle(source: PaperSource) -> StructuredDoc:
    """Parse a bundle into title, abstract, sections and tables.

    Raises MissingMainFile if the declared main file is absent and
    UnparsableSource when nothing at all can be recovered.
    """
    if source.main_file not in source.files:
        raise MissingMainFile(source.paper_id, source.main_file)

    text = _resolve_includes(source)
    text = _COMMENT_RE.sub("", text)

    abstracts, text = _extract_env_blocks(text, "abstract")
    abstract = strip_latex(" ".join(abstracts))

    tables, text = _extract_tables(text)

    title = ""
    title_m = re.search(r"\\title(?![A-Za-z])", text)
    if title_m is not None:
        grp = _group_after(text, title_m.end())
        if grp is not None:
            title = strip_latex(grp[0])

    sections: list[tuple[str, str]] = []
    marks: list[tuple[int, int, str, bool]] = []  # (start, body_from, heading, starred)
    for m in _SECTION_RE.finditer(text):
        grp = _find_group(text, m.end())
        if grp is None:
            continue
        heading = strip_latex(grp[0])
        marks.append((m.start(), grp[1], heading, m.group(1) == "*"))
    title_fallback_used = False
    for k, (start, body_from, heading, starred) in enumerate(marks):
        body_to = marks[k + 1][0] if k + 1 < len(marks) else len(text)
        body = strip_latex(text[body_from:body_to])
        if not title and starred and not title_fallback_used:
            title = heading
            title_fallback_used = True
            continue
        sections.append((heading, body))

    if not title and not abstract and not sections:
        raise UnparsableSource(source.paper_id)
    return StructuredDoc(title=title, abstract=abstract,
                         sections=sections, tables=tables)


def detect_main_file(paper_id: str, files: dict[str, str]) -> str:
    """Pick the file containing \\documentclass; ties break lexicographically."""
    candidates = sorted(
        name for name, body in files.items()
        if "\\documentclass" in _COMMENT_RE.sub("", body))
    if len(candidates) > 1:
        logger.warning("%s: several \\documentclass files %s, using %r",
                       paper_id, candidates, candidates[0])
    if candidates:
        return candidates[0]
    if len(files) == 1:
        return next(iter(files))
    raise MissingMainFile(paper_id, "<no \\documentclass candidate>")
