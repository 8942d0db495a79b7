"""Text-overlap metrics: ROUGE variants, general accuracy, element-wise F1.

ROUGE here is the recall/precision/F flavour over normalized whitespace
tokens: rouge_n counts clipped n-gram overlap, rouge_l uses the longest
common subsequence, and rouge_lsum applies union-LCS over newline-separated
sentences with per-token clipping.  Empty-side conventions: both sides
empty scores 1.0, exactly one side empty scores 0.0.

Element-wise F1 micro-averages greedy one-to-one matches of normalized
values per paper; partial mode accepts substring containment in either
direction.
"""

from __future__ import annotations

from collections import Counter
from typing import Mapping, NamedTuple, Sequence

from .answers import ANSWER_SET, ParsedAnswer, classify_answerable
from .corpus import Quadruple, normalize


class Score(NamedTuple):
    precision: float
    recall: float
    fmeasure: float


ELEMENTS = ("task", "dataset", "metric", "score", "overall")
MODES = ("exact", "partial")


class AlignmentError(Exception):
    pass


def tokenize_for_rouge(text: str) -> list[str]:
    return normalize(text).split()


def _score(hits: int, pred_total: int, ref_total: int) -> Score:
    if pred_total == 0 and ref_total == 0:
        return Score(1.0, 1.0, 1.0)
    if pred_total == 0 or ref_total == 0:
        return Score(0.0, 0.0, 0.0)
    p = hits / pred_total
    r = hits / ref_total
    f = 0.0 if p + r == 0 else 2 * p * r / (p + r)
    return Score(p, r, f)


def rouge_n(pred: Sequence[str], ref: Sequence[str], n: int) -> Score:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    pred_grams = Counter(tuple(pred[i:i + n]) for i in range(len(pred) - n + 1))
    ref_grams = Counter(tuple(ref[i:i + n]) for i in range(len(ref) - n + 1))
    pred_total = sum(pred_grams.values())
    ref_total = sum(ref_grams.values())
    if pred_total == 0 or ref_total == 0:
        return _score(0, pred_total, ref_total)
    hits = sum((pred_grams & ref_grams).values())
    return _score(hits, pred_total, ref_total)


def _lcs_len(a: Sequence[str], b: Sequence[str]) -> int:
    # Single-row DP; the inner loop is the hot path for exhaustive checks.
    row = [0] * (len(b) + 1)
    for x in a:
        diag = 0
        for j, y in enumerate(b, 1):
            cur = row[j]
            if x == y:
                row[j] = diag + 1
            elif row[j - 1] > cur:
                row[j] = row[j - 1]
            diag = cur
    return row[-1]


def rouge_l(pred: Sequence[str], ref: Sequence[str]) -> Score:
    if not pred or not ref:
        return _score(0, len(pred), len(ref))
    return _score(_lcs_len(pred, ref), len(pred), len(ref))


def _lcs_ref_indices(ref: Sequence[str], pred: Sequence[str]) -> list[int]:
    """Reference-side indices of one canonical LCS (standard backtrace)."""
    m, n = len(ref), len(pred)
    table = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        prev = table[i - 1]
        cur = table[i]
        ri = ref[i - 1]
        for j in range(1, n + 1):
            if ri == pred[j - 1]:
                cur[j] = prev[j - 1] + 1
            else:
                up = prev[j]
                left = cur[j - 1]
                cur[j] = up if up >= left else left
    out: list[int] = []
    i, j = m, n
    while i > 0 and j > 0:
        if ref[i - 1] == pred[j - 1] and table[i][j] == table[i - 1][j - 1] + 1:
            out.append(i - 1)
            i -= 1
            j -= 1
        elif table[i - 1][j] >= table[i][j - 1]:
            i -= 1
        else:
            j -= 1
    out.reverse()
    return out


def rouge_lsum(pred_text: str, ref_text: str) -> Score:
    """Summary-level ROUGE-L: union-LCS across newline sentences, clipped.

    Each reference sentence takes the union of its LCS matches against
    every prediction sentence; matched tokens are clipped by their count
    in the prediction so a token cannot be credited more often than it
    occurs.  A single-sentence pair reduces to rouge_l.
    """
    ref_sents = [tokenize_for_rouge(s) for s in ref_text.split("\n")]
    ref_sents = [s for s in ref_sents if s]
    pred_sents = [tokenize_for_rouge(s) for s in pred_text.split("\n")]
    pred_sents = [s for s in pred_sents if s]
    ref_total = sum(len(s) for s in ref_sents)
    pred_total = sum(len(s) for s in pred_sents)
    if ref_total == 0 or pred_total == 0:
        return _score(0, pred_total, ref_total)

    pred_budget = Counter(tok for s in pred_sents for tok in s)
    hits = 0
    for ref_sent in ref_sents:
        union: set[int] = set()
        for pred_sent in pred_sents:
            union.update(_lcs_ref_indices(ref_sent, pred_sent))
        for idx in sorted(union):
            tok = ref_sent[idx]
            if pred_budget[tok] > 0:
                pred_budget[tok] -= 1
                hits += 1
    return _score(hits, pred_total, ref_total)


def general_accuracy(
    predictions: Mapping[str, ParsedAnswer],
    gold_answerable: Mapping[str, bool],
) -> float:
    """Share of papers whose answerability verdict matches gold."""
    if set(predictions) != set(gold_answerable):
        raise AlignmentError(
            "prediction/gold paper ids differ: "
            f"only-pred={sorted(set(predictions) - set(gold_answerable))[:5]} "
            f"only-gold={sorted(set(gold_answerable) - set(predictions))[:5]}")
    if not predictions:
        raise AlignmentError("empty prediction set")
    correct = sum(
        1 for pid, parsed in predictions.items()
        if classify_answerable(parsed).answerable == gold_answerable[pid])
    return correct / len(predictions)


class F1Row(NamedTuple):
    element: str
    mode: str
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int


def _matches(a: str, b: str, mode: str) -> bool:
    if mode == "exact":
        return a == b
    return a == b or a in b or b in a


def _paper_values(quads: Sequence[Quadruple], element: str) -> list:
    values: list = []
    seen = set()
    for q in quads:
        if element == "overall":
            v: object = q.tdm + (normalize(q.score),)
        else:
            v = normalize(getattr(q, element))
        if v not in seen:
            seen.add(v)
            values.append(v)
    return values


def _greedy_counts(pred_vals: list, gold_vals: list,
                   element: str, mode: str) -> tuple[int, int, int]:
    matched = [False] * len(gold_vals)
    tp = 0
    for pv in pred_vals:
        for g, gv in enumerate(gold_vals):
            if matched[g]:
                continue
            if element == "overall":
                ok = all(_matches(pc, gc, mode) for pc, gc in zip(pv, gv))
            else:
                ok = _matches(pv, gv, mode)
            if ok:
                matched[g] = True
                tp += 1
                break
    fp = len(pred_vals) - tp
    fn = len(gold_vals) - tp
    return tp, fp, fn


def element_f1(
    predictions: Mapping[str, ParsedAnswer],
    gold: Mapping[str, Sequence[Quadruple]],
    element: str,
    mode: str = "exact",
) -> F1Row:
    """Micro-averaged element F1 over papers with gold answer sets.

    Values are normalized and de-duplicated per paper, then matched
    greedily one-to-one in serialization order.  Unanswerable or malformed
    predictions contribute no values (all gold becomes false negatives).
    """
    if element not in ELEMENTS:
        raise ValueError(f"unknown element {element!r}")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    missing = set(gold) - set(predictions)
    if missing:
        raise AlignmentError(f"gold papers without predictions: "
                             f"{sorted(missing)[:5]}")
    tp = fp = fn = 0
    for pid, gold_quads in gold.items():
        parsed = predictions[pid]
        pred_quads = parsed.quadruples if parsed.verdict == ANSWER_SET else ()
        ptp, pfp, pfn = _greedy_counts(
            _paper_values(pred_quads, element),
            _paper_values(gold_quads, element), element, mode)
        tp += ptp
        fp += pfp
        fn += pfn
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 0.0 if p + r == 0 else 2 * p * r / (p + r)
    return F1Row(element, mode, p, r, f, tp, fp, fn)


def element_f1_macro(
    predictions: Mapping[str, ParsedAnswer],
    gold: Mapping[str, Sequence[Quadruple]],
    element: str,
    mode: str = "exact",
) -> float:
    """Mean of per-paper F1 (companion number to the micro rows)."""
    if not gold:
        return 0.0
    total = 0.0
    for pid, gold_quads in gold.items():
        parsed = predictions[pid]
        pred_quads = parsed.quadruples if parsed.verdict == ANSWER_SET else ()
        tp, fp, fn = _greedy_counts(
            _paper_values(pred_quads, element),
            _paper_values(gold_quads, element), element, mode)
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        total += 0.0 if p + r == 0 else 2 * p * r / (p + r)
    return total / len(gold)
