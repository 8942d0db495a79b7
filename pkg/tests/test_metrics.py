from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from sotakit.answers import parse_answer
from sotakit.corpus import Quadruple
from sotakit.metrics import (AlignmentError, Score, element_f1,
                             element_f1_macro, general_accuracy, rouge_l,
                             rouge_lsum, rouge_n, tokenize_for_rouge)

APPROX = 1e-12


# ---- hand-computed ROUGE oracles -----------------------------------------

def test_rouge_1_hand_case():
    got = rouge_n("the cat sat".split(), "the cat lay down".split(), 1)
    assert got.precision == pytest.approx(2 / 3, abs=APPROX)
    assert got.recall == pytest.approx(1 / 2, abs=APPROX)
    assert got.fmeasure == pytest.approx(4 / 7, abs=APPROX)


def test_rouge_2_hand_case():
    got = rouge_n("the cat sat".split(), "the cat lay down".split(), 2)
    assert got.precision == pytest.approx(1 / 2, abs=APPROX)
    assert got.recall == pytest.approx(1 / 3, abs=APPROX)
    assert got.fmeasure == pytest.approx(2 / 5, abs=APPROX)


def test_rouge_1_clipping():
    got = rouge_n("a a a".split(), "a a".split(), 1)
    assert got.precision == pytest.approx(2 / 3, abs=APPROX)
    assert got.recall == pytest.approx(1.0, abs=APPROX)


def test_rouge_l_hand_case():
    got = rouge_l("a b c d".split(), "b a c".split())
    assert got.precision == pytest.approx(1 / 2, abs=APPROX)
    assert got.recall == pytest.approx(2 / 3, abs=APPROX)
    assert got.fmeasure == pytest.approx(4 / 7, abs=APPROX)


def test_empty_side_conventions():
    for fn in (lambda p, r: rouge_n(p, r, 1), rouge_l):
        assert fn([], []) == Score(1.0, 1.0, 1.0)
        assert fn(["a"], []) == Score(0.0, 0.0, 0.0)
        assert fn([], ["a"]) == Score(0.0, 0.0, 0.0)
    # the convention applies at the n-gram level: one-token sequences have
    # no bigrams on either side, so rouge_2 sees both sides as empty
    assert rouge_n([], [], 2) == Score(1.0, 1.0, 1.0)
    assert rouge_n(["a"], [], 2) == Score(1.0, 1.0, 1.0)
    assert rouge_n(["a"], ["b"], 2) == Score(1.0, 1.0, 1.0)
    assert rouge_n(["a", "b"], ["c"], 2) == Score(0.0, 0.0, 0.0)
    assert rouge_n([], ["c", "d"], 2) == Score(0.0, 0.0, 0.0)


def test_rouge_1_is_order_blind_but_rouge_l_is_not():
    # multiset equality is enough for unigrams; rouge_l demands the order
    assert rouge_n(["a", "b"], ["b", "a"], 1) == Score(1.0, 1.0, 1.0)
    assert rouge_l(["a", "b"], ["b", "a"]).fmeasure < 1.0


def test_rouge_lsum_union_lcs_hand_case():
    ref = "w1 w2 w3 w4 w5"
    pred = "w1 w2 w6 w7 w8\nw1 w3 w8 w9 w5"
    got = rouge_lsum(pred, ref)
    assert got.recall == pytest.approx(4 / 5, abs=APPROX)
    assert got.precision == pytest.approx(2 / 5, abs=APPROX)
    assert got.fmeasure == pytest.approx(8 / 15, abs=APPROX)


def test_rouge_lsum_clips_repeated_tokens():
    got = rouge_lsum("a", "a b\na c")
    assert got.precision == pytest.approx(1.0, abs=APPROX)
    assert got.recall == pytest.approx(1 / 4, abs=APPROX)
    assert got.fmeasure == pytest.approx(2 / 5, abs=APPROX)


def test_rouge_lsum_single_line_reduces_to_rouge_l():
    pred, ref = "the quick brown fox", "the brown quick fox jumps"
    expect = rouge_l(tokenize_for_rouge(pred), tokenize_for_rouge(ref))
    assert rouge_lsum(pred, ref) == expect


def test_rouge_lsum_empty_sides():
    assert rouge_lsum("", "") == Score(1.0, 1.0, 1.0)
    assert rouge_lsum("words", "") == Score(0.0, 0.0, 0.0)
    assert rouge_lsum("", "words") == Score(0.0, 0.0, 0.0)
    assert rouge_lsum("\n \n", "x") == Score(0.0, 0.0, 0.0)


def test_rouge_tokenization_normalizes():
    assert tokenize_for_rouge("  The\tCAT  ") == ["the", "cat"]
    assert rouge_n(tokenize_for_rouge("The Cat"),
                   tokenize_for_rouge("the cat"), 1).fmeasure == 1.0


def test_rouge_n_rejects_bad_n():
    with pytest.raises(ValueError):
        rouge_n(["a"], ["a"], 0)


_tokens = st.lists(st.sampled_from("abc"), min_size=0, max_size=8)


@given(_tokens, _tokens)
def test_swap_symmetry(a, b):
    """Swapping the arguments swaps precision and recall exactly."""
    for fn in (lambda x, y: rouge_n(x, y, 1), lambda x, y: rouge_n(x, y, 2),
               rouge_l):
        fwd = fn(a, b)
        rev = fn(b, a)
        assert fwd.precision == rev.recall
        assert fwd.recall == rev.precision
        assert fwd.fmeasure == rev.fmeasure


@given(_tokens, _tokens)
def test_scores_bounded(a, b):
    for score in (rouge_n(a, b, 1), rouge_n(a, b, 2), rouge_l(a, b)):
        assert 0.0 <= score.precision <= 1.0
        assert 0.0 <= score.recall <= 1.0
        assert 0.0 <= score.fmeasure <= 1.0


@given(_tokens)
def test_identical_sequences_score_one(a):
    assert rouge_n(a, a, 1) == Score(1.0, 1.0, 1.0)
    assert rouge_l(a, a) == Score(1.0, 1.0, 1.0)


@given(_tokens, _tokens)
def test_rouge_l_is_one_only_for_equal_sequences(a, b):
    if rouge_l(a, b).fmeasure == 1.0:
        assert a == b


# ---- accuracy -------------------------------------------------------------

def _ans(text: str):
    return parse_answer(text)


def test_general_accuracy_hand_case():
    preds = {
        "p1": _ans('[{"task":"T","dataset":"D","metric":"M","score":"1"}]'),
        "p2": _ans("unanswerable"),
        "p3": _ans("garbage"),       # malformed counts as answerable
        "p4": _ans("unanswerable"),
    }
    gold = {"p1": True, "p2": False, "p3": True, "p4": True}
    assert general_accuracy(preds, gold) == pytest.approx(3 / 4)


def test_general_accuracy_alignment():
    with pytest.raises(AlignmentError):
        general_accuracy({"p1": _ans("unanswerable")}, {"p2": False})
    with pytest.raises(AlignmentError):
        general_accuracy({}, {})


# ---- element F1 -----------------------------------------------------------

GOLD = {
    "p1": (Quadruple("Parsing", "Treebank", "UAS", "95.8"),),
    "p2": (Quadruple("MT", "WMT14", "BLEU", "29.1"),
           Quadruple("MT", "WMT16", "BLEU", "34.7")),
}


def test_element_f1_exact_hand_case():
    preds = {
        "p1": _ans('[{"task":"Parsing","dataset":"Penn Treebank",'
                   '"metric":"UAS","score":"95.8"}]'),
        "p2": _ans('[{"task":"MT","dataset":"WMT14","metric":"BLEU",'
                   '"score":"29.1"}]'),
    }
    row = element_f1(preds, GOLD, "dataset", "exact")
    assert (row.tp, row.fp, row.fn) == (1, 1, 2)
    assert row.precision == pytest.approx(1 / 2, abs=APPROX)
    assert row.recall == pytest.approx(1 / 3, abs=APPROX)
    assert row.f1 == pytest.approx(2 / 5, abs=APPROX)


def test_element_f1_partial_substring_either_direction():
    preds = {
        "p1": _ans('[{"task":"Parsing","dataset":"Penn Treebank",'
                   '"metric":"UAS","score":"95.8"}]'),
        "p2": _ans('[{"task":"MT","dataset":"14","metric":"BLEU",'
                   '"score":"29.1"}]'),
    }
    row = element_f1(preds, GOLD, "dataset", "partial")
    # "treebank" is inside "penn treebank"; "14" is inside "wmt14"
    assert (row.tp, row.fp, row.fn) == (2, 0, 1)


def test_element_f1_overall_requires_all_four():
    preds = {
        "p1": _ans('[{"task":"Parsing","dataset":"Treebank",'
                   '"metric":"UAS","score":"95.9"}]'),
        "p2": _ans("unanswerable"),
    }
    row = element_f1(preds, GOLD, "overall", "exact")
    assert (row.tp, row.fp, row.fn) == (0, 1, 3)


def test_element_f1_malformed_gets_zero_credit():
    preds = {"p1": _ans("garbage"), "p2": _ans("more garbage")}
    # gold datasets: treebank + wmt14 + wmt16 (task would dedup to 2)
    row = element_f1(preds, GOLD, "dataset", "exact")
    assert (row.tp, row.fp, row.fn) == (0, 0, 3)
    assert row.f1 == 0.0


def test_element_f1_values_dedup_within_paper():
    preds = {
        "p1": _ans('[{"task":"Parsing","dataset":"A","metric":"M","score":"1"},'
                   '{"task":"Parsing","dataset":"B","metric":"M","score":"2"}]'),
        "p2": _ans("unanswerable"),
    }
    row = element_f1(preds, GOLD, "task", "exact")
    # the repeated "parsing" collapses to one predicted value
    assert (row.tp, row.fp) == (1, 0)


def test_element_f1_greedy_takes_first_unmatched_gold():
    gold = {"p": (Quadruple("T", "ab", "M", "1"),
                  Quadruple("T", "abc", "M", "2"))}
    preds = {"p": _ans('[{"task":"T","dataset":"a","metric":"M","score":"1"}]')}
    row = element_f1(preds, gold, "dataset", "partial")
    assert (row.tp, row.fp, row.fn) == (1, 0, 1)


def test_element_f1_validation_and_alignment():
    with pytest.raises(ValueError):
        element_f1({}, {}, "paper", "exact")
    with pytest.raises(ValueError):
        element_f1({}, {}, "task", "fuzzy")
    with pytest.raises(AlignmentError):
        element_f1({}, GOLD, "task", "exact")


def test_element_f1_macro_hand_case():
    preds = {
        "p1": _ans('[{"task":"Parsing","dataset":"Treebank",'
                   '"metric":"UAS","score":"95.8"}]'),
        "p2": _ans("unanswerable"),
    }
    # p1 perfect (F=1), p2 nothing predicted (F=0)
    assert element_f1_macro(preds, GOLD, "overall", "exact") == \
        pytest.approx(1 / 2, abs=APPROX)
