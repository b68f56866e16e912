"""Bundled hand-traced fixtures, run by ``adaptbpe self-test``."""

from __future__ import annotations

import random
from fractions import Fraction
from typing import TextIO

from adaptbpe.adapt import AdaptConfig, adapt
from adaptbpe.baselines import first_k, first_k_positive, top_k
from adaptbpe.engine import reference_tokenize, tokenize_corpus, tokenize_word
from adaptbpe.errors import EmptyCorpus
from adaptbpe.merges import build_merge_table
from adaptbpe.pretokenize import PretokenizerSpec, WordHistogram, build_histogram

FIXTURE_ALPHABET = "abcd"
FIXTURE_MERGES = [("a", "b"), ("ab", "c"), ("c", "d"), ("ab", "ab"), ("abc", "d")]
FIXTURE_TEXTS = ["abab abab abcd", "abab abcd cd cd cd cd cd"]


def fixture():
    table = build_merge_table(FIXTURE_ALPHABET, FIXTURE_MERGES)
    hist = build_histogram(FIXTURE_TEXTS, PretokenizerSpec.whitespace())
    return table, hist


def _cu(total: int, base: int) -> Fraction:
    return Fraction(base - total, base)


def _checks():
    table, hist = fixture()
    base = hist.total_base_symbols

    def adaptation():
        r = adapt(table, hist, AdaptConfig(budget=2))
        t = r.swap_trace
        return (
            len(t) == 1
            and (t[0].demoted_rank, t[0].demoted_freq, t[0].promoted_rank, t[0].promoted_freq) == (1, 2, 2, 5)
            and sorted(r.table.actual_ranks()) == [0, 2]
            and r.table.virtual_ranks() == [1]
            and r.incremental_token_total == 15
            and r.canonical_token_total == 17
            and r.merge_depth == 2
        )

    def cu_first_k():
        total = tokenize_corpus(first_k(table, 2), hist).token_total
        return total == 20 and _cu(total, base) == Fraction(1, 3)

    def cu_adapt():
        r = adapt(table, hist, AdaptConfig(budget=2))
        total = tokenize_corpus(r.table, hist).token_total
        return _cu(total, base) == Fraction(13, 30)

    def top_k_total():
        return tokenize_corpus(top_k(table, hist, 2), hist).token_total == 16

    def first_k_pos():
        t = build_merge_table("abcd", [("a", "b"), ("c", "d"), ("ab", "ab")])
        h = WordHistogram(PretokenizerSpec.whitespace())
        h.counts["abab"] = 2
        out = first_k_positive(t, h, 2)
        return sorted(out.actual_ranks()) == [0, 2] and out.virtual_ranks() == [1]

    def empty_corpus_guard():
        try:
            adapt(table, WordHistogram(PretokenizerSpec.whitespace()), AdaptConfig(budget=2))
        except EmptyCorpus:
            return True
        return False

    def oracle_smoke():
        rng = random.Random(0)
        for _ in range(100):
            word = "".join(rng.choice(FIXTURE_ALPHABET) for _ in range(rng.randint(0, 12)))
            if tokenize_word(table, word) != reference_tokenize(table, word):
                return False
        return True

    return [
        ("adaptation trace (N=2)", adaptation),
        ("CU First_2 = 1/3", cu_first_k),
        ("CU Adapt-BPE canonical = 13/30", cu_adapt),
        ("Top_2 token total = 16", top_k_total),
        ("First_{k>0} budget accounting", first_k_pos),
        ("empty-corpus guard", empty_corpus_guard),
        ("oracle equivalence smoke (100 words)", oracle_smoke),
    ]


def run_self_test(out: TextIO) -> bool:
    ok = True
    for name, check in _checks():
        try:
            passed = bool(check())
        except Exception as exc:  # report, keep going
            passed = False
            name = f"{name} ({type(exc).__name__}: {exc})"
        ok &= passed
        out.write(f"{'PASS' if passed else 'FAIL'}  {name}\n")
    return ok
