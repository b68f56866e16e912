import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptbpe.engine import (
    Encoder,
    apply_merges,
    count_pair,
    detokenize,
    phase1_corpus,
    reference_tokenize,
    to_base_ids,
    tokenize_corpus,
    tokenize_word,
)
from adaptbpe.errors import UnknownSymbol
from adaptbpe.merges import VIRTUAL, build_merge_table
from adaptbpe.pretokenize import BYTE_ALPHABET, PretokenizerSpec
from helpers import (
    fixture_hist,
    fixture_table,
    histogram,
    oracle_pair_count,
    oracle_tokenize,
    random_table,
    random_word,
    table_and_words,
)


def surfaces(table, ids):
    return [table.surface(i) for i in ids]


def test_fixture_first_two_merges():
    t = fixture_table().prefix(2)
    assert surfaces(t, tokenize_word(t, "abab")) == ["ab", "ab"]
    assert surfaces(t, tokenize_word(t, "abcd")) == ["abc", "d"]
    assert surfaces(t, tokenize_word(t, "cd")) == ["c", "d"]
    assert tokenize_corpus(t, fixture_hist()).token_total == 20


def test_virtual_token_split_back_after_children_fire():
    t = fixture_table().subset([0, 1, 2], {1: VIRTUAL})
    # (ab, c) fires first and eats the c, so (c, d) never sees it
    assert surfaces(t, tokenize_word(t, "abcd")) == ["ab", "c", "d"]
    assert surfaces(t, apply_merges(t, to_base_ids(t, "abcd"))) == ["abc", "d"]


def test_run_of_equal_symbols_is_leftmost_non_overlapping():
    t = build_merge_table("a", [("a", "a")])
    assert surfaces(t, tokenize_word(t, "aaaaa")) == ["aa", "aa", "a"]
    assert count_pair([0, 0, 0, 0, 0], 0, 0) == 2


def test_unknown_unit():
    with pytest.raises(UnknownSymbol):
        tokenize_word(fixture_table(), "abz")


def test_phase1_corpus_keeps_virtual_tokens():
    t = fixture_table().subset([0, 1, 2], {1: VIRTUAL})
    p1 = phase1_corpus(t, fixture_hist())
    assert surfaces(t, p1.as_dict()["abcd"]) == ["abc", "d"]


def test_oracle_equivalence_seeded():
    rng = random.Random(1234)
    for _ in range(2000):
        table = random_table(rng)
        for r in table.ranks:
            if rng.random() < 0.3:
                table.set_kind(r, VIRTUAL)
        word = random_word(rng, table)
        expected = oracle_tokenize(table, word)
        assert surfaces(table, tokenize_word(table, word)) == expected
        assert surfaces(table, reference_tokenize(table, word)) == expected


@settings(max_examples=300)
@given(table_and_words(), st.data())
def test_oracle_equivalence_property(tw, data):
    table, words = tw
    for r in table.ranks:
        if data.draw(st.booleans()):
            table.set_kind(r, VIRTUAL)
    for w in words:
        assert surfaces(table, tokenize_word(table, w)) == oracle_tokenize(table, w)
        assert "".join(surfaces(table, tokenize_word(table, w))) == w


@settings(max_examples=300)
@given(st.lists(st.integers(0, 2), max_size=30), st.integers(0, 2), st.integers(0, 2))
def test_count_pair_matches_oracle(seq, a, b):
    assert count_pair(seq, a, b) == oracle_pair_count(seq, a, b)


@settings(max_examples=100)
@given(table_and_words(), st.data())
def test_apply_and_unapply_one_track_totals(tw, data):
    table, words = tw
    hist = histogram({w: i + 1 for i, w in enumerate(words) if w})
    if not hist:
        return
    corpus = tokenize_corpus(table.prefix(0), hist)
    corpus.build_occurrence_index()
    for rule in table.rules:
        corpus.apply_one(rule)
        assert corpus.token_total == corpus.recount()
    assert corpus.as_dict() == tokenize_corpus(table, hist).as_dict()
    for rule in reversed(table.rules):
        if data.draw(st.booleans()):
            corpus.unapply_one(rule)
            assert corpus.token_total == corpus.recount()


def test_encoder_round_trip_small_byte_table():
    rng = random.Random(7)
    units = "".join(BYTE_ALPHABET)
    merges, seen, symbols = [], set(BYTE_ALPHABET), list("Ġthe")
    for _ in range(40):
        left, right = rng.choice(symbols), rng.choice(symbols)
        if left + right not in seen:
            seen.add(left + right)
            symbols.append(left + right)
            merges.append((left, right))
    table = build_merge_table(units, merges)
    enc = Encoder(table, PretokenizerSpec.bytelevel())
    for _ in range(500):
        data = bytes(rng.randrange(256) for _ in range(rng.randint(0, 40)))
        ids = enc.encode(data)
        assert enc.decode(ids) == data
        assert detokenize(ids, table, enc.spec) == data
