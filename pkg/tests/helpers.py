"""Random instance generators and naive string-level oracles shared by tests.

The oracles work on lists of surface strings and recompute everything from
scratch, so they share no code path with the package beyond table lookups.
"""

from __future__ import annotations

import ast
import random
import sysconfig
from collections import Counter
from pathlib import Path

from hypothesis import strategies as st
from pydoc_data.topics import topics

from adaptbpe.engine import tokenize_corpus
from adaptbpe.freq_index import FrequencyIndex, linear_max_candidate, linear_min_actual
from adaptbpe.merges import ACTUAL, MergeTable, build_merge_table
from adaptbpe.pretokenize import PretokenizerSpec, WordHistogram

FIXTURE_MERGES = [("a", "b"), ("ab", "c"), ("c", "d"), ("ab", "ab"), ("abc", "d")]
FIXTURE_COUNTS = {"abab": 3, "abcd": 2, "cd": 5}


def fixture_table() -> MergeTable:
    return build_merge_table("abcd", FIXTURE_MERGES)


def histogram(counts: dict[str, int], spec: PretokenizerSpec | None = None) -> WordHistogram:
    h = WordHistogram(spec or PretokenizerSpec.whitespace())
    h.counts.update(counts)
    return h


def fixture_hist() -> WordHistogram:
    return histogram(FIXTURE_COUNTS)


# -- random instances ----------------------------------------------------------


def random_merges(rng: random.Random, alphabet: str, n_merges: int) -> list[tuple[str, str]]:
    """A proper merge list: parents are drawn from symbols that already exist."""
    symbols = list(alphabet)
    seen = set(symbols)
    merges = []
    attempts = 0
    while len(merges) < n_merges and attempts < 20 * n_merges + 20:
        attempts += 1
        # favour recent symbols so deep chains appear
        left = symbols[min(len(symbols) - 1, int(rng.expovariate(0.4)))] if rng.random() < 0.3 else rng.choice(symbols)
        right = rng.choice(symbols)
        if left + right in seen:
            continue
        seen.add(left + right)
        symbols.append(left + right)
        merges.append((left, right))
    return merges


def random_table(rng: random.Random, max_base: int = 4, max_merges: int = 20) -> MergeTable:
    alphabet = "abcdefgh"[: rng.randint(1, max_base)]
    return build_merge_table(alphabet, random_merges(rng, alphabet, rng.randint(0, max_merges)))


def random_word(rng: random.Random, table: MergeTable, max_len: int = 30) -> str:
    """Mostly concatenations of merge surfaces so rules actually fire."""
    surfaces = [table.surface(r.result) for r in table.rules] + list(table.alphabet)
    out = ""
    target = rng.randint(0, max_len)
    while len(out) < target:
        piece = rng.choice(surfaces) if rng.random() < 0.6 else rng.choice(table.alphabet)
        out += piece
    return out[:max_len]


def random_hist(rng: random.Random, table: MergeTable, max_words: int = 8, max_len: int = 12) -> WordHistogram:
    counts: Counter = Counter()
    for _ in range(rng.randint(1, max_words)):
        w = random_word(rng, table, max_len)
        if w:
            counts[w] += rng.randint(1, 6)
    if not counts:
        counts[table.alphabet[0]] = 1
    return histogram(dict(counts))


@st.composite
def merge_tables(draw, max_base: int = 4, max_merges: int = 20):
    n_base = draw(st.integers(1, max_base))
    alphabet = "abcdefgh"[:n_base]
    symbols = list(alphabet)
    merges = []
    for _ in range(draw(st.integers(0, max_merges))):
        left = draw(st.sampled_from(symbols))
        right = draw(st.sampled_from(symbols))
        if left + right in symbols:
            continue
        symbols.append(left + right)
        merges.append((left, right))
    return build_merge_table(alphabet, merges)


@st.composite
def table_and_words(draw, max_words: int = 6, max_len: int = 30):
    table = draw(merge_tables())
    pieces = st.sampled_from([table.surface(r.result) for r in table.rules] + list(table.alphabet))
    words = draw(
        st.lists(st.lists(pieces, max_size=10).map("".join).map(lambda w: w[:max_len]), min_size=1, max_size=max_words)
    )
    return table, words


@st.composite
def adaptation_instances(draw):
    table = draw(merge_tables(max_merges=12))
    if len(table) == 0:
        table = build_merge_table("ab", [("a", "b")])
    pieces = st.sampled_from([table.surface(r.result) for r in table.rules] + list(table.alphabet))
    counts = draw(
        st.dictionaries(st.lists(pieces, min_size=1, max_size=5).map("".join), st.integers(1, 6), min_size=1, max_size=6)
    )
    budget = draw(st.integers(1, len(table)))
    return table, histogram(counts), budget


# -- oracles -------------------------------------------------------------------


def replace_leftmost(seq: list[str], left: str, right: str) -> tuple[list[str], int]:
    out, i, hits = [], 0, 0
    while i < len(seq):
        if i + 1 < len(seq) and seq[i] == left and seq[i + 1] == right:
            out.append(left + right)
            hits += 1
            i += 2
        else:
            out.append(seq[i])
            i += 1
    return out, hits


def split_all(seq: list[str], token: str, left: str, right: str) -> list[str]:
    out = []
    for t in seq:
        out.extend((left, right) if t == token else (t,))
    return out


def oracle_tokenize(table: MergeTable, word: str) -> list[str]:
    """Two-phase tokenization on surface strings."""
    rules = [(table.surface(r.left), table.surface(r.right), r.kind) for r in table.rules]
    seq = list(word)
    for left, right, _ in rules:
        seq, _ = replace_leftmost(seq, left, right)
    for left, right, kind in reversed(rules):
        if kind is not ACTUAL:
            seq = split_all(seq, left + right, left, right)
    return seq


def oracle_pair_count(seq: list, left, right) -> int:
    return replace_leftmost(list(seq), left, right)[1]


def oracle_adapt(table: MergeTable, counts: dict[str, int], budget: int, margin: float = 0):
    """The greedy swap loop with full recounts at every step.

    Returns (trace, actual ranks, order, incremental total) where trace is a
    list of (demoted, demoted_freq, promoted, promoted_freq, total_after).
    """
    surf = {r.origin_rank: (table.surface(r.left), table.surface(r.right)) for r in table.rules}
    ranks = table.ranks
    order = ranks[:budget]
    actual = set(order)
    candidates = list(ranks[budget:])
    words = list(counts)
    seqs = {w: list(w) for w in words}
    for w in words:
        for r in order:
            seqs[w], _ = replace_leftmost(seqs[w], *surf[r])
    trace = []

    def total():
        return sum(counts[w] * len(seqs[w]) for w in words)

    while actual and candidates:
        uni = Counter()
        for w in words:
            for t in seqs[w]:
                uni[t] += counts[w]
        fp, neg_p = min((uni["".join(surf[r])], -r) for r in actual)
        p = -neg_p
        bi = {r: sum(counts[w] * oracle_pair_count(seqs[w], *surf[r]) for w in words) for r in candidates}
        neg_fq, q = min((-bi[r], r) for r in candidates)
        fq = -neg_fq
        if not fp + margin < fq:
            break
        for w in words:
            seqs[w] = split_all(seqs[w], "".join(surf[p]), *surf[p])
            seqs[w], _ = replace_leftmost(seqs[w], *surf[q])
        actual.discard(p)
        actual.add(q)
        candidates.remove(q)
        order.append(q)
        trace.append((p, fp, q, fq, total()))
    return trace, actual, order, total()


# -- frequency index driver ---------------------------------------------------


def full_counts(corpus, table, actual, candidates):
    """Recount from the sequences with the string oracle."""
    uni = Counter()
    for c, seq in zip(corpus.counts, corpus.seqs):
        for t in seq:
            uni[t] += c
    bi = {}
    for r in candidates:
        rule = table.rule(r)
        bi[r] = sum(c * oracle_pair_count(s, rule.left, rule.right) for c, s in zip(corpus.counts, corpus.seqs))
    return {r: uni[table.result_id(r)] for r in sorted(actual)}, dict(sorted(bi.items()))


def run_swaps(rng, n_swaps, greedy_bias=0.5):
    table = random_table(rng, max_merges=16)
    if len(table) < 2:
        return 0
    hist = random_hist(rng, table)
    n = rng.randint(1, len(table) - 1)
    corpus = tokenize_corpus(table.prefix(n), hist)
    corpus.build_occurrence_index()
    actual = set(table.ranks[:n])
    cands = set(table.ranks[n:])
    idx = FrequencyIndex(corpus, table, actual, cands)
    strings = {w: [table.surface(t) for t in s] for w, s in zip(corpus.words, corpus.seqs)}
    done = 0
    for _ in range(n_swaps):
        if not actual or not cands:
            break
        assert idx.min_actual() == linear_min_actual(idx)
        assert idx.max_candidate() == linear_max_candidate(idx)
        if rng.random() < greedy_bias:
            p, q = idx.min_actual()[0], idx.max_candidate()[0]
        else:
            p, q = rng.choice(sorted(actual)), rng.choice(sorted(cands))
        rp, rq = table.rule(p), table.rule(q)
        _, changed = corpus.unapply_one(rp)
        _, changed2 = corpus.apply_one(rq)
        for wid, old in changed2.items():
            changed.setdefault(wid, old)
        idx.update_after_swap(p, q, changed)
        actual.discard(p)
        actual.add(q)
        cands.discard(q)
        sp = (table.surface(rp.left), table.surface(rp.right))
        sq = (table.surface(rq.left), table.surface(rq.right))
        for w in strings:
            strings[w] = replace_leftmost(split_all(strings[w], "".join(sp), *sp), *sq)[0]
        assert {w: [table.surface(t) for t in s] for w, s in zip(corpus.words, corpus.seqs)} == strings
        assert idx.snapshot() == full_counts(corpus, table, actual, cands)
        assert corpus.token_total == corpus.recount()
        done += 1
    return done


# -- English text shipped with the interpreter ----------------------------------


def stdlib_english(dev_bytes: int = 1_000_000) -> tuple[list[str], list[str]]:
    """(dev, test) English prose: pydoc topic pages plus stdlib docstrings.

    Dev takes the topic pages and then docstrings in file order until it
    holds ``dev_bytes``; the remaining docstrings are the held-out split.
    """
    dev = [topics[k] for k in sorted(topics)]
    size = sum(len(t.encode()) for t in dev)
    test = []
    lib = Path(sysconfig.get_paths()["stdlib"])
    for f in sorted(lib.glob("*.py")):
        try:
            tree = ast.parse(f.read_text(encoding="utf-8"))
        except (SyntaxError, UnicodeDecodeError):
            continue
        for node in ast.walk(tree):
            if isinstance(node, (ast.Module, ast.ClassDef, ast.FunctionDef, ast.AsyncFunctionDef)):
                doc = ast.get_docstring(node)
                if not doc:
                    continue
                if size < dev_bytes:
                    dev.append(doc)
                    size += len(doc.encode())
                else:
                    test.append(doc)
    return dev, test
