"""Two-phase BPE tokenization and the incrementally updated corpus.

Canonical tokenization of a pre-token:

1. apply every rule (actual and virtual) in table order, each one replacing
   the leftmost non-overlapping occurrences of its pair;
2. walk the table backwards and split every surviving token produced by a
   virtual rule into its parents.

Phase 1 is run with a position-keyed heap over a linked list of symbols.
Merging a pair at table position ``i`` only creates pairs whose rules sit
after ``i`` (properness), so always taking the lowest position, leftmost
first, is the same as sweeping the rules in order.  Phase 2 is a memoized
recursive split, since the parents of a virtual token always come earlier
in the table.
"""

from __future__ import annotations

import heapq
from collections import Counter, defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

from adaptbpe.errors import UnknownId, UnknownSymbol
from adaptbpe.merges import ACTUAL, MergeRule, MergeTable
from adaptbpe.pretokenize import PretokenizerSpec, WordHistogram, iter_pretokens


def to_base_ids(table: MergeTable, word: str) -> list[int]:
    ids = []
    for unit in word:
        try:
            sym = table.id_of(unit)
        except KeyError:
            raise UnknownSymbol(f"unit {unit!r} of {word!r} is not in the base alphabet") from None
        if sym >= table.n_base:
            raise UnknownSymbol(f"unit {unit!r} is not a base symbol")
        ids.append(sym)
    return ids


def apply_merges(table: MergeTable, ids: list[int]) -> list[int]:
    """Phase 1: every rule in table order, without the unapply pass."""
    n = len(ids)
    if n < 2:
        return list(ids)
    pair_pos = table.pair_positions
    rules = table.rules
    toks = list(ids)
    nxt = list(range(1, n + 1))
    prv = list(range(-1, n - 1))
    alive = [True] * n
    heap = []
    for i in range(n - 1):
        p = pair_pos.get((toks[i], toks[i + 1]))
        if p is not None:
            heap.append((p, i))
    heapq.heapify(heap)
    while heap:
        p, i = heapq.heappop(heap)
        if not alive[i]:
            continue
        j = nxt[i]
        if j >= n:
            continue
        rule = rules[p]
        if toks[i] != rule.left or toks[j] != rule.right:
            continue
        toks[i] = rule.result
        alive[j] = False
        k = nxt[j]
        nxt[i] = k
        if k < n:
            prv[k] = i
            q = pair_pos.get((toks[i], toks[k]))
            if q is not None:
                heapq.heappush(heap, (q, i))
        h = prv[i]
        if h >= 0:
            q = pair_pos.get((toks[h], toks[i]))
            if q is not None:
                heapq.heappush(heap, (q, h))
    out = []
    i = 0
    while i < n:
        out.append(toks[i])
        i = nxt[i]
    return out


def unapply_virtual(table: MergeTable, seq: Iterable[int]) -> list[int]:
    """Phase 2: split tokens of virtual rules back down to actual/base tokens."""
    if table.actual_count == len(table.rules):
        return list(seq)
    out: list[int] = []
    expand = table.expand_virtual
    for t in seq:
        out.extend(expand(t))
    return out


def tokenize_word(table: MergeTable, word: str) -> list[int]:
    return unapply_virtual(table, apply_merges(table, to_base_ids(table, word)))


# -- oracle --------------------------------------------------------------------


def _replace_pair(seq: list[int], left: int, right: int, result: int) -> tuple[list[int], int]:
    out = []
    i = 0
    n = len(seq)
    hits = 0
    while i < n:
        if i + 1 < n and seq[i] == left and seq[i + 1] == right:
            out.append(result)
            hits += 1
            i += 2
        else:
            out.append(seq[i])
            i += 1
    return out, hits


def _split_token(seq: list[int], token: int, left: int, right: int) -> tuple[list[int], int]:
    out = []
    hits = 0
    for t in seq:
        if t == token:
            out.append(left)
            out.append(right)
            hits += 1
        else:
            out.append(t)
    return out, hits


def reference_tokenize(table: MergeTable, word: str) -> list[int]:
    """Deliberately naive tokenizer: full rescans, no indexing. Test oracle only."""
    seq = to_base_ids(table, word)
    for rule in table.rules:
        seq, _ = _replace_pair(seq, rule.left, rule.right, rule.result)
    for rule in reversed(table.rules):
        if rule.kind is not ACTUAL:
            seq, _ = _split_token(seq, rule.result, rule.left, rule.right)
    return seq


# -- corpus ------------------------------------------------------------------------


def count_pair(seq: Sequence[int], left: int, right: int) -> int:
    """Leftmost non-overlapping occurrences of (left, right)."""
    n = 0
    i = 0
    last = len(seq) - 1
    while i < last:
        if seq[i] == left and seq[i + 1] == right:
            n += 1
            i += 2
        else:
            i += 1
    return n


@dataclass
class TokenizedCorpus:
    """Current token sequence of every unique pre-token, weighted by its count.

    ``apply_one``/``unapply_one`` edit the corpus in place and return the
    number of replacements (weighted) together with the previous sequence
    of every word they touched, which is what frequency indexes consume.
    The optional occurrence indexes (token -> words, pair -> words) are
    supersets: entries are added eagerly and never pruned.
    """

    words: list[str]
    counts: list[int]
    seqs: list[tuple[int, ...]]
    token_total: int = 0
    token_words: dict[int, set[int]] | None = field(default=None, repr=False)
    pair_words: dict[tuple[int, int], set[int]] | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.token_total:
            self.token_total = self.recount()

    def __len__(self) -> int:
        return len(self.words)

    def recount(self) -> int:
        return sum(c * len(s) for c, s in zip(self.counts, self.seqs))

    def copy(self) -> TokenizedCorpus:
        return TokenizedCorpus(list(self.words), list(self.counts), list(self.seqs), self.token_total)

    def as_dict(self) -> dict[str, tuple[int, ...]]:
        return dict(zip(self.words, self.seqs))

    def unigram_counts(self) -> Counter:
        out: Counter = Counter()
        for c, s in zip(self.counts, self.seqs):
            for t in s:
                out[t] += c
        return out

    def token_frequencies(self) -> Counter:
        return self.unigram_counts()

    # -- occurrence indexes ------------------------------------------------------

    def build_occurrence_index(self, pairs: bool = True) -> None:
        tw: dict[int, set[int]] = defaultdict(set)
        pw: dict[tuple[int, int], set[int]] = defaultdict(set)
        for wid, s in enumerate(self.seqs):
            for t in s:
                tw[t].add(wid)
            if pairs:
                for pr in zip(s, s[1:]):
                    pw[pr].add(wid)
        self.token_words = tw
        self.pair_words = pw if pairs else None

    def _note(self, wid: int, seq: tuple[int, ...]) -> None:
        if self.token_words is not None:
            tw = self.token_words
            for t in seq:
                tw[t].add(wid)
        if self.pair_words is not None:
            pw = self.pair_words
            for pr in zip(seq, seq[1:]):
                pw[pr].add(wid)

    def set_seq(self, wid: int, seq: tuple[int, ...]) -> None:
        old = self.seqs[wid]
        self.token_total += self.counts[wid] * (len(seq) - len(old))
        self.seqs[wid] = seq
        self._note(wid, seq)

    # -- single-rule edits ----------------------------------------------------------

    def _words_with_pair(self, left: int, right: int) -> Iterable[int]:
        if self.pair_words is not None:
            return sorted(self.pair_words.get((left, right), ()))
        if self.token_words is not None:
            a = self.token_words.get(left, set())
            b = self.token_words.get(right, set())
            return sorted(a & b if len(a) <= len(b) else b & a)
        return range(len(self.seqs))

    def _words_with_token(self, token: int) -> Iterable[int]:
        if self.token_words is not None:
            return sorted(self.token_words.get(token, ()))
        return range(len(self.seqs))

    def apply_one(self, rule: MergeRule) -> tuple[int, dict[int, tuple[int, ...]]]:
        left, right, result = rule.left, rule.right, rule.result
        applications = 0
        changed: dict[int, tuple[int, ...]] = {}
        for wid in self._words_with_pair(left, right):
            old = self.seqs[wid]
            if len(old) < 2:
                continue
            new, hits = _replace_pair(old, left, right, result)
            if hits:
                c = self.counts[wid]
                applications += hits * c
                changed[wid] = old
                self.seqs[wid] = tuple(new)
                self._note(wid, self.seqs[wid])
        self.token_total -= applications
        return applications, changed

    def unapply_one(self, rule: MergeRule) -> tuple[int, dict[int, tuple[int, ...]]]:
        token, left, right = rule.result, rule.left, rule.right
        splits = 0
        changed: dict[int, tuple[int, ...]] = {}
        for wid in self._words_with_token(token):
            old = self.seqs[wid]
            if token not in old:
                continue
            new, hits = _split_token(old, token, left, right)
            splits += hits * self.counts[wid]
            changed[wid] = old
            self.seqs[wid] = tuple(new)
            self._note(wid, self.seqs[wid])
        self.token_total += splits
        return splits, changed


def tokenize_corpus(table: MergeTable, hist: WordHistogram) -> TokenizedCorpus:
    """Canonical tokenization of every unique pre-token in ``hist``."""
    words = []
    counts = []
    seqs = []
    for w, c in hist.items():
        words.append(w)
        counts.append(c)
        seqs.append(tuple(tokenize_word(table, w)))
    return TokenizedCorpus(words, counts, seqs)


def phase1_corpus(table: MergeTable, hist: WordHistogram) -> TokenizedCorpus:
    """Like :func:`tokenize_corpus` but stops after the apply pass."""
    words = []
    counts = []
    seqs = []
    for w, c in hist.items():
        words.append(w)
        counts.append(c)
        seqs.append(tuple(apply_merges(table, to_base_ids(table, w))))
    return TokenizedCorpus(words, counts, seqs)


def detokenize(tokens: Iterable[int], table: MergeTable, spec: PretokenizerSpec) -> bytes:
    units = []
    for t in tokens:
        if not table.has_symbol(t):
            raise UnknownId(f"token id {t} is not a symbol of this table")
        units.append(table.surface(t))
    return spec.from_units("".join(units))


class Encoder:
    """Text -> token ids for one table, memoizing pre-tokens."""

    def __init__(self, table: MergeTable, spec: PretokenizerSpec, per_line: bool = True):
        self.table = table
        self.spec = spec
        self.per_line = per_line
        self._cache: dict[str, tuple[int, ...]] = {}

    def encode_word(self, word: str) -> tuple[int, ...]:
        seq = self._cache.get(word)
        if seq is None:
            seq = tuple(tokenize_word(self.table, word))
            self._cache[word] = seq
        return seq

    def encode_words(self, text: bytes | str) -> list[tuple[str, tuple[int, ...]]]:
        return [(w, self.encode_word(w)) for w in iter_pretokens(text, self.spec, self.per_line)]

    def encode(self, text: bytes | str) -> list[int]:
        out: list[int] = []
        for _, seq in self.encode_words(text):
            out.extend(seq)
        return out

    def decode(self, ids: Iterable[int]) -> bytes:
        return detokenize(ids, self.table, self.spec)
