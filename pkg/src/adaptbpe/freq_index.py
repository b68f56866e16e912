"""Unigram and candidate-bigram frequencies over a tokenized corpus.

Only pairs that correspond to candidate rules are counted; ``max_candidate``
never looks at anything else.  Bigram counts are leftmost non-overlapping
(a run of k copies of x holds floor(k/2) occurrences of (x, x)), which is
exactly the number of replacements applying that rule would make.

Both selections use binary heaps with lazy invalidation: an entry is
trusted only if it still matches the live count and membership.
"""

from __future__ import annotations

import heapq
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence

from adaptbpe.engine import TokenizedCorpus
from adaptbpe.errors import EmptySet
from adaptbpe.merges import MergeTable


def pair_occurrences(seq: Sequence[int], pair_rank: Mapping[tuple[int, int], int]) -> Counter:
    """Non-overlapping occurrence counts of every tracked pair in one sequence."""
    out: Counter = Counter()
    last_end: dict[int, int] = {}
    for i in range(len(seq) - 1):
        a = seq[i]
        b = seq[i + 1]
        r = pair_rank.get((a, b))
        if r is None:
            continue
        if a == b:
            if last_end.get(r) == i:
                continue
            last_end[r] = i + 1
        out[r] += 1
    return out


class FrequencyIndex:
    def __init__(
        self,
        corpus: TokenizedCorpus,
        table: MergeTable,
        actual: Iterable[int],
        candidates: Iterable[int],
    ):
        self.corpus = corpus
        self.table = table
        self.actual: set[int] = set(actual)
        self.candidates: set[int] = set(candidates)
        self._n_base = table.n_base
        self.pair_rank: dict[tuple[int, int], int] = {
            table.rule(r).pair: r for r in sorted(self.candidates)
        }
        self.unigram: Counter = Counter()
        self.bigram: Counter = Counter()
        for c, seq in zip(corpus.counts, corpus.seqs):
            for t in seq:
                self.unigram[t] += c
            for r, k in pair_occurrences(seq, self.pair_rank).items():
                self.bigram[r] += k * c
        self._min_heap = [(self.freq(r), -r) for r in self.actual]
        heapq.heapify(self._min_heap)
        self._max_heap = [(-self.bigram[r], r) for r in self.candidates]
        heapq.heapify(self._max_heap)

    def freq(self, rank: int) -> int:
        """Unigram count of the token produced by merge ``rank``."""
        return self.unigram[self._n_base + rank]

    def bigram_freq(self, rank: int) -> int:
        return self.bigram[rank]

    # -- selection -------------------------------------------------------------

    def min_actual(self) -> tuple[int, int]:
        """(rank, count) of the actual merge whose token is rarest.

        Ties go to the highest rank.
        """
        heap = self._min_heap
        while heap:
            count, neg = heap[0]
            rank = -neg
            if rank in self.actual and self.freq(rank) == count:
                return rank, count
            heapq.heappop(heap)
        raise EmptySet("no demotable merge")

    def max_candidate(self) -> tuple[int, int]:
        """(rank, count) of the candidate whose pair is most frequent.

        Ties go to the lowest rank.
        """
        heap = self._max_heap
        while heap:
            neg, rank = heap[0]
            if rank in self.candidates and self.bigram[rank] == -neg:
                return rank, -neg
            heapq.heappop(heap)
        raise EmptySet("no candidate merge")

    # -- updates ---------------------------------------------------------------

    def update_words(self, changes: Mapping[int, Sequence[int]]) -> None:
        """Fold in words whose sequence changed; ``changes`` maps word -> old sequence."""
        if not changes:
            return
        uni_delta: Counter = Counter()
        bi_delta: Counter = Counter()
        pair_rank = self.pair_rank
        seqs = self.corpus.seqs
        counts = self.corpus.counts
        for wid, old in changes.items():
            c = counts[wid]
            new = seqs[wid]
            for t in old:
                uni_delta[t] -= c
            for t in new:
                uni_delta[t] += c
            for r, k in pair_occurrences(old, pair_rank).items():
                bi_delta[r] -= k * c
            for r, k in pair_occurrences(new, pair_rank).items():
                bi_delta[r] += k * c
        n_base = self._n_base
        for t, d in uni_delta.items():
            if not d:
                continue
            self.unigram[t] += d
            if self.unigram[t] == 0:
                del self.unigram[t]
            rank = t - n_base
            if rank in self.actual:
                heapq.heappush(self._min_heap, (self.unigram[t], -rank))
        for r, d in bi_delta.items():
            if not d:
                continue
            self.bigram[r] += d
            if self.bigram[r] == 0:
                del self.bigram[r]
            if r in self.candidates:
                heapq.heappush(self._max_heap, (-self.bigram[r], r))

    def demote(self, rank: int) -> None:
        self.actual.discard(rank)

    def promote(self, rank: int) -> None:
        self.candidates.discard(rank)
        self.actual.add(rank)
        heapq.heappush(self._min_heap, (self.freq(rank), -rank))

    def update_after_swap(
        self, demoted: int, promoted: int, changes: Mapping[int, Sequence[int]]
    ) -> None:
        self.demote(demoted)
        self.update_words(changes)
        self.promote(promoted)

    # -- inspection --------------------------------------------------------------

    def snapshot(self) -> tuple[dict[int, int], dict[int, int]]:
        """Unigram counts of actual merge tokens and bigram counts of candidates."""
        uni = {r: self.freq(r) for r in sorted(self.actual)}
        bi = {r: self.bigram[r] for r in sorted(self.candidates)}
        return uni, bi


def build_index(
    corpus: TokenizedCorpus,
    table: MergeTable,
    actual: Iterable[int],
    candidates: Iterable[int],
) -> FrequencyIndex:
    return FrequencyIndex(corpus, table, actual, candidates)


def linear_min_actual(index: FrequencyIndex) -> tuple[int, int]:
    if not index.actual:
        raise EmptySet("no demotable merge")
    rank = min(index.actual, key=lambda r: (index.freq(r), -r))
    return rank, index.freq(rank)


def linear_max_candidate(index: FrequencyIndex) -> tuple[int, int]:
    if not index.candidates:
        raise EmptySet("no candidate merge")
    rank = min(index.candidates, key=lambda r: (-index.bigram[r], r))
    return rank, index.bigram[rank]
