"""Greedy post-hoc adaptation of a pretrained merge list to a corpus.

Start from the first ``budget`` merges.  While the rarest actual token is
less frequent (by more than ``margin``) than the most frequent pair among
the merges not in use, make the rare merge virtual, split its tokens in the
corpus, apply the frequent merge and move it into the active list.  Every
swap shrinks the corpus, so the loop terminates.

Two bookkeeping modes:

``fast``
    Keeps the corpus state produced by the swaps themselves (split, then
    apply), which is what the frequency updates are defined on.  This state
    can differ from what canonical two-phase tokenization of the exported
    list gives, so the canonical size is recomputed once at the end.
``strict``
    Keeps the phase-1 output of every word and re-derives the canonical
    tokenization after each swap; selection uses canonical counts and a
    swap that fails to shrink the canonical corpus ends the loop.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

from adaptbpe.engine import TokenizedCorpus, phase1_corpus, tokenize_corpus, tokenize_word
from adaptbpe.errors import BudgetTooLarge, EmptyCorpus, EmptySet, ImproperMerge
from adaptbpe.freq_index import FrequencyIndex
from adaptbpe.merges import ACTUAL, VIRTUAL, Kind, MergeTable, first_improper_index
from adaptbpe.pretokenize import WordHistogram

log = logging.getLogger(__name__)

FAST = "fast"
STRICT = "strict"


@dataclass
class AdaptConfig:
    budget: int
    margin: float = 0
    mode: str = FAST
    max_swaps: int | None = None
    check: bool = False  # re-verify invariants after every swap (slow)

    def __post_init__(self):
        if self.margin < 0:
            raise ValueError("margin must be >= 0")
        if self.mode not in (FAST, STRICT):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")


@dataclass(frozen=True)
class SwapRecord:
    step: int
    demoted_rank: int
    demoted_freq: int
    promoted_rank: int
    promoted_freq: int
    incremental_tokens: int


@dataclass
class AdaptationResult:
    table: MergeTable
    swap_trace: list[SwapRecord]
    merge_depth: int
    initial_token_total: int
    incremental_token_total: int
    canonical_token_total: int
    stop_reason: str
    config: AdaptConfig = field(repr=False, default=None)

    @property
    def swaps(self) -> int:
        return len(self.swap_trace)


class Adapter:
    """Loop state.  ``step()`` performs one swap or returns None and sets
    ``stop_reason`` ("margin", "exhausted", "max_swaps", "no-gain")."""

    def __init__(self, table: MergeTable, hist: WordHistogram, config: AdaptConfig):
        m = len(table)
        if config.budget > m:
            raise BudgetTooLarge(f"budget {config.budget} exceeds {m} merges")
        if not hist or hist.total_base_symbols == 0:
            raise EmptyCorpus("adaptation corpus has no pre-tokens")
        self.source = table
        self.config = config
        ranks = table.ranks
        self.order: list[int] = ranks[: config.budget]
        self.kinds: dict[int, Kind] = {r: ACTUAL for r in self.order}
        self.remaining: list[int] = ranks[config.budget :]
        self.trace: list[SwapRecord] = []
        self.stop_reason: str | None = None
        initial = table.subset(self.order, self.kinds)
        if config.mode == FAST:
            self.corpus = tokenize_corpus(initial, hist)
            self.corpus.build_occurrence_index()
            self.phase1 = None
            self.current = None
        else:
            self.phase1 = phase1_corpus(initial, hist)
            self.phase1.build_occurrence_index()
            self.current = initial
            self.corpus = TokenizedCorpus(
                list(self.phase1.words), list(self.phase1.counts), list(self.phase1.seqs)
            )
            self.corpus.build_occurrence_index(pairs=False)
        self.initial_token_total = self.corpus.token_total
        self.index = FrequencyIndex(self.corpus, table, self.order, self.remaining)

    @property
    def token_total(self) -> int:
        return self.corpus.token_total

    def active_table(self) -> MergeTable:
        return self.source.subset(self.order, self.kinds)

    def select(self) -> tuple[int, int, int, int] | None:
        try:
            p, fp = self.index.min_actual()
        except EmptySet:
            self.stop_reason = "exhausted"
            return None
        try:
            q, fq = self.index.max_candidate()
        except EmptySet:
            self.stop_reason = "exhausted"
            return None
        if not fp + self.config.margin < fq:
            self.stop_reason = "margin"
            return None
        return p, fp, q, fq

    def step(self) -> SwapRecord | None:
        if self.stop_reason is not None:
            return None
        if self.config.max_swaps is not None and len(self.trace) >= self.config.max_swaps:
            self.stop_reason = "max_swaps"
            return None
        picked = self.select()
        if picked is None:
            return None
        p, fp, q, fq = picked
        before = self.corpus.token_total
        if self.config.mode == FAST:
            self._swap_fast(p, fp, q, fq)
        elif not self._swap_strict(p, q):
            self.stop_reason = "no-gain"
            return None
        after = self.corpus.token_total
        assert after < before, (before, after)
        rec = SwapRecord(len(self.trace) + 1, p, fp, q, fq, after)
        self.trace.append(rec)
        if self.config.check:
            self.check_invariants()
        return rec

    def _commit(self, p: int, q: int) -> None:
        self.kinds[p] = VIRTUAL
        self.kinds[q] = ACTUAL
        self.order.append(q)
        self.remaining.remove(q)

    def _swap_fast(self, p: int, fp: int, q: int, fq: int) -> None:
        src = self.source
        splits, changed = self.corpus.unapply_one(src.rule(p))
        applied, changed2 = self.corpus.apply_one(src.rule(q))
        for wid, old in changed2.items():
            changed.setdefault(wid, old)
        # splitting can only add occurrences of the incoming pair
        assert splits == fp and applied >= fq, (splits, fp, applied, fq)
        self._commit(p, q)
        self.index.update_after_swap(p, q, changed)

    def _swap_strict(self, p: int, q: int) -> bool:
        src = self.source
        kinds = dict(self.kinds)
        kinds[p] = VIRTUAL
        kinds[q] = ACTUAL
        table = src.subset(self.order + [q], kinds)
        _, changed1 = self.phase1.apply_one(src.rule(q))
        touched = set(changed1)
        # canonical sequences still holding p's token are the ones it now splits
        touched.update(self.corpus.token_words.get(src.result_id(p), ()))
        new_seqs = {}
        delta = 0
        for wid in touched:
            seq = tuple(_expand(table, self.phase1.seqs[wid]))
            old = self.corpus.seqs[wid]
            if seq != old:
                new_seqs[wid] = seq
                delta += self.corpus.counts[wid] * (len(seq) - len(old))
        if delta >= 0:
            for wid, old in changed1.items():
                self.phase1.set_seq(wid, old)
            return False
        changes = {}
        for wid, seq in new_seqs.items():
            changes[wid] = self.corpus.seqs[wid]
            self.corpus.set_seq(wid, seq)
        self._commit(p, q)
        self.current = table
        self.index.update_after_swap(p, q, changes)
        return True

    def run(self) -> AdaptationResult:
        while self.step() is not None:
            pass
        table = self.active_table()
        if self.config.mode == STRICT:
            canonical = self.corpus.token_total
        else:
            canonical = self.canonical_total(table)
        depth = max(table.actual_ranks(), default=-1)
        log.info(
            "adapt: %d swaps (%s), tokens %d -> %d (canonical %d)",
            len(self.trace),
            self.stop_reason,
            self.initial_token_total,
            self.corpus.token_total,
            canonical,
        )
        return AdaptationResult(
            table=table,
            swap_trace=list(self.trace),
            merge_depth=depth,
            initial_token_total=self.initial_token_total,
            incremental_token_total=self.corpus.token_total,
            canonical_token_total=canonical,
            stop_reason=self.stop_reason,
            config=self.config,
        )

    def canonical_total(self, table: MergeTable) -> int:
        words = self.corpus.words
        counts = self.corpus.counts
        return sum(c * len(tokenize_word(table, w)) for w, c in zip(words, counts))

    def check_invariants(self) -> None:
        table = self.active_table()
        bad = first_improper_index(table.n_base, table.rules)
        if bad is not None:
            raise ImproperMerge(bad, "active list lost properness")
        if table.actual_count != self.config.budget:
            raise AssertionError(f"{table.actual_count} actual merges, expected {self.config.budget}")
        if self.corpus.token_total != self.corpus.recount():
            raise AssertionError("token_total bookkeeping drifted")


def _expand(table: MergeTable, seq) -> list[int]:
    out: list[int] = []
    for t in seq:
        out.extend(table.expand_virtual(t))
    return out


def adapt(table: MergeTable, hist: WordHistogram, config: AdaptConfig) -> AdaptationResult:
    if math.isinf(config.margin):
        log.debug("infinite margin: no swap can happen")
    return Adapter(table, hist, config).run()
