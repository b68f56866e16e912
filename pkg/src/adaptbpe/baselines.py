"""Fixed-budget comparison tokenizers.

first_k          the first n merges, nothing else
first_k_positive the first n merges that fire at least once on the corpus;
                 merges that never fire before the n-th live one stay in the
                 list as virtual so the list remains proper
top_k            tokenize with everything, keep the n most frequent tokens as
                 actual and make every other merge virtual, so the unapply
                 pass breaks rarer tokens down to kept tokens or bytes
"""

from __future__ import annotations

from adaptbpe.engine import TokenizedCorpus, tokenize_corpus, to_base_ids
from adaptbpe.errors import BudgetTooLarge, InsufficientLiveMerges
from adaptbpe.merges import ACTUAL, VIRTUAL, MergeTable
from adaptbpe.pretokenize import WordHistogram


def _check_budget(table: MergeTable, n: int) -> None:
    if n < 0:
        raise ValueError("budget must be >= 0")
    if n > len(table):
        raise BudgetTooLarge(f"budget {n} exceeds {len(table)} merges")


def first_k(table: MergeTable, n: int) -> MergeTable:
    _check_budget(table, n)
    return table.subset(table.ranks[:n], {r: ACTUAL for r in table.ranks[:n]})


def first_k_positive(table: MergeTable, hist: WordHistogram, n: int) -> MergeTable:
    _check_budget(table, n)
    words = [w for w, _ in hist.items()]
    corpus = TokenizedCorpus(
        words,
        [hist.counts[w] for w in words],
        [tuple(to_base_ids(table, w)) for w in words],
    )
    corpus.build_occurrence_index()
    order: list[int] = []
    kinds = {}
    live = 0
    for rule in table.rules:
        if live == n:
            break
        fired, _ = corpus.apply_one(rule)
        order.append(rule.origin_rank)
        if fired:
            kinds[rule.origin_rank] = ACTUAL
            live += 1
        else:
            kinds[rule.origin_rank] = VIRTUAL
    if live < n:
        raise InsufficientLiveMerges(
            f"only {live} merges fire on the corpus, budget is {n}"
        )
    return table.subset(order, kinds)


def top_k(table: MergeTable, hist: WordHistogram, n: int) -> MergeTable:
    _check_budget(table, n)
    full = table.subset(table.ranks, {r: ACTUAL for r in table.ranks})
    freqs = tokenize_corpus(full, hist).unigram_counts()
    n_base = table.n_base
    ranked = sorted(table.ranks, key=lambda r: (-freqs.get(n_base + r, 0), r))
    keep = set(ranked[:n])
    return table.subset(table.ranks, {r: ACTUAL if r in keep else VIRTUAL for r in table.ranks})


METHODS = {
    "first_k": lambda table, hist, n: first_k(table, n),
    "first_k_pos": first_k_positive,
    "top_k": top_k,
}
