"""Compression utility, fertility, merge depth and budget sweeps."""

from __future__ import annotations

import csv
import io
import logging
import time
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

from adaptbpe.adapt import AdaptationResult, AdaptConfig, adapt
from adaptbpe.baselines import first_k, first_k_positive, top_k
from adaptbpe.engine import tokenize_corpus
from adaptbpe.errors import EmptyCorpus, InsufficientLiveMerges
from adaptbpe.merges import MergeTable
from adaptbpe.pretokenize import WordHistogram

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvalReport:
    cu: float
    fertility: float
    base_symbols: int
    token_total: int
    word_count: int
    merge_depth: int
    actual_count: int

    def to_dict(self) -> dict:
        return asdict(self)


def merge_depth(obj: MergeTable | AdaptationResult) -> int:
    """Largest original rank among actual merges (-1 when there are none)."""
    table = obj.table if isinstance(obj, AdaptationResult) else obj
    return max(table.actual_ranks(), default=-1)


def compression_utility(table: MergeTable, hist: WordHistogram, chars: bool = False) -> EvalReport:
    if not hist or hist.total_base_symbols == 0:
        raise EmptyCorpus("evaluation corpus has no pre-tokens")
    tokens = tokenize_corpus(table, hist).token_total
    base = hist.total_chars if chars else hist.total_base_symbols
    words = hist.word_count
    return EvalReport(
        cu=(base - tokens) / base,
        fertility=tokens / words,
        base_symbols=base,
        token_total=tokens,
        word_count=words,
        merge_depth=merge_depth(table),
        actual_count=table.actual_count,
    )


evaluate = compression_utility


# -- sweeps ------------------------------------------------------------------------

SWEEP_METHODS = ("adaptbpe", "first_k", "first_k_pos", "top_k", "full")
SWEEP_HEADER = ("method", "budget", "dev_tokens", "test_tokens", "cu", "fertility", "merge_depth", "seconds")


@dataclass(frozen=True)
class SweepRecord:
    method: str
    budget: int
    dev_tokens: int
    test_tokens: int | None
    cu: float
    fertility: float
    merge_depth: int
    seconds: float

    def row(self) -> list:
        return [
            self.method,
            self.budget,
            self.dev_tokens,
            "" if self.test_tokens is None else self.test_tokens,
            f"{self.cu:.6f}",
            f"{self.fertility:.6f}",
            self.merge_depth,
            f"{self.seconds:.3f}",
        ]


def build_method(
    method: str, table: MergeTable, dev: WordHistogram, budget: int, margin: float = 0, mode: str = "fast"
) -> tuple[MergeTable, int]:
    """Run one method; returns the table and its dev-corpus size.

    For adaptbpe the dev size is the loop's own (incremental) count; for the
    others it is the canonical tokenization size.
    """
    if method == "adaptbpe":
        res = adapt(table, dev, AdaptConfig(budget=budget, margin=margin, mode=mode))
        return res.table, res.incremental_token_total
    if method == "first_k":
        out = first_k(table, budget)
    elif method == "first_k_pos":
        out = first_k_positive(table, dev, budget)
    elif method == "top_k":
        out = top_k(table, dev, budget)
    elif method == "full":
        out = table
    else:
        raise ValueError(f"unknown method {method!r}")
    return out, tokenize_corpus(out, dev).token_total


def _sweep_one(args) -> SweepRecord | None:
    method, budget, table, dev, test, margin, mode, chars = args
    t0 = time.perf_counter()
    try:
        out, dev_tokens = build_method(method, table, dev, budget, margin, mode)
    except InsufficientLiveMerges as exc:
        log.warning("%s at budget %d skipped: %s", method, budget, exc)
        return None
    target = test if test is not None else dev
    rep = compression_utility(out, target, chars)
    return SweepRecord(
        method=method,
        budget=budget if method != "full" else len(table),
        dev_tokens=dev_tokens,
        test_tokens=rep.token_total if test is not None else None,
        cu=rep.cu,
        fertility=rep.fertility,
        merge_depth=rep.merge_depth,
        seconds=time.perf_counter() - t0,
    )


def sweep(
    table: MergeTable,
    dev: WordHistogram,
    test: WordHistogram | None,
    budgets: Sequence[int],
    methods: Iterable[str],
    margin: float = 0,
    mode: str = "fast",
    chars: bool = False,
    workers: int = 1,
) -> list[SweepRecord]:
    """One record per (method, budget), ordered method-major.

    Budgets that first_k_pos cannot fill are left out.  ``cu`` and ``fertility`` come from the test corpus when one is given,
    otherwise from the dev corpus.
    """
    budgets = list(budgets)
    if budgets != sorted(budgets):
        raise ValueError("budgets must be sorted ascending")
    jobs = []
    for m in methods:
        if m not in SWEEP_METHODS:
            raise ValueError(f"unknown method {m!r}")
        for b in budgets if m != "full" else budgets[:1]:
            jobs.append((m, b, table, dev, test, margin, mode, chars))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_sweep_one, jobs))
    else:
        records = [_sweep_one(j) for j in jobs]
    records = [r for r in records if r is not None]
    _report_monotonicity(records)
    return records


def _report_monotonicity(records: Sequence[SweepRecord]) -> None:
    last: dict[str, SweepRecord] = {}
    for r in records:
        prev = last.get(r.method)
        if prev is not None and r.dev_tokens > prev.dev_tokens:
            log.warning(
                "%s: dev corpus grew from %d (budget %d) to %d (budget %d)",
                r.method, prev.dev_tokens, prev.budget, r.dev_tokens, r.budget,
            )
        last[r.method] = r


def sweep_csv(records: Iterable[SweepRecord], timing: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for r in records:
        row = r.row()
        if not timing:
            row[-1] = ""
        w.writerow(row)
    return buf.getvalue()


def parse_budgets(text: str) -> list[int]:
    """``A:B:STEP`` (inclusive of B when it lands on the grid) or ``a,b,c``."""
    if ":" in text:
        parts = [int(x) for x in text.split(":")]
        if len(parts) == 2:
            parts.append(1)
        start, stop, step = parts
        if step <= 0:
            raise ValueError("step must be positive")
        return list(range(start, stop + 1, step))
    return sorted(int(x) for x in text.split(",") if x.strip())
