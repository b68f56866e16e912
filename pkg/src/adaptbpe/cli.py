"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error.  Diagnostics go to
stderr; stdout only carries the payload that was asked for.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from collections import Counter

from adaptbpe import __version__
from adaptbpe.adapt import AdaptConfig, adapt
from adaptbpe.baselines import first_k, first_k_positive, top_k
from adaptbpe.engine import Encoder, tokenize_corpus
from adaptbpe.errors import AdaptBPEError
from adaptbpe.metrics import SWEEP_METHODS, compression_utility, parse_budgets, sweep, sweep_csv
from adaptbpe.pretokenize import PretokenizerSpec, histogram_from_paths
from adaptbpe.selftest import run_self_test
from adaptbpe.tokenizer_io import (
    check_pairing,
    export_compat,
    export_mask,
    load_adapted,
    load_any,
    load_pretrained,
    save_adapted,
    write_text,
)

log = logging.getLogger("adaptbpe")

TRACE_HEADER = ["step", "demoted_rank", "demoted_freq", "promoted_rank", "promoted_freq", "incremental_tokens"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _pretokenizer_arg(value: str) -> PretokenizerSpec | None:
    if value == "from-tokenizer":
        return None
    return {
        "bytelevel": PretokenizerSpec.bytelevel,
        "whitespace": PretokenizerSpec.whitespace,
        "identity": PretokenizerSpec.identity,
    }[value]()


def _margin(value: str) -> float:
    m = float(value)
    if m < 0:
        raise argparse.ArgumentTypeError("margin must be >= 0")
    return int(m) if m.is_integer() else m


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--pretokenizer",
        choices=["bytelevel", "whitespace", "identity", "from-tokenizer"],
        default="from-tokenizer",
    )
    p.add_argument("--whole-documents", action="store_true", help="do not reset pre-tokenization at line starts")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.add_argument("--json", action="store_true", help="print the report as one JSON object on stdout")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="adaptbpe", description="Adapt a pretrained BPE merge list to a corpus.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("adapt", help="run the greedy merge-swap adaptation")
    p.add_argument("--tokenizer", required=True)
    p.add_argument("--corpus", required=True, nargs="+")
    p.add_argument("--budget", required=True, type=int)
    p.add_argument("--margin", type=_margin, default=0)
    p.add_argument("--mode", choices=["fast", "strict"], default="fast")
    p.add_argument("--max-swaps", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--trace")
    p.add_argument("--mask")
    _common(p)

    p = sub.add_parser("baseline", help="build a first_k / first_k_pos / top_k tokenizer")
    p.add_argument("--method", required=True, choices=["first_k", "first_k_pos", "top_k"])
    p.add_argument("--tokenizer", required=True)
    p.add_argument("--corpus", nargs="+")
    p.add_argument("--budget", required=True, type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--mask")
    _common(p)

    p = sub.add_parser("tokenize", help="tokenize text, one pre-token per output line")
    p.add_argument("--tokenizer", required=True)
    p.add_argument("--source", help="pretrained file used to map adapted tokens to original ids")
    p.add_argument("--input", default="-")
    p.add_argument("--format", choices=["ids", "strings", "counts"], default="ids")
    _common(p)

    p = sub.add_parser("evaluate", help="compression utility and fertility on a corpus")
    p.add_argument("--tokenizer", required=True)
    p.add_argument("--corpus", required=True, nargs="+")
    p.add_argument("--chars", action="store_true", help="count Unicode characters instead of base symbols")
    p.add_argument("--csv", action="store_true")
    p.add_argument("--dump-freqs", metavar="PREFIX", help="write PREFIX.unigram.csv and PREFIX.bigram.csv")
    _common(p)

    p = sub.add_parser("sweep", help="corpus size over a range of budgets")
    p.add_argument("--tokenizer", required=True)
    p.add_argument("--dev", required=True, nargs="+")
    p.add_argument("--test", nargs="+")
    p.add_argument("--budgets", required=True, help="A:B:STEP or a,b,c")
    p.add_argument("--methods", default="adaptbpe,first_k,first_k_pos,top_k")
    p.add_argument("--margin", type=_margin, default=0)
    p.add_argument("--mode", choices=["fast", "strict"], default="fast")
    p.add_argument("--chars", action="store_true")
    p.add_argument("--no-timing", action="store_true", help="leave the seconds column empty")
    p.add_argument("--out", required=True)
    _common(p)

    p = sub.add_parser("mask", help="allowed original token ids for an adapted tokenizer")
    p.add_argument("--tokenizer", required=True, help="source pretrained file")
    p.add_argument("--adapted", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-special", action="store_true", help="do not pass special tokens through")
    _common(p)

    p = sub.add_parser("export-compat", help="plain merge list export with a loss report")
    p.add_argument("--adapted", required=True)
    p.add_argument("--tokenizer", help="source pretrained file; output is then a full tokenizer file")
    p.add_argument("--corpus", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--report", required=True)
    _common(p)

    p = sub.add_parser("self-test", help="run the bundled fixtures")
    _common(p)
    return parser


# -- commands ---------------------------------------------------------------------


def _hist(paths, spec, args):
    return histogram_from_paths(paths, spec, per_line=not args.whole_documents, workers=args.workers)


def _emit(args, payload: dict, text: str | None = None) -> None:
    if args.json:
        sys.stdout.write(json.dumps(payload, ensure_ascii=False, sort_keys=False) + "\n")
    elif text is not None:
        sys.stdout.write(text)


def cmd_adapt(args) -> int:
    pre = load_pretrained(args.tokenizer, _pretokenizer_arg(args.pretokenizer))
    hist = _hist(args.corpus, pre.spec, args)
    cfg = AdaptConfig(budget=args.budget, margin=args.margin, mode=args.mode, max_swaps=args.max_swaps)
    res = adapt(pre.table, hist, cfg)
    save_adapted(args.out, res, pre.spec, source_digest=pre.digest)
    if args.trace:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for r in res.swap_trace:
            w.writerow([r.step, r.demoted_rank, r.demoted_freq, r.promoted_rank, r.promoted_freq, r.incremental_tokens])
        write_text(args.trace, buf.getvalue())
    if args.mask:
        export_mask(res, pre.vocab, args.mask, pre.digest, pre.special_ids)
    summary = {
        "budget": args.budget,
        "swaps": res.swaps,
        "stop_reason": res.stop_reason,
        "initial_tokens": res.initial_token_total,
        "incremental_tokens": res.incremental_token_total,
        "canonical_tokens": res.canonical_token_total,
        "base_symbols": hist.total_base_symbols,
        "merge_depth": res.merge_depth,
    }
    log.info(
        "adapt: %d swaps (%s); tokens %d -> %d incremental, %d canonical",
        res.swaps, res.stop_reason, res.initial_token_total, res.incremental_token_total, res.canonical_token_total,
    )
    _emit(args, summary)
    return 0


def cmd_baseline(args) -> int:
    pre = load_pretrained(args.tokenizer, _pretokenizer_arg(args.pretokenizer))
    if args.method == "first_k":
        table = first_k(pre.table, args.budget)
    else:
        if not args.corpus:
            raise UsageError(f"--corpus is required for --method {args.method}")
        hist = _hist(args.corpus, pre.spec, args)
        fn = first_k_positive if args.method == "first_k_pos" else top_k
        table = fn(pre.table, hist, args.budget)
    save_adapted(
        args.out, table, pre.spec,
        provenance={"method": args.method, "budget": args.budget},
        source_digest=pre.digest,
    )
    if args.mask:
        export_mask(table, pre.vocab, args.mask, pre.digest, pre.special_ids)
    _emit(args, {"method": args.method, "budget": args.budget, "merges": len(table), "actual": table.actual_count})
    return 0


def cmd_tokenize(args) -> int:
    table, spec, pre = load_any(args.tokenizer, _pretokenizer_arg(args.pretokenizer))
    if args.source:
        pre = load_pretrained(args.source)
    data = sys.stdin.buffer.read() if args.input == "-" else open(args.input, "rb").read()
    enc = Encoder(table, spec, per_line=not args.whole_documents)
    words = enc.encode_words(data)
    if args.format == "counts":
        counts = Counter(t for _, seq in words for t in seq)
        rows = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        if args.json:
            _emit(args, {table.surface(t): c for t, c in rows})
        else:
            sys.stdout.write("".join(f"{table.surface(t)}\t{c}\n" for t, c in rows))
        return 0
    if args.format == "strings":
        lines = [[table.surface(t) for t in seq] for _, seq in words]
    else:
        vocab = pre.vocab if pre is not None else None
        lines = [[vocab[table.surface(t)] if vocab else t for t in seq] for _, seq in words]
    if args.json:
        _emit(args, {"tokens": lines})
    else:
        sys.stdout.write("".join(" ".join(map(str, line)) + "\n" for line in lines))
    return 0


def cmd_evaluate(args) -> int:
    table, spec, _ = load_any(args.tokenizer, _pretokenizer_arg(args.pretokenizer))
    hist = _hist(args.corpus, spec, args)
    rep = compression_utility(table, hist, chars=args.chars)
    d = rep.to_dict()
    if args.dump_freqs:
        _dump_freqs(args.dump_freqs, table, hist)
    if args.json:
        _emit(args, d)
    elif args.csv:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(d))
        w.writerow([f"{v:.6f}" if isinstance(v, float) else v for v in d.values()])
        sys.stdout.write(buf.getvalue())
    else:
        sys.stdout.write("".join(f"{k}\t{v:.6f}\n" if isinstance(v, float) else f"{k}\t{v}\n" for k, v in d.items()))
    return 0


def _dump_freqs(prefix: str, table, hist) -> None:
    corpus = tokenize_corpus(table, hist)
    uni: Counter = Counter()
    bi: Counter = Counter()
    for c, seq in zip(corpus.counts, corpus.seqs):
        for t in seq:
            uni[t] += c
        for pr in zip(seq, seq[1:]):
            bi[pr] += c
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "token", "count"])
    for t, c in sorted(uni.items(), key=lambda kv: (-kv[1], kv[0])):
        w.writerow([t, table.surface(t), c])
    write_text(prefix + ".unigram.csv", buf.getvalue())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["left", "right", "count"])
    for (a, b), c in sorted(bi.items(), key=lambda kv: (-kv[1], kv[0])):
        w.writerow([table.surface(a), table.surface(b), c])
    write_text(prefix + ".bigram.csv", buf.getvalue())


def cmd_sweep(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in SWEEP_METHODS:
            raise UsageError(f"unknown method {m!r}; choose from {', '.join(SWEEP_METHODS)}")
    try:
        budgets = parse_budgets(args.budgets)
    except ValueError as exc:
        raise UsageError(f"bad --budgets: {exc}") from None
    pre = load_pretrained(args.tokenizer, _pretokenizer_arg(args.pretokenizer))
    dev = _hist(args.dev, pre.spec, args)
    test = _hist(args.test, pre.spec, args) if args.test else None
    records = sweep(
        pre.table, dev, test, budgets, methods,
        margin=args.margin, mode=args.mode, chars=args.chars, workers=args.workers,
    )
    write_text(args.out, sweep_csv(records, timing=not args.no_timing))
    _emit(args, {"records": [r.__dict__ for r in records]})
    return 0


def cmd_mask(args) -> int:
    pre = load_pretrained(args.tokenizer)
    ad = load_adapted(args.adapted)
    check_pairing(ad, pre)
    special = () if args.no_special else pre.special_ids
    doc = export_mask(ad.table, pre.vocab, args.out, pre.digest, special)
    _emit(args, {"count": doc["count"]})
    return 0


def cmd_export_compat(args) -> int:
    ad = load_adapted(args.adapted)
    pre = None
    if args.tokenizer:
        pre = load_pretrained(args.tokenizer)
        check_pairing(ad, pre)
    hist = _hist(args.corpus, ad.spec, args) if args.corpus else None
    report = export_compat(ad.table, args.out, hist, pre, args.report)
    if not report["lossless"]:
        log.warning(
            "plain export is lossy: %d merges dropped, %d corpus words tokenized differently",
            len(report["dropped_ranks"]), len(report["divergent_words"]),
        )
    _emit(args, {k: report[k] for k in ("lossless", "lossless_on_corpus", "checked_words")})
    return 0


def cmd_self_test(args) -> int:
    ok = run_self_test(sys.stdout)
    return 0 if ok else 2


COMMANDS = {
    "adapt": cmd_adapt,
    "baseline": cmd_baseline,
    "tokenize": cmd_tokenize,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "mask": cmd_mask,
    "export-compat": cmd_export_compat,
    "self-test": cmd_self_test,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    level = logging.WARNING - 10 * min(args.verbose, 2) if args.verbose else logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"adaptbpe {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except AdaptBPEError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"MalformedJson: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"adaptbpe {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"IoError: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
