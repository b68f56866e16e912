"""Reading pretrained BPE tokenizer files and writing adapted artifacts.

Formats written here:

* ``*.adaptbpe.json``: the adapted merge list with per-merge kind flags and
  original ranks (plain BPE files cannot express the unapply pass)
* mask files: ``{"source_digest", "allowed_ids", "count"}``
* compat export: a plain ordered merge list (actual merges only) plus a
  report of every corpus word it tokenizes differently
"""

from __future__ import annotations

import gzip
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import regex

from adaptbpe import __version__
from adaptbpe.adapt import AdaptationResult
from adaptbpe.engine import apply_merges, to_base_ids, tokenize_word
from adaptbpe.errors import (
    DigestMismatch,
    ImproperMerge,
    MalformedMerge,
    UnknownToken,
    UnsupportedModelType,
    VocabMergeMismatch,
)
from adaptbpe.merges import ACTUAL, Kind, MergeRule, MergeTable, build_merge_table
from adaptbpe.pretokenize import (
    BYTE_ALPHABET,
    GPT2_PATTERN,
    PretokenizerSpec,
    WordHistogram,
)

log = logging.getLogger(__name__)

FORMAT_NAME = "adaptbpe"
FORMAT_VERSION = 1


def _read_bytes(path: str | os.PathLike) -> bytes:
    path = Path(path)
    if path.is_dir():
        path = path / "tokenizer.json"
    data = path.read_bytes()
    if path.suffix == ".gz":
        data = gzip.decompress(data)
    return data


def digest_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _dump(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, indent=1) + "\n"


def write_text(path: str | os.PathLike, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


# -- pretrained files ---------------------------------------------------------------


@dataclass
class Pretrained:
    table: MergeTable
    spec: PretokenizerSpec
    vocab: dict[str, int]
    special_ids: list[int] = field(default_factory=list)
    digest: str = ""
    raw: dict = field(default_factory=dict, repr=False)
    merges_as_pairs: bool = True

    def __iter__(self):
        return iter((self.table, self.spec, self.vocab))


def _spec_from_pretokenizer(pt: dict | None) -> PretokenizerSpec:
    if pt is None:
        return PretokenizerSpec.identity()
    kind = pt.get("type")
    if kind == "ByteLevel":
        pattern = GPT2_PATTERN if pt.get("use_regex", True) else None
        return PretokenizerSpec.bytelevel(pattern, bool(pt.get("add_prefix_space", False)))
    if kind == "WhitespaceSplit":
        return PretokenizerSpec.whitespace()
    if kind == "Sequence":
        parts = pt.get("pretokenizers", [])
        splits = [p for p in parts if p.get("type") == "Split"]
        bls = [p for p in parts if p.get("type") == "ByteLevel"]
        if len(splits) == 1 and len(bls) == 1 and len(parts) == 2:
            sp, bl = splits[0], bls[0]
            pat = sp.get("pattern", {})
            regex_src = pat.get("Regex")
            if regex_src is None and "String" in pat:
                regex_src = regex.escape(pat["String"])
            if (
                regex_src is not None
                and sp.get("behavior", "Isolated") == "Isolated"
                and not sp.get("invert", False)
                and not bl.get("use_regex", True)
            ):
                return PretokenizerSpec.bytelevel(regex_src, bool(bl.get("add_prefix_space", False)))
        if len(parts) == 1:
            return _spec_from_pretokenizer(parts[0])
    log.warning(
        "unrecognized pre-tokenizer %r; falling back to byte-level with the GPT-2 split pattern",
        kind,
    )
    return PretokenizerSpec.bytelevel()


def _parse_merge(item, i: int) -> tuple[str, str]:
    if isinstance(item, str):
        parts = item.split(" ")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise MalformedMerge(i, repr(item))
        return parts[0], parts[1]
    if isinstance(item, (list, tuple)) and len(item) == 2 and all(isinstance(x, str) for x in item):
        return item[0], item[1]
    raise MalformedMerge(i, repr(item))


def load_pretrained(path: str | os.PathLike, pretokenizer: PretokenizerSpec | None = None) -> Pretrained:
    """Load a tokenizer.json-style BPE description.

    ``path`` may be the JSON file (optionally gzipped) or a directory
    holding ``tokenizer.json``.
    """
    data = _read_bytes(path)
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise UnsupportedModelType(f"not a JSON tokenizer file: {exc}") from exc
    model = obj.get("model", obj)
    mtype = model.get("type", "BPE" if "merges" in model else None)
    if mtype != "BPE":
        raise UnsupportedModelType(f"model type {mtype!r} is not BPE")
    vocab: dict[str, int] = model.get("vocab") or {}
    raw_merges = model.get("merges") or []
    merges = [_parse_merge(m, i) for i, m in enumerate(raw_merges)]
    spec = pretokenizer or _spec_from_pretokenizer(obj.get("pre_tokenizer"))
    if obj.get("normalizer"):
        log.warning("tokenizer normalizer is ignored; corpus text is used as raw bytes")

    if spec.byte_level:
        present = sorted((vocab[u], u) for u in BYTE_ALPHABET if u in vocab)
        missing = [u for u in BYTE_ALPHABET if u not in vocab]
        if missing:
            log.warning("%d byte symbols missing from the vocabulary", len(missing))
        alphabet = [u for _, u in present] + missing
    else:
        results = {a + b for a, b in merges}
        base = {t for t in vocab if len(t) == 1}
        for a, b in merges:
            for side in (a, b):
                if side not in results and len(side) == 1:
                    base.add(side)
        alphabet = sorted(base, key=lambda u: (vocab.get(u, len(vocab)), u))
    table = build_merge_table(alphabet, merges)
    if vocab:
        for rule in table.rules:
            s = table.surface(rule.result)
            if s not in vocab:
                raise VocabMergeMismatch(
                    f"result {s!r} of merge {rule.origin_rank} not in vocab"
                )
    special = sorted(
        t["id"] for t in obj.get("added_tokens", []) or [] if t.get("special", False)
    )
    return Pretrained(
        table=table,
        spec=spec,
        vocab=vocab,
        special_ids=special,
        digest=digest_bytes(data),
        raw=obj,
        merges_as_pairs=bool(raw_merges) and not isinstance(raw_merges[0], str),
    )


# -- adapted files ------------------------------------------------------------------------


@dataclass
class AdaptedTokenizer:
    table: MergeTable
    spec: PretokenizerSpec
    provenance: dict


def adapted_document(table: MergeTable, spec: PretokenizerSpec, provenance: dict) -> dict:
    merges = [
        {
            "left": table.surface(r.left),
            "right": table.surface(r.right),
            "result": table.surface(r.result),
            "kind": r.kind.value,
            "origin_rank": r.origin_rank,
        }
        for r in table.rules
    ]
    prov_keys = ("source_digest", "method", "budget", "margin", "mode", "swaps", "tool_version")
    prov = {k: provenance.get(k) for k in prov_keys}
    prov.update({k: v for k, v in sorted(provenance.items()) if k not in prov})
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "base_alphabet": {
            "byte_level": set(table.alphabet) == set(BYTE_ALPHABET),
            "symbols": list(table.alphabet),
        },
        "pretokenizer": spec.to_dict(),
        "merges": merges,
        "provenance": prov,
    }


def _margin_value(margin):
    if margin is None:
        return None
    if margin == float("inf"):
        return "inf"
    if float(margin).is_integer():
        return int(margin)
    return str(margin)


def result_provenance(result: AdaptationResult, source_digest: str = "", method: str = "adaptbpe") -> dict:
    cfg = result.config
    return {
        "source_digest": source_digest,
        "method": method,
        "budget": cfg.budget if cfg else result.table.actual_count,
        "margin": _margin_value(cfg.margin) if cfg else 0,
        "mode": cfg.mode if cfg else "fast",
        "swaps": result.swaps,
        "tool_version": __version__,
    }


def save_adapted(
    path: str | os.PathLike,
    result: AdaptationResult | MergeTable,
    spec: PretokenizerSpec,
    provenance: dict | None = None,
    source_digest: str = "",
) -> None:
    if isinstance(result, AdaptationResult):
        table = result.table
        prov = result_provenance(result, source_digest)
    else:
        table = result
        prov = {
            "source_digest": source_digest,
            "method": None,
            "budget": table.actual_count,
            "margin": None,
            "mode": None,
            "swaps": 0,
            "tool_version": __version__,
        }
    if provenance:
        prov.update(provenance)
    write_text(path, _dump(adapted_document(table, spec, prov)))


def load_adapted(path: str | os.PathLike) -> AdaptedTokenizer:
    obj = json.loads(_read_bytes(path))
    if obj.get("format") != FORMAT_NAME:
        raise UnsupportedModelType(f"{path} is not an {FORMAT_NAME} file")
    if obj.get("version") != FORMAT_VERSION:
        raise UnsupportedModelType(f"unsupported {FORMAT_NAME} version {obj.get('version')}")
    alphabet = obj["base_alphabet"]["symbols"]
    n_base = len(alphabet)
    ids = {s: i for i, s in enumerate(alphabet)}
    rules = []
    for i, m in enumerate(obj["merges"]):
        try:
            left, right, rank = ids[m["left"]], ids[m["right"]], int(m["origin_rank"])
        except KeyError:
            raise ImproperMerge(i, "parent not created before use") from None
        if m["left"] + m["right"] != m["result"]:
            raise MalformedMerge(i, "result is not the concatenation of its parents")
        rid = n_base + rank
        ids[m["result"]] = rid
        rules.append(MergeRule(left, right, rid, rank, Kind(m["kind"])))
    table = MergeTable(alphabet, rules)
    return AdaptedTokenizer(table, PretokenizerSpec.from_dict(obj["pretokenizer"]), obj["provenance"])


def load_any(path: str | os.PathLike, pretokenizer: PretokenizerSpec | None = None):
    """(table, spec, pretrained-or-None) for either a pretrained or an adapted file."""
    obj = json.loads(_read_bytes(path))
    if obj.get("format") == FORMAT_NAME:
        ad = load_adapted(path)
        return ad.table, pretokenizer or ad.spec, None
    pre = load_pretrained(path, pretokenizer)
    return pre.table, pre.spec, pre


# -- masks ---------------------------------------------------------------------------------


def allowed_ids(table: MergeTable, vocab: dict[str, int], special_ids=()) -> list[int]:
    ids = set(special_ids)
    for s in table.alphabet:
        if s in vocab:
            ids.add(vocab[s])
    for r in table.rules:
        if r.kind is ACTUAL:
            s = table.surface(r.result)
            if s not in vocab:
                raise UnknownToken(f"{s!r} not in source vocabulary")
            ids.add(vocab[s])
    return sorted(ids)


def mask_document(table: MergeTable, vocab: dict[str, int], source_digest: str, special_ids=()) -> dict:
    allowed = allowed_ids(table, vocab, special_ids)
    return {"source_digest": source_digest, "allowed_ids": allowed, "count": len(allowed)}


def export_mask(
    result: AdaptationResult | MergeTable,
    vocab: dict[str, int],
    path: str | os.PathLike,
    source_digest: str = "",
    special_ids=(),
) -> dict:
    table = result.table if isinstance(result, AdaptationResult) else result
    doc = mask_document(table, vocab, source_digest, special_ids)
    write_text(path, json.dumps(doc) + "\n")
    return doc


def check_pairing(adapted: AdaptedTokenizer, pretrained: Pretrained) -> None:
    want = adapted.provenance.get("source_digest")
    if want and want != pretrained.digest:
        raise DigestMismatch(
            f"adapted file was built from {want[:12]}…, source is {pretrained.digest[:12]}…"
        )


# -- plain-BPE export ---------------------------------------------------------------------


def compat_table(table: MergeTable) -> tuple[MergeTable, list[int]]:
    """Actual merges whose parents stay expressible; returns (table, dropped ranks)."""
    keep = []
    dropped = []
    have = set(range(table.n_base))
    for r in table.rules:
        if r.kind is ACTUAL and r.left in have and r.right in have:
            keep.append(r.origin_rank)
            have.add(r.result)
        else:
            dropped.append(r.origin_rank)
    return table.subset(keep), dropped


def loss_report(table: MergeTable, plain: MergeTable, hist: WordHistogram | None) -> list[dict]:
    out = []
    if hist is None:
        return out
    for word, count in hist.items():
        canon = tokenize_word(table, word)
        flat = apply_merges(plain, to_base_ids(plain, word))
        if canon != flat:
            out.append(
                {
                    "word": word,
                    "count": count,
                    "canonical": [table.surface(t) for t in canon],
                    "plain": [plain.surface(t) for t in flat],
                }
            )
    return out


def export_compat(
    table: MergeTable,
    path: str | os.PathLike,
    hist: WordHistogram | None = None,
    source: Pretrained | None = None,
    report_path: str | os.PathLike | None = None,
) -> dict:
    """Write a plain merge list and return the loss report.

    With ``source`` the output is a copy of the source tokenizer file whose
    merge list is replaced (ids are unchanged); otherwise it is a
    ``merges.txt``-style list.
    """
    plain, dropped = compat_table(table)
    diffs = loss_report(table, plain, hist)
    pairs = [(plain.surface(r.left), plain.surface(r.right)) for r in plain.rules]
    if source is not None:
        doc = json.loads(json.dumps(source.raw))
        model = doc.setdefault("model", {})
        model["merges"] = [list(p) for p in pairs] if source.merges_as_pairs else [f"{a} {b}" for a, b in pairs]
        write_text(path, json.dumps(doc, ensure_ascii=False, indent=2) + "\n")
    else:
        write_text(path, "#version: 0.2\n" + "".join(f"{a} {b}\n" for a, b in pairs))
    report = {
        "lossless": not diffs and not dropped,
        "lossless_on_corpus": not diffs,
        "checked_words": 0 if hist is None else len(hist),
        "dropped_ranks": dropped,
        "divergent_words": diffs,
    }
    if hist is None and dropped:
        report["lossless"] = False
    if report_path is not None:
        write_text(report_path, _dump(report))
    return report
