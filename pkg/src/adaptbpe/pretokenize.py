"""Pre-tokenization and word histograms.

Text is handled as raw bytes.  Each pre-token is returned as a string of
*units*, one unit per base symbol: for byte-level schemes a unit is the
printable stand-in of one byte (GPT-2 remapping), for the other schemes it
is one decoded character (undecodable bytes survive as surrogate escapes).
"""

from __future__ import annotations

import logging
import os
from collections import Counter
from collections.abc import Iterable, Iterator
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import regex

from adaptbpe.errors import UnsupportedPattern

log = logging.getLogger(__name__)

GPT2_PATTERN = r"""'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+"""

BYTELEVEL = "bytelevel"
WHITESPACE = "whitespace"
IDENTITY = "identity"
SCHEMES = (BYTELEVEL, WHITESPACE, IDENTITY)


def bytes_to_unicode() -> dict[int, str]:
    """The reversible byte -> printable character table used by byte-level BPE."""
    bs = (
        list(range(ord("!"), ord("~") + 1))
        + list(range(ord("¡"), ord("¬") + 1))
        + list(range(ord("®"), ord("ÿ") + 1))
    )
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return dict(zip(bs, (chr(c) for c in cs)))


BYTE_TO_UNIT = bytes_to_unicode()
UNIT_TO_BYTE = {u: b for b, u in BYTE_TO_UNIT.items()}
BYTE_ALPHABET: tuple[str, ...] = tuple(BYTE_TO_UNIT.values())
_BYTE_TRANS = [BYTE_TO_UNIT[b] for b in range(256)]


@lru_cache(maxsize=32)
def _compile(pattern: str):
    try:
        return regex.compile(pattern)
    except (regex.error, TypeError) as exc:
        raise UnsupportedPattern(f"cannot compile split pattern {pattern!r}: {exc}") from exc


@dataclass(frozen=True)
class PretokenizerSpec:
    scheme: str = BYTELEVEL
    pattern: str | None = GPT2_PATTERN
    add_prefix_space: bool = False

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown pre-tokenizer scheme {self.scheme!r}")
        if self.scheme == BYTELEVEL and self.pattern is not None:
            _compile(self.pattern)

    @classmethod
    def bytelevel(cls, pattern: str | None = GPT2_PATTERN, add_prefix_space: bool = False):
        return cls(BYTELEVEL, pattern, add_prefix_space)

    @classmethod
    def whitespace(cls):
        return cls(WHITESPACE, None, False)

    @classmethod
    def identity(cls):
        return cls(IDENTITY, None, False)

    @property
    def byte_level(self) -> bool:
        return self.scheme == BYTELEVEL

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "pattern": self.pattern,
            "add_prefix_space": self.add_prefix_space,
        }

    @classmethod
    def from_dict(cls, d: dict) -> PretokenizerSpec:
        return cls(d["scheme"], d.get("pattern"), bool(d.get("add_prefix_space", False)))

    # -- unit conversions ----------------------------------------------------

    def to_units(self, data: bytes) -> str:
        if self.byte_level:
            return "".join(_BYTE_TRANS[b] for b in data)
        return data.decode("utf-8", "surrogateescape")

    def from_units(self, units: str) -> bytes:
        if self.byte_level:
            return bytes(UNIT_TO_BYTE[u] for u in units)
        return units.encode("utf-8", "surrogateescape")

    def char_length(self, units: str) -> int:
        """Number of Unicode scalar values (undecodable bytes count one each)."""
        if self.byte_level:
            return len(self.from_units(units).decode("utf-8", "surrogateescape"))
        return len(units)


def _as_bytes(text: bytes | str) -> bytes:
    return text.encode("utf-8", "surrogateescape") if isinstance(text, str) else text


def pretokenize(text: bytes | str, spec: PretokenizerSpec) -> list[str]:
    """Split ``text`` into pre-tokens expressed in base units.

    Byte-level splitting keeps every character: stretches the pattern does
    not match become pre-tokens of their own, so joining the pre-tokens and
    undoing the byte remapping gives back the input.
    """
    data = _as_bytes(text)
    if not data:
        return []
    if spec.scheme == WHITESPACE:
        return [w.decode("utf-8", "surrogateescape") for w in data.split()]
    if spec.scheme == IDENTITY:
        return [data.decode("utf-8", "surrogateescape")]

    decoded = data.decode("utf-8", "surrogateescape")
    if spec.add_prefix_space and not decoded.startswith(" "):
        decoded = " " + decoded
    if spec.pattern is None:
        pieces = [decoded]
    else:
        pieces = []
        pos = 0
        for m in _compile(spec.pattern).finditer(decoded):
            if m.start() > pos:
                pieces.append(decoded[pos : m.start()])
            if m.end() > m.start():
                pieces.append(m.group())
            pos = m.end()
        if pos < len(decoded):
            pieces.append(decoded[pos:])
    trans = _BYTE_TRANS
    return ["".join(trans[b] for b in p.encode("utf-8", "surrogateescape")) for p in pieces]


def iter_pretokens(text: bytes | str, spec: PretokenizerSpec, per_line: bool = True) -> Iterator[str]:
    """Pre-tokens of ``text``; with ``per_line`` each line is a fresh context."""
    data = _as_bytes(text)
    if not per_line:
        yield from pretokenize(data, spec)
        return
    for line in data.splitlines(keepends=True):
        yield from pretokenize(line, spec)


@dataclass
class WordHistogram:
    """Pre-token -> occurrence count over a corpus."""

    spec: PretokenizerSpec
    counts: Counter = field(default_factory=Counter)

    def __len__(self) -> int:
        return len(self.counts)

    def __bool__(self) -> bool:
        return bool(self.counts)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WordHistogram):
            return NotImplemented
        return self.spec == other.spec and dict(self.counts) == dict(other.counts)

    def items(self):
        """Entries in a deterministic order (descending count, then word)."""
        return sorted(self.counts.items(), key=lambda kv: (-kv[1], kv[0]))

    @property
    def total_base_symbols(self) -> int:
        return sum(len(w) * c for w, c in self.counts.items())

    @property
    def total_chars(self) -> int:
        cl = self.spec.char_length
        return sum(cl(w) * c for w, c in self.counts.items())

    @property
    def word_count(self) -> int:
        return sum(self.counts.values())

    def add_text(self, text: bytes | str, per_line: bool = True) -> None:
        self.counts.update(iter_pretokens(text, self.spec, per_line))


def build_histogram(
    texts: Iterable[bytes | str], spec: PretokenizerSpec, per_line: bool = True
) -> WordHistogram:
    hist = WordHistogram(spec)
    for text in texts:
        hist.add_text(text, per_line)
    return hist


def merge_histograms(a: WordHistogram, b: WordHistogram) -> WordHistogram:
    if a.spec != b.spec:
        raise ValueError("cannot merge histograms built with different pre-tokenizers")
    out = WordHistogram(a.spec, Counter(a.counts))
    out.counts.update(b.counts)
    return out


# -- corpus files --------------------------------------------------------------


def corpus_files(paths: Iterable[str | os.PathLike]) -> list[Path]:
    """Expand files and directories (recursively) into a sorted file list."""
    out: list[Path] = []
    for p in paths:
        p = Path(p)
        if p.is_dir():
            out.extend(sorted(q for q in p.rglob("*") if q.is_file()))
        elif p.is_file():
            out.append(p)
        else:
            raise FileNotFoundError(f"corpus path not found: {p}")
    return out


def _file_counts(args: tuple[str, PretokenizerSpec, bool]) -> Counter:
    path, spec, per_line = args
    hist = WordHistogram(spec)
    hist.add_text(Path(path).read_bytes(), per_line)
    return hist.counts


def histogram_from_paths(
    paths: Iterable[str | os.PathLike],
    spec: PretokenizerSpec,
    per_line: bool = True,
    workers: int = 1,
) -> WordHistogram:
    files = corpus_files(paths)
    jobs = [(str(f), spec, per_line) for f in files]
    hist = WordHistogram(spec)
    if workers > 1 and len(files) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for counts in pool.map(_file_counts, jobs):
                hist.counts.update(counts)
    else:
        for job in jobs:
            hist.counts.update(_file_counts(job))
    log.debug("histogram: %d files, %d unique pre-tokens", len(files), len(hist))
    return hist
