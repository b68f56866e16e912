"""Symbols, merge rules and merge tables.

Symbol ids are stable across every table derived from the same pretrained
list: base symbol ``i`` has id ``i`` and the result of the merge with
original rank ``r`` has id ``len(alphabet) + r``.  A table built straight
from a pretrained list therefore has dense ids; tables that keep only part
of the list (truncations, adapted lists) keep the same ids for the same
tokens.
"""

from __future__ import annotations

import enum
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, replace

from adaptbpe.errors import DuplicateSymbol, ImproperMerge, OutOfRange


class Kind(str, enum.Enum):
    ACTUAL = "actual"
    VIRTUAL = "virtual"


ACTUAL = Kind.ACTUAL
VIRTUAL = Kind.VIRTUAL


@dataclass(frozen=True)
class Symbol:
    id: int
    surface: str
    is_base: bool


@dataclass(frozen=True)
class MergeRule:
    left: int
    right: int
    result: int
    origin_rank: int
    kind: Kind = ACTUAL

    @property
    def pair(self) -> tuple[int, int]:
        return (self.left, self.right)


def first_improper_index(n_base: int, rules: Sequence[MergeRule]) -> int | None:
    """Position of the first rule whose parents are not available yet, or None."""
    available: set[int] = set()
    for i, rule in enumerate(rules):
        for parent in (rule.left, rule.right):
            if parent >= n_base and parent not in available:
                return i
        available.add(rule.result)
    return None


class MergeTable:
    """An ordered, proper list of merge rules over a fixed base alphabet.

    ``rules`` is the application order.  Each rule keeps its ``origin_rank``
    (position in the pretrained list) as its identity; ``set_kind`` flips a
    rule between actual and virtual without touching the order.
    """

    def __init__(
        self,
        alphabet: Sequence[str],
        rules: Iterable[MergeRule],
        surfaces: dict[int, str] | None = None,
        *,
        validate: bool = True,
    ):
        self.alphabet: tuple[str, ...] = tuple(alphabet)
        self.rules: list[MergeRule] = list(rules)
        n_base = len(self.alphabet)
        if surfaces is None:
            surfaces = {}
        self._surface: dict[int, str] = {i: s for i, s in enumerate(self.alphabet)}
        self._position: dict[int, int] = {}
        for pos, rule in enumerate(self.rules):
            if rule.origin_rank in self._position:
                raise DuplicateSymbol(f"origin rank {rule.origin_rank} appears twice")
            self._position[rule.origin_rank] = pos
        if validate:
            bad = first_improper_index(n_base, self.rules)
            if bad is not None:
                raise ImproperMerge(bad)
        for rule in self.rules:
            left = self._surface.get(rule.left, surfaces.get(rule.left))
            right = self._surface.get(rule.right, surfaces.get(rule.right))
            if left is None or right is None:
                raise ImproperMerge(self._position[rule.origin_rank], "unknown parent surface")
            self._surface[rule.result] = left + right
        self.actual_count = sum(1 for r in self.rules if r.kind is ACTUAL)
        self._pair_pos: dict[tuple[int, int], int] | None = None
        self._by_surface: dict[str, int] | None = None
        self._expansions: dict[int, tuple[int, ...]] = {}
        self._rule_of: dict[int, MergeRule] | None = None

    # -- basic accessors -------------------------------------------------

    @property
    def n_base(self) -> int:
        return len(self.alphabet)

    def __len__(self) -> int:
        return len(self.rules)

    def __repr__(self) -> str:
        return (
            f"MergeTable(base={self.n_base}, merges={len(self.rules)}, "
            f"actual={self.actual_count})"
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MergeTable):
            return NotImplemented
        return self.alphabet == other.alphabet and self.rules == other.rules

    @property
    def ranks(self) -> list[int]:
        return [r.origin_rank for r in self.rules]

    def surface(self, sym: int) -> str:
        return self._surface[sym]

    def symbol(self, sym: int) -> Symbol:
        return Symbol(sym, self._surface[sym], sym < self.n_base)

    def symbols(self) -> list[Symbol]:
        return [self.symbol(i) for i in sorted(self._surface)]

    def has_symbol(self, sym: int) -> bool:
        return sym in self._surface

    def id_of(self, surface: str) -> int:
        if self._by_surface is None:
            self._by_surface = {s: i for i, s in self._surface.items()}
        return self._by_surface[surface]

    def has_rank(self, rank: int) -> bool:
        return rank in self._position

    def position(self, rank: int) -> int:
        return self._position[rank]

    def rule(self, rank: int) -> MergeRule:
        try:
            return self.rules[self._position[rank]]
        except KeyError:
            raise OutOfRange(f"no merge with rank {rank} in table of {len(self.rules)}") from None

    def rule_producing(self, sym: int) -> MergeRule | None:
        if self._rule_of is None:
            self._rule_of = {r.result: r for r in self.rules}
        return self._rule_of.get(sym)

    def result_id(self, rank: int) -> int:
        return self.n_base + rank

    @property
    def pair_positions(self) -> dict[tuple[int, int], int]:
        """Map (left, right) -> position in application order."""
        if self._pair_pos is None:
            self._pair_pos = {r.pair: pos for pos, r in enumerate(self.rules)}
        return self._pair_pos

    def actual_ranks(self) -> list[int]:
        return [r.origin_rank for r in self.rules if r.kind is ACTUAL]

    def virtual_ranks(self) -> list[int]:
        return [r.origin_rank for r in self.rules if r.kind is VIRTUAL]

    # -- mutation ----------------------------------------------------------

    def set_kind(self, rank: int, kind: Kind | str) -> MergeTable:
        kind = Kind(kind)
        pos = self._position.get(rank)
        if pos is None:
            raise OutOfRange(f"no merge with rank {rank} in table of {len(self.rules)}")
        old = self.rules[pos]
        if old.kind is kind:
            return self
        self.rules[pos] = replace(old, kind=kind)
        self.actual_count += 1 if kind is ACTUAL else -1
        self._expansions.clear()
        self._rule_of = None
        return self

    # -- derivation --------------------------------------------------------

    def subset(
        self, ranks: Iterable[int], kinds: dict[int, Kind] | None = None
    ) -> MergeTable:
        """New table holding the given ranks in the given order."""
        kinds = kinds or {}
        rules = []
        for rank in ranks:
            rule = self.rule(rank)
            k = kinds.get(rank, rule.kind)
            rules.append(rule if k is rule.kind else replace(rule, kind=Kind(k)))
        return MergeTable(self.alphabet, rules, self._surface)

    def prefix(self, n: int) -> MergeTable:
        return self.subset(self.ranks[:n])

    def copy(self) -> MergeTable:
        return MergeTable(self.alphabet, self.rules, self._surface, validate=False)

    # -- expansion -----------------------------------------------------------

    def expand_base(self, sym: int) -> tuple[int, ...]:
        """Decompose a symbol all the way down to base symbols."""
        out: list[int] = []
        stack = [sym]
        while stack:
            s = stack.pop()
            if s < self.n_base:
                out.append(s)
                continue
            rule = self.rule_producing(s)
            if rule is None:
                raise KeyError(s)
            stack.append(rule.right)
            stack.append(rule.left)
        return tuple(out)

    def expand_virtual(self, sym: int) -> tuple[int, ...]:
        """Split a token recursively while it is produced by a virtual rule."""
        cached = self._expansions.get(sym)
        if cached is not None:
            return cached
        rule = self.rule_producing(sym) if sym >= self.n_base else None
        if rule is None or rule.kind is ACTUAL:
            out: tuple[int, ...] = (sym,)
        else:
            out = self.expand_virtual(rule.left) + self.expand_virtual(rule.right)
        self._expansions[sym] = out
        return out


def build_merge_table(
    alphabet: Sequence[str], raw_merges: Iterable[tuple[str, str]]
) -> MergeTable:
    """Resolve string merges against ``alphabet`` into a validated table.

    Every merge must reference parents that are base symbols or results of
    earlier merges; every result must be new.
    """
    alphabet = list(alphabet)
    by_surface: dict[str, int] = {}
    for i, s in enumerate(alphabet):
        if s in by_surface:
            raise DuplicateSymbol(f"alphabet entry {s!r} repeated")
        by_surface[s] = i
    n_base = len(alphabet)
    rules = []
    for rank, (left, right) in enumerate(raw_merges):
        li = by_surface.get(left)
        ri = by_surface.get(right)
        if li is None or ri is None:
            missing = left if li is None else right
            raise ImproperMerge(rank, f"{missing!r} not created before use")
        result = left + right
        if result in by_surface:
            raise DuplicateSymbol(
                f"merge {rank} ({left!r}, {right!r}) produces {result!r}, "
                f"already produced by symbol {by_surface[result]}"
            )
        rid = n_base + rank
        by_surface[result] = rid
        rules.append(MergeRule(li, ri, rid, rank, ACTUAL))
    return MergeTable(alphabet, rules, validate=False)


def validate_properness(table: MergeTable) -> None:
    """Raise :class:`ImproperMerge` at the first rule used before its parents exist."""
    bad = first_improper_index(table.n_base, table.rules)
    if bad is not None:
        raise ImproperMerge(bad)


def set_kind(table: MergeTable, rank: int, kind: Kind | str) -> MergeTable:
    return table.set_kind(rank, kind)
