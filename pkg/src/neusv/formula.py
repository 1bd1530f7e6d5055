"""Finite-trace temporal logic: propositions, formula AST and boolean semantics.

Formulas are immutable trees of frozen dataclasses, so structural equality
and hashing come for free and formulas can be used as dictionary keys.

The semantics here is the reference the rest of the package is tested
against.  A trace has at least one step; ``NEXT`` is strong (false at the
last step) and ``UNTIL`` is strong (the right operand must eventually hold).
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import PropositionError, WidthMismatchError

_NON_IDENT = re.compile(r"[^a-z0-9]+")
_IDENT = re.compile(r"[a-z0-9_]+")


# ---------------------------------------------------------------------------
# propositions

@dataclass(frozen=True)
class Proposition:
    id: str
    display: str = ""

    def __post_init__(self):
        if not _IDENT.fullmatch(self.id):
            raise PropositionError(f"invalid proposition id {self.id!r}")
        if not self.display:
            object.__setattr__(self, "display", self.id)


def normalize_id(phrase: str) -> str:
    """Lowercase ``phrase`` and collapse every non-alphanumeric run to ``_``."""
    ident = _NON_IDENT.sub("_", phrase.strip().lower()).strip("_")
    if not ident:
        raise PropositionError(f"phrase {phrase!r} is empty after normalization")
    return ident


def normalize_proposition(phrase: str) -> Proposition:
    if not phrase or not phrase.strip():
        raise PropositionError("empty proposition phrase")
    return Proposition(normalize_id(phrase), phrase.strip())


@dataclass(frozen=True)
class PropositionSet:
    """Ordered, duplicate-free propositions; position is the valuation bit index."""

    items: tuple[Proposition, ...] = ()
    _index: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        items = tuple(self.items)
        object.__setattr__(self, "items", items)
        index = {}
        for i, p in enumerate(items):
            if p.id in index:
                raise PropositionError(f"duplicate proposition {p.id!r}")
            index[p.id] = i
        object.__setattr__(self, "_index", index)

    @classmethod
    def of(cls, *names: str | Proposition) -> "PropositionSet":
        """Build from phrases or ids (normalized) or ready-made propositions."""
        items = []
        seen = set()
        for n in names:
            p = n if isinstance(n, Proposition) else normalize_proposition(n)
            if p.id not in seen:
                seen.add(p.id)
                items.append(p)
        return cls(tuple(items))

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(p.id for p in self.items)

    def index(self, prop_id: str) -> int:
        return self._index[prop_id]

    def get(self, prop_id: str) -> Proposition | None:
        i = self._index.get(prop_id)
        return None if i is None else self.items[i]

    def __contains__(self, prop_id) -> bool:
        if isinstance(prop_id, Proposition):
            prop_id = prop_id.id
        return prop_id in self._index

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator[Proposition]:
        return iter(self.items)

    def __getitem__(self, i: int) -> Proposition:
        return self.items[i]

    def subset(self, ids: Iterable[str]) -> "PropositionSet":
        return PropositionSet(tuple(self.items[self._index[i]] for i in ids))


# ---------------------------------------------------------------------------
# formula AST

class Formula:
    """Base class of formula nodes.  Subclasses are frozen dataclasses."""

    __slots__ = ()

    def __and__(self, other):
        return And(self, other)

    def __or__(self, other):
        return Or(self, other)

    def __invert__(self):
        return Not(self)

    def __rshift__(self, other):
        return Implies(self, other)

    def __str__(self):
        return pretty_print(self)

    def children(self) -> tuple["Formula", ...]:
        return ()


@dataclass(frozen=True, repr=False)
class Atom(Formula):
    id: str

    def __repr__(self):
        return f"Atom({self.id!r})"


@dataclass(frozen=True, repr=False)
class Const(Formula):
    value: bool

    def __repr__(self):
        return "TRUE" if self.value else "FALSE"


TRUE = Const(True)
FALSE = Const(False)


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Always(Formula):
    arg: Formula

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class Eventually(Formula):
    arg: Formula

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class Next(Formula):
    arg: Formula

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)


_UNARY_WORD = {Not: "NOT", Always: "ALWAYS", Eventually: "EVENTUALLY", Next: "NEXT"}
_BINARY_WORD = {And: "AND", Or: "OR", Implies: "IMPLIES", Until: "UNTIL"}


def pretty_print(phi: Formula) -> str:
    """Word-operator form with every compound subformula parenthesized."""
    if isinstance(phi, Atom):
        return f'"{phi.id}"'
    if isinstance(phi, Const):
        return "TRUE" if phi.value else "FALSE"
    word = _UNARY_WORD.get(type(phi))
    if word is not None:
        return f"({word} {pretty_print(phi.arg)})"
    word = _BINARY_WORD[type(phi)]
    return f"({pretty_print(phi.left)} {word} {pretty_print(phi.right)})"


def walk(phi: Formula) -> Iterator[Formula]:
    """Pre-order, left-to-right traversal."""
    stack = [phi]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.children()))


def collect_atoms(phi: Formula) -> PropositionSet:
    """Atoms of ``phi`` in order of first appearance."""
    seen = {}
    for node in walk(phi):
        if isinstance(node, Atom) and node.id not in seen:
            seen[node.id] = Proposition(node.id)
    return PropositionSet(tuple(seen.values()))


def depth(phi: Formula) -> int:
    kids = phi.children()
    return 0 if not kids else 1 + max(depth(k) for k in kids)


# ---------------------------------------------------------------------------
# valuations and traces

@dataclass(frozen=True)
class Valuation:
    props: PropositionSet
    bits: tuple[bool, ...]

    def __post_init__(self):
        bits = tuple(bool(b) for b in self.bits)
        object.__setattr__(self, "bits", bits)
        if len(bits) != len(self.props):
            raise WidthMismatchError(
                f"valuation has {len(bits)} bits for {len(self.props)} propositions")

    @classmethod
    def from_true(cls, props: PropositionSet, true_ids: Iterable[str]) -> "Valuation":
        true_ids = set(true_ids)
        unknown = true_ids - set(props.ids)
        if unknown:
            raise WidthMismatchError(f"unknown propositions {sorted(unknown)}")
        return cls(props, tuple(p.id in true_ids for p in props))

    @classmethod
    def from_int(cls, props: PropositionSet, k: int) -> "Valuation":
        """Bit ``i`` of ``k`` is the value of proposition ``i``."""
        return cls(props, tuple(bool(k >> i & 1) for i in range(len(props))))

    def __getitem__(self, prop_id: str) -> bool:
        try:
            return self.bits[self.props.index(prop_id)]
        except KeyError:
            raise WidthMismatchError(
                f"proposition {prop_id!r} is outside the valuation's "
                f"{len(self.bits)} propositions") from None

    def true_ids(self) -> tuple[str, ...]:
        return tuple(p.id for p, b in zip(self.props, self.bits) if b)

    def as_int(self) -> int:
        return sum(1 << i for i, b in enumerate(self.bits) if b)

    def __str__(self):
        return "{" + ", ".join(self.true_ids()) + "}"


def all_valuations(props: PropositionSet) -> list[Valuation]:
    return [Valuation.from_int(props, k) for k in range(1 << len(props))]


@dataclass(frozen=True)
class BooleanTrace:
    props: PropositionSet
    steps: tuple[Valuation, ...]

    def __post_init__(self):
        steps = tuple(self.steps)
        object.__setattr__(self, "steps", steps)
        if not steps:
            raise ValueError("a trace needs at least one step")
        for v in steps:
            if v.props != self.props:
                raise WidthMismatchError("all valuations must share one proposition set")

    @classmethod
    def from_sets(cls, props: PropositionSet, steps: Sequence[Iterable[str]]) -> "BooleanTrace":
        return cls(props, tuple(Valuation.from_true(props, s) for s in steps))

    def __len__(self):
        return len(self.steps)


def all_traces(props: PropositionSet, length: int) -> Iterator[BooleanTrace]:
    vals = all_valuations(props)
    for steps in itertools.product(vals, repeat=length):
        yield BooleanTrace(props, steps)


# ---------------------------------------------------------------------------
# semantics

def evaluate_trace(phi: Formula, trace: BooleanTrace, pos: int = 0) -> bool:
    """Truth of ``phi`` at position ``pos`` of a finite trace."""
    n = len(trace.steps)
    if not 0 <= pos < n:
        raise IndexError(f"position {pos} outside trace of length {n}")
    return _eval(phi, trace.steps, pos, n)


def _eval(phi, steps, i, n):
    t = type(phi)
    if t is Atom:
        return steps[i][phi.id]
    if t is Const:
        return phi.value
    if t is Not:
        return not _eval(phi.arg, steps, i, n)
    if t is And:
        return _eval(phi.left, steps, i, n) and _eval(phi.right, steps, i, n)
    if t is Or:
        return _eval(phi.left, steps, i, n) or _eval(phi.right, steps, i, n)
    if t is Implies:
        return (not _eval(phi.left, steps, i, n)) or _eval(phi.right, steps, i, n)
    if t is Always:
        return all(_eval(phi.arg, steps, k, n) for k in range(i, n))
    if t is Eventually:
        return any(_eval(phi.arg, steps, k, n) for k in range(i, n))
    if t is Next:
        return i + 1 < n and _eval(phi.arg, steps, i + 1, n)
    if t is Until:
        for j in range(i, n):
            if _eval(phi.right, steps, j, n):
                return True
            if not _eval(phi.left, steps, j, n):
                return False
        return False
    raise TypeError(f"not a formula: {phi!r}")


def evaluate_batch(phi: Formula, props: PropositionSet, bits: np.ndarray) -> np.ndarray:
    """Evaluate ``phi`` at position 0 of many traces at once.

    ``bits`` has shape ``(traces, steps, len(props))``.  Each subformula is
    computed for every position with a backward sweep, so the cost is linear
    in the trace length.
    """
    bits = np.asarray(bits, dtype=bool)
    if bits.ndim != 3 or bits.shape[2] != len(props) or bits.shape[1] < 1:
        raise WidthMismatchError(f"bits of shape {bits.shape} do not match {len(props)} propositions")
    return _eval_batch(phi, props, bits)[:, 0]


def _eval_batch(phi, props, bits):
    m, n, _ = bits.shape
    t = type(phi)
    if t is Atom:
        if phi.id not in props:
            raise WidthMismatchError(f"proposition {phi.id!r} not in trace propositions")
        return bits[:, :, props.index(phi.id)]
    if t is Const:
        return np.full((m, n), phi.value)
    if t in (And, Or, Implies, Until):
        a = _eval_batch(phi.left, props, bits)
        b = _eval_batch(phi.right, props, bits)
        if t is And:
            return a & b
        if t is Or:
            return a | b
        if t is Implies:
            return ~a | b
        out = np.empty_like(b)
        out[:, -1] = b[:, -1]
        for k in range(n - 2, -1, -1):
            out[:, k] = b[:, k] | (a[:, k] & out[:, k + 1])
        return out
    a = _eval_batch(phi.arg, props, bits)
    if t is Not:
        return ~a
    if t is Always:
        return np.logical_and.accumulate(a[:, ::-1], axis=1)[:, ::-1]
    if t is Eventually:
        return np.logical_or.accumulate(a[:, ::-1], axis=1)[:, ::-1]
    if t is Next:
        out = np.zeros_like(a)
        out[:, :-1] = a[:, 1:]
        return out
    raise TypeError(f"not a formula: {phi!r}")
