"""Satisfaction probability of a formula over a video automaton.

The formula is compiled on the fly into a deterministic automaton whose
states are canonical *residual* formulas: progressing a residual through one
valuation yields the obligation left for the rest of the trace.  A forward
sweep over the product of automaton states and residuals accumulates path
probability; at the terminal state each residual is judged against the empty
suffix with :func:`finalize`.

``NEXT`` is strong, so ``progress(NEXT f)`` is ``f AND EVENTUALLY TRUE``: the
guard is true on any non-empty suffix and false on the empty one, which makes
``NEXT`` fail at the final window.

:func:`brute_force_probability` enumerates every path and evaluates its label
trace directly with the reference semantics; it exists to check the sweep.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .automaton import ConfidenceTrace, VideoAutomaton, valuation_distribution
from .errors import (
    InstanceTooLargeError, PropositionMismatchError, ResidualAtomError, StateExplosionError,
    UncalibratedTraceError,
)
from .formula import (
    FALSE, TRUE, Always, And, Atom, BooleanTrace, Const, Eventually, Formula, Implies, Next,
    Not, Or, Until, Valuation, collect_atoms, evaluate_batch, evaluate_trace, pretty_print,
)

DEFAULT_STATE_CAP = 100_000
BRUTE_FORCE_LIMIT = 10**6

NONEMPTY = Eventually(TRUE)


@dataclass(frozen=True)
class SatisfactionResult:
    probability: float
    state_count: int
    method: str  # "dp" or "brute_force"


class Progressor:
    """Canonicalization and progression with per-instance memo tables."""

    def __init__(self):
        self._canon: dict[Formula, Formula] = {}
        self._key: dict[Formula, str] = {}
        self._progress: dict[tuple[Formula, Valuation], Formula] = {}
        self._final: dict[Formula, bool] = {}

    # -- canonical form --------------------------------------------------

    def key(self, phi):
        k = self._key.get(phi)
        if k is None:
            k = self._key[phi] = pretty_print(phi)
        return k

    def canon(self, phi: Formula) -> Formula:
        out = self._canon.get(phi)
        if out is None:
            out = self._canon[phi] = self._canonicalize(phi)
            self._canon.setdefault(out, out)
        return out

    def _canonicalize(self, phi):
        t = type(phi)
        if t is Atom or t is Const:
            return phi
        if t is Not:
            x = self.canon(phi.arg)
            if type(x) is Const:
                return FALSE if x.value else TRUE
            if type(x) is Not:
                return x.arg
            return Not(x)
        if t is Implies:
            return self.canon(Or(Not(phi.left), phi.right))
        if t is And or t is Or:
            return self._nary(t, [self.canon(phi.left), self.canon(phi.right)])
        if t is Always:
            x = self.canon(phi.arg)
            return TRUE if x == TRUE else Always(x)
        if t is Eventually:
            x = self.canon(phi.arg)
            return FALSE if x == FALSE else Eventually(x)
        if t is Next:
            x = self.canon(phi.arg)
            return FALSE if x == FALSE else Next(x)
        if t is Until:
            left, right = self.canon(phi.left), self.canon(phi.right)
            return FALSE if right == FALSE else Until(left, right)
        raise TypeError(f"not a formula: {phi!r}")

    def _nary(self, op, operands):
        unit, zero = (TRUE, FALSE) if op is And else (FALSE, TRUE)
        flat = {}
        stack = list(operands)
        while stack:
            x = stack.pop()
            if type(x) is op:
                stack.extend((x.left, x.right))
            elif x == zero:
                return zero
            elif x != unit:
                flat[self.key(x)] = x
        for x in flat.values():
            if type(x) is Not and self.key(x.arg) in flat:
                return zero
        if not flat:
            return unit
        items = [flat[k] for k in sorted(flat)]
        out = items[-1]
        for x in reversed(items[:-1]):
            out = op(x, out)
        return out

    # -- progression -----------------------------------------------------

    def progress(self, phi: Formula, sigma: Valuation) -> Formula:
        memo = (phi, sigma)
        out = self._progress.get(memo)
        if out is None:
            out = self._progress[memo] = self.canon(self._step(phi, sigma))
        return out

    def _step(self, phi, sigma):
        t = type(phi)
        if t is Atom:
            return TRUE if sigma[phi.id] else FALSE
        if t is Const:
            return phi
        if t is Not:
            return Not(self._step(phi.arg, sigma))
        if t is And:
            return And(self._step(phi.left, sigma), self._step(phi.right, sigma))
        if t is Or:
            return Or(self._step(phi.left, sigma), self._step(phi.right, sigma))
        if t is Implies:
            return Or(Not(self._step(phi.left, sigma)), self._step(phi.right, sigma))
        if t is Next:
            return And(phi.arg, NONEMPTY)
        if t is Always:
            return And(self._step(phi.arg, sigma), phi)
        if t is Eventually:
            return Or(self._step(phi.arg, sigma), phi)
        if t is Until:
            return Or(self._step(phi.right, sigma), And(self._step(phi.left, sigma), phi))
        raise TypeError(f"not a formula: {phi!r}")

    # -- end of trace ----------------------------------------------------

    def finalize(self, phi: Formula) -> bool:
        out = self._final.get(phi)
        if out is None:
            out = self._final[phi] = self._fold(phi)
        return out

    def _fold(self, phi):
        t = type(phi)
        if t is Const:
            return phi.value
        if t is Atom:
            raise ResidualAtomError(f"proposition {phi.id!r} left unresolved at end of trace")
        if t is Not:
            return not self.finalize(phi.arg)
        if t is And:
            conjuncts = _flatten(phi, And)
            if NONEMPTY in conjuncts:
                return False
            return all(self.finalize(c) for c in conjuncts)
        if t is Or:
            return any(self.finalize(c) for c in _flatten(phi, Or))
        if t is Implies:
            return (not self.finalize(phi.left)) or self.finalize(phi.right)
        if t is Always:
            return True
        if t in (Eventually, Next, Until):
            return False
        raise TypeError(f"not a formula: {phi!r}")


def _flatten(phi, op):
    out, stack = [], [phi]
    while stack:
        x = stack.pop()
        if type(x) is op:
            stack.extend((x.right, x.left))
        else:
            out.append(x)
    return out


def canonicalize(phi: Formula) -> Formula:
    return Progressor().canon(phi)


def progress(phi: Formula, sigma: Valuation) -> Formula:
    """Residual obligation after reading ``sigma``; canonical."""
    ctx = Progressor()
    return ctx.progress(ctx.canon(phi), sigma)


def finalize(phi: Formula) -> bool:
    """Truth of a residual on the empty suffix."""
    return Progressor().finalize(phi)


def progress_trace(phi: Formula, trace: BooleanTrace, ctx: Progressor | None = None) -> Formula:
    ctx = ctx or Progressor()
    psi = ctx.canon(phi)
    for sigma in trace.steps:
        psi = ctx.progress(psi, sigma)
    return psi


def _check_props(phi, props):
    missing = [p for p in collect_atoms(phi).ids if p not in props]
    if missing:
        raise PropositionMismatchError(f"propositions {missing} are not in the automaton")


def _clamp(p):
    return min(1.0, max(0.0, p))


def satisfaction_probability(a: VideoAutomaton, phi: Formula,
                             max_states: int = DEFAULT_STATE_CAP) -> SatisfactionResult:
    """P[a |= phi] by a forward sweep over (automaton state, residual) pairs."""
    _check_props(phi, a.props)
    ctx = Progressor()
    frontier = {(a.initial, ctx.canon(phi)): 1.0}
    residuals = {ctx.canon(phi)}
    explored = 1
    total = 0.0
    while frontier:
        nxt: dict = defaultdict(float)
        for (q, psi), p in frontier.items():
            for q2, t in a.successors(q):
                if q2 == a.terminal:
                    if ctx.finalize(psi):
                        total += p * t
                    continue
                psi2 = ctx.progress(psi, a.label(q2))
                nxt[(q2, psi2)] += p * t
                if psi2 not in residuals:
                    residuals.add(psi2)
                    if len(residuals) > max_states:
                        raise StateExplosionError(
                            f"more than {max_states} distinct residual formulas")
        explored += len(nxt)
        frontier = nxt
    return SatisfactionResult(_clamp(total), explored, "dp")


def satisfaction_probability_from_trace(trace: ConfidenceTrace, phi: Formula,
                                        max_states: int = DEFAULT_STATE_CAP) -> SatisfactionResult:
    """Same quantity without building the automaton.

    Layers are independent, so a distribution over residuals suffices.
    """
    if not trace.calibrated:
        raise UncalibratedTraceError("satisfaction probability needs calibrated confidences")
    _check_props(phi, trace.props)
    ctx = Progressor()
    dist = {ctx.canon(phi): 1.0}
    residuals = set(dist)
    explored = 1
    for row in trace.windows:
        layer = valuation_distribution(row, trace.props)
        nxt: dict = defaultdict(float)
        for psi, p in dist.items():
            for sigma, pv in layer:
                psi2 = ctx.progress(psi, sigma)
                nxt[psi2] += p * pv
                if psi2 not in residuals:
                    residuals.add(psi2)
                    if len(residuals) > max_states:
                        raise StateExplosionError(
                            f"more than {max_states} distinct residual formulas")
        explored += len(nxt)
        dist = nxt
    total = sum(p for psi, p in dist.items() if ctx.finalize(psi))
    return SatisfactionResult(_clamp(total), explored, "dp")


def enumerate_paths(a: VideoAutomaton):
    """Yield ``(probability, labels)`` for every initial-to-terminal path."""
    def dfs(q, prob, labels):
        for q2, t in a.successors(q):
            if q2 == a.terminal:
                yield prob * t, tuple(labels)
            else:
                labels.append(a.label(q2))
                yield from dfs(q2, prob * t, labels)
                labels.pop()
    yield from dfs(a.initial, 1.0, [])


def brute_force_probability(a: VideoAutomaton, phi: Formula, limit: int = BRUTE_FORCE_LIMIT,
                            vectorized: bool = True) -> SatisfactionResult:
    """Sum the probability of every path whose label trace satisfies ``phi``."""
    _check_props(phi, a.props)
    count = a.path_count()
    if count > limit:
        raise InstanceTooLargeError(f"{count} paths exceed the limit of {limit}")
    paths = list(enumerate_paths(a))
    if not paths:
        return SatisfactionResult(0.0, 0, "brute_force")
    if vectorized:
        probs = np.array([p for p, _ in paths])
        bits = np.array([[v.bits for v in labels] for _, labels in paths], dtype=bool)
        bits = bits.reshape(len(paths), len(paths[0][1]), len(a.props))
        sat = evaluate_batch(phi, a.props, bits)
        total = float(probs[sat].sum())
    else:
        total = 0.0
        for p, labels in paths:
            if evaluate_trace(phi, BooleanTrace(a.props, labels)):
                total += p
    return SatisfactionResult(_clamp(total), len(paths), "brute_force")
