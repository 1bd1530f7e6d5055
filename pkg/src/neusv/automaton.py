"""Confidence calibration and the layered video automaton.

A video automaton is a DTMC whose states are grouped in layers: the initial
state, one layer per frame window holding every proposition valuation with
non-zero probability, and a terminal state.  Every state of layer ``j - 1``
moves to a valuation ``e`` of layer ``j`` with probability

    prod_i  c[j, i] ** e_i * (1 - c[j, i]) ** (1 - e_i)

which does not depend on the source state.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    ConfidenceDomainError, EmptyTraceError, InvalidThresholdError, UncalibratedTraceError,
    WidthMismatchError,
)
from .formula import PropositionSet, Valuation

# Products below this are floating-point dust and pruned like exact zeros.
PRUNE_EPSILON = 1e-12
STOCHASTIC_TOLERANCE = 1e-9

INITIAL = "initial"
TERMINAL = "terminal"


def calibrate_confidence(c: float, gamma_fp: float) -> float:
    """Map a raw detector confidence so the decision threshold lands on 0.5.

    Piecewise linear through (0, 0), (gamma_fp, 0.5) and (1, 1).
    """
    if not 0.0 < gamma_fp < 1.0 or math.isnan(gamma_fp):
        raise InvalidThresholdError(f"threshold must lie in (0, 1), got {gamma_fp}")
    if not 0.0 <= c <= 1.0:
        raise ConfidenceDomainError(f"confidence must lie in [0, 1], got {c}")
    if c < gamma_fp:
        return 0.5 * c / gamma_fp
    return 0.5 + 0.5 * (c - gamma_fp) / (1.0 - gamma_fp)


def calibrate_matrix(raw, gamma_fp: float) -> np.ndarray:
    raw = np.asarray(raw, dtype=float)
    return np.vectorize(lambda c: calibrate_confidence(float(c), gamma_fp), otypes=[float])(raw)


@dataclass(frozen=True, eq=False)
class ConfidenceTrace:
    """Per-window confidences: ``windows[j, i]`` for window ``j``, proposition ``i``."""

    props: PropositionSet
    windows: np.ndarray
    window_size: int = 1
    calibrated: bool = False

    def __post_init__(self):
        w = np.array(self.windows, dtype=float)
        if w.ndim == 1 and len(self.props) == 0:
            w = w.reshape(len(w), 0)
        if w.ndim != 2:
            raise WidthMismatchError("confidence windows must form a matrix")
        if w.shape[0] < 1:
            raise EmptyTraceError("a confidence trace needs at least one window")
        if w.shape[1] != len(self.props):
            raise WidthMismatchError(
                f"{w.shape[1]} confidence columns for {len(self.props)} propositions")
        if np.isnan(w).any() or (w < 0).any() or (w > 1).any():
            raise ConfidenceDomainError("every confidence must lie in [0, 1]")
        if self.window_size < 1:
            raise ValueError("window_size must be at least 1")
        w.setflags(write=False)
        object.__setattr__(self, "windows", w)

    @property
    def n_windows(self) -> int:
        return self.windows.shape[0]

    def calibrate(self, gamma_fp: float) -> "ConfidenceTrace":
        if self.calibrated:
            return self
        return ConfidenceTrace(self.props, calibrate_matrix(self.windows, gamma_fp),
                               self.window_size, calibrated=True)

    def select(self, ids: Sequence[str]) -> "ConfidenceTrace":
        """Restrict to the given propositions, in the given order."""
        try:
            cols = [self.props.index(i) for i in ids]
        except KeyError as exc:
            raise WidthMismatchError(f"trace has no proposition {exc.args[0]!r}") from None
        return ConfidenceTrace(self.props.subset(ids), self.windows[:, cols],
                               self.window_size, self.calibrated)

    def __eq__(self, other):
        if not isinstance(other, ConfidenceTrace):
            return NotImplemented
        return (self.props == other.props and self.window_size == other.window_size
                and self.calibrated == other.calibrated
                and np.array_equal(self.windows, other.windows))


def valuation_distribution(confidences, props: PropositionSet) -> list[tuple[Valuation, float]]:
    """Valuations of one window with their product probability, zeros pruned.

    Valuations are enumerated by integer code, bit ``i`` = proposition ``i``.
    """
    confidences = [float(c) for c in confidences]
    out = []
    for k in range(1 << len(props)):
        pr = 1.0
        for i, c in enumerate(confidences):
            pr *= c if k >> i & 1 else 1.0 - c
        if pr > PRUNE_EPSILON:
            out.append((Valuation.from_int(props, k), pr))
    return out


@dataclass(frozen=True)
class State:
    layer: int
    label: Valuation | str

    @property
    def is_sentinel(self) -> bool:
        return isinstance(self.label, str)


@dataclass(eq=False)
class VideoAutomaton:
    """Layered DTMC.  States are referenced by their index in ``states``."""

    props: PropositionSet
    states: list[State]
    transitions: dict[tuple[int, int], float]
    initial: int = 0
    terminal: int = -1
    _succ: dict = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.terminal < 0:
            self.terminal = len(self.states) + self.terminal

    @property
    def n_layers(self) -> int:
        """Number of window layers (excluding initial and terminal)."""
        return self.states[self.terminal].layer - 1

    def label(self, q: int):
        return self.states[q].label

    def successors(self, q: int) -> list[tuple[int, float]]:
        if self._succ is None:
            succ = defaultdict(list)
            for (a, b), p in self.transitions.items():
                succ[a].append((b, p))
            self._succ = dict(succ)
        return self._succ.get(q, [])

    def layer(self, j: int) -> list[int]:
        return [q for q, s in enumerate(self.states) if s.layer == j]

    def layers(self) -> list[list[int]]:
        by_layer = defaultdict(list)
        for q, s in enumerate(self.states):
            by_layer[s.layer].append(q)
        return [by_layer[j] for j in sorted(by_layer)]

    def path_count(self) -> int:
        return math.prod(len(self.layer(j)) for j in range(1, self.n_layers + 1))

    def to_prism(self, module: str = "video") -> str:
        return export_prism(self, module)


def build_automaton(trace: ConfidenceTrace) -> VideoAutomaton:
    """Construct the layered automaton from calibrated window confidences."""
    if not trace.calibrated:
        raise UncalibratedTraceError("build_automaton requires a calibrated trace")
    if trace.n_windows < 1:
        raise EmptyTraceError("no windows")
    states = [State(0, INITIAL)]
    transitions: dict[tuple[int, int], float] = {}
    previous = [0]
    for j, row in enumerate(trace.windows, start=1):
        current = []
        for valuation, pr in valuation_distribution(row, trace.props):
            q = len(states)
            states.append(State(j, valuation))
            current.append(q)
            for src in previous:
                transitions[(src, q)] = pr
        previous = current
    terminal = len(states)
    states.append(State(trace.n_windows + 1, TERMINAL))
    for src in previous:
        transitions[(src, terminal)] = 1.0
    return VideoAutomaton(trace.props, states, transitions, initial=0, terminal=terminal)


@dataclass(frozen=True)
class Violation:
    kind: str        # stochasticity | layering | positivity | structure
    state: int | None
    message: str

    def __str__(self):
        return f"[{self.kind}] {self.message}"


def validate_automaton(a: VideoAutomaton) -> list[Violation]:
    """Check the structural invariants; an empty list means the automaton is valid."""
    issues: list[Violation] = []
    n = len(a.states)
    if not (0 <= a.initial < n and 0 <= a.terminal < n):
        return [Violation("structure", None, "initial or terminal index out of range")]
    if a.states[a.initial].label != INITIAL or a.states[a.initial].layer != 0:
        issues.append(Violation("structure", a.initial, "initial state must be layer 0 labelled 'initial'"))
    last = a.states[a.terminal].layer
    if a.states[a.terminal].label != TERMINAL:
        issues.append(Violation("structure", a.terminal, "terminal state must be labelled 'terminal'"))
    for q, s in enumerate(a.states):
        if q in (a.initial, a.terminal):
            continue
        if not 1 <= s.layer < last:
            issues.append(Violation("layering", q, f"state {q} sits in layer {s.layer} outside 1..{last - 1}"))
        if not isinstance(s.label, Valuation) or s.label.props != a.props:
            issues.append(Violation("structure", q, f"state {q} lacks a valuation label"))

    out_sum = defaultdict(float)
    for (src, dst), p in a.transitions.items():
        if not (0 <= src < n and 0 <= dst < n):
            issues.append(Violation("structure", src, f"edge {src}->{dst} references a missing state"))
            continue
        if not p > 0:
            issues.append(Violation("positivity", src, f"edge {src}->{dst} has probability {p}"))
        if a.states[dst].layer != a.states[src].layer + 1:
            issues.append(Violation(
                "layering", src,
                f"edge {src}->{dst} goes from layer {a.states[src].layer} to layer {a.states[dst].layer}"))
        out_sum[src] += p

    for q in range(n):
        if q == a.terminal:
            if out_sum.get(q):
                issues.append(Violation("structure", q, "terminal state has outgoing edges"))
            continue
        total = out_sum.get(q, 0.0)
        if abs(total - 1.0) > STOCHASTIC_TOLERANCE:
            issues.append(Violation("stochasticity", q, f"outgoing probabilities of state {q} sum to {total!r}"))
    return issues


def export_prism(a: VideoAutomaton, module: str = "video") -> str:
    """Render ``a`` as a PRISM DTMC model.

    State ``s`` is the automaton state index.  The terminal state gets an
    explicit self-loop, since PRISM rejects deadlocks.  Each proposition
    becomes a label true in the states whose valuation sets it.
    """
    lines = ["dtmc", "", f"module {module}",
             f"  s : [0..{len(a.states) - 1}] init {a.initial};"]
    for q in range(len(a.states)):
        succ = a.successors(q)
        if q == a.terminal:
            succ = [(q, 1.0)]
        if not succ:
            continue
        updates = " + ".join(f"{p!r}:(s'={dst})" for dst, p in succ)
        lines.append(f"  [] s={q} -> {updates};")
    lines += ["endmodule", ""]

    def disj(qs):
        return " | ".join(f"s={q}" for q in qs) if qs else "false"

    lines.append(f'label "{INITIAL}" = {disj([a.initial])};')
    lines.append(f'label "{TERMINAL}" = {disj([a.terminal])};')
    for prop in a.props:
        qs = [q for q, s in enumerate(a.states)
              if isinstance(s.label, Valuation) and s.label[prop.id]]
        lines.append(f'label "{prop.id}" = {disj(qs)};')
    return "\n".join(lines) + "\n"
