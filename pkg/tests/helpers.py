"""Random instance generators shared by unit, property and acceptance tests."""
import random

import numpy as np
from hypothesis import strategies as st

from neusv.automaton import ConfidenceTrace
from neusv.formula import (
    FALSE, TRUE, Always, And, Atom, Eventually, Implies, Next, Not, Or, PropositionSet, Until,
)

UNARY = (Not, Always, Eventually, Next)
BINARY = (And, Or, Implies, Until)


def random_formula(rng: random.Random, ids, depth: int):
    """A random formula of depth at most ``depth`` over ``ids``."""
    if depth <= 1 or rng.random() < 0.25:
        if rng.random() < 0.1:
            return rng.choice((TRUE, FALSE))
        return Atom(rng.choice(ids))
    if rng.random() < 0.4:
        return rng.choice(UNARY)(random_formula(rng, ids, depth - 1))
    op = rng.choice(BINARY)
    return op(random_formula(rng, ids, depth - 1), random_formula(rng, ids, depth - 1))


def formulas(ids, max_leaves=12):
    leaves = st.sampled_from([Atom(i) for i in ids] + [TRUE, FALSE])

    def extend(children):
        return st.one_of(
            st.builds(lambda op, f: op(f), st.sampled_from(UNARY), children),
            st.builds(lambda op, f, g: op(f, g), st.sampled_from(BINARY), children, children),
        )

    return st.recursive(leaves, extend, max_leaves=max_leaves)


def props_of(n):
    return PropositionSet.of(*"abcde"[:n])


def random_trace(rng: random.Random, n_props: int, n_windows: int, grid=0.05,
                 calibrated=True) -> ConfidenceTrace:
    """Confidences on a grid that includes the exact endpoints 0 and 1."""
    steps = int(round(1 / grid))
    values = [[rng.randint(0, steps) / steps for _ in range(n_props)] for _ in range(n_windows)]
    return ConfidenceTrace(props_of(n_props), np.array(values).reshape(n_windows, n_props),
                           calibrated=calibrated)


@st.composite
def traces(draw, max_props=3, max_windows=4):
    n = draw(st.integers(1, max_props))
    m = draw(st.integers(1, max_windows))
    grid = st.integers(0, 20).map(lambda k: k / 20)
    rows = draw(st.lists(st.lists(grid, min_size=n, max_size=n), min_size=m, max_size=m))
    return ConfidenceTrace(props_of(n), np.array(rows), calibrated=True)
