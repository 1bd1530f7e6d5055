# From per-window confidences to a layered Markov chain over valuations.

# %%
import numpy as np

from neusv.automaton import ConfidenceTrace, build_automaton, calibrate_confidence, export_prism
from neusv.formula import PropositionSet, Valuation

# raw detector confidences are first anchored at the false-positive threshold:
# gamma maps to 0.5, the two sides are stretched linearly
gamma = 0.4
for c in (0.0, 0.2, 0.4, 0.7, 1.0):
    print(f"raw {c:.1f} -> {calibrate_confidence(c, gamma):.3f}")

# %% one window, five propositions, two of them uncertain
props = PropositionSet.of("p1", "p2", "p3", "p4", "p5")
trace = ConfidenceTrace(props, np.array([[1.0, 1.0, 0.0, 0.8, 0.9]]), calibrated=True)
a = build_automaton(trace)
for q in a.layer(1):
    print(a.states[q].label.bits, round(a.transitions[(a.initial, q)], 6))

# zero-probability valuations are pruned, so only 2**2 states survive
target = Valuation(props, (1, 1, 0, 1, 1))
print("into (1,1,0,1,1):", [p for (s, q), p in a.transitions.items()
                            if s == a.initial and a.states[q].label == target])

# %% the same chain as a PRISM dtmc module
small = ConfidenceTrace(PropositionSet.of("dog"), np.array([[0.6], [0.3]]), calibrated=True)
print(export_prism(build_automaton(small)))
