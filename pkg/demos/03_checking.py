# Satisfaction probability by forward progression, checked against path enumeration.

# %%
import random

import numpy as np

from neusv.automaton import ConfidenceTrace, build_automaton
from neusv.checker import brute_force_probability, progress_trace, satisfaction_probability
from neusv.formula import BooleanTrace, PropositionSet, pretty_print
from neusv.parser import parse_formula

props = PropositionSet.of("dog", "ball")
phi = parse_formula('"dog" UNTIL "ball"', props)

# progression rewrites the obligation one window at a time
t = BooleanTrace.from_sets(props, [{"dog"}, {"dog"}])
print("residual after two windows:", pretty_print(progress_trace(phi, t)))

# %%
trace = ConfidenceTrace(props, np.array([[0.9, 0.2], [0.9, 0.5], [0.3, 0.7]]), calibrated=True)
a = build_automaton(trace)
dp = satisfaction_probability(a, phi)
brute = brute_force_probability(a, phi)
print(f"dp {dp.probability:.12f} ({dp.state_count} product states)")
print(f"brute {brute.probability:.12f} over {a.path_count()} paths")

# %% a quick randomized comparison
rng = random.Random(0)
worst = 0.0
for _ in range(200):
    rows = np.array([[rng.randint(0, 20) / 20 for _ in range(2)] for _ in range(4)])
    m = build_automaton(ConfidenceTrace(props, rows, calibrated=True))
    for text in ['F ("dog" AND X "ball")', 'G ("dog" -> F "ball")', 'NOT "dog" U "ball"']:
        f = parse_formula(text, props)
        worst = max(worst, abs(satisfaction_probability(m, f).probability
                               - brute_force_probability(m, f).probability))
print("largest disagreement:", worst)
