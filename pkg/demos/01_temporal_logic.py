# Finite-trace temporal logic: parsing, printing, evaluating.
# Run from the repo root:  python3 demos/01_temporal_logic.py

# %%
from neusv.formula import BooleanTrace, PropositionSet, collect_atoms, evaluate_trace, pretty_print
from neusv.parser import parse_formula

spec = parse_formula('G (("car_driving" AND "clear_day") AND "cyclist_signals_turn" '
                     '-> F ("cyclist_turns" AND "cyclist_avoids_obstacle"))')
print(pretty_print(spec))
print(collect_atoms(spec).ids)

# %% precedence: UNTIL binds tighter than AND, AND tighter than OR, IMPLIES is right-assoc
for text in ['"a" AND "b" UNTIL "c"', '"a" OR "b" AND "c"', '"a" -> "b" -> "c"']:
    print(f"{text:28s} => {pretty_print(parse_formula(text))}")

# %% bare phrases work too, and get normalized to ids
print(pretty_print(parse_formula("There is a dog AND NOT The dog is sleeping")))

# %% evaluation over a short trace, one set of true propositions per window
props = PropositionSet.of("snow_falls", "ground_is_covered")
trace = BooleanTrace.from_sets(props, [{"snow_falls"}, {"snow_falls"}, {"ground_is_covered"}])
phi = parse_formula('"snow_falls" U "ground_is_covered"', props)
print("holds:", evaluate_trace(phi, trace))

# strong NEXT is false at the last window, whatever the operand
last = parse_formula('X NOT "snow_falls"', props)
print("X at the end:", evaluate_trace(last, trace, 2))
