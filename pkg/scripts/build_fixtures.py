"""Regenerate the bundled fixtures, the bundled profile and the golden report.

    python3 scripts/build_fixtures.py

Outputs:
    src/neusv/data/fixtures/spec.json         fixed four-mode specification
    src/neusv/data/fixtures/trace.json        raw confidences, 10 propositions x 6 windows
    src/neusv/data/fixtures/calibration.csv   synthetic score,label detector samples
    src/neusv/data/profile.json               gamma_fp + reference ECDFs
    tests/golden/fixture_report.json          evaluate() on the three files above

The reference ECDFs come from seeded random perturbations of the fixture
trace, not from real videos; the profile's provenance says so.
"""
from pathlib import Path

import numpy as np

from neusv.automaton import ConfidenceTrace, build_automaton
from neusv.checker import satisfaction_probability
from neusv.formula import PropositionSet, normalize_proposition
from neusv.io import (
    CalibrationProfile, data_path, dump_profile, dump_spec_file, dump_trace, load_spec_file,
    load_trace, write_report,
)
from neusv.parser import parse_formula
from neusv.perception import CalibrationSample, find_optimal_threshold, write_calibration_csv
from neusv.pipeline import EvaluationConfig, evaluate
from neusv.puls import ModeSpec
from neusv.scoring import EvaluationMode, build_ecdf

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "src" / "neusv" / "data" / "fixtures"
GOLDEN = ROOT / "tests" / "golden"

PROMPT = ("A car driving on a clear day while a cyclist signals a turn, "
          "then the cyclist turns and avoids an obstacle.")

MODES = {
    EvaluationMode.OBJECT_EXISTENCE: (
        ["car", "cyclist", "obstacle"],
        'EVENTUALLY ("car" AND "cyclist" AND "obstacle")'),
    EvaluationMode.SPATIAL_RELATIONSHIP: (
        ["cyclist is in front of car", "obstacle is next to cyclist"],
        'ALWAYS "cyclist_is_in_front_of_car" AND EVENTUALLY "obstacle_is_next_to_cyclist"'),
    EvaluationMode.OBJECT_ACTION_ALIGNMENT: (
        ["cyclist signals turn", "cyclist turns", "cyclist avoids obstacle"],
        'EVENTUALLY ("cyclist_signals_turn" AND ("cyclist_turns" UNTIL "cyclist_avoids_obstacle"))'),
    EvaluationMode.OVERALL_CONSISTENCY: (
        ["car driving", "clear day", "cyclist signals turn", "cyclist turns",
         "cyclist avoids obstacle"],
        'ALWAYS (("car_driving" AND "clear_day") AND "cyclist_signals_turn" '
        '-> EVENTUALLY ("cyclist_turns" AND "cyclist_avoids_obstacle"))'),
}

# raw detector confidences, one row per window of three frames
TRACE = {
    "car":                        [0.97, 0.95, 0.96, 0.93, 0.91, 0.94],
    "cyclist":                    [0.88, 0.92, 0.90, 0.87, 0.85, 0.80],
    "obstacle":                   [0.10, 0.22, 0.41, 0.76, 0.83, 0.35],
    "cyclist_is_in_front_of_car": [0.81, 0.84, 0.79, 0.72, 0.66, 0.58],
    "obstacle_is_next_to_cyclist": [0.05, 0.08, 0.30, 0.68, 0.74, 0.20],
    "cyclist_signals_turn":       [0.35, 0.78, 0.82, 0.40, 0.12, 0.06],
    "cyclist_turns":              [0.04, 0.20, 0.71, 0.86, 0.62, 0.15],
    "cyclist_avoids_obstacle":    [0.02, 0.03, 0.18, 0.64, 0.81, 0.44],
    "car_driving":                [0.90, 0.93, 0.91, 0.89, 0.90, 0.86],
    "clear_day":                  [0.96, 0.97, 0.97, 0.95, 0.96, 0.96],
}


def fixture_specs():
    out = {}
    for mode, (phrases, text) in MODES.items():
        props = PropositionSet(tuple(normalize_proposition(p) for p in phrases))
        out[mode] = ModeSpec(mode, props, parse_formula(text, props))
    return out


def fixture_trace():
    props = PropositionSet(tuple(normalize_proposition(p.replace("_", " ")) for p in TRACE))
    return ConfidenceTrace(props, np.array(list(TRACE.values())).T, window_size=3)


def calibration_samples(rng, n=400):
    labels = rng.random(n) < 0.5
    scores = np.where(labels, rng.beta(5, 2, n), rng.beta(2, 5, n))
    return [CalibrationSample(float(round(s, 6)), bool(l)) for s, l in zip(scores, labels)]


def reference_probabilities(specs, trace, gamma, rng, n=40):
    """Satisfaction probabilities over seeded perturbations of the fixture trace."""
    out = {m: [] for m in specs}
    for _ in range(n):
        noise = rng.normal(0.0, 0.25, trace.windows.shape)
        raw = np.clip(trace.windows + noise, 0.0, 1.0)
        perturbed = ConfidenceTrace(trace.props, raw, trace.window_size).calibrate(gamma)
        for mode, spec in specs.items():
            sub = perturbed.select(spec.propositions.ids)
            p = satisfaction_probability(build_automaton(sub), spec.formula).probability
            out[mode].append(round(p, 12))
    return out


def main():
    FIXTURES.mkdir(parents=True, exist_ok=True)
    GOLDEN.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20240917)

    specs = fixture_specs()
    dump_spec_file(PROMPT, specs, FIXTURES / "spec.json")
    trace = fixture_trace()
    dump_trace(trace, FIXTURES / "trace.json")

    samples = calibration_samples(rng)
    write_calibration_csv(FIXTURES / "calibration.csv", samples)
    gamma = find_optimal_threshold(samples).gamma

    refs = reference_probabilities(specs, trace, gamma, rng)
    profile = CalibrationProfile(
        version="fixture-1",
        gamma_fp=gamma,
        ecdf={m: build_ecdf(v, m) for m, v in refs.items()},
        provenance={
            "description": "synthetic: 40 seeded Gaussian perturbations (sd 0.25) of the "
                           "bundled fixture trace, scored against the bundled fixture spec",
            "gamma_fp_source": "threshold sweep over fixtures/calibration.csv",
            "generator": "scripts/build_fixtures.py",
            "seed": 20240917,
        },
    )
    dump_profile(profile, data_path("profile.json"))

    _, specs = load_spec_file(FIXTURES / "spec.json")
    report = evaluate(EvaluationConfig(profile), PROMPT, specs=specs,
                      trace=load_trace(FIXTURES / "trace.json"), trace_source="trace.json")
    write_report(report, GOLDEN / "fixture_report.json")
    print(f"gamma_fp={gamma}  final={report.final_score}")


if __name__ == "__main__":
    main()
