"""Acceptance criteria 1-9, one ``criterion`` marker per check.

The terminal summary prints one PASS/FAIL line per criterion number.
"""
import csv
import itertools
import json
import math
import random
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import stats
from sklearn.metrics import roc_auc_score

from helpers import props_of, random_formula, random_trace
from neusv import cli
from neusv.automaton import (
    ConfidenceTrace, build_automaton, validate_automaton, valuation_distribution,
)
from neusv.checker import (
    brute_force_probability, finalize, progress_trace, satisfaction_probability,
)
from neusv.formula import (
    Always, And, Atom, Not, PropositionSet, Valuation, all_traces, depth, evaluate_trace,
)
from neusv.io import (
    EvaluationReport, ModeOutcome, SuitePrompt, data_path, load_profile, load_spec_file,
    load_trace, write_report,
)
from neusv.perception import CalibrationSample, auc, find_optimal_threshold, roc_curve
from neusv.pipeline import EvaluationConfig, benchmark, evaluate
from neusv.scoring import ALL_MODES, EvaluationMode, aggregate, build_ecdf, ecdf_map, pearson

criterion = pytest.mark.criterion
FIX = data_path("fixtures")
GOLDEN = Path(__file__).parent / "golden" / "fixture_report.json"
P5 = PropositionSet.of("p1", "p2", "p3", "p4", "p5")


def random_instances(n=500, seed=2024):
    """Seeded (trace, formula) pairs: at most 3 propositions, 5 windows, depth 4."""
    rng = random.Random(seed)
    for _ in range(n):
        n_props, n_windows = rng.randint(1, 3), rng.randint(1, 5)
        trace = random_trace(rng, n_props, n_windows)
        phi = random_formula(rng, list(trace.props.ids), 5)
        assert depth(phi) <= 4
        yield trace, phi


# -- 1 -----------------------------------------------------------------------

@criterion(1, "one-window worked example: 0.72 transition and score")
def test_c1_worked_example(tmp_path, capsys):
    start = time.perf_counter()
    trace = ConfidenceTrace(P5, np.array([[1.0, 1.0, 0.0, 0.8, 0.9]]), calibrated=True)
    a = build_automaton(trace)
    target = Valuation(P5, (True, True, False, True, True))
    (q,) = [q for q, s in enumerate(a.states) if s.label == target]
    # 0.8 * 0.9 in binary floating point is one ulp above 0.72
    assert a.transitions[(a.initial, q)] == 0.8 * 0.9
    assert abs(a.transitions[(a.initial, q)] - 0.72) <= 1e-15

    trace_path = tmp_path / "trace.json"
    trace_path.write_text(json.dumps({"propositions": list(P5.ids), "calibrated": True,
                                      "windows": [[1.0, 1.0, 0.0, 0.8, 0.9]]}))
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps({"prompt": "worked example", "modes": {
        "object_existence": {"propositions": list(P5.ids),
                             "formula": '"p1" AND "p2" AND NOT "p3" AND "p4" AND "p5"'}}}))
    assert cli.main(["score", "--trace", str(trace_path), "--spec-file", str(spec_path)],
                    environ={}) == 0
    out = json.loads(capsys.readouterr().out)
    assert abs(out["object_existence"]["satisfaction_probability"] - 0.72) <= 1e-12
    assert time.perf_counter() - start < 1.0


# -- 2 -----------------------------------------------------------------------

@criterion(2, "forward DP equals brute-force path enumeration on 500 instances")
def test_c2_oracle_equivalence():
    start = time.perf_counter()
    worst = 0.0
    for trace, phi in random_instances():
        a = build_automaton(trace)
        dp = satisfaction_probability(a, phi).probability
        brute = brute_force_probability(a, phi).probability
        worst = max(worst, abs(dp - brute))
        assert abs(dp - brute) <= 1e-9, (phi, trace.windows.tolist(), dp, brute)
    elapsed = time.perf_counter() - start
    print(f"max |dp - brute| = {worst:.3g} in {elapsed:.2f}s")
    assert elapsed < 30.0


# -- 3 -----------------------------------------------------------------------

@criterion(3, "progression agrees with direct semantics on every small trace")
def test_c3_exhaustive_semantics():
    rng = random.Random(7)
    for n_props in (1, 2):
        props = props_of(n_props)
        phis = [random_formula(rng, list(props.ids), 5) for _ in range(40)]
        for phi in phis:
            for n in range(1, 5):
                traces = list(all_traces(props, n))
                assert len(traces) == 2 ** (n_props * n)
                for t in traces:
                    assert finalize(progress_trace(phi, t)) == evaluate_trace(phi, t), (phi, t)


@criterion(3, "probabilities of a formula and its negation sum to one")
def test_c3_complement():
    for trace, phi in random_instances():
        a = build_automaton(trace)
        total = (satisfaction_probability(a, phi).probability
                 + satisfaction_probability(a, Not(phi)).probability)
        assert abs(total - 1.0) <= 1e-9


# -- 4 -----------------------------------------------------------------------

@criterion(4, "built automata are stochastic and layered")
def test_c4_stochasticity():
    rng = random.Random(4)
    for _ in range(200):
        trace = random_trace(rng, rng.randint(1, 4), rng.randint(1, 6))
        assert validate_automaton(build_automaton(trace)) == []
        for row in trace.windows:
            total = math.fsum(p for _, p in valuation_distribution(row, trace.props))
            assert abs(total - 1.0) <= 1e-9


# -- 5 -----------------------------------------------------------------------

@criterion(5, "threshold sweep recovers a planted separator")
def test_c5_planted_separator():
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        neg = rng.uniform(0.0, 0.45, 500)
        pos = rng.uniform(0.55, 1.0, 500)
        samples = [CalibrationSample(float(s), False) for s in neg]
        samples += [CalibrationSample(float(s), True) for s in pos]
        gamma = find_optimal_threshold(samples).gamma
        hits += 0.45 < gamma <= 0.56
    print(f"recovered in {hits}/100 trials")
    assert hits >= 99


@criterion(5, "ROC AUC of label-independent scores is near chance")
def test_c5_chance_auc():
    rng = np.random.default_rng(5)
    scores, labels = rng.random(10000), rng.random(10000) < 0.5
    samples = [CalibrationSample(float(s), bool(l)) for s, l in zip(scores, labels)]
    value = auc(roc_curve(samples))
    assert abs(value - roc_auc_score(labels, scores)) <= 1e-12
    assert abs(value - 0.5) <= 0.05


# -- 6 -----------------------------------------------------------------------

@criterion(6, "ECDF mapping is monotone with correct endpoints")
def test_c6_ecdf_properties():
    rng = random.Random(6)
    for _ in range(1000):
        samples = [rng.random() for _ in range(rng.randint(1, 40))]
        if rng.random() < 0.3:
            samples += [rng.choice(samples)] * rng.randint(1, 3)  # ties
        d = build_ecdf(samples, EvaluationMode.OBJECT_EXISTENCE)
        p, q = sorted((rng.random(), rng.random()))
        n = len(samples)
        assert ecdf_map(p, d) <= ecdf_map(q, d)
        assert round(ecdf_map(p, d) * n) == sum(x <= p for x in samples)
        assert ecdf_map(1.0, d) == 1.0
        assert ecdf_map(min(samples), d) >= 1 / n
        below = min(samples) / 2
        if below < min(samples):
            assert ecdf_map(below, d) == 0.0


@criterion(6, "aggregate lies between the smallest and largest mode score")
def test_c6_aggregate_bounds():
    rng = random.Random(66)
    for _ in range(1000):
        k = rng.randint(1, 4)
        values = [rng.random() for _ in range(k)]
        final = aggregate(dict(zip(rng.sample(ALL_MODES, k), values))).final
        assert min(values) <= final <= max(values)


# -- 7 -----------------------------------------------------------------------

@criterion(7, "Pearson correlation matches closed forms and is affine invariant")
def test_c7_pearson():
    xs = [0.2, 0.5, 0.1, 0.9]
    assert abs(pearson(xs, xs) - 1.0) <= 1e-9
    assert abs(pearson(xs, [1 - x for x in xs]) + 1.0) <= 1e-9
    # sum dx*dy = 3, sum dx^2 = 2, sum dy^2 = 14/3
    assert abs(pearson([1, 2, 3], [1, 2, 4]) - 3 / math.sqrt(2 * 14 / 3)) <= 1e-9

    rng = random.Random(77)
    xs = [rng.random() for _ in range(30)]
    ys = [x + rng.gauss(0, 0.2) for x in xs]
    r = pearson(xs, ys)
    assert abs(r - stats.pearsonr(xs, ys)[0]) <= 1e-12
    for _ in range(100):
        a, b = rng.uniform(0.01, 100), rng.uniform(-50, 50)
        c, d = rng.uniform(0.01, 100), rng.uniform(-50, 50)
        assert abs(pearson([a * x + b for x in xs], [c * y + d for y in ys]) - r) <= 1e-9


# -- 8 -----------------------------------------------------------------------

@criterion(8, "fixture evaluation reproduces the golden report byte for byte")
def test_c8_golden(tmp_path):
    outputs = []
    for k in range(2):
        out = tmp_path / f"run{k}.json"
        code = cli.main(["evaluate", "--spec-file", str(FIX / "spec.json"),
                         "--trace", str(FIX / "trace.json"), "--out", str(out)], environ={})
        assert code == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1] == GOLDEN.read_bytes()


# -- 9 -----------------------------------------------------------------------

@criterion(9, "benchmark on self-annotated synthetic suite gives r = 1 in every group")
def test_c9_synthetic_benchmark(tmp_path):
    profile = load_profile()
    _, specs = load_spec_file(FIX / "spec.json")
    base = load_trace(FIX / "trace.json")
    themes, levels = ["nature", "urban"], ["single", "multi"]
    suite = [SuitePrompt(f"s{i}", themes[i % 2], levels[(i // 2) % 2], f"prompt {i}")
             for i in range(8)]
    rng = np.random.default_rng(9)
    finals = []
    for item in suite:
        noisy = np.clip(base.windows + rng.normal(0, 0.2, base.windows.shape), 0, 1)
        trace = ConfidenceTrace(base.props, noisy, base.window_size)
        report = evaluate(EvaluationConfig(profile), item.prompt, specs=specs, trace=trace)
        write_report(report, tmp_path / "reports" / "synthetic" / f"{item.id}.json")
        finals.append(report.final_score)
    ann = tmp_path / "annotations.csv"
    with open(ann, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["video_id", "alignment_score"])
        for item, f in zip(suite, finals):
            w.writerow([f"synthetic/{item.id}", repr(1 + 4 * f)])
    out = tmp_path / "bench"
    code = cli.main(["benchmark", "--suite", str(_write_suite(tmp_path, suite)),
                     "--reports", str(tmp_path / "reports"), "--annotations", str(ann),
                     "--out", str(out)], environ={})
    assert code == 0
    groups = list(csv.DictReader(open(out / "groups.csv")))
    assert len(groups) == 5
    for g in groups:
        assert abs(float(g["pearson_r"]) - 1.0) <= 1e-12, g
    overall = next(g for g in groups if g["group"] == "overall")
    assert float(overall["mean_score"]) == pytest.approx(np.mean(finals), abs=1e-11)


def _write_suite(root, suite):
    path = root / "suite.jsonl"
    path.write_text("".join(json.dumps({"id": s.id, "theme": s.theme, "complexity": s.complexity,
                                        "prompt": s.prompt}) + "\n" for s in suite))
    return path
