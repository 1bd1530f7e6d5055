import math
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st
from sklearn.metrics import roc_auc_score

from helpers import props_of
from neusv.errors import ContextLimitError, MalformedAnswerError, MissingKeyError, SingleClassError
from neusv.formula import Proposition
from neusv.io import dump_trace, load_trace
from neusv.automaton import ConfidenceTrace
from neusv.perception import (
    CalibrationSample, TokenScore, TraceClient, Window, accuracy_at, auc, confidence_from_tokens,
    find_optimal_threshold, is_special_token, load_trace_client, parse_answer,
    read_calibration_csv, roc_curve, score_proposition, score_windows, write_calibration_csv,
    write_roc_csv,
)


def tok(token, p):
    return TokenScore(token, math.log(p) if p > 0 else -math.inf)


class TestConfidence:
    def test_softmax_two_way(self):
        t = TokenScore.from_logits("Yes", {"Yes": 2.0, "No": 0.0})
        expected = math.e ** 2 / (math.e ** 2 + 1)
        assert t.prob == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.8808, abs=1e-4)
        assert confidence_from_tokens([t]) == pytest.approx(expected, abs=1e-12)

    def test_no_answer_is_complement(self):
        assert confidence_from_tokens([tok("No", 1.0)]) == 0.0
        assert confidence_from_tokens([tok("No", 0.75)]) == pytest.approx(0.25)

    def test_product_over_tokens(self):
        assert confidence_from_tokens([tok("Y", 0.9), tok("es", 0.8)]) == pytest.approx(
            0.72, abs=1e-12)

    def test_special_tokens_ignored_in_parsing(self):
        assert is_special_token("<|eot_id|>") and is_special_token("</s>") and is_special_token(" ")
        assert not is_special_token("Yes")
        tokens = [tok("Yes", 0.9), tok("<|eot_id|>", 1.0)]
        assert confidence_from_tokens(tokens) == pytest.approx(0.9)

    @pytest.mark.parametrize("text, expected", [
        ("Yes", True), ("yes.", True), (" NO", False), ("No!", False)])
    def test_parse_answer(self, text, expected):
        assert parse_answer([tok(text, 1.0)]) is expected

    @pytest.mark.parametrize("text", ["Maybe", "Yes No", ""])
    def test_malformed(self, text):
        with pytest.raises(MalformedAnswerError):
            confidence_from_tokens([tok(text, 1.0)] if text else [])

    @given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=4), st.booleans())
    def test_in_unit_interval(self, probs, yes):
        tokens = [tok("Yes" if yes else "No", probs[0])] + [tok("<|eot|>", p) for p in probs[1:]]
        c = confidence_from_tokens(tokens)
        assert 0.0 <= c <= 1.0
        p = math.prod(probs)
        assert c == pytest.approx(p if yes else 1 - p, abs=1e-12)


class FixedClient:
    name, model, max_frames = "fixed", "fixed", 3

    def __init__(self, value=0.5):
        self.value = value
        self.calls = []

    def score(self, proposition, window):
        self.calls.append((proposition.id, window.index))
        return self.value


class TestScoring:
    def test_context_limit(self):
        w = Window(0, tuple(f"f{i}.png" for i in range(4)))
        with pytest.raises(ContextLimitError):
            score_proposition(FixedClient(), Proposition("a"), w)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            score_proposition(FixedClient(1.2), Proposition("a"), Window(0))

    @pytest.mark.parametrize("parallelism", [1, 4])
    def test_every_pair_queried_once(self, parallelism):
        client = FixedClient(0.3)
        out = score_windows(client, props_of(3), [Window(j) for j in range(4)], parallelism)
        assert out.shape == (4, 3) and (out == 0.3).all()
        assert sorted(client.calls) == sorted((p, j) for j in range(4) for p in "abc")


class TestTraceClient:
    def client(self):
        rows = np.array([[0.1, 0.2], [0.3, 0.4], [0.5, 0.6]])
        return TraceClient(props_of(2), rows)

    def test_lookup(self):
        c = self.client()
        assert c.score(Proposition("b"), Window(1)) == 0.4
        assert c.n_windows == 3
        out = score_windows(c, props_of(2), [Window(j) for j in range(3)], 1)
        assert out.tolist() == [[0.1, 0.2], [0.3, 0.4], [0.5, 0.6]]

    def test_missing_keys(self):
        c = self.client()
        with pytest.raises(MissingKeyError):
            c.score(Proposition("z"), Window(0))
        with pytest.raises(MissingKeyError):
            c.score(Proposition("a"), Window(3))

    def test_file_round_trip_is_bit_exact(self, tmp_path):
        rng = np.random.default_rng(4)
        rows = rng.random((5, 3))
        path = tmp_path / "trace.json"
        dump_trace(ConfidenceTrace(props_of(3), rows, window_size=3), path)
        back = load_trace(path)
        assert np.array_equal(np.asarray(back.windows), rows)
        c = load_trace_client(path)
        assert c.score(Proposition("c"), Window(4)) == rows[4, 2]
        assert c.window_size == 3 and not c.calibrated


def samples(scores, labels):
    return [CalibrationSample(s, l) for s, l in zip(scores, labels)]


class TestThreshold:
    def test_example(self):
        result = find_optimal_threshold(samples([0.2, 0.4, 0.6, 0.8], [0, 0, 1, 1]))
        assert result.gamma == 0.6 and result.accuracy == 1.0

    def test_ties_pick_smallest(self):
        # 0.4 and 0.6 both misclassify one sample
        result = find_optimal_threshold(samples([0.2, 0.4, 0.6, 0.8], [0, 1, 0, 1]))
        assert result.accuracy == 0.75
        assert result.gamma == 0.4

    def test_single_class(self):
        with pytest.raises(SingleClassError):
            find_optimal_threshold(samples([0.1, 0.9], [1, 1]))
        with pytest.raises(SingleClassError):
            roc_curve(samples([0.1, 0.9], [0, 0]))

    def test_planted_separator(self):
        rng = random.Random(8)
        neg = [rng.uniform(0.0, 0.45) for _ in range(500)]
        pos = [rng.uniform(0.55, 1.0) for _ in range(500)]
        result = find_optimal_threshold(samples(neg + pos, [0] * 500 + [1] * 500))
        assert 0.45 < result.gamma <= 0.56
        assert result.gamma == min(pos)
        assert result.accuracy == 1.0

    @given(st.lists(st.tuples(st.floats(0, 1), st.booleans()), min_size=2, max_size=40))
    def test_sweep_matches_scan(self, pairs):
        data = samples(*zip(*pairs))
        if len({s.label for s in data}) < 2:
            return
        result = find_optimal_threshold(data)
        # exhaustive scan over observed scores, ascending
        best = max(accuracy_at(data, g) for g in sorted({s.score for s in data}))
        assert result.accuracy == pytest.approx(best)
        assert accuracy_at(data, result.gamma) == pytest.approx(best)
        assert all(accuracy_at(data, g) < best - 1e-12
                   for g in {s.score for s in data} if g < result.gamma)


class TestRoc:
    def test_separable_passes_through_corner(self):
        pts = roc_curve(samples([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]))
        assert (0.0, 1.0) in [(p.fpr, p.tpr) for p in pts]
        assert auc(pts) == 1.0

    def test_two_points(self):
        pts = roc_curve(samples([0.9, 0.1], [1, 0]))
        assert len(pts) == 2 + 2
        coords = list(dict.fromkeys((p.fpr, p.tpr) for p in pts))
        assert coords == [(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]
        assert pts[0].threshold == math.inf and pts[-1].threshold == -math.inf

    def test_monotone(self):
        rng = random.Random(1)
        pts = roc_curve(samples([rng.random() for _ in range(60)],
                                [rng.random() < 0.5 for _ in range(60)]))
        assert all(a.fpr <= b.fpr and a.tpr <= b.tpr for a, b in zip(pts, pts[1:]))

    @given(st.lists(st.tuples(st.sampled_from([i / 20 for i in range(21)]), st.booleans()),
                    min_size=2, max_size=50))
    def test_auc_matches_sklearn(self, pairs):
        scores, labels = zip(*pairs)
        if len(set(labels)) < 2:
            return
        got = auc(roc_curve(samples(scores, labels)))
        assert got == pytest.approx(roc_auc_score(labels, scores), abs=1e-12)

    def test_random_scores_near_chance(self):
        rng = np.random.default_rng(0)
        data = samples(rng.random(10000), rng.random(10000) < 0.5)
        assert abs(auc(roc_curve(data)) - 0.5) <= 0.05


class TestCsv:
    def test_round_trip(self, tmp_path):
        data = samples([0.125, 1 / 3, 0.9], [1, 0, 1])
        path = tmp_path / "cal.csv"
        write_calibration_csv(path, data)
        assert read_calibration_csv(path) == data

    def test_header_optional_and_label_spellings(self, tmp_path):
        path = tmp_path / "cal.csv"
        path.write_text("0.5,yes\n0.2,false\n# note\n0.7,1\n")
        assert [(s.score, s.label) for s in read_calibration_csv(path)] == [
            (0.5, True), (0.2, False), (0.7, True)]

    def test_roc_csv(self, tmp_path):
        path = tmp_path / "roc.csv"
        write_roc_csv(path, roc_curve(samples([0.9, 0.1], [1, 0])))
        lines = path.read_text().splitlines()
        assert lines[0] == "fpr,tpr,threshold" and len(lines) == 5
        assert lines[1] == "0.0,0.0,inf"
