"""End-to-end evaluation: frames or a stored trace in, a scored report out.

For each evaluation mode: obtain the mode's propositions and specification
(from a spec file or by translation), obtain per-window raw confidences,
calibrate them, build the video automaton, compute the satisfaction
probability and map it through the mode's reference ECDF.  The final score
is the mean over the modes that succeeded.
"""
from __future__ import annotations

import csv
import datetime as _dt
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from . import __version__
from .automaton import ConfidenceTrace, build_automaton
from .checker import DEFAULT_STATE_CAP, satisfaction_probability
from .errors import CorrelationError, NeusVError, TooFewFramesError
from .formula import Proposition, PropositionSet, pretty_print
from .io import (
    CalibrationProfile, EvaluationReport, ModeOutcome, SuitePrompt, dumps, read_report,
    round_sig, round_tree,
)
from .perception import PerceptionClient, Window, score_windows
from .puls import LLMClient, ModeSpec, translate_all_modes
from .scoring import ALL_MODES, EvaluationMode, aggregate, ecdf_map, pearson

log = logging.getLogger(__name__)

FRAME_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".webp", ".gif")


@dataclass
class EvaluationConfig:
    profile: CalibrationProfile
    window_size: int = 3
    gamma_fp: float | None = None  # None: take the profile's
    modes: tuple = ALL_MODES
    parallelism: int = 4
    max_states: int = DEFAULT_STATE_CAP
    timestamps: bool = False

    def __post_init__(self):
        if self.window_size < 1:
            raise ValueError("window size must be at least 1")
        if self.gamma_fp is not None and not 0.0 < self.gamma_fp < 1.0:
            raise ValueError(f"gamma_fp must lie in (0, 1), got {self.gamma_fp}")
        self.modes = tuple(EvaluationMode.parse(m) for m in self.modes)

    @property
    def threshold(self) -> float:
        return self.profile.gamma_fp if self.gamma_fp is None else self.gamma_fp


def list_frames(directory) -> list[Path]:
    """Image files of a frame directory in lexicographic filename order."""
    directory = Path(directory)
    if not directory.is_dir():
        raise TooFewFramesError(f"{directory} is not a directory")
    return sorted((p for p in directory.iterdir() if p.suffix.lower() in FRAME_SUFFIXES),
                  key=lambda p: p.name)


def window_frames(frames: Sequence, w: int) -> list[Window]:
    """Non-overlapping windows of ``w`` consecutive frames; a short tail is dropped."""
    if w < 1:
        raise ValueError("window size must be at least 1")
    if len(frames) < w:
        raise TooFewFramesError(f"{len(frames)} frames cannot fill a window of {w}")
    return [Window(j, tuple(frames[n:n + w]))
            for j, n in enumerate(range(0, len(frames) - w + 1, w))]


def _union(specs: Mapping[EvaluationMode, ModeSpec]) -> PropositionSet:
    seen: dict[str, Proposition] = {}
    for spec in specs.values():
        for p in spec.propositions:
            seen.setdefault(p.id, p)
    return PropositionSet(tuple(seen.values()))


def perceive(client: PerceptionClient, props: PropositionSet, frames: Sequence,
             window_size: int, parallelism: int = 4) -> tuple[ConfidenceTrace, list[str]]:
    """Raw confidence trace for ``props`` over the windows of ``frames``."""
    windows = window_frames(frames, window_size)
    warnings = []
    dropped = len(frames) - len(windows) * window_size
    if dropped:
        warnings.append(f"{dropped} trailing frame(s) did not fill a window of {window_size} "
                        "and were ignored")
    raw = score_windows(client, props, windows, parallelism)
    return ConfidenceTrace(props, raw, window_size, calibrated=False), warnings


def _provenance(config, perception, translation, timestamps_start=None):
    prov = {
        "tool_version": __version__,
        "profile_version": config.profile.version,
        "profile_provenance": dict(config.profile.provenance),
        "perception": perception,
        "translation": translation,
    }
    if config.timestamps:
        prov["timestamps"] = {"started": timestamps_start,
                              "finished": _dt.datetime.now(_dt.timezone.utc).isoformat()}
    return prov


def evaluate(config: EvaluationConfig, prompt: str, *,
             specs: Mapping[EvaluationMode, ModeSpec] | None = None,
             llm: LLMClient | None = None,
             trace: ConfidenceTrace | None = None,
             frames: Sequence | None = None,
             perception: PerceptionClient | None = None,
             trace_source: str | None = None) -> EvaluationReport:
    """Score one video against one prompt.

    The specification comes from ``specs`` when given, otherwise from ``llm``.
    Confidences come from ``trace`` when given, otherwise from ``perception``
    applied to ``frames``.
    """
    started = _dt.datetime.now(_dt.timezone.utc).isoformat() if config.timestamps else None
    for mode in config.modes:
        config.profile.distribution(mode)  # every requested mode needs a reference ECDF

    failures: dict[EvaluationMode, str] = {}
    warnings: list[str] = []
    if specs is not None:
        translation = {"source": "spec-file"}
        specs = {EvaluationMode.parse(m): s for m, s in specs.items()}
        for mode in config.modes:
            if mode not in specs:
                failures[mode] = "no specification for this mode"
        specs = {m: s for m, s in specs.items() if m in config.modes}
    elif llm is not None:
        translation = dict(getattr(llm, "identity", {"client": type(llm).__name__}))
        result = translate_all_modes(llm, prompt, config.modes, parallelism=config.parallelism)
        specs = result.specs
        failures.update(result.failures)
    else:
        raise ValueError("either a spec mapping or an LLM client is required")

    if trace is not None:
        perception_id = {"client": "trace", "source": trace_source or "in-memory"}
    elif perception is not None and frames is not None:
        perception_id = dict(getattr(perception, "identity",
                                     {"client": perception.name, "model": perception.model}))
        trace, extra = perceive(perception, _union(specs), frames, config.window_size,
                                config.parallelism)
        warnings.extend(extra)
    else:
        raise ValueError("either a trace or frames plus a perception client are required")

    outcomes: dict[EvaluationMode, ModeOutcome] = {}
    for mode in config.modes:
        if mode not in specs:
            continue
        spec = specs[mode]
        try:
            sub = trace.select(spec.propositions.ids).calibrate(config.threshold)
            automaton = build_automaton(sub)
            result = satisfaction_probability(automaton, spec.formula, config.max_states)
            score = ecdf_map(result.probability, config.profile.distribution(mode))
        except NeusVError as exc:
            log.warning("mode %s failed: %s", mode.value, exc)
            failures[mode] = f"{type(exc).__name__}: {exc}"
            continue
        outcomes[mode] = ModeOutcome(
            tuple((p.id, p.display) for p in spec.propositions), pretty_print(spec.formula),
            result.probability, score, result.state_count)

    final = None
    if outcomes:
        final = aggregate({m: o.score for m, o in outcomes.items()}).final
    return EvaluationReport(
        prompt=prompt,
        modes={m.value: o for m, o in outcomes.items()},
        final_score=final,
        failures={m.value: e for m, e in failures.items()},
        window_size=trace.window_size,
        n_windows=trace.n_windows,
        gamma_fp=None if trace.calibrated else config.threshold,
        warnings=tuple(warnings),
        provenance=_provenance(config, perception_id, translation, started),
    )


# ---------------------------------------------------------------------------
# benchmarking

@dataclass(frozen=True)
class GroupSummary:
    model: str
    group: str  # "overall", "theme:<name>" or "complexity:<name>"
    n: int
    mean_score: float
    pearson_r: float | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {"model": self.model, "group": self.group, "n": self.n,
                "mean_score": self.mean_score, "pearson_r": self.pearson_r, "error": self.error}


@dataclass
class BenchmarkSummary:
    groups: list[GroupSummary]
    rows: list[dict]
    warnings: list[str] = field(default_factory=list)

    def group(self, model: str, name: str) -> GroupSummary:
        for g in self.groups:
            if g.model == model and g.group == name:
                return g
        raise KeyError((model, name))

    def to_dict(self) -> dict:
        return {"groups": [g.to_dict() for g in self.groups], "warnings": self.warnings}


def _model_dirs(reports_dir: Path) -> dict[str, Path]:
    subdirs = sorted(p for p in reports_dir.iterdir() if p.is_dir())
    if subdirs:
        return {p.name: p for p in subdirs}
    return {"default": reports_dir}


def _video_id(model, prompt_id, flat):
    return prompt_id if flat else f"{model}/{prompt_id}"


def benchmark(suite: Sequence[SuitePrompt], reports_dir, annotations: Mapping[str, float]
              ) -> BenchmarkSummary:
    """Group final scores by theme and complexity and correlate them with human scores.

    Reports are read from ``<reports_dir>/<model>/<prompt_id>.json`` (or a flat
    ``<reports_dir>/<prompt_id>.json`` for a single model).  Human scores are
    keyed by ``<model>/<prompt_id>``, or by ``<prompt_id>`` in the flat layout.
    """
    reports_dir = Path(reports_dir)
    models = _model_dirs(reports_dir)
    flat = list(models) == ["default"] and models["default"] == reports_dir
    warnings: list[str] = []
    rows: list[dict] = []
    groups: list[GroupSummary] = []
    for model, directory in models.items():
        buckets: dict[str, list[tuple[float, float | None]]] = defaultdict(list)
        for item in suite:
            path = directory / f"{item.id}.json"
            if not path.exists():
                warnings.append(f"missing report {path}")
                continue
            report = read_report(path)
            vid = _video_id(model, item.id, flat)
            human = annotations.get(vid)
            if human is None:
                warnings.append(f"no human score for {vid}")
            for mode, outcome in sorted(report.modes.items()):
                rows.append({"video_id": vid, "mode": mode,
                             "satisfaction_probability": outcome.satisfaction_probability,
                             "score": outcome.score, "human_score": human})
            if report.final_score is None:
                warnings.append(f"report {path} has no final score")
                continue
            rows.append({"video_id": vid, "mode": "final", "satisfaction_probability": None,
                         "score": report.final_score, "human_score": human})
            pair = (report.final_score, human)
            buckets["overall"].append(pair)
            buckets[f"theme:{item.theme}"].append(pair)
            buckets[f"complexity:{item.complexity}"].append(pair)
        for name in sorted(buckets, key=lambda k: (k != "overall", k)):
            pairs = buckets[name]
            mean = math.fsum(s for s, _ in pairs) / len(pairs)
            scored = [(s, h) for s, h in pairs if h is not None]
            r, err = None, None
            try:
                r = pearson([s for s, _ in scored], [h for _, h in scored])
            except CorrelationError as exc:
                err = str(exc)
            groups.append(GroupSummary(model, name, len(pairs), mean, r, err))
    return BenchmarkSummary(groups, rows, warnings)


def write_benchmark(summary: BenchmarkSummary, out_dir) -> tuple[Path, Path, Path]:
    """Write the per-video CSV, the grouped CSV and the JSON summary."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def fmt(x):
        return "" if x is None else repr(round_sig(x)) if isinstance(x, float) else x

    rows_path = out_dir / "scores.csv"
    with open(rows_path, "w", newline="") as fh:
        w = csv.writer(fh)
        cols = ["video_id", "mode", "satisfaction_probability", "score", "human_score"]
        w.writerow(cols)
        for row in summary.rows:
            w.writerow([fmt(row[c]) for c in cols])
    groups_path = out_dir / "groups.csv"
    with open(groups_path, "w", newline="") as fh:
        w = csv.writer(fh)
        cols = ["model", "group", "n", "mean_score", "pearson_r", "error"]
        w.writerow(cols)
        for g in summary.groups:
            d = g.to_dict()
            w.writerow([fmt(d[c]) for c in cols])
    json_path = out_dir / "summary.json"
    json_path.write_text(dumps(round_tree(summary.to_dict())), encoding="utf-8")
    return rows_path, groups_path, json_path
