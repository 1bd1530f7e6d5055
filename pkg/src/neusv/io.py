"""On-disk formats: spec files, trace files, calibration profiles, prompt
suites, human annotations and evaluation reports.

Everything is JSON (or JSONL / CSV) with sorted keys so files diff cleanly.
Reports round floats to 12 significant digits; trace files keep full
precision so a dump/load cycle is exact.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping

import numpy as np

from .automaton import ConfidenceTrace
from .errors import NeusVError, ProfileError, SpecFileError, TraceSchemaError
from .formula import Proposition, PropositionSet, pretty_print
from .parser import parse_formula
from .puls import ModeSpec
from .scoring import EcdfDistribution, EvaluationMode

REPORT_SCHEMA_VERSION = 1
SIG_DIGITS = 12


def data_path(name: str) -> Path:
    """Path of a file bundled under ``neusv/data``."""
    return Path(str(resources.files("neusv") / "data" / name))


def _read_json(path, error):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise error(f"cannot read {path}: {exc.strerror or exc}") from None
    except ValueError as exc:
        raise error(f"{path}: invalid JSON: {exc}") from None


def _write_json(path, data) -> None:
    Path(path).write_text(dumps(data), encoding="utf-8")


def dumps(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False) + "\n"


def round_sig(x: float, digits: int = SIG_DIGITS) -> float:
    if x == 0 or not math.isfinite(x):
        return float(x)
    return float(f"{x:.{digits}g}")


def round_tree(obj):
    if isinstance(obj, float):
        return round_sig(obj)
    if isinstance(obj, dict):
        return {k: round_tree(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_tree(v) for v in obj]
    return obj


# ---------------------------------------------------------------------------
# trace files

def trace_to_dict(trace: ConfidenceTrace) -> dict:
    return {
        "propositions": list(trace.props.ids),
        "window_size": trace.window_size,
        "calibrated": trace.calibrated,
        "windows": trace.windows.tolist(),
    }


def trace_from_dict(data, where="trace") -> ConfidenceTrace:
    if not isinstance(data, dict):
        raise TraceSchemaError(f"{where}: expected a JSON object")
    for key in ("propositions", "windows"):
        if key not in data:
            raise TraceSchemaError(f"{where}: missing field {key!r}")
    raw_props = data["propositions"]
    if not isinstance(raw_props, list):
        raise TraceSchemaError(f"{where}: 'propositions' must be a list")
    try:
        props = PropositionSet(tuple(
            Proposition(p["id"], p.get("display", "")) if isinstance(p, dict) else Proposition(p)
            for p in raw_props))
    except (NeusVError, KeyError, TypeError, ValueError) as exc:
        raise TraceSchemaError(f"{where}: bad propositions: {exc}") from None
    windows = data["windows"]
    if not isinstance(windows, list) or not all(isinstance(r, list) for r in windows):
        raise TraceSchemaError(f"{where}: 'windows' must be a list of rows")
    for j, row in enumerate(windows):
        if len(row) != len(props):
            raise TraceSchemaError(
                f"{where}: window {j} has {len(row)} values for {len(props)} propositions")
        if not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in row):
            raise TraceSchemaError(f"{where}: window {j} holds a non-numeric confidence")
    window_size = data.get("window_size", 1)
    calibrated = data.get("calibrated", False)
    if not isinstance(window_size, int) or isinstance(window_size, bool) or window_size < 1:
        raise TraceSchemaError(f"{where}: 'window_size' must be a positive integer")
    if not isinstance(calibrated, bool):
        raise TraceSchemaError(f"{where}: 'calibrated' must be a boolean")
    matrix = np.array(windows, dtype=float).reshape(len(windows), len(props))
    try:
        return ConfidenceTrace(props, matrix, window_size, calibrated)
    except NeusVError as exc:
        raise TraceSchemaError(f"{where}: {exc}") from None


def load_trace(path) -> ConfidenceTrace:
    return trace_from_dict(_read_json(path, TraceSchemaError), str(path))


def dump_trace(trace: ConfidenceTrace, path) -> None:
    _write_json(path, trace_to_dict(trace))


# ---------------------------------------------------------------------------
# spec files

def _props_to_list(props: PropositionSet) -> list[dict]:
    return [{"id": p.id, "display": p.display} for p in props]


def mode_spec_to_dict(spec: ModeSpec) -> dict:
    return {"propositions": _props_to_list(spec.propositions),
            "formula": pretty_print(spec.formula)}


def spec_file_to_dict(prompt: str, specs: Mapping[EvaluationMode, ModeSpec]) -> dict:
    return {"prompt": prompt,
            "modes": {EvaluationMode.parse(m).value: mode_spec_to_dict(s) for m, s in specs.items()}}


def spec_file_from_dict(data, where="spec file") -> tuple[str, dict[EvaluationMode, ModeSpec]]:
    if not isinstance(data, dict) or not isinstance(data.get("modes"), dict):
        raise SpecFileError(f"{where}: expected an object with a 'modes' mapping")
    specs = {}
    for name, body in data["modes"].items():
        try:
            mode = EvaluationMode.parse(name)
            props = PropositionSet(tuple(
                Proposition(p["id"], p.get("display", "")) if isinstance(p, dict) else Proposition(p)
                for p in body["propositions"]))
            phi = parse_formula(body["formula"], props)
            specs[mode] = ModeSpec(mode, props, phi)
        except (NeusVError, KeyError, TypeError, ValueError) as exc:
            raise SpecFileError(f"{where}: mode {name!r}: {exc}") from None
    if not specs:
        raise SpecFileError(f"{where}: no modes")
    return str(data.get("prompt", "")), specs


def load_spec_file(path) -> tuple[str, dict[EvaluationMode, ModeSpec]]:
    return spec_file_from_dict(_read_json(path, SpecFileError), str(path))


def dump_spec_file(prompt: str, specs: Mapping[EvaluationMode, ModeSpec], path) -> None:
    _write_json(path, spec_file_to_dict(prompt, specs))


# ---------------------------------------------------------------------------
# calibration profiles

@dataclass(frozen=True)
class CalibrationProfile:
    version: str
    gamma_fp: float
    ecdf: Mapping[EvaluationMode, EcdfDistribution]
    provenance: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.gamma_fp < 1.0:
            raise ProfileError(f"gamma_fp must lie in (0, 1), got {self.gamma_fp}")
        if not self.provenance:
            raise ProfileError("a calibration profile must record its provenance")

    def distribution(self, mode) -> EcdfDistribution:
        mode = EvaluationMode.parse(mode)
        if mode not in self.ecdf:
            raise ProfileError(f"profile {self.version!r} has no distribution for {mode.value}")
        return self.ecdf[mode]

    def to_dict(self) -> dict:
        return {"version": self.version, "gamma_fp": self.gamma_fp,
                "provenance": dict(self.provenance),
                "ecdf": {m.value: list(d.samples) for m, d in self.ecdf.items()}}

    @classmethod
    def from_dict(cls, data, where="profile") -> "CalibrationProfile":
        try:
            ecdf = {}
            for name, samples in data["ecdf"].items():
                mode = EvaluationMode.parse(name)
                ecdf[mode] = EcdfDistribution(mode, tuple(samples))
            return cls(str(data["version"]), float(data["gamma_fp"]), ecdf,
                       data.get("provenance") or {})
        except ProfileError as exc:
            raise ProfileError(f"{where}: {exc}") from None
        except (NeusVError, KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ProfileError(f"{where}: {type(exc).__name__}: {exc}") from None


def load_profile(path=None) -> CalibrationProfile:
    """Load a profile; with no path, the bundled one."""
    path = data_path("profile.json") if path is None else path
    return CalibrationProfile.from_dict(_read_json(path, ProfileError), str(path))


def dump_profile(profile: CalibrationProfile, path) -> None:
    _write_json(path, profile.to_dict())


# ---------------------------------------------------------------------------
# prompt suites and annotations

@dataclass(frozen=True)
class SuitePrompt:
    id: str
    theme: str
    complexity: str
    prompt: str


def load_suite(path) -> list[SuitePrompt]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                out.append(SuitePrompt(str(d["id"]), str(d["theme"]), str(d["complexity"]),
                                       str(d["prompt"])))
            except (ValueError, KeyError, TypeError) as exc:
                raise SpecFileError(f"{path}:{n}: bad suite entry: {exc}") from None
    ids = [p.id for p in out]
    if len(set(ids)) != len(ids):
        raise SpecFileError(f"{path}: duplicate prompt ids")
    return out


def normalize_rating(x: float) -> float:
    """Map a 1-5 rating onto [0, 1]."""
    if not 1.0 <= x <= 5.0:
        raise ValueError(f"rating {x} outside 1..5")
    return (x - 1.0) / 4.0


def load_annotations(path) -> dict[str, float]:
    """``video_id -> normalized human score`` from a CSV with a header row."""
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or not {"video_id", "alignment_score"} <= set(reader.fieldnames):
            raise SpecFileError(f"{path}: need columns video_id, alignment_score")
        for row in reader:
            out[row["video_id"]] = normalize_rating(float(row["alignment_score"]))
    return out


# ---------------------------------------------------------------------------
# evaluation reports

@dataclass(frozen=True)
class ModeOutcome:
    propositions: tuple[tuple[str, str], ...]  # (id, display)
    specification: str
    satisfaction_probability: float
    score: float
    state_count: int = 0

    def to_dict(self) -> dict:
        return {"propositions": [{"id": i, "display": d} for i, d in self.propositions],
                "specification": self.specification,
                "satisfaction_probability": self.satisfaction_probability,
                "score": self.score, "state_count": self.state_count}

    @classmethod
    def from_dict(cls, d) -> "ModeOutcome":
        return cls(tuple((p["id"], p["display"]) for p in d["propositions"]),
                   d["specification"], float(d["satisfaction_probability"]), float(d["score"]),
                   int(d.get("state_count", 0)))


@dataclass(frozen=True)
class EvaluationReport:
    prompt: str
    modes: Mapping[str, ModeOutcome]
    final_score: float | None
    failures: Mapping[str, str] = field(default_factory=dict)
    window_size: int = 1
    n_windows: int = 0
    gamma_fp: float | None = None
    warnings: tuple[str, ...] = ()
    provenance: Mapping = field(default_factory=dict)
    schema_version: int = REPORT_SCHEMA_VERSION

    @property
    def partial(self) -> bool:
        return bool(self.failures)

    def to_dict(self) -> dict:
        return round_tree({
            "schema_version": self.schema_version,
            "prompt": self.prompt,
            "modes": {m: o.to_dict() for m, o in sorted(self.modes.items())},
            "final_score": self.final_score,
            "failures": dict(sorted(self.failures.items())),
            "window_size": self.window_size,
            "n_windows": self.n_windows,
            "gamma_fp": self.gamma_fp,
            "warnings": list(self.warnings),
            "provenance": self.provenance,
        })

    @classmethod
    def from_dict(cls, d) -> "EvaluationReport":
        try:
            version = int(d["schema_version"])
            if version != REPORT_SCHEMA_VERSION:
                raise SpecFileError(f"unsupported report schema version {version}")
            return cls(
                prompt=d["prompt"],
                modes={m: ModeOutcome.from_dict(o) for m, o in d["modes"].items()},
                final_score=None if d["final_score"] is None else float(d["final_score"]),
                failures=dict(d.get("failures", {})),
                window_size=int(d.get("window_size", 1)),
                n_windows=int(d.get("n_windows", 0)),
                gamma_fp=d.get("gamma_fp"),
                warnings=tuple(d.get("warnings", ())),
                provenance=d.get("provenance", {}),
                schema_version=version,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecFileError(f"malformed report: {exc}") from None

    def dumps(self) -> str:
        return dumps(self.to_dict())


def write_report(report: EvaluationReport, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.dumps(), encoding="utf-8")


def read_report(path) -> EvaluationReport:
    return EvaluationReport.from_dict(_read_json(path, SpecFileError))
