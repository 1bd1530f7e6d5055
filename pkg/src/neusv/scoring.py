"""Score calibration against reference distributions, mode aggregation, correlation."""
from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import CorrelationError, EmptyDistributionError, NoModesError


class EvaluationMode(str, enum.Enum):
    OBJECT_EXISTENCE = "object_existence"
    SPATIAL_RELATIONSHIP = "spatial_relationship"
    OBJECT_ACTION_ALIGNMENT = "object_action_alignment"
    OVERALL_CONSISTENCY = "overall_consistency"

    @classmethod
    def parse(cls, value: "str | EvaluationMode") -> "EvaluationMode":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_").replace(" ", "_")
        try:
            return cls(key)
        except ValueError:
            try:
                return cls[key.upper()]
            except KeyError:
                raise ValueError(f"unknown evaluation mode {value!r}") from None


ALL_MODES = tuple(EvaluationMode)


@dataclass(frozen=True)
class EcdfDistribution:
    mode: EvaluationMode
    samples: tuple[float, ...]

    def __post_init__(self):
        samples = tuple(sorted(float(x) for x in self.samples))
        if not samples:
            raise EmptyDistributionError(f"no reference samples for {self.mode}")
        if samples[0] < 0.0 or samples[-1] > 1.0 or any(math.isnan(x) for x in samples):
            raise ValueError("reference samples must lie in [0, 1]")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "mode", EvaluationMode.parse(self.mode))

    def __len__(self):
        return len(self.samples)


def build_ecdf(results: Iterable[float], mode: EvaluationMode | str) -> EcdfDistribution:
    results = list(results)
    if not results:
        raise EmptyDistributionError("cannot build a distribution from no results")
    return EcdfDistribution(EvaluationMode.parse(mode), tuple(results))


def ecdf_map(p: float, d: EcdfDistribution) -> float:
    """Fraction of reference samples less than or equal to ``p``."""
    if not d.samples:
        raise EmptyDistributionError("empty reference distribution")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"satisfaction probability must lie in [0, 1], got {p}")
    return bisect.bisect_right(d.samples, p) / len(d.samples)


@dataclass(frozen=True)
class ModeScore:
    satisfaction_probability: float
    score: float


@dataclass(frozen=True)
class NeusVScore:
    per_mode: Mapping[EvaluationMode, ModeScore]
    final: float
    absent: tuple[EvaluationMode, ...] = field(default=())


def aggregate(per_mode: Mapping) -> NeusVScore:
    """Average the calibrated scores of the modes that were evaluated.

    ``per_mode`` maps a mode to a :class:`ModeScore`, a bare score, or
    ``None`` for a mode that failed.  Absent modes are recorded, not zeroed.
    """
    present: dict[EvaluationMode, ModeScore] = {}
    absent = []
    for mode, value in per_mode.items():
        mode = EvaluationMode.parse(mode)
        if value is None:
            absent.append(mode)
            continue
        if not isinstance(value, ModeScore):
            value = ModeScore(float("nan"), float(value))
        present[mode] = value
    if not present:
        raise NoModesError("no evaluation mode produced a score")
    scores = [m.score for m in present.values()]
    final = math.fsum(scores) / len(scores)
    # fsum can round a hair outside the inputs' range
    final = min(max(final, min(scores)), max(scores))
    return NeusVScore(present, final, tuple(absent))


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient."""
    if len(xs) != len(ys):
        raise CorrelationError(f"length mismatch: {len(xs)} vs {len(ys)}")
    n = len(xs)
    if n < 2:
        raise CorrelationError("need at least two pairs")
    if min(xs) == max(xs) or min(ys) == max(ys):
        raise CorrelationError("zero variance")
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    dx = [x - mx for x in xs]
    dy = [y - my for y in ys]
    sxx = math.fsum(d * d for d in dx)
    syy = math.fsum(d * d for d in dy)
    r = math.fsum(a * b for a, b in zip(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))
