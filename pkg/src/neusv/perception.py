"""Per-window proposition confidences and detector threshold calibration.

A perception client answers one question: how confident is it that a
proposition holds in a window of frames.  :class:`VLMClient` asks a
vision-language model a Yes/No question and turns the answer's token
probabilities into a confidence; :class:`TraceClient` replays confidences
stored in a trace file.
"""
from __future__ import annotations

import base64
import csv
import math
import mimetypes
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from .errors import (
    ContextLimitError, MalformedAnswerError, MissingKeyError, SingleClassError, TransportError,
)
from .formula import Proposition, PropositionSet
from .transport import ChatTransport, ClientConfig

DETECTOR_TEMPLATE = (
    "Is there {proposition} present in the sequence of frames?\n"
    "[PARSING RULE] 1. Answer with exactly one word: Yes or No.\n"
    "2. Do not add punctuation, explanations or any other text, and do not repeat the answer.\n"
    "3. Example: for 'Is there a dog present in the sequence of frames?' reply 'Yes' or 'No'."
)

_SPECIAL_TOKEN = re.compile(r"^\s*(<\|?/?[^<>\s]*\|?>)?\s*$")


@dataclass(frozen=True)
class TokenScore:
    token: str
    logprob: float
    alternatives: tuple[tuple[str, float], ...] = ()

    @property
    def prob(self) -> float:
        return math.exp(self.logprob)

    @classmethod
    def from_logits(cls, token: str, logits: Mapping[str, float]) -> "TokenScore":
        """Softmax over ``logits`` at one position, keeping ``token``'s share."""
        top = max(logits.values())
        log_z = top + math.log(math.fsum(math.exp(v - top) for v in logits.values()))
        alts = tuple(sorted(((t, v - log_z) for t, v in logits.items()), key=lambda x: -x[1]))
        return cls(token, logits[token] - log_z, alts)


def is_special_token(token: str) -> bool:
    """End-of-sequence markers and whitespace-only tokens carry no answer text."""
    return bool(_SPECIAL_TOKEN.match(token))


def parse_answer(tokens: Sequence[TokenScore]) -> bool:
    text = "".join(t.token for t in tokens if not is_special_token(t.token))
    answer = text.strip().rstrip(".!").strip().lower()
    if answer == "yes":
        return True
    if answer == "no":
        return False
    raise MalformedAnswerError(text)


def confidence_from_tokens(tokens: Sequence[TokenScore]) -> float:
    """Confidence that the queried proposition holds.

    The response probability is the product of every token's probability.
    A Yes answer yields that probability, a No answer its complement.
    """
    if not tokens:
        raise MalformedAnswerError("")
    yes = parse_answer(tokens)
    p = math.exp(math.fsum(t.logprob for t in tokens))
    p = min(1.0, max(0.0, p))
    return p if yes else 1.0 - p


@dataclass(frozen=True)
class Window:
    index: int
    frames: tuple[Path, ...] = ()


class PerceptionClient(Protocol):
    name: str
    model: str
    max_frames: int

    def score(self, proposition: Proposition, window: Window) -> float: ...


def score_proposition(client: PerceptionClient, p: Proposition, window: Window) -> float:
    if len(window.frames) > client.max_frames:
        raise ContextLimitError(
            f"{len(window.frames)} frames exceed the client's limit of {client.max_frames}")
    c = float(client.score(p, window))
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"client returned confidence {c} outside [0, 1]")
    return c


def score_windows(client: PerceptionClient, props: PropositionSet, windows: Sequence[Window],
                  parallelism: int = 4) -> np.ndarray:
    """Raw confidence matrix, rows = windows, columns = propositions."""
    jobs = [(j, i) for j in range(len(windows)) for i in range(len(props))]
    out = np.zeros((len(windows), len(props)))

    def run(job):
        j, i = job
        return job, score_proposition(client, props[i], windows[j])

    if parallelism <= 1:
        results = map(run, jobs)
    else:
        pool = ThreadPoolExecutor(max_workers=parallelism)
        results = pool.map(run, jobs)
    try:
        for (j, i), c in results:
            out[j, i] = c
    finally:
        if parallelism > 1:
            pool.shutdown()
    return out


def encode_frame(path: Path) -> str:
    mime = mimetypes.guess_type(str(path))[0] or "image/jpeg"
    data = base64.b64encode(Path(path).read_bytes()).decode("ascii")
    return f"data:{mime};base64,{data}"


def tokens_from_choice(choice: dict) -> list[TokenScore]:
    """Per-token log-probabilities from a chat-completions choice."""
    try:
        content = choice["logprobs"]["content"]
    except (KeyError, TypeError):
        content = None
    if not content:
        raise TransportError("response carries no token log-probabilities")
    tokens = []
    for entry in content:
        alts = tuple((a["token"], float(a["logprob"])) for a in entry.get("top_logprobs") or ())
        tokens.append(TokenScore(entry["token"], float(entry["logprob"]), alts))
    return tokens


class VLMClient:
    """Semantic detector backed by a chat-completions VLM endpoint."""

    name = "vlm"

    def __init__(self, config: ClientConfig, transport: ChatTransport | None = None,
                 template: str = DETECTOR_TEMPLATE):
        self.config = config
        self.model = config.model
        self.max_frames = config.max_frames
        self.template = template
        self.transport = transport or ChatTransport(config)

    @property
    def identity(self) -> dict:
        return {"client": self.name, "model": self.model, "endpoint": self.config.endpoint}

    def build_messages(self, proposition: Proposition, frames: Sequence[Path]) -> list[dict]:
        content: list[dict] = [{"type": "image_url", "image_url": {"url": encode_frame(f)}}
                               for f in frames]
        content.append({"type": "text",
                        "text": self.template.format(proposition=proposition.display)})
        return [{"role": "user", "content": content}]

    def ask(self, proposition: Proposition, frames: Sequence[Path]) -> list[TokenScore]:
        choice = self.transport.chat(self.build_messages(proposition, frames),
                                     logprobs=True, top_logprobs=self.config.top_logprobs,
                                     max_tokens=4)
        return tokens_from_choice(choice)

    def score(self, proposition: Proposition, window: Window) -> float:
        if not window.frames:
            raise ContextLimitError("a VLM query needs at least one frame")
        return confidence_from_tokens(self.ask(proposition, window.frames))


@dataclass
class TraceClient:
    """Replays stored confidences keyed by (proposition id, window index)."""

    props: PropositionSet
    windows: np.ndarray
    window_size: int = 1
    calibrated: bool = False
    source: str = ""
    name: str = "trace"
    model: str = "recorded"
    max_frames: int = 10**9

    @property
    def identity(self) -> dict:
        return {"client": self.name, "model": self.model, "source": self.source}

    def score(self, proposition: Proposition, window: Window) -> float:
        if proposition.id not in self.props:
            raise MissingKeyError(f"trace has no proposition {proposition.id!r}")
        if not 0 <= window.index < self.windows.shape[0]:
            raise MissingKeyError(f"trace has no window {window.index}")
        return float(self.windows[window.index, self.props.index(proposition.id)])

    @property
    def n_windows(self) -> int:
        return self.windows.shape[0]


def load_trace_client(path) -> TraceClient:
    from .io import load_trace  # io depends on this module's neighbours only

    trace = load_trace(path)
    return TraceClient(trace.props, np.asarray(trace.windows), trace.window_size,
                       trace.calibrated, source=str(path))


# ---------------------------------------------------------------------------
# detector threshold calibration

@dataclass(frozen=True)
class CalibrationSample:
    score: float
    label: bool

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"confidence {self.score} outside [0, 1]")
        object.__setattr__(self, "label", bool(self.label))


@dataclass(frozen=True)
class ThresholdResult:
    gamma: float
    accuracy: float
    candidates: int = field(default=0, compare=False)


def _split(samples):
    scores = np.array([s.score for s in samples], dtype=float)
    labels = np.array([s.label for s in samples], dtype=bool)
    if labels.all() or not labels.any():
        raise SingleClassError("calibration needs both positive and negative samples")
    return scores, labels


def find_optimal_threshold(samples: Sequence[CalibrationSample]) -> ThresholdResult:
    """Observed score that maximizes accuracy of ``score >= threshold``.

    Ties go to the smallest threshold.
    """
    scores, labels = _split(samples)
    candidates = np.unique(scores)
    pos = np.sort(scores[labels])
    neg = np.sort(scores[~labels])
    tp = len(pos) - np.searchsorted(pos, candidates, side="left")
    tn = np.searchsorted(neg, candidates, side="left")
    correct = tp + tn
    best = int(np.argmax(correct))
    return ThresholdResult(float(candidates[best]), float(correct[best]) / len(scores),
                           len(candidates))


def accuracy_at(samples: Sequence[CalibrationSample], gamma: float) -> float:
    hits = sum((s.score >= gamma) == s.label for s in samples)
    return hits / len(samples)


@dataclass(frozen=True)
class RocPoint:
    fpr: float
    tpr: float
    threshold: float  # inf for the (0, 0) endpoint, -inf for (1, 1)


def roc_curve(samples: Sequence[CalibrationSample]) -> list[RocPoint]:
    """One point per distinct score (descending) plus the two endpoints."""
    scores, labels = _split(samples)
    candidates = np.unique(scores)[::-1]
    pos = np.sort(scores[labels])
    neg = np.sort(scores[~labels])
    tp = len(pos) - np.searchsorted(pos, candidates, side="left")
    fp = len(neg) - np.searchsorted(neg, candidates, side="left")
    points = [RocPoint(0.0, 0.0, math.inf)]
    points += [RocPoint(f / len(neg), t / len(pos), float(c))
               for f, t, c in zip(fp.tolist(), tp.tolist(), candidates.tolist())]
    points.append(RocPoint(1.0, 1.0, -math.inf))
    return points


def auc(points: Sequence[RocPoint]) -> float:
    area = 0.0
    for a, b in zip(points, points[1:]):
        area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0
    return area


def read_calibration_csv(path) -> list[CalibrationSample]:
    """Read ``score,label`` rows; a header row is optional."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                score = float(row[0])
            except ValueError:
                if not out:
                    continue  # header
                raise
            label = row[1].strip().lower() in ("1", "true", "yes", "y", "t")
            out.append(CalibrationSample(score, label))
    return out


def write_calibration_csv(path, samples: Iterable[CalibrationSample]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["score", "label"])
        for s in samples:
            w.writerow([repr(s.score), int(s.label)])


def write_roc_csv(path, points: Sequence[RocPoint]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["fpr", "tpr", "threshold"])
        for p in points:
            w.writerow([repr(p.fpr), repr(p.tpr), repr(p.threshold)])
