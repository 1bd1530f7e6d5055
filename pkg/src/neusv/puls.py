"""Prompt translation: text prompt -> propositions -> temporal-logic specification.

Each evaluation mode has two few-shot stores, one for the proposition stage
(``t2p``) and one for the specification stage (``t2tl``).  Stores are JSON
files ``{"system_template": ..., "examples": [...]}``; the bundled ones live
in ``neusv/data/fewshot/<stage>/<mode>.json``.
"""
from __future__ import annotations

import ast
import hashlib
import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

from .errors import FewShotStoreError, NeusVError, TranslationError, UnknownAtomError
from .formula import Formula, PropositionSet, collect_atoms, normalize_proposition
from .parser import parse_formula
from .scoring import ALL_MODES, EvaluationMode
from .transport import ChatTransport, ClientConfig

log = logging.getLogger(__name__)

STAGES = ("t2p", "t2tl")
NO_REASONING = "(none given)"


@dataclass(frozen=True)
class FewShotExample:
    prompt: str
    propositions: tuple[str, ...]
    specification: str | None = None
    reasoning: str | None = None


@dataclass(frozen=True)
class FewShotStore:
    stage: str
    mode: EvaluationMode
    system_template: str
    examples: tuple[FewShotExample, ...]


@dataclass(frozen=True)
class ModeSpec:
    mode: EvaluationMode
    propositions: PropositionSet
    formula: Formula
    raw_outputs: Mapping[str, object] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        missing = [p for p in collect_atoms(self.formula).ids if p not in self.propositions]
        if missing:
            raise UnknownAtomError(missing[0], self.propositions.ids)


# ---------------------------------------------------------------------------
# few-shot stores

def _bundled(stage, mode):
    return resources.files("neusv") / "data" / "fewshot" / stage / f"{mode.value}.json"


def load_store(stage: str, mode: EvaluationMode | str, path=None) -> FewShotStore:
    """Load and validate a few-shot store.

    Every T2TL example must parse and use exactly its listed propositions.
    """
    if stage not in STAGES:
        raise ValueError(f"stage must be one of {STAGES}")
    mode = EvaluationMode.parse(mode)
    source = Path(path) if path is not None else _bundled(stage, mode)
    try:
        data = json.loads(source.read_text(encoding="utf-8"))
        template = data["system_template"]
        raw_examples = data["examples"]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise FewShotStoreError(f"{source}: {exc}") from None
    if isinstance(template, list):
        template = "\n".join(template)
    examples = []
    for k, ex in enumerate(raw_examples):
        try:
            example = FewShotExample(ex["prompt"], tuple(ex["propositions"]),
                                     ex.get("specification"), ex.get("reasoning"))
        except (KeyError, TypeError) as exc:
            raise FewShotStoreError(f"{source}: example {k}: {exc}") from None
        if not example.propositions:
            raise FewShotStoreError(f"{source}: example {k} has no propositions")
        if stage == "t2tl":
            _check_example(source, k, example)
        examples.append(example)
    return FewShotStore(stage, mode, template, tuple(examples))


def _check_example(source, k, example):
    if not example.specification:
        raise FewShotStoreError(f"{source}: example {k} lacks a specification")
    props = PropositionSet.of(*example.propositions)
    try:
        phi = parse_formula(example.specification, props)
    except NeusVError as exc:
        raise FewShotStoreError(f"{source}: example {k}: {exc}") from None
    if set(collect_atoms(phi).ids) != set(props.ids):
        raise FewShotStoreError(
            f"{source}: example {k} specification does not use exactly its propositions")


def load_stores(directory=None) -> dict[tuple[str, EvaluationMode], FewShotStore]:
    out = {}
    for stage in STAGES:
        for mode in ALL_MODES:
            path = None if directory is None else Path(directory) / stage / f"{mode.value}.json"
            out[(stage, mode)] = load_store(stage, mode, path)
    return out


# ---------------------------------------------------------------------------
# LLM clients

class LLMClient(Protocol):
    def complete(self, messages: list[dict]) -> str: ...


class ChatLLMClient:
    name = "llm"

    def __init__(self, config: ClientConfig, transport: ChatTransport | None = None):
        self.config = config
        self.model = config.model
        self.transport = transport or ChatTransport(config)

    @property
    def identity(self) -> dict:
        return {"client": self.name, "model": self.model, "endpoint": self.config.endpoint}

    def complete(self, messages: list[dict]) -> str:
        choice = self.transport.chat(messages)
        try:
            return choice["message"]["content"] or ""
        except (KeyError, TypeError):
            raise TranslationError("response has no message content") from None


def messages_key(messages: Sequence[dict]) -> str:
    blob = json.dumps(list(messages), sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class RecordedLLMClient:
    """Replays responses keyed by a hash of the request messages.

    Wrap a live client with ``inner`` to record; call :meth:`save` to persist.
    """

    name = "recorded-llm"

    def __init__(self, responses: Mapping[str, str] | None = None, inner: LLMClient | None = None):
        self.responses = dict(responses or {})
        self.inner = inner
        self.model = getattr(inner, "model", "recorded")

    @property
    def identity(self) -> dict:
        return {"client": self.name, "model": self.model}

    @classmethod
    def load(cls, path, inner=None) -> "RecordedLLMClient":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")), inner)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.responses, indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")

    def complete(self, messages: list[dict]) -> str:
        key = messages_key(messages)
        if key not in self.responses:
            if self.inner is None:
                raise TranslationError(f"no recorded response for request {key[:12]}")
            self.responses[key] = self.inner.complete(messages)
        return self.responses[key]


# ---------------------------------------------------------------------------
# rendering and extraction

def _format_list(items: Iterable[str]) -> str:
    return "[" + ", ".join(json.dumps(p, ensure_ascii=False) for p in items) + "]"


def render_t2p_messages(store: FewShotStore, prompt: str) -> list[dict]:
    def user(text):
        return {"role": "user", "content": (
            f"Input Prompt: {text}\n\nRespond with the corresponding output fields, "
            "starting with the field `reasoning`, then `output_propositions`.")}

    messages = [{"role": "system", "content": store.system_template}]
    for ex in store.examples:
        messages.append(user(ex.prompt))
        messages.append({"role": "assistant", "content": (
            f"Reasoning: {ex.reasoning or NO_REASONING}\n\n"
            f"Output Propositions: {_format_list(ex.propositions)}")})
    messages.append(user(prompt))
    return messages


def render_t2tl_messages(store: FewShotStore, prompt: str, props: Sequence[str]) -> list[dict]:
    def user(text, items):
        return {"role": "user", "content": (
            f"Input Prompt: {text}\n\nInput Propositions: {_format_list(items)}\n\n"
            "Respond with the corresponding output fields, starting with the field "
            "`reasoning`, then `output_specification`.")}

    messages = [{"role": "system", "content": store.system_template}]
    for ex in store.examples:
        messages.append(user(ex.prompt, ex.propositions))
        messages.append({"role": "assistant", "content": (
            f"Reasoning: {ex.reasoning or NO_REASONING}\n\n"
            f"Output Specification: {ex.specification}")})
    messages.append(user(prompt, props))
    return messages


_BRACKETED = re.compile(r"\[[^\[\]]*\]", re.S)
_QUOTE_CHARS = "'\"`\u2018\u2019\u201c\u201d"
_QUOTED_SEP = re.compile(r"(?<=['\"`\u2019\u201d])\s*,\s*(?=['\"`\u2018\u201c])")


def extract_propositions(text: str) -> list[str]:
    """Items of the last bracketed list in ``text``."""
    spans = _BRACKETED.findall(text or "")
    if not spans:
        raise TranslationError("no bracketed proposition list in model output", text)
    span = spans[-1]
    items = None
    for loader in (json.loads, ast.literal_eval):
        try:
            value = loader(span)
        except (ValueError, SyntaxError, MemoryError, RecursionError):
            continue
        if isinstance(value, list) and all(isinstance(v, str) for v in value):
            items = value
            break
    if items is None:
        # mixed or typographic quotes: split between quoted items, else on commas
        inner = span[1:-1].strip()
        quoted = inner[:1] in _QUOTE_CHARS and inner[-1:] in _QUOTE_CHARS
        parts = _QUOTED_SEP.split(inner) if quoted else inner.split(",")
        items = [part.strip().strip(_QUOTE_CHARS) for part in parts]
    return [i.strip() for i in items if i and i.strip()]


_OPERATOR = re.compile(
    r"\b(AND|OR|NOT|UNTIL|ALWAYS|EVENTUALLY|NEXT|IMPLIES|U|G|F|X)\b|&|\||!|->")
_SPEC_PREFIX = re.compile(r"^\s*\W*\s*(output[ _]specification|specification)\s*\W*\s*:\s*", re.I)


def extract_specification(text: str) -> str:
    """The specification line of a model response.

    Prefers a line labelled ``Output Specification:``; otherwise the last line
    containing a temporal-logic operator; otherwise the last non-empty line.
    """
    lines = [ln.strip().strip("`").strip() for ln in (text or "").splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise TranslationError("empty model output", text)
    labelled = [ln for ln in lines if _SPEC_PREFIX.match(ln)]
    if labelled:
        line = labelled[-1]
    else:
        with_ops = [ln for ln in lines if _OPERATOR.search(ln)]
        line = with_ops[-1] if with_ops else lines[-1]
    return _SPEC_PREFIX.sub("", line).strip().strip("`").strip()


# ---------------------------------------------------------------------------
# translation

def _store(stores, stage, mode):
    if stores is not None and (stage, mode) in stores:
        return stores[(stage, mode)]
    return load_store(stage, mode)


def translate_t2p(llm: LLMClient, prompt: str, mode: EvaluationMode | str,
                  store: FewShotStore | None = None, raw: list | None = None) -> PropositionSet:
    mode = EvaluationMode.parse(mode)
    store = store or load_store("t2p", mode)
    output = llm.complete(render_t2p_messages(store, prompt))
    if raw is not None:
        raw.append(output)
    phrases = extract_propositions(output)
    props = []
    seen = set()
    for phrase in phrases:
        try:
            p = normalize_proposition(phrase)
        except NeusVError:
            continue
        if p.id not in seen:
            seen.add(p.id)
            props.append(p)
    if not props:
        raise TranslationError("model returned an empty proposition set", output)
    return PropositionSet(tuple(props))


def translate_t2tl(llm: LLMClient, prompt: str, props: PropositionSet, mode: EvaluationMode | str,
                   store: FewShotStore | None = None, raw: list | None = None) -> Formula:
    if not len(props):
        raise TranslationError("cannot build a specification without propositions")
    mode = EvaluationMode.parse(mode)
    store = store or load_store("t2tl", mode)
    messages = render_t2tl_messages(store, prompt, [p.display for p in props])
    outputs = []
    error = None
    for attempt in range(2):
        output = llm.complete(messages)
        outputs.append(output)
        if raw is not None:
            raw.append(output)
        try:
            return parse_formula(extract_specification(output), props)
        except NeusVError as exc:
            error = exc
            log.info("specification attempt %d failed: %s", attempt + 1, exc)
            messages = messages + [
                {"role": "assistant", "content": output},
                {"role": "user", "content": (
                    f"That specification could not be used: {exc}. Reply with "
                    "`Output Specification:` followed by a single formula that only uses the "
                    f"propositions {_format_list(p.display for p in props)} and the operators "
                    "AND, OR, NOT, UNTIL, ALWAYS, EVENTUALLY.")},
            ]
    if isinstance(error, UnknownAtomError):
        raise error
    raise TranslationError(f"specification did not parse after retry: {error}", outputs)


def translate_mode(llm: LLMClient, prompt: str, mode: EvaluationMode | str, stores=None) -> ModeSpec:
    mode = EvaluationMode.parse(mode)
    raw_p, raw_s = [], []
    props = translate_t2p(llm, prompt, mode, _store(stores, "t2p", mode), raw_p)
    phi = translate_t2tl(llm, prompt, props, mode, _store(stores, "t2tl", mode), raw_s)
    # the specification may use only part of the extracted propositions
    return ModeSpec(mode, props, phi, {"t2p": raw_p, "t2tl": raw_s})


@dataclass
class TranslationResult:
    specs: dict[EvaluationMode, ModeSpec]
    failures: dict[EvaluationMode, str]


def translate_all_modes(llm: LLMClient, prompt: str, modes: Sequence = ALL_MODES,
                        stores=None, parallelism: int = 1) -> TranslationResult:
    """Translate ``prompt`` for every mode; failed modes are recorded, not invented."""
    modes = [EvaluationMode.parse(m) for m in modes]

    def run(mode):
        try:
            return mode, translate_mode(llm, prompt, mode, stores), None
        except NeusVError as exc:
            return mode, None, f"{type(exc).__name__}: {exc}"

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(run, modes))
    else:
        results = [run(m) for m in modes]
    specs = {m: s for m, s, _ in results if s is not None}
    failures = {m: e for m, _, e in results if e is not None}
    if not specs:
        raise TranslationError("translation failed for every mode: " + "; ".join(
            f"{m.value}: {e}" for m, e in failures.items()))
    return TranslationResult(specs, failures)
