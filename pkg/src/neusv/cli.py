"""Command-line entry point.

Every long option can also be set through an environment variable named
``NEUSV_<OPTION>`` (upper case, dashes as underscores), e.g.
``NEUSV_WINDOW_SIZE=3`` or ``NEUSV_VLM_ENDPOINT=...``.  Command-line flags
win over the environment.

Exit status: 0 success, 2 partial result (some modes failed), 1 failure.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .automaton import build_automaton, export_prism
from .checker import satisfaction_probability
from .errors import NeusVError
from .io import (
    CalibrationProfile, dump_profile, dump_trace, dumps, load_annotations,
    load_profile, load_spec_file, load_suite, load_trace, read_report, spec_file_to_dict,
    write_report,
)
from .perception import (
    VLMClient, auc, find_optimal_threshold, read_calibration_csv, roc_curve, write_roc_csv,
)
from .pipeline import EvaluationConfig, benchmark, evaluate, list_frames, perceive, write_benchmark
from .puls import ChatLLMClient, RecordedLLMClient, translate_all_modes
from .formula import PropositionSet, normalize_proposition
from .scoring import ALL_MODES, EvaluationMode, build_ecdf
from .transport import ClientConfig

ENV_PREFIX = "NEUSV_"
EXIT_OK, EXIT_FAIL, EXIT_PARTIAL = 0, 1, 2

log = logging.getLogger("neusv")


class _Parser(argparse.ArgumentParser):
    # usage errors are hard failures; status 2 is reserved for partial results
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_FAIL, f"{self.prog}: error: {message}\n")


def _truthy(value) -> bool:
    return str(value).strip().lower() in ("1", "true", "yes", "on")


def _apply_env(parser: argparse.ArgumentParser, environ) -> None:
    for action in parser._actions:
        longs = [o for o in action.option_strings if o.startswith("--")]
        if not longs or action.dest in ("help", "version"):
            continue
        key = ENV_PREFIX + longs[0][2:].upper().replace("-", "_")
        if key not in environ:
            continue
        value = environ[key]
        if isinstance(action, argparse._StoreTrueAction):
            action.default = _truthy(value)
        elif action.nargs in ("+", "*"):
            action.default = value.split(",")
        else:
            action.default = value  # argparse applies ``type`` to string defaults
        action.required = False


def _modes(values):
    if not values:
        return ALL_MODES
    out = []
    for v in values:
        out.extend(EvaluationMode.parse(x) for x in str(v).split(",") if x.strip())
    return tuple(out)


def _client_config(args, prefix) -> ClientConfig:
    endpoint = getattr(args, f"{prefix}_endpoint")
    model = getattr(args, f"{prefix}_model")
    if not endpoint or not model:
        raise NeusVError(f"--{prefix}-endpoint and --{prefix}-model are required for this run")
    return ClientConfig(endpoint=endpoint, model=model, api_key_env=args.api_key_env,
                        timeout=args.timeout, parallelism=args.parallelism,
                        max_frames=getattr(args, "max_frames", 3))


def _llm(args):
    recorded = getattr(args, "recorded_llm", None)
    inner = None
    if getattr(args, "llm_endpoint", None) and getattr(args, "llm_model", None):
        inner = ChatLLMClient(_client_config(args, "llm"))
    if recorded:
        path = Path(recorded)
        return RecordedLLMClient.load(path, inner) if path.exists() else RecordedLLMClient({}, inner)
    if inner is None:
        raise NeusVError("no spec file given: configure --llm-endpoint/--llm-model "
                         "or --recorded-llm")
    return inner


def _save_recording(args, llm):
    if getattr(args, "recorded_llm", None) and isinstance(llm, RecordedLLMClient):
        llm.save(args.recorded_llm)


def _write_or_print(text: str, out) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _gamma(args):
    if args.gamma_fp is not None:
        return args.gamma_fp
    return load_profile(args.profile).gamma_fp


# ---------------------------------------------------------------------------
# subcommands

def cmd_translate(args) -> int:
    llm = _llm(args)
    try:
        result = translate_all_modes(llm, args.prompt, _modes(args.modes),
                                     parallelism=args.parallelism)
    finally:
        _save_recording(args, llm)
    _write_or_print(dumps(spec_file_to_dict(args.prompt, result.specs)), args.out)
    for mode, err in result.failures.items():
        print(f"warning: {mode.value}: {err}", file=sys.stderr)
    return EXIT_PARTIAL if result.failures else EXIT_OK


def cmd_perceive(args) -> int:
    if args.spec_file:
        _, specs = load_spec_file(args.spec_file)
        seen = {}
        for spec in specs.values():
            for p in spec.propositions:
                seen.setdefault(p.id, p)
        props = PropositionSet(tuple(seen.values()))
    elif args.propositions:
        props = PropositionSet(tuple(normalize_proposition(p) for p in args.propositions))
    else:
        raise NeusVError("give --spec-file or --propositions")
    client = VLMClient(_client_config(args, "vlm"))
    trace, warnings = perceive(client, props, list_frames(args.frames), args.window_size,
                               args.parallelism)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    dump_trace(trace, args.out)
    return EXIT_OK


def cmd_score(args) -> int:
    _, specs = load_spec_file(args.spec_file)
    trace = load_trace(args.trace)
    gamma = None if trace.calibrated else _gamma(args)
    out, failed = {}, False
    for mode, spec in sorted(specs.items(), key=lambda kv: kv[0].value):
        try:
            sub = trace.select(spec.propositions.ids).calibrate(gamma)
            result = satisfaction_probability(build_automaton(sub), spec.formula)
            out[mode.value] = {"satisfaction_probability": result.probability,
                               "state_count": result.state_count}
        except NeusVError as exc:
            failed = True
            out[mode.value] = {"error": f"{type(exc).__name__}: {exc}"}
    _write_or_print(dumps(out), args.out)
    if failed:
        return EXIT_PARTIAL if len(out) > sum("error" in v for v in out.values()) else EXIT_FAIL
    return EXIT_OK


def cmd_evaluate(args) -> int:
    profile = load_profile(args.profile)
    config = EvaluationConfig(profile, window_size=args.window_size, gamma_fp=args.gamma_fp,
                              modes=_modes(args.modes), parallelism=args.parallelism,
                              timestamps=args.timestamps)
    prompt = args.prompt
    kwargs = {}
    llm = None
    if args.spec_file:
        file_prompt, specs = load_spec_file(args.spec_file)
        prompt = prompt or file_prompt
        kwargs["specs"] = specs
    else:
        if not prompt:
            raise NeusVError("--prompt is required without a spec file")
        llm = kwargs["llm"] = _llm(args)
    if args.trace:
        kwargs["trace"] = load_trace(args.trace)
        kwargs["trace_source"] = Path(args.trace).name
    elif args.frames:
        kwargs["frames"] = list_frames(args.frames)
        kwargs["perception"] = VLMClient(_client_config(args, "vlm"))
    else:
        raise NeusVError("give --trace or --frames")
    try:
        report = evaluate(config, prompt or "", **kwargs)
    finally:
        if llm is not None:
            _save_recording(args, llm)
    if args.out:
        write_report(report, args.out)
    else:
        sys.stdout.write(report.dumps())
    for mode, err in report.failures.items():
        print(f"warning: {mode}: {err}", file=sys.stderr)
    if report.final_score is None:
        return EXIT_FAIL
    return EXIT_PARTIAL if report.partial else EXIT_OK


def cmd_calibrate_threshold(args) -> int:
    samples = read_calibration_csv(args.samples)
    result = find_optimal_threshold(samples)
    points = roc_curve(samples)
    if args.roc_out:
        write_roc_csv(args.roc_out, points)
    _write_or_print(dumps({"gamma_fp": result.gamma, "accuracy": result.accuracy,
                           "candidates": result.candidates, "auc": auc(points),
                           "samples": len(samples)}), args.out)
    return EXIT_OK


def _collect_results(paths) -> dict[EvaluationMode, list[float]]:
    results: dict[EvaluationMode, list[float]] = {}
    for path in paths:
        path = Path(path)
        files = sorted(p for p in path.rglob("*") if p.suffix in (".json", ".csv")) \
            if path.is_dir() else [path]
        for f in files:
            if f.suffix == ".csv":
                with open(f, newline="") as fh:
                    for row in csv.DictReader(fh):
                        mode = EvaluationMode.parse(row["mode"])
                        results.setdefault(mode, []).append(float(row["satisfaction_probability"]))
                continue
            report = read_report(f)
            for mode, outcome in report.modes.items():
                results.setdefault(EvaluationMode.parse(mode), []).append(
                    outcome.satisfaction_probability)
    return results


def cmd_build_ecdf(args) -> int:
    results = _collect_results(args.inputs)
    if not results:
        raise NeusVError("no satisfaction probabilities found in the inputs")
    ecdf = {m: build_ecdf(v, m) for m, v in sorted(results.items(), key=lambda kv: kv[0].value)}
    provenance = {"description": args.provenance,
                  "sources": sorted(Path(p).name for p in args.inputs),
                  "counts": {m.value: len(d) for m, d in ecdf.items()}}
    profile = CalibrationProfile(args.profile_version, args.gamma_fp, ecdf, provenance)
    dump_profile(profile, args.out)
    missing = [m.value for m in ALL_MODES if m not in ecdf]
    if missing:
        print(f"warning: no samples for {', '.join(missing)}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_benchmark(args) -> int:
    summary = benchmark(load_suite(args.suite), args.reports, load_annotations(args.annotations))
    write_benchmark(summary, args.out)
    for w in summary.warnings:
        print(f"warning: {w}", file=sys.stderr)
    for g in summary.groups:
        r = "n/a" if g.pearson_r is None else f"{g.pearson_r:.4f}"
        print(f"{g.model}\t{g.group}\tn={g.n}\tmean={g.mean_score:.4f}\tr={r}")
    return EXIT_PARTIAL if summary.warnings or any(g.error for g in summary.groups) else EXIT_OK


def cmd_export_automaton(args) -> int:
    trace = load_trace(args.trace)
    if args.propositions:
        trace = trace.select([normalize_proposition(p).id for p in args.propositions])
    if not trace.calibrated:
        trace = trace.calibrate(_gamma(args))
    _write_or_print(export_prism(build_automaton(trace)), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def _add_client(p, prefix, what):
    p.add_argument(f"--{prefix}-endpoint", help=f"{what} chat-completions URL")
    p.add_argument(f"--{prefix}-model", help=f"{what} model identifier")


def _add_common_client(p):
    p.add_argument("--api-key-env", default="NEUSV_API_KEY",
                   help="environment variable holding the API key")
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--parallelism", type=int, default=4)


def _add_gamma(p):
    p.add_argument("--gamma-fp", type=float, help="false-positive threshold (default: profile's)")
    p.add_argument("--profile", help="calibration profile JSON (default: bundled)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="neusv", description="Score text-to-video alignment with temporal logic.",
                     epilog="Options can be set through NEUSV_<OPTION> environment variables.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("translate", help="prompt -> spec file")
    p.add_argument("--prompt", required=True)
    p.add_argument("--out", help="spec file to write")
    p.add_argument("--modes", nargs="*")
    p.add_argument("--recorded-llm", help="JSON of recorded responses (replayed, extended)")
    _add_client(p, "llm", "LLM")
    _add_common_client(p)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("perceive", help="frames -> trace file")
    p.add_argument("--frames", required=True, help="directory of frame images")
    p.add_argument("--spec-file")
    p.add_argument("--propositions", nargs="*")
    p.add_argument("--window-size", type=int, default=3)
    p.add_argument("--max-frames", type=int, default=3)
    p.add_argument("--out", required=True)
    _add_client(p, "vlm", "VLM")
    _add_common_client(p)
    p.set_defaults(func=cmd_perceive)

    p = sub.add_parser("score", help="trace + spec file -> satisfaction probabilities")
    p.add_argument("--trace", required=True)
    p.add_argument("--spec-file", required=True)
    p.add_argument("--out")
    _add_gamma(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("evaluate", help="end-to-end evaluation -> report")
    p.add_argument("--prompt")
    p.add_argument("--spec-file")
    p.add_argument("--trace")
    p.add_argument("--frames")
    p.add_argument("--window-size", type=int, default=3)
    p.add_argument("--max-frames", type=int, default=3)
    p.add_argument("--modes", nargs="*")
    p.add_argument("--out")
    p.add_argument("--timestamps", action="store_true", help="record wall-clock times")
    p.add_argument("--recorded-llm")
    _add_gamma(p)
    _add_client(p, "llm", "LLM")
    _add_client(p, "vlm", "VLM")
    _add_common_client(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("calibrate-threshold", help="score,label CSV -> threshold and ROC")
    p.add_argument("--samples", required=True)
    p.add_argument("--roc-out")
    p.add_argument("--out")
    p.set_defaults(func=cmd_calibrate_threshold)

    p = sub.add_parser("build-ecdf", help="reports or mode,satisfaction_probability CSVs -> profile")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--gamma-fp", type=float, required=True)
    p.add_argument("--profile-version", required=True)
    p.add_argument("--provenance", required=True, help="how the reference videos were obtained")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_ecdf)

    p = sub.add_parser("benchmark", help="reports + suite + human scores -> grouped summary")
    p.add_argument("--suite", required=True)
    p.add_argument("--reports", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("export-automaton", help="trace -> PRISM-style DTMC")
    p.add_argument("--trace", required=True)
    p.add_argument("--propositions", nargs="*")
    p.add_argument("--out")
    _add_gamma(p)
    p.set_defaults(func=cmd_export_automaton)
    return parser


def main(argv=None, environ=None) -> int:
    parser = build_parser()
    environ = os.environ if environ is None else environ
    _apply_env(parser, environ)
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for sp in action.choices.values():
                _apply_env(sp, environ)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_FAIL
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NeusVError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
