"""Temporal-logic scoring of text-to-video alignment.

A prompt becomes per-mode temporal-logic specifications, a video becomes a
layered Markov chain over per-window proposition valuations, and the score is
the calibrated probability that the chain satisfies the specification.
"""
__version__ = "0.1.0"

from .automaton import (
    ConfidenceTrace, VideoAutomaton, build_automaton, calibrate_confidence, export_prism,
    validate_automaton, valuation_distribution,
)
from .checker import (
    brute_force_probability, canonicalize, finalize, progress, satisfaction_probability,
    satisfaction_probability_from_trace,
)
from .errors import NeusVError
from .formula import (
    FALSE, TRUE, Always, And, Atom, BooleanTrace, Const, Eventually, Formula, Implies, Next, Not,
    Or, Proposition, PropositionSet, Until, Valuation, collect_atoms, evaluate_trace,
    normalize_proposition, pretty_print,
)
from .parser import parse_formula
from .scoring import (
    ALL_MODES, EcdfDistribution, EvaluationMode, NeusVScore, aggregate, build_ecdf, ecdf_map,
    pearson,
)
from .perception import (
    CalibrationSample, TokenScore, TraceClient, VLMClient, confidence_from_tokens,
    find_optimal_threshold, load_trace_client, roc_curve, score_proposition,
)
from .puls import ModeSpec, translate_all_modes, translate_t2p, translate_t2tl
from .io import CalibrationProfile, EvaluationReport, load_profile, load_spec_file, load_trace
from .pipeline import EvaluationConfig, benchmark, evaluate, window_frames
