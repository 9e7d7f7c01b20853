"""Certify input/output-to-state stability of switched systems from their switching graph."""

from .certifier import CertificationReport, Overall, build_reduced_graph, certify, check_C1, check_C2, max_cycle_mean
from .config import load_spec, spec_from_dict
from .enumeration import (
    CycleCapError,
    decompose_closed_walk,
    decompose_prefix,
    enumerate_cycles,
    enumerate_simple_walks,
)
from .expr import compile_exprs, eval_expr, parse_expr, to_string
from .graph import StabilityGraph, Walk, build_graph, is_contractive, is_jointly_contractive, xi_of, xi_worst
from .model import SpecError, SystemSpec, simple_spec
from .signals import SwitchingSignal, sample_signal, stats, validate_signal
from .simulator import integrate, psi1, psi2

__version__ = "0.1.0"

__all__ = [
    "CertificationReport",
    "Overall",
    "build_reduced_graph",
    "certify",
    "check_C1",
    "check_C2",
    "max_cycle_mean",
    "load_spec",
    "spec_from_dict",
    "CycleCapError",
    "decompose_closed_walk",
    "decompose_prefix",
    "enumerate_cycles",
    "enumerate_simple_walks",
    "compile_exprs",
    "eval_expr",
    "parse_expr",
    "to_string",
    "StabilityGraph",
    "Walk",
    "build_graph",
    "is_contractive",
    "is_jointly_contractive",
    "xi_of",
    "xi_worst",
    "SpecError",
    "SystemSpec",
    "simple_spec",
    "SwitchingSignal",
    "sample_signal",
    "stats",
    "validate_signal",
    "integrate",
    "psi1",
    "psi2",
]
