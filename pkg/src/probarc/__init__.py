"""Probabilistic arc consistency for binary CSPs: exact and approximate
solution probabilities, and search heuristics built on them."""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .ac3 import DomainSet, ac3, revise
from .csp import CspInstance, GraphInfo, build_instance, condition, graph_info, neighbors
from .generator import GenSpec, generate, generate_tree
from .oracle import SolutionCensus, enumerate_solutions, frequencies
from .pac import Mode, PropagationConfig, PropagationResult, propagate

__all__ = [
    "BACKEND",
    "CspInstance",
    "DomainSet",
    "GenSpec",
    "GraphInfo",
    "Mode",
    "PropagationConfig",
    "PropagationResult",
    "SolutionCensus",
    "ac3",
    "build_instance",
    "condition",
    "enumerate_solutions",
    "frequencies",
    "generate",
    "generate_tree",
    "graph_info",
    "neighbors",
    "propagate",
    "revise",
]
