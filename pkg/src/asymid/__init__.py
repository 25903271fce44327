"""Solve asymmetric decision problems given as influence diagrams with framing functions."""
from .inference import Factor, UnclampedDecisionError, eliminate, marginalize, multiply, query, reduce
from .model import (
    Diagnostic,
    DecisionRule,
    InfluenceDiagram,
    State,
    consistent,
    effective_frame,
    enumerate_states,
    project,
    validate,
)
from .solve import Policy, evaluate_policy, extract_policy, foldback, solve
from .textformat import ParseError, parse, serialize
from .treegen import DecisionTree, build_tree, leaf_value, to_dot, tree_stats

__version__ = "0.1.0"
