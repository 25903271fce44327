"""Fold-back evaluation, policy extraction and direct policy evaluation."""
from __future__ import annotations

import itertools
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Iterator

from .model import (
    DecisionRule,
    DiagramError,
    InfluenceDiagram,
    State,
    effective_frame,
    information_states,
)
from .treegen import CHANCE_NODE, CHOICE_NODE, DecisionTree, TreeNode, TreeStats, build_tree


class IncompletePolicyError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SolvedNode:
    node: TreeNode
    value: float
    best: int | None  # index of the retained child at choice nodes
    children: tuple[SolvedNode, ...]

    @property
    def choice(self) -> str | None:
        if self.best is None:
            return None
        return self.node.children[self.best][0]


@dataclass(frozen=True, eq=False)
class SolutionTree:
    """Fold-back result: every node's value plus the argmax at every choice node."""

    root: SolvedNode

    @property
    def value(self) -> float:
        return self.root.value

    def walk(self) -> Iterator[SolvedNode]:
        stack = [self.root]
        while stack:
            s = stack.pop()
            yield s
            stack.extend(reversed(s.children))

    def retained(self) -> Iterator[SolvedNode]:
        """Nodes of the solution tree proper: one child kept per choice node."""
        stack = [self.root]
        while stack:
            s = stack.pop()
            yield s
            if s.best is not None:
                stack.append(s.children[s.best])
            else:
                stack.extend(reversed(s.children))


@dataclass(frozen=True)
class Policy:
    rules: tuple[DecisionRule, ...]
    value: float | None = None

    def rule(self, decision: str) -> DecisionRule:
        for r in self.rules:
            if r.decision == decision:
                return r
        raise KeyError(decision)

    def choice(self, decision: str, s: Mapping[str, str]) -> str:
        return self.rule(decision).choice(s)


def foldback(tree: DecisionTree) -> tuple[float, SolutionTree]:
    """Average out at chance nodes, maximize at choice nodes.

    Ties go to the earliest child, i.e. the first alternative in frame order.
    """

    def solve_node(node: TreeNode) -> SolvedNode:
        solved = tuple(solve_node(child) for _, child in node.children)
        if node.kind == CHANCE_NODE:
            value = 0.0
            for (p, _), s in zip(node.children, solved):
                value += p * s.value
            return SolvedNode(node, value, None, solved)
        if node.kind == CHOICE_NODE:
            best = 0
            for k in range(1, len(solved)):
                if solved[k].value > solved[best].value:
                    best = k
            return SolvedNode(node, solved[best].value, best, solved)
        return SolvedNode(node, node.value, None, ())

    root = solve_node(tree.root)
    return root.value, SolutionTree(root)


def extract_policy(diagram: InfluenceDiagram, solution: SolutionTree) -> Policy:
    """Read one decision rule per decision off the solved tree.

    Information states that never appear in the tree are filled with the
    first legitimate alternative and marked unreachable.
    """
    chosen: dict[str, dict[State, str]] = {d: {} for d in diagram.decision_order}
    for s in solution.walk():
        if s.node.kind == CHOICE_NODE:
            table = chosen[s.node.decision]
            if s.node.state in table:
                raise DiagramError(f"information state {s.node.state} appears twice in the tree")
            table[s.node.state] = s.choice
    rules = []
    for d in diagram.decision_order:
        mapping = []
        for state in information_states(diagram, d):
            if state in chosen[d]:
                mapping.append((state, chosen[d][state], True))
            else:
                mapping.append((state, effective_frame(diagram, d, state)[0], False))
        rules.append(DecisionRule(d, tuple(mapping)))
    return Policy(tuple(rules), solution.value)


def evaluate_policy(diagram: InfluenceDiagram, policy: Policy | Mapping[str, Mapping[State, str]]) -> float:
    """Expected value of a policy by enumerating the whole joint space.

    Each configuration of the chance and decision variables is weighted by
    the product of its CPT entries and of the policy's 0/1 decision
    indicators. This deliberately bypasses the inference and tree modules.
    """
    order = diagram.decision_order
    if isinstance(policy, Policy):
        lookup = {r.decision: dict((s, a) for s, a, _ in r.mapping) for r in policy.rules}
    else:
        lookup = {d: {State(s): a for s, a in rule.items()} for d, rule in policy.items()}
    for d in order:
        if d not in lookup:
            raise IncompletePolicyError(f"no rule for decision {d}")
        frame = diagram.frame(d)
        for s in information_states(diagram, d):
            if s not in lookup[d]:
                raise IncompletePolicyError(f"decision {d} has no choice for {s}")
            if lookup[d][s] not in frame:
                raise IncompletePolicyError(f"decision {d}: {lookup[d][s]} is not in the frame")

    names = [v.name for v in diagram.variables if v.kind != "value"]
    frames = [diagram.frame(n) for n in names]
    chance = diagram.chance_nodes
    values = diagram.value_nodes
    parents = {n: diagram.parents(n) for n in order}
    total = 0.0
    for combo in itertools.product(*frames):
        config = dict(zip(names, combo))
        weight = 1.0
        for d in order:
            info = State((p, config[p]) for p in parents[d])
            if lookup[d][info] != config[d]:
                weight = 0.0
                break
        if weight == 0.0:
            continue
        for c in chance:
            weight *= diagram.probability(c, config)
        if weight == 0.0:
            continue
        utility = 0.0
        for v in values:
            utility += diagram.value(v, config)
        total += weight * utility
    return total


@dataclass(frozen=True, eq=False)
class Solution:
    policy: Policy
    tree: DecisionTree
    solution_tree: SolutionTree

    @property
    def value(self) -> float:
        return self.policy.value

    @property
    def stats(self) -> TreeStats:
        return self.tree.stats


def solve(
    diagram: InfluenceDiagram,
    *,
    prune: bool = True,
    use_framing: bool = True,
    prune_epsilon: float = 0.0,
) -> Solution:
    """Build the decision tree, fold it back and extract the optimal policy."""
    tree = build_tree(diagram, prune=prune, use_framing=use_framing, prune_epsilon=prune_epsilon)
    _, solved = foldback(tree)
    framed = diagram if use_framing else diagram.without_framing()
    policy = extract_policy(framed, solved)
    return Solution(policy, tree, solved)


# -- policy text format ------------------------------------------------------
#
#   value <repr of the optimal value>        (optional)
#   decision T2
#   T1=nt, R1=nr  ->  nt
#   T1=nt, R1=zero  ->  nt  [unreachable]


def format_policy(policy: Policy) -> str:
    lines = []
    if policy.value is not None:
        lines.append(f"value {policy.value!r}")
    for rule in policy.rules:
        lines.append(f"decision {rule.decision}")
        for state, choice, reachable in rule.mapping:
            pattern = ", ".join(f"{k}={v}" for k, v in state.items())
            line = f"{pattern}  ->  {choice}" if pattern else f"->  {choice}"
            if not reachable:
                line += "  [unreachable]"
            lines.append(line)
    return "\n".join(lines) + "\n"


def parse_policy(text: str, diagram: InfluenceDiagram | None = None) -> Policy:
    """Inverse of :func:`format_policy`; checks names against ``diagram`` if given."""
    value = None
    rules: list[DecisionRule] = []
    current: str | None = None
    mapping: list[tuple[State, str, bool]] = []

    def flush():
        if current is not None:
            rules.append(DecisionRule(current, tuple(mapping)))

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        if head == "value" and current is None and not rules:
            value = float(rest)
            continue
        if head == "decision":
            flush()
            current, mapping = rest.strip(), []
            if diagram is not None and current not in diagram.decision_order:
                raise ValueError(f"line {lineno}: unknown decision {current}")
            continue
        if current is None or "->" not in line:
            raise ValueError(f"line {lineno}: expected 'decision <name>' or '<state> -> <choice>'")
        lhs, rhs = line.split("->", 1)
        reachable = True
        rhs = rhs.strip()
        if rhs.endswith("[unreachable]"):
            reachable = False
            rhs = rhs[: -len("[unreachable]")].strip()
        pairs = []
        for part in filter(None, (p.strip() for p in lhs.split(","))):
            name, sep, outcome = part.partition("=")
            if not sep:
                raise ValueError(f"line {lineno}: malformed assignment {part!r}")
            pairs.append((name.strip(), outcome.strip()))
        if diagram is not None:
            for name, outcome in pairs:
                if name not in diagram.parents(current) or outcome not in diagram.frame(name):
                    raise ValueError(f"line {lineno}: {name}={outcome} is not part of an information state of {current}")
            if rhs not in diagram.frame(current):
                raise ValueError(f"line {lineno}: {rhs} is not an alternative of {current}")
        mapping.append((State(pairs), rhs, reachable))
    flush()
    return Policy(tuple(rules), value)
