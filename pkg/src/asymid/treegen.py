"""Decision-tree construction from an influence diagram.

The tree alternates chance and choice layers. A chance node holds the
history accumulated so far; its children are the information states of the
next decision that extend that history, weighted by their conditional
probability. A choice node branches over the legitimate alternatives of its
information state. Zero-probability information states are pruned as soon as
they are generated.
"""
from __future__ import annotations

import math
from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field

from . import inference
from .model import (
    EMPTY_STATE,
    InfluenceDiagram,
    State,
    effective_frame,
    enumerate_states,
)

CHANCE_NODE = "chance"
CHOICE_NODE = "choice"
LEAF_NODE = "leaf"


@dataclass(frozen=True, eq=False)
class TreeNode:
    kind: str
    state: State
    decision: str | None = None
    value: float | None = None
    # (probability, choice node) under chance nodes, (alternative, node) under choice nodes
    children: tuple[tuple[float | str, TreeNode], ...] = ()
    # information states dropped below a chance node, with their probability
    pruned: tuple[tuple[State, float], ...] = ()

    def walk(self) -> Iterator[TreeNode]:
        """Depth-first, children in construction order."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(child for _, child in reversed(node.children))


@dataclass(frozen=True)
class DecisionStats:
    reachable: int = 0
    singleton: int = 0
    pruned: int = 0

    @property
    def total(self) -> int:
        return self.reachable + self.pruned


@dataclass(frozen=True)
class TreeStats:
    decisions: Mapping[str, DecisionStats] = field(default_factory=dict)

    def __getitem__(self, decision: str) -> DecisionStats:
        return self.decisions[decision]

    def lines(self) -> list[str]:
        return [
            f"decision={d} reachable={s.reachable} singleton={s.singleton} pruned={s.pruned} total={s.total}"
            for d, s in self.decisions.items()
        ]


@dataclass(frozen=True, eq=False)
class DecisionTree:
    root: TreeNode
    stats: TreeStats
    decision_order: tuple[str, ...]
    variable_order: tuple[str, ...]
    approximate: bool = False

    def nodes(self) -> Iterator[TreeNode]:
        return self.root.walk()

    def node_count(self) -> int:
        return sum(1 for _ in self.nodes())

    def choice_nodes(self, decision: str | None = None) -> list[TreeNode]:
        return [
            n for n in self.nodes()
            if n.kind == CHOICE_NODE and (decision is None or n.decision == decision)
        ]


def leaf_value(diagram: InfluenceDiagram, history: Mapping[str, str]) -> float:
    """Expected total value given a complete history.

    Each value node is averaged over the posterior of its still-unobserved
    parents. A history of probability zero is worth 0.
    """
    total = 0.0
    for v in diagram.value_nodes:
        parents = diagram.parents(v)
        hidden = [p for p in parents if p not in history]
        posterior = inference.query(diagram, hidden, history)
        if posterior is None:
            return 0.0
        known = {p: history[p] for p in parents if p in history}
        expected = 0.0
        for assignment, prob in posterior.items():
            if prob == 0.0:
                continue
            config = dict(known)
            config.update(assignment)
            expected += prob * diagram.value(v, config)
        total += expected
    return total


def tree_stats(tree: DecisionTree) -> TreeStats:
    counts = {d: [0, 0, 0] for d in tree.decision_order}
    for node in tree.nodes():
        if node.kind == CHOICE_NODE:
            c = counts[node.decision]
            c[0] += 1
            if len(node.children) == 1:
                c[1] += 1
        elif node.kind == CHANCE_NODE and node.pruned:
            # pruned states all belong to the decision of this node's children
            decision = _layer_decision(tree, node)
            counts[decision][2] += len(node.pruned)
    return TreeStats({d: DecisionStats(*c) for d, c in counts.items()})


def _layer_decision(tree: DecisionTree, node: TreeNode) -> str:
    if node.children:
        return node.children[0][1].decision
    # every candidate pruned: the decision is the first one not yet in the history
    for d in tree.decision_order:
        if d not in node.state:
            return d
    raise ValueError("chance node below the last decision")


def build_tree(
    diagram: InfluenceDiagram,
    *,
    prune: bool = True,
    use_framing: bool = True,
    prune_epsilon: float = 0.0,
) -> DecisionTree:
    """Generate the decision tree of a validated, no-forgetting diagram.

    With ``prune`` an information state whose arc probability is at most
    ``prune_epsilon`` is dropped. A positive epsilon renormalizes the
    surviving siblings and marks the tree approximate. Without
    ``use_framing`` every choice node branches over the full frame.
    """
    if prune_epsilon < 0 or prune_epsilon >= 1:
        raise ValueError("prune_epsilon must lie in [0, 1)")
    if not use_framing:
        diagram = diagram.without_framing()
    order = diagram.decision_order
    approximate = False

    def chance(history: State, i: int) -> TreeNode:
        nonlocal approximate
        d = order[i]
        new_vars = [p for p in diagram.parents(d) if p not in history]
        posterior = inference.query(diagram, new_vars, history)
        candidates = enumerate_states(diagram, new_vars)
        if posterior is None:
            # unreachable history, only built when pruning is off
            probs = [1.0 / len(candidates)] * len(candidates)
        else:
            probs = posterior.table.ravel().tolist()
        kept, dropped = [], []
        for s, p in zip(candidates, probs):
            full = diagram.ordered_state(history.extend(s))
            if prune and p <= prune_epsilon:
                dropped.append((full, p))
            else:
                kept.append((p, full))
        if not kept:
            best = max(range(len(probs)), key=lambda k: (probs[k], -k))
            full = diagram.ordered_state(history.extend(candidates[best]))
            dropped = [(s, p) for s, p in dropped if s != full]
            kept = [(probs[best], full)]
        if dropped and prune_epsilon > 0:
            mass = math.fsum(p for p, _ in kept)
            if any(p > 0 for _, p in dropped):
                approximate = True
            kept = [(p / mass, s) for p, s in kept]
        children = tuple((p, choice(s, i)) for p, s in kept)
        return TreeNode(CHANCE_NODE, history, children=children, pruned=tuple(dropped))

    def choice(info: State, i: int) -> TreeNode:
        d = order[i]
        last = i == len(order) - 1
        children = []
        for a in effective_frame(diagram, d, info):
            history = diagram.ordered_state(info.extend({d: a}))
            if last:
                child = TreeNode(LEAF_NODE, history, value=leaf_value(diagram, history))
            else:
                child = chance(history, i + 1)
            children.append((a, child))
        return TreeNode(CHOICE_NODE, info, decision=d, children=tuple(children))

    if order:
        root = chance(EMPTY_STATE, 0)
    else:
        root = TreeNode(LEAF_NODE, EMPTY_STATE, value=leaf_value(diagram, EMPTY_STATE))
    variable_order = tuple(v.name for v in diagram.variables)
    tree = DecisionTree(root, TreeStats(), order, variable_order, approximate)
    return DecisionTree(root, tree_stats(tree), order, variable_order, approximate)


def _format_state(tree: DecisionTree, s: State) -> str:
    return ", ".join(f"{n}={s[n]}" for n in tree.variable_order if n in s)


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(tree: DecisionTree, show_pruned: bool = False) -> str:
    """Render the tree in Graphviz DOT.

    Choice nodes are boxes labelled with the decision and its information
    state, chance nodes ellipses, leaves plain text with the value to two
    decimals. Arcs carry probabilities (4 decimals) or alternatives.
    """
    lines = ["digraph decision_tree {", "  rankdir=LR;"]
    ids: dict[int, str] = {}
    counter = 0

    def new_id() -> str:
        nonlocal counter
        counter += 1
        return f"n{counter - 1}"

    for node in tree.nodes():
        nid = ids.setdefault(id(node), new_id())
        state = _format_state(tree, node.state)
        if node.kind == CHOICE_NODE:
            label = f"{node.decision}: {state}" if state else node.decision
            lines.append(f"  {nid} [shape=box, label={_quote(label)}];")
        elif node.kind == CHANCE_NODE:
            lines.append(f"  {nid} [shape=ellipse, label={_quote(state)}];")
        else:
            lines.append(f"  {nid} [shape=plaintext, label={_quote(f'{node.value:.2f}')}];")
        for label, child in node.children:
            cid = ids.setdefault(id(child), new_id())
            text = f"{label:.4f}" if isinstance(label, float) else label
            lines.append(f"  {nid} -> {cid} [label={_quote(text)}];")
        if show_pruned and node.kind == CHANCE_NODE:
            decision = _layer_decision(tree, node)
            for s, p in node.pruned:
                pid = new_id()
                label = f"{decision}: {_format_state(tree, s)}"
                lines.append(f"  {pid} [shape=box, style=filled, fillcolor=lightgray, label={_quote(label)}];")
                lines.append(f"  {nid} -> {pid} [style=dashed, label={_quote(f'{p:.4f}')}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
