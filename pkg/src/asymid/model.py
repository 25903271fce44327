"""Influence diagrams extended with framing functions.

A diagram holds chance, decision and value variables, the arcs between them,
one conditional probability table per chance node, one value table per value
node and an optional framing function per decision node. Tables are stored as
ordered rows with wildcard patterns; the first row whose pattern matches a
parent configuration applies.
"""
from __future__ import annotations

import itertools
import math
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field, replace
from functools import cached_property

CHANCE = "chance"
DECISION = "decision"
VALUE = "value"
KINDS = (CHANCE, DECISION, VALUE)

WILDCARD = "*"

DEFAULT_CPT_SUM_TOL = 0.02
EXACT_SUM_TOL = 1e-9


class DiagramError(ValueError):
    """Raised when a diagram lookup cannot be answered (unmatched row, bad name)."""


class State(Mapping):
    """Immutable partial assignment of outcomes to variables.

    Iteration follows insertion order, which callers keep equal to the
    declaration order of the diagram so that printed states are stable.
    """

    __slots__ = ("_items", "_hash")

    def __init__(self, assignments: Mapping[str, str] | Iterable[tuple[str, str]] = ()):
        items = dict(assignments)
        self._items = items
        self._hash = None

    def __getitem__(self, name: str) -> str:
        return self._items[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._items.items()))
        return self._hash

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Mapping):
            return self._items == dict(other)
        return NotImplemented

    def __repr__(self) -> str:
        return "{" + ", ".join(f"{k}={v}" for k, v in self._items.items()) + "}"

    def extend(self, other: Mapping[str, str]) -> State:
        """Union of two consistent states; raises on conflicting outcomes."""
        items = dict(self._items)
        for name, outcome in other.items():
            if items.setdefault(name, outcome) != outcome:
                raise DiagramError(f"conflicting outcomes for {name}: {items[name]} vs {outcome}")
        return State(items)


EMPTY_STATE = State()


def consistent(s1: Mapping[str, str], s2: Mapping[str, str]) -> bool:
    """True iff the variables assigned in both states have equal outcomes."""
    if len(s1) > len(s2):
        s1, s2 = s2, s1
    return all(s2.get(name, outcome) == outcome for name, outcome in s1.items())


def project(s: Mapping[str, str], names: Iterable[str]) -> State:
    keep = set(names)
    return State((k, v) for k, v in s.items() if k in keep)


def matches(pattern: tuple[tuple[str, str], ...], s: Mapping[str, str]) -> bool:
    return all(s[name] == outcome for name, outcome in pattern)


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str
    frame: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DiagramError(f"variable {self.name}: unknown kind {self.kind!r}")
        object.__setattr__(self, "frame", tuple(self.frame))


# Row patterns are tuples of (parent, outcome) pairs; a parent left out of the
# pattern is a wildcard.


@dataclass(frozen=True)
class CptRow:
    pattern: tuple[tuple[str, str], ...]
    probs: tuple[float, ...]  # aligned with the child's frame


@dataclass(frozen=True)
class Cpt:
    child: str
    parents: tuple[str, ...]
    rows: tuple[CptRow, ...]
    line: int | None = field(default=None, compare=False)


@dataclass(frozen=True)
class ValueRow:
    pattern: tuple[tuple[str, str], ...]
    value: float


@dataclass(frozen=True)
class ValueTable:
    node: str
    parents: tuple[str, ...]
    rows: tuple[ValueRow, ...]
    line: int | None = field(default=None, compare=False)


@dataclass(frozen=True)
class FramingRow:
    pattern: tuple[tuple[str, str], ...]
    alternatives: tuple[str, ...]  # in frame order


@dataclass(frozen=True)
class FramingFunction:
    decision: str
    rows: tuple[FramingRow, ...]
    line: int | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" or "warning"
    location: str
    message: str
    line: int | None = None

    def __str__(self) -> str:
        return f"{self.severity}: {self.location}: {self.message}"


@dataclass(frozen=True)
class DecisionRule:
    """Decision function for one decision: information state -> alternative."""

    decision: str
    mapping: tuple[tuple[State, str, bool], ...]  # (state, choice, reachable)

    @cached_property
    def _lookup(self) -> dict[State, str]:
        return {s: a for s, a, _ in self.mapping}

    def choice(self, s: Mapping[str, str]) -> str:
        return self._lookup[State(s)]

    def reachable_states(self) -> list[State]:
        return [s for s, _, r in self.mapping if r]


@dataclass(frozen=True)
class InfluenceDiagram:
    name: str
    variables: tuple[Variable, ...]
    arcs: frozenset[tuple[str, str]]
    cpts: Mapping[str, Cpt]
    valuetables: Mapping[str, ValueTable]
    framings: Mapping[str, FramingFunction]
    decision_order: tuple[str, ...]

    __hash__ = None  # mapping fields

    @cached_property
    def _by_name(self) -> dict[str, Variable]:
        return {v.name: v for v in self.variables}

    @cached_property
    def _position(self) -> dict[str, int]:
        return {v.name: i for i, v in enumerate(self.variables)}

    @cached_property
    def _parents(self) -> dict[str, tuple[str, ...]]:
        found: dict[str, list[str]] = {v.name: [] for v in self.variables}
        for parent, child in self.arcs:
            if child in found:
                found[child].append(parent)
        pos = self._position
        return {k: tuple(sorted(ps, key=lambda p: pos.get(p, len(pos)))) for k, ps in found.items()}

    def variable(self, name: str) -> Variable:
        try:
            return self._by_name[name]
        except KeyError:
            raise DiagramError(f"unknown variable {name!r}") from None

    def frame(self, name: str) -> tuple[str, ...]:
        return self.variable(name).frame

    def kind(self, name: str) -> str:
        return self.variable(name).kind

    def parents(self, name: str) -> tuple[str, ...]:
        """Graph parents in declaration order."""
        return self._parents[name]

    def sort_names(self, names: Iterable[str]) -> tuple[str, ...]:
        pos = self._position
        return tuple(sorted(set(names), key=lambda n: pos[n]))

    def ordered_state(self, s: Mapping[str, str]) -> State:
        return State((n, s[n]) for n in self.sort_names(s))

    @property
    def chance_nodes(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables if v.kind == CHANCE)

    @property
    def decision_nodes(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables if v.kind == DECISION)

    @property
    def value_nodes(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables if v.kind == VALUE)

    def ancestors(self, names: Iterable[str]) -> set[str]:
        """The given names plus all their ancestors."""
        seen = set()
        stack = list(names)
        while stack:
            n = stack.pop()
            if n in seen:
                continue
            seen.add(n)
            stack.extend(self.parents(n))
        return seen

    def distribution(self, child: str, config: Mapping[str, str]) -> tuple[float, ...]:
        """Distribution of ``child`` under a full configuration of its CPT parents."""
        cpt = self.cpts[child]
        for row in cpt.rows:
            if matches(row.pattern, config):
                return row.probs
        raise DiagramError(f"cpt {child}: no row matches {self.ordered_state(project(config, cpt.parents))}")

    def probability(self, child: str, config: Mapping[str, str]) -> float:
        """P(child = config[child] | parents as in config)."""
        probs = self.distribution(child, config)
        return probs[self._outcome_index[child][config[child]]]

    def value(self, node: str, config: Mapping[str, str]) -> float:
        table = self.valuetables[node]
        for row in table.rows:
            if matches(row.pattern, config):
                return row.value
        raise DiagramError(f"valuetable {node}: no row matches {self.ordered_state(project(config, table.parents))}")

    @cached_property
    def _outcome_index(self) -> dict[str, dict[str, int]]:
        return {v.name: {o: i for i, o in enumerate(v.frame)} for v in self.variables}

    def outcome_index(self, name: str, outcome: str) -> int:
        return self._outcome_index[name][outcome]

    def renormalized(self) -> InfluenceDiagram:
        """Copy with every CPT row rescaled to sum exactly 1."""
        cpts = {}
        for name, cpt in self.cpts.items():
            rows = []
            for row in cpt.rows:
                total = math.fsum(row.probs)
                if total > 0 and total != 1.0:
                    row = CptRow(row.pattern, tuple(p / total for p in row.probs))
                rows.append(row)
            cpts[name] = replace(cpt, rows=tuple(rows))
        return replace(self, cpts=cpts)

    def without_framing(self) -> InfluenceDiagram:
        """Copy in which every decision may choose from its full frame."""
        return replace(self, framings={})


def enumerate_states(diagram: InfluenceDiagram, names: Iterable[str]) -> list[State]:
    """All full assignments of ``names``, lexicographic in declaration and frame order."""
    ordered = diagram.sort_names(names)
    for n in ordered:
        if diagram.kind(n) == VALUE:
            raise DiagramError(f"{n} is a value node and has no frame")
    frames = [diagram.frame(n) for n in ordered]
    return [State(zip(ordered, combo)) for combo in itertools.product(*frames)]


def effective_frame(diagram: InfluenceDiagram, decision: str, s: Mapping[str, str]) -> tuple[str, ...]:
    """Legitimate alternatives of ``decision`` in information state ``s``."""
    frame = diagram.frame(decision)
    framing = diagram.framings.get(decision)
    if framing is None:
        return frame
    for row in framing.rows:
        if matches(row.pattern, s):
            allowed = set(row.alternatives)
            return tuple(a for a in frame if a in allowed)
    raise DiagramError(f"framing {decision}: no row matches {diagram.ordered_state(s)}")


def information_states(diagram: InfluenceDiagram, decision: str) -> list[State]:
    return enumerate_states(diagram, diagram.parents(decision))


def _find_cycle(diagram: InfluenceDiagram) -> list[str] | None:
    children: dict[str, list[str]] = {v.name: [] for v in diagram.variables}
    for p, c in sorted(diagram.arcs):
        if p in children and c in children:
            children[p].append(c)
    colour = dict.fromkeys(children, 0)
    path: list[str] = []

    def visit(n: str) -> list[str] | None:
        colour[n] = 1
        path.append(n)
        for c in children[n]:
            if colour[c] == 1:
                return path[path.index(c):] + [c]
            if colour[c] == 0:
                found = visit(c)
                if found:
                    return found
        path.pop()
        colour[n] = 2
        return None

    for v in diagram.variables:
        if colour[v.name] == 0:
            found = visit(v.name)
            if found:
                return found
    return None


def validate(diagram: InfluenceDiagram, cpt_sum_tol: float = DEFAULT_CPT_SUM_TOL) -> list[Diagnostic]:
    """Check every structural and numerical invariant of a diagram.

    Returns a list of diagnostics; the list is empty iff the diagram is sound.
    CPT rows whose sum is off by more than 1e-9 but at most ``cpt_sum_tol``
    are warnings, larger deviations are errors.
    """
    diags: list[Diagnostic] = []

    def error(loc, msg, line=None):
        diags.append(Diagnostic("error", loc, msg, line))

    def warn(loc, msg, line=None):
        diags.append(Diagnostic("warning", loc, msg, line))

    names = [v.name for v in diagram.variables]
    seen: set[str] = set()
    for v in diagram.variables:
        if v.name in seen:
            error(f"variable {v.name}", "declared more than once")
        seen.add(v.name)
        if len(set(v.frame)) != len(v.frame):
            error(f"variable {v.name}", "frame labels are not unique")
        if v.kind == VALUE and v.frame:
            error(f"variable {v.name}", "value nodes have no frame")
        if v.kind != VALUE and not v.frame:
            error(f"variable {v.name}", "empty frame")
    if len(seen) != len(names):
        return diags

    for p, c in sorted(diagram.arcs):
        for n in (p, c):
            if n not in seen:
                error(f"arc {p} -> {c}", f"unknown variable {n}")
        if p in seen and diagram.kind(p) == VALUE:
            error(f"arc {p} -> {c}", f"value node {p} has a child")
    if any(d.severity == "error" for d in diags):
        return diags

    cycle = _find_cycle(diagram)
    if cycle:
        error("graph", "cycle " + " -> ".join(cycle))

    # decision ordering, regularity and no-forgetting
    decisions = set(diagram.decision_nodes)
    order = diagram.decision_order
    if sorted(order) != sorted(decisions) or len(set(order)) != len(order):
        error("order", f"decision order {list(order)} is not a total order over {sorted(decisions)}")
    else:
        rank = {d: i for i, d in enumerate(order)}
        for d in order:
            for a in diagram.ancestors(diagram.parents(d)):
                if a in rank and rank[a] > rank[d]:
                    error(f"decision {d}", f"depends on later decision {a}")
        for prev, d in zip(order, order[1:]):
            required = set(diagram.parents(prev)) | {prev}
            missing = required - set(diagram.parents(d))
            if missing:
                error(f"decision {d}",
                      f"no-forgetting violated: parents lack {', '.join(diagram.sort_names(missing))}")

    for n in diagram.chance_nodes:
        cpt = diagram.cpts.get(n)
        if cpt is None:
            error(f"cpt {n}", "missing")
            continue
        _check_cpt(diagram, cpt, cpt_sum_tol, error, warn)
    for n in diagram.cpts:
        if n not in seen or diagram.kind(n) != CHANCE:
            error(f"cpt {n}", "not a chance node")

    for n in diagram.value_nodes:
        table = diagram.valuetables.get(n)
        if table is None:
            error(f"valuetable {n}", "missing")
            continue
        _check_valuetable(diagram, table, error)
    for n in diagram.valuetables:
        if n not in seen or diagram.kind(n) != VALUE:
            error(f"valuetable {n}", "not a value node")

    for n, framing in diagram.framings.items():
        if n not in seen or diagram.kind(n) != DECISION:
            error(f"framing {n}", "not a decision node")
            continue
        _check_framing(diagram, framing, error)
    return diags


def _check_pattern(diagram, loc, parents, pattern, error, line) -> bool:
    ok = True
    for name, outcome in pattern:
        if name not in parents:
            error(loc, f"pattern refers to {name}, which is not a parent", line)
            ok = False
        elif outcome not in diagram.frame(name):
            error(loc, f"outcome {outcome} is not in the frame of {name}", line)
            ok = False
    return ok


def _check_cpt(diagram, cpt, tol, error, warn):
    loc = f"cpt {cpt.child}"
    graph_parents = diagram.parents(cpt.child)
    if set(cpt.parents) != set(graph_parents):
        error(loc, f"parents {list(cpt.parents)} differ from graph parents {list(graph_parents)}", cpt.line)
        return
    frame = diagram.frame(cpt.child)
    used = set()
    for i, row in enumerate(cpt.rows):
        if not _check_pattern(diagram, f"{loc} row {i + 1}", cpt.parents, row.pattern, error, cpt.line):
            return
        if len(row.probs) != len(frame):
            error(f"{loc} row {i + 1}", f"expected {len(frame)} probabilities", cpt.line)
            return
    for config in enumerate_states(diagram, cpt.parents):
        for i, row in enumerate(cpt.rows):
            if matches(row.pattern, config):
                used.add(i)
                break
        else:
            error(loc, f"no row matches {config}", cpt.line)
            return
    for i in sorted(used):
        row = cpt.rows[i]
        rloc = f"{loc} row {i + 1}"
        if any(not 0.0 <= p <= 1.0 for p in row.probs):
            error(rloc, "probability outside [0, 1]", cpt.line)
            continue
        total = math.fsum(row.probs)
        dev = abs(total - 1.0)
        if dev > tol:
            error(rloc, f"probabilities sum to {total:.6g}", cpt.line)
        elif dev > EXACT_SUM_TOL:
            warn(rloc, f"probabilities sum to {total:.6g} (within tolerance {tol:g})", cpt.line)


def _check_valuetable(diagram, table, error):
    loc = f"valuetable {table.node}"
    graph_parents = diagram.parents(table.node)
    if set(table.parents) != set(graph_parents):
        error(loc, f"parents {list(table.parents)} differ from graph parents {list(graph_parents)}", table.line)
        return
    for p in table.parents:
        if diagram.kind(p) == VALUE:
            error(loc, f"parent {p} is a value node", table.line)
            return
    for i, row in enumerate(table.rows):
        if not _check_pattern(diagram, f"{loc} row {i + 1}", table.parents, row.pattern, error, table.line):
            return
        if not math.isfinite(row.value):
            error(f"{loc} row {i + 1}", "value is not finite", table.line)
    for config in enumerate_states(diagram, table.parents):
        if not any(matches(row.pattern, config) for row in table.rows):
            error(loc, f"no row matches {config}", table.line)
            return


def _check_framing(diagram, framing, error):
    d = framing.decision
    loc = f"framing {d}"
    parents = diagram.parents(d)
    frame = set(diagram.frame(d))
    for i, row in enumerate(framing.rows):
        rloc = f"{loc} row {i + 1}"
        if not _check_pattern(diagram, rloc, parents, row.pattern, error, framing.line):
            return
        if not row.alternatives:
            error(rloc, "empty set of alternatives", framing.line)
        bad = [a for a in row.alternatives if a not in frame]
        if bad:
            error(rloc, f"alternatives {bad} are not in the frame of {d}", framing.line)
    for s in information_states(diagram, d):
        if not any(matches(row.pattern, s) for row in framing.rows):
            error(loc, f"no row matches {s}", framing.line)
            return


def has_errors(diagnostics: Iterable[Diagnostic]) -> bool:
    return any(d.severity == "error" for d in diagnostics)
