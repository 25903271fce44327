"""Exact discrete inference over the chance part of an influence diagram.

Factors are dense numpy arrays with one axis per scope variable, laid out in
the enumeration order of :func:`asymid.model.enumerate_states` whenever the
scope is in declaration order. Queries run variable elimination with a greedy
min-degree ordering over the ancestral sub-network of the query.
"""
from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .model import DECISION, InfluenceDiagram, State, enumerate_states


class UnclampedDecisionError(ValueError):
    """A decision influences the query but has no value in the evidence."""


@dataclass(frozen=True, eq=False)
class Factor:
    scope: tuple[str, ...]
    frames: tuple[tuple[str, ...], ...]
    table: np.ndarray

    def __post_init__(self):
        shape = tuple(len(f) for f in self.frames)
        if len(self.scope) != len(self.frames) or self.table.shape != shape:
            raise ValueError(f"table shape {self.table.shape} does not match scope {self.scope}")

    @classmethod
    def unit(cls, value: float = 1.0) -> Factor:
        return cls((), (), np.array(float(value)))

    def frame_of(self, name: str) -> tuple[str, ...]:
        return self.frames[self.scope.index(name)]

    def __getitem__(self, assignment: Mapping[str, str]) -> float:
        idx = tuple(self.frames[i].index(assignment[n]) for i, n in enumerate(self.scope))
        return float(self.table[idx])

    def items(self) -> list[tuple[State, float]]:
        """(assignment, entry) pairs in C order of the table."""
        flat = self.table.ravel()
        combos = np.ndindex(*self.table.shape)
        return [
            (State((n, self.frames[i][k]) for i, (n, k) in enumerate(zip(self.scope, combo))), float(flat[j]))
            for j, combo in enumerate(combos)
        ]

    def total(self) -> float:
        return float(self.table.sum())

    def transpose(self, scope: Sequence[str]) -> Factor:
        scope = tuple(scope)
        if sorted(scope) != sorted(self.scope):
            raise ValueError(f"{scope} is not a permutation of {self.scope}")
        axes = [self.scope.index(n) for n in scope]
        return Factor(scope, tuple(self.frames[a] for a in axes), np.transpose(self.table, axes))

    def __mul__(self, other: Factor) -> Factor:
        return multiply(self, other)

    def __repr__(self) -> str:
        return f"Factor(scope={self.scope}, table={self.table.tolist()})"


def _broadcast(f: Factor, scope: tuple[str, ...]) -> np.ndarray:
    present = [n for n in scope if n in f.scope]
    table = f.transpose(present).table
    shape = [len(f.frame_of(n)) if n in f.scope else 1 for n in scope]
    return table.reshape(shape)


def multiply(f1: Factor, f2: Factor) -> Factor:
    scope = f1.scope + tuple(n for n in f2.scope if n not in f1.scope)
    frames = []
    for n in scope:
        fr = f1.frame_of(n) if n in f1.scope else f2.frame_of(n)
        if n in f1.scope and n in f2.scope and f2.frame_of(n) != fr:
            raise ValueError(f"frames of {n} disagree")
        frames.append(fr)
    table = _broadcast(f1, scope) * _broadcast(f2, scope)
    return Factor(scope, tuple(frames), np.array(table, dtype=float))


def marginalize(f: Factor, out: Iterable[str]) -> Factor:
    """Sum the variables in ``out`` out of ``f``."""
    out = set(out)
    missing = out - set(f.scope)
    if missing:
        raise ValueError(f"cannot marginalize {sorted(missing)}: not in scope {f.scope}")
    if not out:
        return f
    axes = tuple(i for i, n in enumerate(f.scope) if n in out)
    keep = [i for i, n in enumerate(f.scope) if n not in out]
    return Factor(
        tuple(f.scope[i] for i in keep),
        tuple(f.frames[i] for i in keep),
        np.array(f.table.sum(axis=axes), dtype=float),
    )


def reduce(f: Factor, evidence: Mapping[str, str]) -> Factor:
    """Slice ``f`` at the evidence; evidence variables leave the scope."""
    index = []
    keep = []
    for i, n in enumerate(f.scope):
        if n in evidence:
            index.append(f.frames[i].index(evidence[n]))
        else:
            index.append(slice(None))
            keep.append(i)
    if len(keep) == len(f.scope):
        return f
    return Factor(
        tuple(f.scope[i] for i in keep),
        tuple(f.frames[i] for i in keep),
        np.array(f.table[tuple(index)], dtype=float),
    )


def min_degree_order(factors: Sequence[Factor], keep: Iterable[str]) -> list[str]:
    """Greedy min-degree elimination order for every variable not kept.

    Ties go to the variable seen first across the factor scopes.
    """
    keep = set(keep)
    first_seen: list[str] = []
    neighbours: dict[str, set[str]] = {}
    for f in factors:
        for n in f.scope:
            if n not in neighbours:
                neighbours[n] = set()
                first_seen.append(n)
            neighbours[n].update(m for m in f.scope if m != n)
    rank = {n: i for i, n in enumerate(first_seen)}
    remaining = [n for n in first_seen if n not in keep]
    order = []
    while remaining:
        best = min(remaining, key=lambda n: (len(neighbours[n]), rank[n]))
        nbrs = neighbours.pop(best)
        for a in nbrs:
            neighbours[a].discard(best)
            neighbours[a].update(b for b in nbrs if b != a)
        remaining.remove(best)
        order.append(best)
    return order


def eliminate(factors: Sequence[Factor], keep: Iterable[str], order_hint: Sequence[str] | None = None) -> Factor:
    """Multiply ``factors`` and sum out every variable outside ``keep``.

    The result's scope lists the kept variables in order of first appearance
    across the input scopes.
    """
    factors = list(factors)
    keep = set(keep)
    present = {n for f in factors for n in f.scope}
    if not keep <= present:
        raise ValueError(f"keep variables {sorted(keep - present)} appear in no factor")
    if order_hint is None:
        order = min_degree_order(factors, keep)
    else:
        order = [n for n in order_hint if n in present and n not in keep]
        missing = present - keep - set(order)
        if missing:
            raise ValueError(f"order hint misses {sorted(missing)}")
    for var in order:
        touching = [f for f in factors if var in f.scope]
        factors = [f for f in factors if var not in f.scope]
        product = touching[0]
        for f in touching[1:]:
            product = multiply(product, f)
        factors.append(marginalize(product, [var]))
    result = Factor.unit()
    for f in factors:
        result = multiply(result, f)
    return result


def factor_from_cpt(diagram: InfluenceDiagram, chance: str) -> Factor:
    """Factor over the CPT parents (declaration order) followed by the child."""
    cpt = diagram.cpts[chance]
    parents = diagram.sort_names(cpt.parents)
    frames = tuple(diagram.frame(p) for p in parents) + (diagram.frame(chance),)
    rows = [diagram.distribution(chance, config) for config in enumerate_states(diagram, parents)]
    table = np.array(rows, dtype=float).reshape(tuple(len(fr) for fr in frames))
    return Factor(parents + (chance,), frames, table)


def indicator(diagram: InfluenceDiagram, name: str, outcome: str) -> Factor:
    frame = diagram.frame(name)
    table = np.zeros(len(frame))
    table[frame.index(outcome)] = 1.0
    return Factor((name,), (frame,), table)


_cpt_factor_cache: dict[int, tuple[InfluenceDiagram, dict[str, Factor]]] = {}


def _cpt_factors(diagram: InfluenceDiagram) -> dict[str, Factor]:
    # keyed by identity; the diagram itself is kept alive in the entry so the id stays unique
    entry = _cpt_factor_cache.get(id(diagram))
    if entry is None or entry[0] is not diagram:
        if len(_cpt_factor_cache) > 64:
            _cpt_factor_cache.clear()
        entry = (diagram, {c: factor_from_cpt(diagram, c) for c in diagram.chance_nodes})
        _cpt_factor_cache[id(diagram)] = entry
    return entry[1]


def unnormalized(diagram: InfluenceDiagram, targets: Iterable[str], evidence: Mapping[str, str]) -> Factor:
    """P(targets, evidence) with decisions in the evidence held fixed.

    Only the ancestral sub-network of targets and evidence is touched; barren
    chance nodes sum to one and are dropped. The scope is in declaration order.
    """
    targets = diagram.sort_names(targets)
    relevant = diagram.ancestors(set(targets) | set(evidence))
    for n in diagram.sort_names(relevant):
        if diagram.kind(n) == DECISION and n not in evidence:
            raise UnclampedDecisionError(f"decision {n} is relevant to the query but not in the evidence")
    cpt_factors = _cpt_factors(diagram)
    reduce_by = {n: o for n, o in evidence.items() if n not in targets}
    factors = [reduce(cpt_factors[n], reduce_by) for n in diagram.chance_nodes if n in relevant]
    for n in targets:
        if n in evidence:
            factors.append(indicator(diagram, n, evidence[n]))
    result = eliminate(factors, targets)
    return result.transpose(targets)


def query(diagram: InfluenceDiagram, targets: Iterable[str], evidence: Mapping[str, str] = State()) -> Factor | None:
    """Posterior P(targets | evidence) as a normalized factor.

    Returns ``None`` when the evidence has probability zero; callers treat
    that as an impossible state.
    """
    joint = unnormalized(diagram, targets, evidence)
    z = joint.total()
    if z <= 0.0:
        return None
    return Factor(joint.scope, joint.frames, joint.table / z)


def probability(diagram: InfluenceDiagram, evidence: Mapping[str, str]) -> float:
    """P(evidence) with decisions in the evidence held fixed."""
    return unnormalized(diagram, (), evidence).total()
