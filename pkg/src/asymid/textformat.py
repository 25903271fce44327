"""Line-oriented text format for influence diagrams (``.id`` files).

::

    diagram used-car
    chance CC : peach lemon
    decision T1 : nt st f&e tr
    value V
    parents R1 : T1 CC
    order : T1 T2 B
    cpt R1
      T1=nt -> nr=1.0
      T1=st, CC=peach -> zero=0.9 one=0.1
    end
    valuetable V
      T1=nt, B=b, CC=peach -> 60
    end
    framing T2
      T1=tr -> { nt diff }
      * -> { nt }
    end

``#`` starts a comment. Rows are matched first to last; a parent missing from
a pattern, or given as ``*``, is a wildcard. Parsed patterns list their
variables in declaration order. Outcomes omitted from a CPT row
have probability 0.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .model import (
    CHANCE,
    DECISION,
    VALUE,
    Cpt,
    CptRow,
    FramingFunction,
    FramingRow,
    InfluenceDiagram,
    ValueRow,
    ValueTable,
    Variable,
    WILDCARD,
)

_RESERVED = set("=,:{}#")


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.line = line
        self.column = column


@dataclass
class DiagramDocument:
    """A parsed ``.id`` file: the diagram plus where each block was declared."""

    diagram: InfluenceDiagram
    locations: dict[str, int] = field(default_factory=dict, compare=False)


def _is_identifier(token: str) -> bool:
    return bool(token) and token != "->" and not (set(token) & _RESERVED) and not token.isspace()


class _Parser:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.name: str | None = None
        self.variables: list[Variable] = []
        self.by_name: dict[str, Variable] = {}
        self.parents: dict[str, list[str]] = {}
        self.order: list[str] | None = None
        self.cpt_rows: dict[str, list[tuple[int, str]]] = {}
        self.value_rows: dict[str, list[tuple[int, str]]] = {}
        self.framing_rows: dict[str, list[tuple[int, str]]] = {}
        self.locations: dict[str, int] = {}

    def fail(self, message: str, lineno: int, token: str | None = None):
        column = 1
        if token is not None and 0 < lineno <= len(self.lines):
            pos = self.lines[lineno - 1].find(token)
            column = pos + 1 if pos >= 0 else 1
        raise ParseError(message, lineno, column)

    def run(self) -> DiagramDocument:
        i = 0
        while i < len(self.lines):
            lineno = i + 1
            line = self._strip(self.lines[i])
            i += 1
            if not line:
                continue
            keyword, _, rest = line.partition(" ")
            rest = rest.strip()
            if self.name is None and keyword != "diagram":
                self.fail("missing diagram declaration", lineno)
            if keyword == "diagram":
                if self.name is not None:
                    self.fail("duplicate diagram declaration", lineno)
                if not _is_identifier(rest) or " " in rest:
                    self.fail("expected 'diagram <name>'", lineno)
                self.name = rest
            elif keyword in (CHANCE, DECISION):
                self._declare(keyword, rest, lineno)
            elif keyword == VALUE:
                if not _is_identifier(rest) or " " in rest:
                    self.fail("expected 'value <name>'", lineno)
                self._add_variable(Variable(rest, VALUE), lineno)
            elif keyword == "parents":
                self._parents(rest, lineno)
            elif keyword == "order" or line.startswith("order:"):
                self._order(line, lineno)
            elif keyword in ("cpt", "valuetable", "framing"):
                i = self._block(keyword, rest, lineno, i)
            else:
                self.fail(f"unknown keyword {keyword!r}", lineno, keyword)
        if self.name is None:
            self.fail("missing diagram declaration", 1)
        return self._build()

    @staticmethod
    def _strip(raw: str) -> str:
        return raw.split("#", 1)[0].strip()

    def _add_variable(self, var: Variable, lineno: int):
        if var.name in self.by_name:
            self.fail(f"duplicate declaration of {var.name}", lineno, var.name)
        self.variables.append(var)
        self.by_name[var.name] = var
        self.locations[f"variable {var.name}"] = lineno

    def _declare(self, kind: str, rest: str, lineno: int):
        name, sep, frame_text = rest.partition(":")
        name = name.strip()
        if not sep or not _is_identifier(name) or " " in name:
            self.fail(f"expected '{kind} <name> : <outcome> ...'", lineno)
        frame = frame_text.split()
        if not frame:
            self.fail(f"{name} has an empty frame", lineno)
        for o in frame:
            if not _is_identifier(o):
                self.fail(f"bad outcome label {o!r}", lineno, o)
        if len(set(frame)) != len(frame):
            self.fail(f"duplicate outcome label in the frame of {name}", lineno)
        self._add_variable(Variable(name, kind, tuple(frame)), lineno)

    def _known(self, name: str, lineno: int) -> Variable:
        var = self.by_name.get(name)
        if var is None:
            self.fail(f"unknown identifier {name!r}", lineno, name)
        return var

    def _parents(self, rest: str, lineno: int):
        node, sep, names = rest.partition(":")
        node = node.strip()
        if not sep:
            self.fail("expected 'parents <node> : <parent> ...'", lineno)
        self._known(node, lineno)
        if node in self.parents:
            self.fail(f"duplicate parents declaration for {node}", lineno, node)
        ps = names.split()
        for p in ps:
            self._known(p, lineno)
        if len(set(ps)) != len(ps):
            self.fail(f"repeated parent in parents of {node}", lineno)
        self.parents[node] = ps
        self.locations[f"parents {node}"] = lineno

    def _order(self, line: str, lineno: int):
        _, sep, names = line.partition(":")
        if not sep:
            self.fail("expected 'order : <decision> ...'", lineno)
        if self.order is not None:
            self.fail("duplicate order declaration", lineno)
        ds = names.split()
        for d in ds:
            if self._known(d, lineno).kind != DECISION:
                self.fail(f"{d} is not a decision", lineno, d)
        self.order = ds
        self.locations["order"] = lineno

    def _block(self, keyword: str, rest: str, lineno: int, i: int) -> int:
        name = rest.strip()
        var = self._known(name, lineno)
        expected = {"cpt": CHANCE, "valuetable": VALUE, "framing": DECISION}[keyword]
        if var.kind != expected:
            self.fail(f"{keyword} block for {name}, which is not a {expected} node", lineno, name)
        store = {"cpt": self.cpt_rows, "valuetable": self.value_rows, "framing": self.framing_rows}[keyword]
        if name in store:
            self.fail(f"duplicate {keyword} block for {name}", lineno, name)
        rows = []
        while True:
            if i >= len(self.lines):
                self.fail(f"{keyword} block for {name} is not closed with 'end'", lineno)
            text = self._strip(self.lines[i])
            i += 1
            if text == "end":
                break
            if text:
                rows.append((i, text))
        store[name] = rows
        self.locations[f"{keyword} {name}"] = lineno
        return i

    def _pattern(self, text: str, node: str, lineno: int) -> tuple[tuple[str, str], ...]:
        parents = self.parents.get(node, [])
        text = text.strip()
        if text in ("", WILDCARD):
            return ()
        pairs = {}
        for part in text.split(","):
            name, sep, outcome = (s.strip() for s in part.partition("="))
            if not sep or not name or not outcome:
                self.fail(f"expected '<parent>=<outcome>' but found {part.strip()!r}", lineno)
            var = self._known(name, lineno)
            if name not in parents:
                self.fail(f"{name} is not a parent of {node}", lineno, name)
            if name in pairs:
                self.fail(f"{name} appears twice in the pattern", lineno, name)
            if outcome != WILDCARD:
                if outcome not in var.frame:
                    self.fail(f"unknown identifier {outcome!r}: not an outcome of {name}", lineno, outcome)
                pairs[name] = outcome
        return tuple((v.name, pairs[v.name]) for v in self.variables if v.name in pairs)

    def _split_row(self, text: str, lineno: int) -> tuple[str, str]:
        if "->" not in text:
            self.fail("expected '<pattern> -> <entry>'", lineno)
        lhs, rhs = text.split("->", 1)
        return lhs, rhs.strip()

    def _cpt(self, node: str) -> Cpt:
        frame = self.by_name[node].frame
        rows = []
        for lineno, text in self.cpt_rows[node]:
            lhs, rhs = self._split_row(text, lineno)
            pattern = self._pattern(lhs, node, lineno)
            probs = [0.0] * len(frame)
            given = set()
            for item in rhs.split():
                outcome, sep, num = item.partition("=")
                if not sep:
                    self.fail(f"expected '<outcome>=<probability>' but found {item!r}", lineno, item)
                if outcome not in frame:
                    self.fail(f"unknown identifier {outcome!r}: not an outcome of {node}", lineno, outcome)
                if outcome in given:
                    self.fail(f"{outcome} given twice", lineno, outcome)
                given.add(outcome)
                probs[frame.index(outcome)] = self._number(num, lineno)
            rows.append(CptRow(pattern, tuple(probs)))
        parents = tuple(self.parents.get(node, []))
        return Cpt(node, parents, tuple(rows), line=self.locations[f"cpt {node}"])

    def _number(self, text: str, lineno: int) -> float:
        try:
            return float(text)
        except ValueError:
            self.fail(f"bad number {text!r}", lineno, text)

    def _valuetable(self, node: str) -> ValueTable:
        rows = []
        for lineno, text in self.value_rows[node]:
            lhs, rhs = self._split_row(text, lineno)
            rows.append(ValueRow(self._pattern(lhs, node, lineno), self._number(rhs, lineno)))
        parents = tuple(self.parents.get(node, []))
        return ValueTable(node, parents, tuple(rows), line=self.locations[f"valuetable {node}"])

    def _framing(self, node: str) -> FramingFunction:
        frame = self.by_name[node].frame
        rows = []
        entries = self.framing_rows[node]
        for lineno, text in entries:
            lhs, rhs = self._split_row(text, lineno)
            m = re.fullmatch(r"\{(.*)\}", rhs)
            if not m:
                self.fail("expected '{ <alternative> ... }'", lineno)
            alts = m.group(1).split()
            if not alts:
                self.fail("empty set of alternatives", lineno)
            for a in alts:
                if a not in frame:
                    self.fail(f"unknown identifier {a!r}: not an alternative of {node}", lineno, a)
            chosen = set(alts)
            rows.append(FramingRow(self._pattern(lhs, node, lineno), tuple(a for a in frame if a in chosen)))
        if not rows or rows[-1].pattern:
            line = entries[-1][0] if entries else self.locations[f"framing {node}"]
            self.fail(f"framing {node} must end with a default row '* -> {{ ... }}'", line)
        return FramingFunction(node, tuple(rows), line=self.locations[f"framing {node}"])

    def _build(self) -> DiagramDocument:
        arcs = frozenset((p, c) for c, ps in self.parents.items() for p in ps)
        cpts = {n: self._cpt(n) for n in self.cpt_rows}
        tables = {n: self._valuetable(n) for n in self.value_rows}
        framings = {n: self._framing(n) for n in self.framing_rows}
        order = self.order
        if order is None:
            order = [v.name for v in self.variables if v.kind == DECISION]
        diagram = InfluenceDiagram(
            name=self.name,
            variables=tuple(self.variables),
            arcs=arcs,
            cpts=cpts,
            valuetables=tables,
            framings=framings,
            decision_order=tuple(order),
        )
        return DiagramDocument(diagram, self.locations)


def parse(text: str) -> DiagramDocument:
    """Parse ``.id`` text; raises :class:`ParseError` at the first problem."""
    return _Parser(text).run()


def _format_pattern(pattern) -> str:
    return ", ".join(f"{n}={o}" for n, o in pattern) if pattern else WILDCARD


def serialize(diagram: InfluenceDiagram) -> str:
    """Canonical text for a diagram; ``parse(serialize(d)).diagram == d``."""
    out = [f"diagram {diagram.name}"]
    for v in diagram.variables:
        if v.kind == VALUE:
            out.append(f"value {v.name}")
        else:
            out.append(f"{v.kind} {v.name} : {' '.join(v.frame)}")
    out.append("")
    for v in diagram.variables:
        # CPT/value table parent order wins; it fixes how patterns are written
        if v.name in diagram.cpts:
            ps = diagram.cpts[v.name].parents
        elif v.name in diagram.valuetables:
            ps = diagram.valuetables[v.name].parents
        else:
            ps = diagram.parents(v.name)
        if ps:
            out.append(f"parents {v.name} : {' '.join(ps)}")
    out.append(f"order : {' '.join(diagram.decision_order)}")
    for v in diagram.variables:
        cpt = diagram.cpts.get(v.name)
        if cpt is None:
            continue
        out.append("")
        out.append(f"cpt {v.name}")
        for row in cpt.rows:
            dist = " ".join(f"{o}={p!r}" for o, p in zip(v.frame, row.probs))
            out.append(f"  {_format_pattern(row.pattern)} -> {dist}")
        out.append("end")
    for v in diagram.variables:
        table = diagram.valuetables.get(v.name)
        if table is None:
            continue
        out.append("")
        out.append(f"valuetable {v.name}")
        for row in table.rows:
            out.append(f"  {_format_pattern(row.pattern)} -> {row.value!r}")
        out.append("end")
    for v in diagram.variables:
        framing = diagram.framings.get(v.name)
        if framing is None:
            continue
        out.append("")
        out.append(f"framing {v.name}")
        for row in framing.rows:
            out.append(f"  {_format_pattern(row.pattern)} -> {{ {' '.join(row.alternatives)} }}")
        out.append("end")
    return "\n".join(out) + "\n"
