"""Command line interface: ``asymid {validate,solve,tree,stats,eval} FILE``."""
from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

from .model import DEFAULT_CPT_SUM_TOL, InfluenceDiagram, has_errors, validate
from .solve import evaluate_policy, format_policy, parse_policy, solve
from .textformat import ParseError, parse
from .treegen import build_tree, to_dot

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_USAGE = 2


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INVALID):
        super().__init__(message)
        self.code = code


def bundled(name: str) -> Path | None:
    """Path of a diagram shipped in the package data directory, if any."""
    for candidate in (name, f"{name}.id"):
        path = resources.files("asymid") / "data" / candidate
        if path.is_file():
            return Path(str(path))
    return None


def resolve(name: str) -> Path:
    path = Path(name)
    if path.is_file():
        return path
    found = bundled(name)
    if found is None:
        raise CliError(f"{name}: no such file", EXIT_INVALID)
    return found


def load(name: str, *, renormalize: bool = True, tol: float = DEFAULT_CPT_SUM_TOL,
         quiet_warnings: bool = False) -> InfluenceDiagram:
    """Parse and validate a diagram file; warnings go to stderr."""
    path = resolve(name)
    try:
        doc = parse(path.read_text(encoding="utf-8"))
    except ParseError as exc:
        raise CliError(f"{path}:{exc.line}:{exc.column}: error: {exc.message}") from None
    diags = validate(doc.diagram, tol)
    if has_errors(diags):
        lines = [_format_diag(path, d) for d in diags]
        raise CliError("\n".join(lines))
    if not quiet_warnings:
        for d in diags:
            print(_format_diag(path, d), file=sys.stderr)
    if renormalize:
        if diags and not quiet_warnings:
            print(f"{path}: note: CPT rows renormalized to sum to 1", file=sys.stderr)
        return doc.diagram.renormalized()
    return doc.diagram


def _format_diag(path, d) -> str:
    where = f"{path}:{d.line}" if d.line else str(path)
    return f"{where}: {d}"


def _tree_options(args) -> dict:
    return {"prune": not args.no_prune, "use_framing": not args.no_framing, "prune_epsilon": args.epsilon}


def cmd_validate(args) -> int:
    path = resolve(args.file)
    try:
        doc = parse(path.read_text(encoding="utf-8"))
    except ParseError as exc:
        print(f"{path}:{exc.line}:{exc.column}: error: {exc.message}", file=sys.stderr)
        return EXIT_INVALID
    diags = validate(doc.diagram, args.cpt_sum_tol)
    for d in diags:
        print(_format_diag(path, d))
    if has_errors(diags):
        return EXIT_INVALID
    if not diags:
        print(f"{path}: ok")
    return EXIT_OK


def _solution_json(diagram, result, options) -> str:
    payload = {
        "diagram": diagram.name,
        "options": options,
        "value": result.value,
        "approximate": result.tree.approximate,
        "stats": {
            d: {"reachable": s.reachable, "singleton": s.singleton, "pruned": s.pruned, "total": s.total}
            for d, s in result.stats.decisions.items()
        },
        "policy": [
            {
                "decision": rule.decision,
                "rules": [
                    {"state": dict(state), "choice": choice, "reachable": reachable}
                    for state, choice, reachable in rule.mapping
                ],
            }
            for rule in result.policy.rules
        ],
    }
    return json.dumps(payload, sort_keys=True, indent=2)


def cmd_solve(args) -> int:
    diagram = load(args.file, renormalize=not args.no_renormalize, quiet_warnings=args.json)
    options = _tree_options(args)
    result = solve(diagram, **options)
    if args.policy_out:
        Path(args.policy_out).write_text(format_policy(result.policy), encoding="utf-8")
    if args.json:
        print(_solution_json(diagram, result, options))
        return EXIT_OK
    print(f"optimal value: {result.value:.9f}")
    if result.tree.approximate:
        print("note: approximate (positive pruning epsilon dropped probability mass)")
    for line in result.stats.lines():
        print(line)
    print()
    print(format_policy(result.policy), end="")
    return EXIT_OK


def cmd_tree(args) -> int:
    diagram = load(args.file, renormalize=not args.no_renormalize)
    tree = build_tree(diagram, **_tree_options(args))
    sys.stdout.write(to_dot(tree, show_pruned=args.show_pruned))
    return EXIT_OK


def cmd_stats(args) -> int:
    diagram = load(args.file, renormalize=not args.no_renormalize, quiet_warnings=True)
    tree = build_tree(diagram, **_tree_options(args))
    for line in tree.stats.lines():
        print(line)
    return EXIT_OK


def cmd_eval(args) -> int:
    diagram = load(args.file, renormalize=not args.no_renormalize, quiet_warnings=True)
    try:
        policy = parse_policy(Path(args.policy).read_text(encoding="utf-8"), diagram)
    except OSError as exc:
        raise CliError(f"{args.policy}: {exc.strerror}") from None
    except ValueError as exc:
        raise CliError(f"{args.policy}: {exc}") from None
    try:
        value = evaluate_policy(diagram, policy)
    except ValueError as exc:
        raise CliError(f"{args.policy}: {exc}") from None
    print(f"expected value: {value:.9f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="asymid",
        description="Solve asymmetric decision problems given as influence diagrams with framing functions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def toggles(p, tree=True):
        p.add_argument("file", help="diagram file (.id), or the name of a bundled example")
        p.add_argument("--no-renormalize", action="store_true",
                       help="use CPT rows as written instead of rescaling them to sum to 1")
        if tree:
            p.add_argument("--no-prune", action="store_true", help="keep zero-probability information states")
            p.add_argument("--no-framing", action="store_true", help="ignore framing functions")
            p.add_argument("--epsilon", type=float, default=0.0,
                           help="prune information states with probability <= EPSILON (default 0)")

    p = sub.add_parser("validate", help="check a diagram and print diagnostics")
    p.add_argument("file")
    p.add_argument("--cpt-sum-tol", type=float, default=DEFAULT_CPT_SUM_TOL)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="compute the optimal policy and expected value")
    toggles(p)
    p.add_argument("--policy-out", metavar="FILE", help="write the policy to FILE")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("tree", help="print the generated decision tree")
    toggles(p)
    p.add_argument("--format", choices=["dot"], default="dot")
    p.add_argument("--show-pruned", action="store_true", help="draw pruned information states greyed out")
    p.set_defaults(func=cmd_tree)

    p = sub.add_parser("stats", help="per-decision information state counts")
    toggles(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("eval", help="expected value of a policy file by direct enumeration")
    toggles(p, tree=False)
    p.add_argument("--policy", required=True, metavar="FILE")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "epsilon", 0.0) and not 0.0 <= args.epsilon < 1.0:
        parser.error("--epsilon must lie in [0, 1)")
    try:
        return args.func(args)
    except CliError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
