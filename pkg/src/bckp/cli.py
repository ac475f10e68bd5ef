"""Command-line front end: ``bckp <command> [options]``.

Results go to stdout as ``tag = value`` records (or one JSON object);
diagnostics go to stderr.  Exit status: 0 success, 1 domain error,
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from . import hierarchy as hz
from . import recursion as rc
from .errors import CalcError
from .golden import FixtureSet, report, verify
from .pdo import apply_to_poly
from .textio import format_value, latex_value, value_to_json

KIND_COMMANDS = ("elim", "flow", "reduce", "reduced-flow", "recursion", "apply-recursion", "scale")


class UsageError(Exception):
    pass


def _rational(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bckp", description="Exact BKP/CKP flow and recursion-operator calculus.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, *, kind=True, fmt=True):
        p = sub.add_parser(name, help=help_text)
        if kind:
            p.add_argument("--kind", choices=["bkp", "ckp", "kp"], required=True)
        if fmt:
            p.add_argument("--format", choices=["text", "latex", "json"], default="text")
        return p

    p = add("elim", "odd variable u_{2l+1} in even variables, or a single B operator with --mu")
    p.add_argument("--l", type=int, required=True)
    p.add_argument("--mu", type=int)

    p = add("flow", "u_{2j} flow along t_{2m+1}")
    p.add_argument("--j", type=int, default=1)
    p.add_argument("--m", type=int, required=True)

    p = add("reduce", "(2n+1)-reduction bindings u_{2n+2} .. u_upto")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--upto", type=int)

    p = add("reduced-flow", "flows on the (2n+1)-reduced manifold")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--j", type=int)
    p.add_argument("--m", type=int, required=True)

    p = add("recursion", "recursion operator matrices")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--operator", choices=["hat", "kp"], default="hat")
    p.add_argument("--form", choices=["operator", "action"], default="operator")

    p = add("apply-recursion", "apply Phi_hat^reps to the reduced t_{2m+1} flow vector")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--form", choices=["operator", "action"], default="action")

    p = add("scale", "rescale a reduced flow: u2 = s*u, t = tau*t_new")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--j", type=int, default=1)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--u-scale", type=_rational, required=True)
    p.add_argument("--t-scale", type=_rational, required=True)

    p = add("verify", "recompute golden fixtures and report differences", kind=False, fmt=False)
    p.add_argument("--fixtures", help="a .fix file or a directory of them (default: the bundled reference suite)")
    return parser


def _need(cond: bool, message: str):
    if not cond:
        raise UsageError(message)


def _time(m: int) -> str:
    return f"t{2 * m + 1}"


def compute(args) -> list[tuple[str, object]]:
    """Run one command and return ``(tag, value)`` records."""
    cmd = args.command
    if cmd in KIND_COMMANDS:
        _need(args.kind != "kp", f"'{cmd}' is defined for the BKP/CKP hierarchies only, not KP")
        kind = hz.kind_from_name(args.kind)
    if cmd == "elim":
        _need(args.l >= 1, "--l must be at least 1")
        if args.mu is not None:
            _need(1 <= args.mu <= args.l, "--mu must lie in [1, l]")
            return [(f"B(-{2 * args.l},-{2 * args.mu - 1})", hz.b_operator(args.l, args.mu, kind))]
        return [(f"u{2 * args.l + 1}", hz.eliminate_odd(args.l, kind))]
    if cmd == "flow":
        _need(args.j >= 1 and args.m >= 0, "--j >= 1 and --m >= 0 required")
        return [(f"u{2 * args.j}_{_time(args.m)}", hz.flow(kind, args.j, args.m))]
    if cmd == "reduce":
        _need(args.n >= 1, "--n must be at least 1")
        upto = args.upto if args.upto is not None else 2 * args.n + 6
        _need(upto % 2 == 0 and upto >= 2 * args.n + 2, f"--upto must be even and at least {2 * args.n + 2}")
        return [(f"u{i}", v) for i, v in sorted(hz.reduce(kind, args.n, upto).items())]
    if cmd in ("reduced-flow", "scale"):
        _need(args.n >= 1 and args.m >= 0, "--n >= 1 and --m >= 0 required")
        js = [args.j] if args.j is not None else range(1, args.n + 1)
        _need(all(1 <= j <= args.n for j in js), "--j must lie in [1, n]")
        out = [(f"u{2 * j}_{_time(args.m)}", hz.reduced_flow(kind, args.n, j, args.m)) for j in js]
        if cmd == "scale":
            _need(args.u_scale != 0 and args.t_scale != 0, "scales must be nonzero")
            out = [(tag, rc.scaling_transform(v, args.u_scale, args.t_scale)) for tag, v in out]
        return out
    if cmd == "recursion":
        ctx = rc.make_context(kind, args.n)
        if args.form == "action":
            (S, T, M, N), W = rc.build_matrices(ctx), rc.kp_flow_matrix(ctx)
            return [
                (f"{name}[{a},{b}]", mat[a, b])
                for name, mat in (("S", S), ("T", T), ("M", M), ("N", N), ("W", W))
                for a in range(1, mat.rows + 1)
                for b in range(1, mat.cols + 1)
            ]
        mat = rc.hat_phi_operator(ctx) if args.operator == "hat" else rc.kp_phi_operator(ctx)
        name = "phihat" if args.operator == "hat" else "phi"
        return [(f"{name}[{a},{b}]", mat[a, b]) for a in range(1, mat.rows + 1) for b in range(1, mat.cols + 1)]
    if cmd == "apply-recursion":
        _need(args.reps >= 1 and args.m >= 0, "--reps >= 1 and --m >= 0 required")
        ctx = rc.make_context(kind, args.n)
        vec = rc.flow_vector(ctx, args.m)
        if args.form == "action":
            vec = rc.hat_phi_action(ctx, vec, args.reps)
        else:
            op = rc.hat_phi_operator(ctx)
            for _ in range(args.reps):
                vec = op.apply(vec)
        target = args.m + args.reps * (2 * args.n + 1)
        return [(f"u{2 * k}_{_time(target)}", v) for k, v in enumerate(vec, 1)]
    raise UsageError(f"unknown command {cmd!r}")


def render(records, fmt: str) -> str:
    if fmt == "json":
        return json.dumps({tag: value_to_json(v) for tag, v in records}, indent=2)
    show = latex_value if fmt == "latex" else format_value
    return "\n".join(f"{tag} = {show(v)}" for tag, v in records)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "verify":
            outcomes = verify(FixtureSet.load(args.fixtures))
            print(report(outcomes))
            return 0 if all(o.passed for o in outcomes) else 1
        text = render(compute(args), args.format)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"bckp: error: {exc}", file=sys.stderr)
        return 2
    except CalcError as exc:
        print(f"bckp: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"bckp: {exc}", file=sys.stderr)
        return 1
    print(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
