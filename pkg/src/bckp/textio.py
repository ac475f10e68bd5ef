"""Canonical text, LaTeX and JSON forms of polynomials and operators.

Text grammar (also what :func:`parse` accepts)::

    expr   := ['+'|'-'] term (('+'|'-') term)*
    term   := factor ('*' factor)*
    factor := RATIONAL | ATOM ['^' INT] | '(' expr ')' ['^' INT]
            | 'D' ['^' INT] | 'Dinv' | 'O(D^' INT ')'

``ATOM`` is ``u2``, ``u2_xxx`` (orders 1 to 4) or ``u2^(5)`` (orders 5
and up).  ``O(D^k)`` marks a series known only above degree ``k``.
"""

from __future__ import annotations

import json
import re
from fractions import Fraction

from .diffpoly import DiffPoly, mono_key
from .errors import ParseError
from .pdo import LaurentPDO, NonlocalPDO, as_laurent, compose, compose_nonlocal

MAX_X_ORDER = 4


# ---------------------------------------------------------------- formatting


def format_rational(c: Fraction) -> str:
    c = Fraction(c)
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def format_atom(index: int, order: int) -> str:
    if order == 0:
        return f"u{index}"
    if order <= MAX_X_ORDER:
        return f"u{index}_" + "x" * order
    return f"u{index}^({order})"


def _format_mono(m) -> str:
    parts = []
    for i, o, e in m:
        atom = format_atom(i, o)
        parts.append(atom if e == 1 else f"{atom}^{e}")
    return "*".join(parts)


def _signed_terms(p: DiffPoly):
    """Yield ``(negative, body)`` per term in canonical order."""
    for m, c in p.terms():
        neg = c < 0
        a = abs(c)
        if not m:
            yield neg, format_rational(a)
        elif a == 1:
            yield neg, _format_mono(m)
        else:
            yield neg, f"{format_rational(a)}*{_format_mono(m)}"


def _join(pieces) -> str:
    out = ""
    for neg, body in pieces:
        if not out:
            out = f"-{body}" if neg else body
        else:
            out += f" - {body}" if neg else f" + {body}"
    return out or "0"


def format_poly(p: DiffPoly) -> str:
    return _join(_signed_terms(p))


def _dpow(k: int) -> str:
    return "D" if k == 1 else f"D^{k}"


def _op_pieces(op):
    if isinstance(op, NonlocalPDO):
        local, tails, min_deg = op.local, op.tails, None
    else:
        local, tails, min_deg = op, (), op.min_deg
    for k, c in local.items():
        if k == 0:
            if len(c) == 1:
                yield from _signed_terms(c)
            else:
                yield False, f"({format_poly(c)})"
            continue
        if len(c) == 1:
            (neg, body), = _signed_terms(c)
            if c.is_constant() and abs(c.constant_term()) == 1:
                yield neg, _dpow(k)
            else:
                yield neg, f"{body}*{_dpow(k)}"
        else:
            yield False, f"({format_poly(c)})*{_dpow(k)}"
    for P, Q in tails:
        neg = len(P) == 1 and next(P.terms())[1] < 0
        body_p = format_poly(-P if neg else P)
        yield neg, f"({body_p})*Dinv*({format_poly(Q)})"
    if min_deg is not None:
        yield False, f"O(D^{min_deg - 1})"


def format_operator(op) -> str:
    if isinstance(op, DiffPoly):
        op = LaurentPDO.mult(op)
    return _join(_op_pieces(op))


def format_value(v) -> str:
    if isinstance(v, DiffPoly):
        return format_poly(v)
    return format_operator(v)


# --------------------------------------------------------------------- LaTeX


def _latex_rational(c: Fraction) -> str:
    c = Fraction(c)
    return str(c.numerator) if c.denominator == 1 else rf"\frac{{{c.numerator}}}{{{c.denominator}}}"


def _latex_mono(m) -> str:
    parts = []
    for i, o, e in m:
        atom = f"u_{{{i}}}" if o == 0 else f"u_{{{i},{'x' * o}}}"
        parts.append(atom if e == 1 else f"{atom}^{{{e}}}")
    return "".join(parts)


def _latex_terms(p: DiffPoly):
    for m, c in p.terms():
        a = abs(c)
        if not m:
            body = _latex_rational(a)
        elif a == 1:
            body = _latex_mono(m)
        else:
            body = _latex_rational(a) + _latex_mono(m)
        yield c < 0, body


def latex_poly(p: DiffPoly) -> str:
    return _join(_latex_terms(p))


def latex_operator(op) -> str:
    if isinstance(op, DiffPoly):
        return latex_poly(op)
    if isinstance(op, NonlocalPDO):
        local, tails, min_deg = op.local, op.tails, None
    else:
        local, tails, min_deg = op, (), op.min_deg
    pieces = []
    for k, c in local.items():
        d = "" if k == 0 else (r"\partial" if k == 1 else rf"\partial^{{{k}}}")
        if len(c) == 1:
            (neg, body), = _latex_terms(c)
            if d and c.is_constant() and abs(c.constant_term()) == 1:
                body = ""
            pieces.append((neg, body + d))
        else:
            pieces.append((False, f"({latex_poly(c)}){d}"))
    for P, Q in tails:
        pieces.append((False, rf"({latex_poly(P)})\partial^{{-1}}({latex_poly(Q)})"))
    if min_deg is not None:
        pieces.append((False, rf"O(\partial^{{{min_deg - 1}}})"))
    return _join(pieces)


def latex_value(v) -> str:
    return latex_poly(v) if isinstance(v, DiffPoly) else latex_operator(v)


# ---------------------------------------------------------------------- JSON


def poly_to_json(p: DiffPoly) -> list:
    return [
        {"coeff": format_rational(c), "factors": [{"var": i, "deriv": o, "exp": e} for i, o, e in m]}
        for m, c in p.terms()
    ]


def poly_from_json(data) -> DiffPoly:
    try:
        return DiffPoly(
            (tuple(sorted((f["var"], f["deriv"], f["exp"]) for f in rec["factors"])), Fraction(rec["coeff"]))
            for rec in data
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad polynomial record: {exc}") from exc


def value_to_json(v):
    if isinstance(v, DiffPoly):
        return {"type": "poly", "terms": poly_to_json(v)}
    if isinstance(v, NonlocalPDO):
        return {
            "type": "nonlocal",
            "terms": [{"deg": d, "coeff": poly_to_json(c)} for d, c in v.local.items()],
            "tails": [{"P": poly_to_json(P), "Q": poly_to_json(Q)} for P, Q in v.tails],
        }
    if isinstance(v, LaurentPDO):
        return {
            "type": "laurent",
            "min_deg": v.min_deg,
            "terms": [{"deg": d, "coeff": poly_to_json(c)} for d, c in v.items()],
        }
    raise TypeError(f"cannot serialise {type(v).__name__}")


def value_from_json(data):
    try:
        kind = data["type"]
        if kind == "poly":
            return poly_from_json(data["terms"])
        terms = {t["deg"]: poly_from_json(t["coeff"]) for t in data["terms"]}
        if kind == "laurent":
            return LaurentPDO(terms, data.get("min_deg"))
        if kind == "nonlocal":
            tails = [(poly_from_json(t["P"]), poly_from_json(t["Q"])) for t in data["tails"]]
            return NonlocalPDO(LaurentPDO(terms), tails)
    except (KeyError, TypeError) as exc:
        raise ParseError(f"bad interchange record: {exc}") from exc
    raise ParseError(f"unknown value type {kind!r}")


def dumps(v) -> str:
    return json.dumps(value_to_json(v), sort_keys=True)


def loads(s: str):
    return value_from_json(json.loads(s))


# ------------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>\d+(?:/\d+)?)"
    r"|(?P<atom>u\d+(?:_x+|\^\(\d+\))?)"
    r"|(?P<big>O\(D\^-?\d+\))"
    r"|(?P<dinv>Dinv)"
    r"|(?P<d>D)"
    r"|(?P<op>[-+*^()])"
    r")"
)
_ATOM = re.compile(r"u(\d+)(?:_(x+)|\^\((\d+)\))?$")


def _tokenize(text: str):
    pos = 0
    out = []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected input at {text[pos:pos + 12]!r}")
        kind = m.lastgroup
        out.append((kind, m.group(kind)))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    return out


class _Cutoff:
    def __init__(self, k: int):
        self.k = k


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self, value=None):
        tok = self.peek()
        if tok[0] is None or (value is not None and tok[1] != value):
            raise ParseError(f"expected {value or 'token'}, found {tok[1]!r}")
        self.i += 1
        return tok

    def integer(self) -> int:
        sign = 1
        if self.peek() == ("op", "-"):
            self.take()
            sign = -1
        kind, val = self.take()
        if kind != "num" or "/" in val:
            raise ParseError(f"expected an integer, found {val!r}")
        return sign * int(val)

    def expr(self):
        items = []
        sign = 1
        if self.peek()[1] in ("+", "-"):
            sign = -1 if self.take()[1] == "-" else 1
        items.append((sign, self.term()))
        while self.peek()[1] in ("+", "-"):
            sign = -1 if self.take()[1] == "-" else 1
            items.append((sign, self.term()))
        return _sum(items)

    def term(self):
        factors = [self.factor()]
        while self.peek()[1] == "*":
            self.take()
            factors.append(self.factor())
        return _product(factors)

    def factor(self):
        kind, val = self.peek()
        if kind == "num":
            self.take()
            return DiffPoly.const(Fraction(val))
        if kind == "atom":
            self.take()
            m = _ATOM.match(val)
            order = len(m.group(2)) if m.group(2) else int(m.group(3) or 0)
            base = DiffPoly.var(int(m.group(1)), order)
            return self._maybe_power(base)
        if kind == "big":
            self.take()
            return _Cutoff(int(val[4:-1]))
        if kind == "dinv":
            self.take()
            return ("D", -1, True)
        if kind == "d":
            self.take()
            k = 1
            if self.peek()[1] == "^":
                self.take()
                k = self.integer()
            return ("D", k, False)
        if val == "(":
            self.take()
            inner = self.expr()
            self.take(")")
            return self._maybe_power(inner)
        raise ParseError(f"unexpected token {val!r}")

    def _maybe_power(self, base):
        if self.peek()[1] == "^":
            self.take()
            e = self.integer()
            if not isinstance(base, DiffPoly) or e < 0:
                raise ParseError("only polynomials take non-negative integer powers")
            return base ** e
        return base


def _product(factors):
    if any(isinstance(f, _Cutoff) for f in factors):
        if len(factors) != 1:
            raise ParseError("O(D^k) must stand alone")
        return factors[0]
    if all(isinstance(f, DiffPoly) for f in factors):
        out = DiffPoly.const(1)
        for f in factors:
            out = out * f
        return out
    inv = [k for k, f in enumerate(factors) if isinstance(f, tuple) and (f[2] or f[1] < 0)]
    if inv:
        if len(inv) != 1:
            raise ParseError("at most one inverse derivative per term")
        k = inv[0]
        left, right = factors[:k], factors[k + 1 :]
        if not all(isinstance(f, DiffPoly) for f in left + right):
            raise ParseError("inverse derivatives may only be flanked by polynomials")
        lp = _product(left) if left else DiffPoly.const(1)
        rp = _product(right) if right else DiffPoly.const(1)
        tag, deg, is_dinv = factors[k]
        if is_dinv:
            return NonlocalPDO.tail(lp, rp)
        if right:
            raise ParseError("D^-k must be the last factor of a term")
        return _Series(LaurentPDO({deg: lp}))
    out = None
    for f in factors:
        op = LaurentPDO.d(f[1]) if isinstance(f, tuple) else f
        if isinstance(op, _Series):
            raise ParseError("series terms cannot be composed")
        if out is None:
            out = op
        elif isinstance(out, NonlocalPDO) or isinstance(op, NonlocalPDO):
            out = compose_nonlocal(out, op)
        else:
            out = compose(as_laurent(out), as_laurent(op))
    return out


class _Series:
    """A term with a negative power of D other than a tail."""

    def __init__(self, op: LaurentPDO):
        self.op = op


def _sum(items):
    polys = DiffPoly()
    ops = []
    cutoff = None
    for sign, v in items:
        if isinstance(v, _Cutoff):
            if sign < 0 or cutoff is not None:
                raise ParseError("a series takes one '+ O(D^k)' marker")
            cutoff = v.k + 1
        elif isinstance(v, DiffPoly):
            polys = polys + v if sign > 0 else polys - v
        elif isinstance(v, _Series):
            ops.append(v.op if sign > 0 else -v.op)
        else:
            ops.append(v if sign > 0 else -v)
    if not ops and cutoff is None:
        return polys
    if any(isinstance(o, NonlocalPDO) for o in ops):
        if cutoff is not None:
            raise ParseError("nonlocal operators carry no series cutoff")
        out = NonlocalPDO(LaurentPDO.mult(polys))
        for o in ops:
            out = out + o
        return out
    series = any(d < 0 for o in ops for d in o.degrees())
    out = LaurentPDO.mult(polys)
    for o in ops:
        out = out + o
    if cutoff is not None:
        return LaurentPDO(dict(out.items()), cutoff)
    if series:
        return _Series(out)
    return out


def parse(text: str):
    """Parse canonical text into a DiffPoly, LaurentPDO or NonlocalPDO."""
    p = _Parser(text)
    v = p.expr()
    if p.i != len(p.toks):
        raise ParseError(f"trailing input at {p.peek()[1]!r}")
    if isinstance(v, _Series):
        v = v.op
    if isinstance(v, _Cutoff):
        return LaurentPDO({}, v.k + 1)
    return v


def parse_poly(text: str) -> DiffPoly:
    v = parse(text)
    if not isinstance(v, DiffPoly):
        raise ParseError("expected a polynomial, found an operator")
    return v


def parse_operator(text: str):
    v = parse(text)
    if isinstance(v, DiffPoly):
        return LaurentPDO.mult(v)
    return v


def parse_record(line: str) -> tuple[str, str]:
    """Split ``tag = value`` (first ``' = '`` separates)."""
    if " = " not in line:
        raise ParseError(f"record needs ' = ': {line!r}")
    tag, value = line.split(" = ", 1)
    return tag.strip(), value.strip()


def canonical_terms(v) -> list[str]:
    """Printed summands of a value, for term-level diffs."""
    if isinstance(v, DiffPoly):
        pieces = _signed_terms(v)
    else:
        pieces = _op_pieces(v)
    return [("-" if neg else "+") + body for neg, body in pieces]


__all__ = [
    "format_poly",
    "format_operator",
    "format_value",
    "latex_poly",
    "latex_operator",
    "latex_value",
    "poly_to_json",
    "poly_from_json",
    "value_to_json",
    "value_from_json",
    "dumps",
    "loads",
    "parse",
    "parse_poly",
    "parse_operator",
    "parse_record",
    "canonical_terms",
    "mono_key",
]
