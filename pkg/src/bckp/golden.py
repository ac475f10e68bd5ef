"""Golden fixture records: ``<tag> = <canonical text>``, one per line.

Tags name a derivation and its hierarchy, for example ``u7[bkp]``,
``B(-8,-1)[ckp]``, ``u2_t5[bkp]``, ``u6@red3[ckp]``, ``u2_t7@red3[bkp]``,
``phi[1,2]@red3[bkp]``, ``phihat[1,1]@red3[ckp]`` and
``u2_t7@red3[bkp]*scale(1/3,-27)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

from . import hierarchy as hz
from . import recursion as rc
from .diffpoly import DiffPoly, substitute
from .errors import CalcError, ParseError
from .pdo import as_nonlocal
from .textio import canonical_terms, format_value, parse, parse_record

_TAG = re.compile(
    r"^(?P<head>.+?)\[(?P<kind>bkp|ckp)\](?:\*scale\((?P<s>-?\d+(?:/\d+)?),(?P<t>-?\d+(?:/\d+)?)\))?$"
)
_HEADS = [
    ("bop", re.compile(r"^B\(-(\d+),-(\d+)\)$")),
    ("flow_red", re.compile(r"^u(\d+)_t(\d+)@red(\d+)$")),
    ("flow", re.compile(r"^u(\d+)_t(\d+)$")),
    ("binding", re.compile(r"^u(\d+)@red(\d+)$")),
    ("elim", re.compile(r"^u(\d+)$")),
    ("phi", re.compile(r"^phi\[(\d+),(\d+)\]@red(\d+)$")),
    ("phihat", re.compile(r"^phihat\[(\d+),(\d+)\]@red(\d+)$")),
]


@dataclass(frozen=True)
class Descriptor:
    what: str
    kind: str
    nums: tuple
    scale: tuple | None = None

    @classmethod
    def from_tag(cls, tag: str) -> "Descriptor":
        m = _TAG.match(tag)
        if not m:
            raise ParseError(f"unrecognised fixture tag {tag!r}")
        scale = (Fraction(m["s"]), Fraction(m["t"])) if m["s"] else None
        for what, pat in _HEADS:
            hm = pat.match(m["head"])
            if hm:
                nums = tuple(int(g) for g in hm.groups())
                if scale and what != "flow_red":
                    raise ParseError("only reduced flows take a scale suffix")
                d = cls(what, m["kind"], nums, scale)
                d._check()
                return d
        raise ParseError(f"unrecognised fixture tag {tag!r}")

    def _check(self):
        odd = {"elim": [0], "flow": [1], "flow_red": [1, 2], "binding": [1], "phi": [2], "phihat": [2]}
        even = {"flow": [0], "flow_red": [0], "binding": [0], "bop": [0]}
        if any(self.nums[i] % 2 == 0 for i in odd.get(self.what, [])):
            raise ParseError("index must be odd")
        if any(self.nums[i] % 2 for i in even.get(self.what, [])):
            raise ParseError("index must be even")
        if self.what == "bop" and self.nums[1] % 2 == 0:
            raise ParseError("B column index must be odd")
        if self.what == "elim" and self.nums[0] < 3:
            raise ParseError("elimination starts at u3")

    @property
    def n(self) -> int:
        return (self.nums[-1] - 1) // 2

    def compute(self):
        k, a = self.kind, self.nums
        if self.what == "elim":
            return hz.eliminate_odd((a[0] - 1) // 2, k)
        if self.what == "bop":
            return hz.b_operator(a[0] // 2, (a[1] + 1) // 2, k)
        if self.what == "flow":
            return hz.flow(k, a[0] // 2, (a[1] - 1) // 2)
        if self.what == "flow_red":
            out = hz.reduced_flow(k, self.n, a[0] // 2, (a[1] - 1) // 2)
            if self.scale:
                out = rc.scaling_transform(out, *self.scale)
            return out
        if self.what == "binding":
            return hz.reduce(k, self.n, a[0])[a[0]]
        ctx = rc.make_context(k, self.n)
        mat = rc.kp_phi_operator(ctx) if self.what == "phi" else rc.hat_phi_operator(ctx)
        return mat[a[0], a[1]]

    def command(self) -> list[str]:
        """The CLI invocation whose output contains this record."""
        k, a = self.kind, self.nums
        base = ["--kind", k]
        if self.what == "elim":
            return ["elim", *base, "--l", str((a[0] - 1) // 2)]
        if self.what == "bop":
            return ["elim", *base, "--l", str(a[0] // 2), "--mu", str((a[1] + 1) // 2)]
        if self.what == "flow":
            return ["flow", *base, "--j", str(a[0] // 2), "--m", str((a[1] - 1) // 2)]
        if self.what == "flow_red":
            args = ["--n", str(self.n), "--j", str(a[0] // 2), "--m", str((a[1] - 1) // 2)]
            if self.scale:
                s, t = self.scale
                return ["scale", *base, *args, "--u-scale", str(s), "--t-scale", str(t)]
            return ["reduced-flow", *base, *args]
        if self.what == "binding":
            return ["reduce", *base, "--n", str(self.n), "--upto", str(a[0])]
        op = "kp" if self.what == "phi" else "hat"
        return ["recursion", *base, "--n", str(self.n), "--operator", op]


@dataclass
class Entry:
    tag: str
    text: str
    descriptor: Descriptor
    line: int = 0


@dataclass
class FixtureSet:
    entries: list[Entry] = field(default_factory=list)

    @classmethod
    def parse(cls, text: str, source: str = "<fixtures>") -> "FixtureSet":
        out = cls()
        seen = set()
        for no, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                tag, value = parse_record(line)
                desc = Descriptor.from_tag(tag)
            except ParseError as exc:
                raise ParseError(f"{source}:{no}: {exc}") from exc
            if tag in seen:
                raise ParseError(f"{source}:{no}: duplicate tag {tag}")
            seen.add(tag)
            out.entries.append(Entry(tag, value, desc, no))
        return out

    @classmethod
    def load(cls, path=None) -> "FixtureSet":
        """Read a ``.fix`` file, or every ``.fix`` file of a directory in name order."""
        if path is None:
            root = resources.files("bckp") / "fixtures"
            files = sorted((p for p in root.iterdir() if p.name.endswith(".fix")), key=lambda p: p.name)
        else:
            path = Path(path)
            files = sorted(path.glob("*.fix")) if path.is_dir() else [path]
        out = cls()
        for f in files:
            out.entries.extend(cls.parse(f.read_text(), str(f)).entries)
        return out


@dataclass
class Outcome:
    tag: str
    passed: bool
    missing: list[str]
    extra: list[str]
    error: str | None = None
    command: list[str] = field(default_factory=list)


def _comparable(v):
    return v if isinstance(v, DiffPoly) else as_nonlocal(v)


def verify(suite: FixtureSet) -> list[Outcome]:
    """Recompute every entry; chained reduction fixtures are resolved first."""
    resolved: dict[tuple, dict[int, DiffPoly]] = {}
    out = []
    for e in suite.entries:
        d = e.descriptor
        try:
            expected = parse(e.text)
            if d.what == "binding":
                chain = resolved.setdefault((d.kind, d.n), {})
                expected = substitute(expected, chain)
                chain[d.nums[0]] = expected
            got = d.compute()
        except CalcError as exc:
            out.append(Outcome(e.tag, False, [], [], f"{type(exc).__name__}: {exc}", d.command()))
            continue
        want_terms = canonical_terms(_comparable(expected))
        got_terms = canonical_terms(_comparable(got))
        missing = [t for t in want_terms if t not in got_terms]
        extra = [t for t in got_terms if t not in want_terms]
        out.append(Outcome(e.tag, not missing and not extra, missing, extra, None, d.command()))
    return out


def report(outcomes: list[Outcome]) -> str:
    lines = []
    for o in outcomes:
        lines.append(f"{'PASS' if o.passed else 'FAIL'}  {o.tag}")
        if o.error:
            lines.append(f"    error: {o.error}")
        for t in o.missing:
            lines.append(f"    fixture only:  {t}")
        for t in o.extra:
            lines.append(f"    computed only: {t}")
        if not o.passed:
            lines.append(f"    reproduce: bckp {' '.join(o.command)}")
    npass = sum(o.passed for o in outcomes)
    lines.append(f"{npass} passed, {len(outcomes) - npass} failed")
    return "\n".join(lines)


def render_record(tag: str, value) -> str:
    return f"{tag} = {format_value(value)}"
