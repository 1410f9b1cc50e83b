"""Text model formats for external solvers and solution dumps coming back.

Two formats share one reader:

* LP format (``export_lp``): linear rows, an optional quadratic objective in
  bracketed ``[ ... ] / 2`` syntax, Bounds and Binaries sections.
* Polynomial format (``export_pip``): any degree, monomials written as
  ``+1 d_0 * r_1_0``.

Rows are named ``r<k>_<sanitized tag>`` and each is preceded by a
``\\tag`` comment carrying the exact tag, so a parse restores the model.
Numbers are written with 17 significant digits.
"""
from __future__ import annotations

import logging
import re
from collections import Counter
from typing import NamedTuple

import numpy as np

from .exceptions import ParseError, UnsupportedDegreeError
from .model import BINARY, CONTINUOUS, Model

log = logging.getLogger(__name__)

LINE_WIDTH = 200
_SENSE_OUT = {"=": "=", "<=": "<=", ">=": ">="}
_NAME_BAD = re.compile(r"[^A-Za-z0-9_.]+")


def num(x: float) -> str:
    """17 significant digits; ``repr``-exact for every finite double."""
    if x == np.inf:
        return "inf"
    if x == -np.inf:
        return "-inf"
    return format(float(x), ".17g")


def row_name(k: int, tag: str) -> str:
    clean = _NAME_BAD.sub("_", tag).strip("_")
    return f"r{k}_{clean}" if clean else f"r{k}"


def _monomial(model: Model, key: tuple, power: bool) -> str:
    if not power:
        return " * ".join(model.variables[i].name for i in key)
    counts = Counter(key)
    parts = []
    for i in sorted(counts):
        name = model.variables[i].name
        parts.append(name if counts[i] == 1 else f"{name} ^ {counts[i]}")
    return " * ".join(parts)


def _signed(coef: float) -> str:
    return ("- " if coef < 0 else "+ ") + num(abs(coef))


def _wrap(head: str, pieces: list, tail: str = "") -> list[str]:
    lines, cur = [], head
    for p in pieces + ([tail] if tail else []):
        if len(cur) + 1 + len(p) > LINE_WIDTH and cur.strip():
            lines.append(cur)
            cur = "   " + p
        else:
            cur = f"{cur} {p}" if cur else p
    lines.append(cur)
    return lines


def _linear_pieces(model, terms, power=True):
    pieces = []
    for key, coef in terms.items():
        if not key:
            pieces.append(_signed(coef))
        else:
            pieces.append(f"{_signed(coef)} {_monomial(model, key, power)}")
    return pieces


def _bounds_and_kinds(model: Model) -> list[str]:
    lines = ["Bounds"]
    for v in model.variables:
        if v.lower == -np.inf and v.upper == np.inf:
            lines.append(f" {v.name} free")
        else:
            lines.append(f" {num(v.lower)} <= {v.name} <= {num(v.upper)}")
    bins = [v.name for v in model.variables if v.kind == BINARY]
    if bins:
        lines.append("Binaries")
        lines.extend(" " + s for s in _wrap("", bins))
    lines.append("End")
    return lines


def _header(model: Model, fmt: str) -> list[str]:
    return [f"\\ {fmt} model {model.name}", f"\\name {model.name}",
            "Maximize" if model.direction == "max" else "Minimize"]


def _rows(model: Model, power: bool) -> list[str]:
    lines = ["Subject To"]
    for k, con in enumerate(model.constraints):
        name = row_name(k, con.tag)
        lines.append(f"\\tag {name} {con.tag}")
        lines.extend(_wrap(f" {name}:", _linear_pieces(model, con.terms, power),
                           f"{_SENSE_OUT[con.sense]} {num(con.rhs)}"))
    return lines


def format_lp(model: Model) -> str:
    """LP-format text; raises :class:`UnsupportedDegreeError` on nonlinear rows."""
    bad = model.nonlinear_tags()
    if model.objective_degree > 2:
        bad.append("objective")
    if bad:
        raise UnsupportedDegreeError(bad)
    lines = _header(model, "LP")
    lin = {k: c for k, c in model.objective.items() if len(k) <= 1}
    quad = {k: c for k, c in model.objective.items() if len(k) == 2}
    pieces = _linear_pieces(model, lin) or ["0"]
    if quad:
        pieces.append("+ [")
        for key, coef in quad.items():
            a, b = key
            names = (f"{model.variables[a].name} ^ 2" if a == b
                     else f"{model.variables[a].name} * {model.variables[b].name}")
            pieces.append(f"{_signed(2.0 * coef)} {names}")
        pieces.append("] / 2")
    lines.extend(_wrap(" obj:", pieces))
    lines.extend(_rows(model, power=True))
    lines.extend(_bounds_and_kinds(model))
    return "\n".join(lines) + "\n"


def format_pip(model: Model) -> str:
    """Polynomial-format text; every monomial is an explicit product."""
    lines = _header(model, "PIP")
    lines.extend(_wrap(" obj:", _linear_pieces(model, model.objective, power=False) or ["0"]))
    lines.extend(_rows(model, power=False))
    lines.extend(_bounds_and_kinds(model))
    return "\n".join(lines) + "\n"


def export_lp(model: Model, path) -> None:
    text = format_lp(model)
    with open(path, "w") as fh:
        fh.write(text)


def export_pip(model: Model, path) -> None:
    text = format_pip(model)
    with open(path, "w") as fh:
        fh.write(text)


# reading -------------------------------------------------------------------
_TOKEN = re.compile(r"""
    (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)
  | (?P<op><=|>=|=<|=>|[-+*^:\[\]/=<>])
  | (?P<name>[A-Za-z_][A-Za-z0-9_.]*)
  | (?P<ws>\s+)
  | (?P<bad>.)
""", re.VERBOSE)

_SECTIONS = {
    "maximize": "max", "maximise": "max", "maximum": "max", "max": "max",
    "minimize": "min", "minimise": "min", "minimum": "min", "min": "min",
    "subject to": "rows", "such that": "rows", "st": "rows", "s.t.": "rows",
    "bounds": "bounds", "bound": "bounds",
    "binaries": "bin", "binary": "bin", "bin": "bin",
    "generals": "gen", "general": "gen",
    "end": "end",
}


def _tokens(text: str, lineno: int):
    out = []
    for m in _TOKEN.finditer(text):
        kind = m.lastgroup
        if kind == "ws":
            continue
        if kind == "bad":
            raise ParseError(f"unexpected character {m.group()!r}", line=lineno)
        val = m.group()
        if kind == "name" and val.lower() in ("inf", "infinity"):
            kind, val = "num", "inf"
        out.append((kind, val, lineno))
    return out


class _Cursor:
    def __init__(self, toks):
        self.toks = toks
        self.pos = 0

    def peek(self, ahead=0):
        i = self.pos + ahead
        return self.toks[i] if i < len(self.toks) else (None, None, None)

    def take(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def expect(self, value):
        kind, val, line = self.take()
        if val != value:
            raise ParseError(f"expected {value!r}, found {val!r}", line=line)

    def done(self):
        return self.pos >= len(self.toks)


def _factor_list(cur: _Cursor) -> list:
    names = []
    while True:
        kind, val, line = cur.take()
        if kind != "name":
            raise ParseError(f"expected a variable name, found {val!r}", line=line)
        power = 1
        if cur.peek()[1] == "^":
            cur.take()
            k, p, ln = cur.take()
            if k != "num" or not float(p).is_integer() or float(p) < 1:
                raise ParseError(f"bad exponent {p!r}", line=ln)
            power = int(float(p))
        names.extend([val] * power)
        if cur.peek()[1] != "*":
            return names
        cur.take()


def _expression(cur: _Cursor, stop: set, allow_brackets: bool) -> list:
    """Parse signed terms until a token in ``stop``; returns ``(coef, names)`` pairs."""
    terms = []
    first = True
    while not cur.done() and cur.peek()[1] not in stop:
        kind, val, line = cur.peek()
        sign = 1.0
        if val in ("+", "-"):
            cur.take()
            sign = -1.0 if val == "-" else 1.0
        elif not first:
            raise ParseError(f"expected '+' or '-', found {val!r}", line=line)
        first = False
        kind, val, line = cur.peek()
        if val == "[":
            if not allow_brackets:
                raise ParseError("brackets are only allowed in an LP objective", line=line)
            cur.take()
            inner = _expression(cur, {"]"}, False)
            cur.expect("]")
            scale = 1.0
            if cur.peek()[1] == "/":
                cur.take()
                k, d, ln = cur.take()
                if k != "num":
                    raise ParseError(f"expected a divisor, found {d!r}", line=ln)
                scale = 1.0 / float(d)
            terms.extend((sign * c * scale, names) for c, names in inner)
            continue
        coef = 1.0
        if kind == "num":
            cur.take()
            coef = float(val)
        if cur.peek()[0] == "name":
            terms.append((sign * coef, _factor_list(cur)))
        elif kind == "num":
            terms.append((sign * coef, []))
        else:
            raise ParseError(f"expected a term, found {cur.peek()[1]!r}", line=cur.peek()[2])
    return terms


def _signed_number(cur: _Cursor) -> float:
    sign = 1.0
    kind, val, line = cur.take()
    if val in ("+", "-"):
        sign = -1.0 if val == "-" else 1.0
        kind, val, line = cur.take()
    if kind != "num":
        raise ParseError(f"expected a number, found {val!r}", line=line)
    return sign * float(val)


_SENSE_IN = {"=": "=", "<=": "<=", "=<": "<=", "<": "<=", ">=": ">=", "=>": ">=", ">": ">="}


def _split_sections(text: str):
    sections, tags, name = [], {}, "model"
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("\\"):
            if line.startswith("\\tag "):
                parts = line[5:].split(" ", 1)
                tags[parts[0]] = parts[1] if len(parts) > 1 else ""
            elif line.startswith("\\name "):
                name = line[6:]
            continue
        if not line:
            continue
        key = line.lower()
        if key in _SECTIONS:
            current = (_SECTIONS[key], [])
            sections.append(current)
            continue
        if current is None:
            raise ParseError("content before the first section", line=lineno)
        current[1].append((lineno, line))
    return sections, tags, name


def parse_model(text: str) -> Model:
    """Read LP or polynomial format text back into a :class:`Model`."""
    sections, tags, name = _split_sections(text)
    if not sections or sections[0][0] not in ("max", "min"):
        raise ParseError("file must start with Maximize or Minimize")
    direction = sections[0][0]
    by_kind: dict = {}
    for kind, lines in sections[1:]:
        by_kind.setdefault(kind, []).extend(lines)

    def cursor(kind):
        toks = []
        for lineno, line in by_kind.get(kind, []):
            toks.extend(_tokens(line, lineno))
        return _Cursor(toks)

    # objective
    obj = _tokens(" ".join(l for _, l in sections[0][1]), sections[0][1][0][0] if sections[0][1] else 0)
    oc = _Cursor(obj)
    if oc.peek(1)[1] == ":":
        oc.take(), oc.take()
    obj_terms = _expression(oc, set(), True)

    # rows
    rc = cursor("rows")
    rows = []
    while not rc.done():
        rname = None
        if rc.peek()[0] == "name" and rc.peek(1)[1] == ":":
            rname = rc.take()[1]
            rc.take()
        terms = _expression(rc, set(_SENSE_IN), False)
        kind, sense, line = rc.take()
        if sense not in _SENSE_IN:
            raise ParseError("row without a sense", line=line)
        rhs = _signed_number(rc)
        tag = tags.get(rname, rname or f"r{len(rows)}")
        rows.append((terms, _SENSE_IN[sense], rhs, tag))

    # bounds, in declaration order
    declared: dict = {}
    for lineno, line in by_kind.get("bounds", []):
        _bound_line(_Cursor(_tokens(line, lineno)), declared, lineno)
    binaries = []
    for kind in ("bin", "gen"):
        for lineno, line in by_kind.get(kind, []):
            for k, val, ln in _tokens(line, lineno):
                if k != "name":
                    raise ParseError(f"expected a variable name, found {val!r}", line=ln)
                if kind == "gen":
                    raise ParseError("general integer variables are not supported", line=ln)
                binaries.append(val)

    model = Model(name=name)
    order = list(declared)
    for terms, *_ in [(obj_terms,)] + rows:
        for _, names in terms:
            for n in names:
                if n not in declared:
                    declared[n] = [0.0, np.inf]
                    order.append(n)
    for n in binaries:
        if n not in declared:
            declared[n] = [0.0, 1.0]
            order.append(n)
    bins = set(binaries)
    for n in order:
        lo, hi = declared[n]
        model.add_variable(n, lo, hi, BINARY if n in bins else CONTINUOUS)
    for terms, sense, rhs, tag in rows:
        model.add_constraint([(c, tuple(names)) for c, names in terms], sense, rhs, tag)
    model.set_objective([(c, tuple(names)) for c, names in obj_terms], direction)
    return model


def _bound_line(cur: _Cursor, declared: dict, lineno: int) -> None:
    toks = cur.toks
    vals = [v for _, v, _ in toks]
    if len(toks) == 2 and toks[0][0] == "name" and vals[1].lower() == "free":
        declared[vals[0]] = [-np.inf, np.inf]
        return
    # forms: lo <= x <= hi | x <= hi | x >= lo | lo <= x | x = v
    try:
        if toks[0][0] == "name":
            name = cur.take()[1]
            sense = _SENSE_IN[cur.take()[1]]
            v = _signed_number(cur)
            lo, hi = declared.get(name, [0.0, np.inf])
            if sense == "=":
                lo = hi = v
            elif sense == "<=":
                hi = v
            else:
                lo = v
        else:
            lo = _signed_number(cur)
            s1 = _SENSE_IN[cur.take()[1]]
            kind, name, _ = cur.take()
            if kind != "name":
                raise ParseError(f"expected a variable name, found {name!r}", line=lineno)
            old_lo, hi = declared.get(name, [0.0, np.inf])
            if s1 == ">=":      # "v >= x" bounds from above
                lo, hi = old_lo, lo
            elif s1 == "=":
                hi = lo
            if not cur.done():
                s2 = _SENSE_IN[cur.take()[1]]
                v = _signed_number(cur)
                if s2 == "<=":
                    hi = v
                else:
                    lo = v
    except (KeyError, TypeError):
        raise ParseError("malformed bound", line=lineno) from None
    if not cur.done():
        raise ParseError("trailing tokens in bound", line=lineno)
    declared[name] = [lo, hi]


def read_model(path) -> Model:
    with open(path) as fh:
        return parse_model(fh.read())


parse_lp = parse_model
parse_pip = parse_model


# solutions -----------------------------------------------------------------
class ParsedSolution(NamedTuple):
    values: np.ndarray
    warnings: list


_SKIP_PREFIXES = ("objective value", "solution status", "#", "\\")


def parse_solution_text(text: str, model: Model) -> ParsedSolution:
    x = np.zeros(model.num_vars)
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.lower().startswith(_SKIP_PREFIXES):
            continue
        parts = line.split()
        if len(parts) < 2:
            raise ParseError(f"expected 'name value', found {line!r}", line=lineno)
        name, val = parts[0], parts[1]
        if not model.has_var(name):
            raise ParseError(f"unknown variable {name!r}", line=lineno, field=name)
        try:
            x[model.var(name)] = float(val)
        except ValueError:
            raise ParseError(f"bad value {val!r}", line=lineno, field=name) from None
        seen.add(name)
    warnings = [f"{v.name} missing, set to 0" for v in model.variables if v.name not in seen]
    for w in warnings:
        log.warning(w)
    return ParsedSolution(x, warnings)


def parse_solution(path, model: Model) -> ParsedSolution:
    """Read a ``name value`` dump; missing variables become 0 and are reported."""
    with open(path) as fh:
        return parse_solution_text(fh.read(), model)


def format_solution(model: Model, x) -> str:
    x = model.assignment_vector(x)
    return "".join(f"{v.name} {num(x[v.index])}\n" for v in model.variables)


def write_solution(path, model: Model, x) -> None:
    with open(path, "w") as fh:
        fh.write(format_solution(model, x))
