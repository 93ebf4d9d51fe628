"""LP text format export/import.

Writes the standard sections (Minimize / Subject To / Bounds / Binary /
End) so models can be cross-checked with external solvers, and reads the
same dialect back.  Variables are emitted as ``x<id>``; the model's
semantic names appear in a comment header.  A constant term in the
objective carries the model offset.
"""

from __future__ import annotations

import math
import re

from .lp import EQ, GE, LE, MilpModel

INF = math.inf

_NAME = r"[A-Za-z_][A-Za-z0-9_.]*"


def _num(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return f"{v!r}"


def _expr(coefs: dict, offset: float = 0.0) -> str:
    parts = []
    for j in sorted(coefs):
        a = coefs[j]
        sign = "-" if a < 0 else "+"
        parts.append(f"{sign} {_num(abs(a))} x{j}")
    if offset:
        sign = "-" if offset < 0 else "+"
        parts.append(f"{sign} {_num(abs(offset))}")
    if not parts:
        return "0 x0"
    out = " ".join(parts)
    return out[2:] if out.startswith("+ ") else out


def format_lp(model: MilpModel) -> str:
    lines = ["\\ LP export"]
    for name, j in sorted(model.var_index.items(), key=lambda kv: kv[1]):
        lines.append(f"\\ x{j} = {name}")
    lines.append("Minimize")
    obj = {j: c for j, c in enumerate(model.obj) if c != 0.0}
    lines.append(f" obj: {_expr(obj, model.offset)}")
    lines.append("Subject To")
    for i, (coefs, sense, rhs) in enumerate(model.rows):
        op = {LE: "<=", EQ: "=", GE: ">="}[sense]
        lines.append(f" c{i}: {_expr(coefs)} {op} {_num(rhs)}")
    lines.append("Bounds")
    for j in range(model.n_vars):
        lo, hi = model.lower[j], model.upper[j]
        if lo == -INF and hi == INF:
            lines.append(f" x{j} free")
        elif lo == hi:
            lines.append(f" x{j} = {_num(lo)}")
        elif hi == INF:
            lines.append(f" x{j} >= {_num(lo)}")
        elif lo == -INF:
            lines.append(f" x{j} <= {_num(hi)}")
        else:
            lines.append(f" {_num(lo)} <= x{j} <= {_num(hi)}")
    binaries = [j for j in range(model.n_vars) if model.binary[j]]
    if binaries:
        lines.append("Binary")
        lines.append(" " + " ".join(f"x{j}" for j in binaries))
    lines.append("End")
    return "\n".join(lines) + "\n"


def write_lp(model: MilpModel, path):
    with open(path, "w") as fh:
        fh.write(format_lp(model))


class LpFormatError(ValueError):
    pass


_SECTION_RE = re.compile(
    r"^\s*(minimize|maximize|min|max|subject\s+to|s\.t\.|st|bounds|"
    r"binary|binaries|bin|general|generals|end)\s*$",
    re.IGNORECASE,
)

_TERM_RE = re.compile(
    rf"\s*(?P<sign>[+-])?\s*(?P<num>[0-9.]+(?:[eE][+-]?[0-9]+)?)?\s*"
    rf"(?P<var>{_NAME})?")

_BOUND_NUM = rf"(?:[+-]?(?:[0-9.]+(?:[eE][+-]?[0-9]+)?|inf(?:inity)?))"


def _parse_number(tok: str) -> float:
    t = tok.lower()
    if t in ("inf", "infinity", "+inf", "+infinity"):
        return INF
    if t in ("-inf", "-infinity"):
        return -INF
    return float(tok)


def _parse_expr(text: str, get_var) -> tuple[dict, float]:
    coefs: dict = {}
    offset = 0.0
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TERM_RE.match(text, pos)
        if not m or m.end() == pos:
            raise LpFormatError(f"cannot parse expression near {text[pos:pos+20]!r}")
        sign = -1.0 if m.group("sign") == "-" else 1.0
        num = m.group("num")
        var = m.group("var")
        if num is None and var is None:
            raise LpFormatError(f"dangling token in {text!r}")
        coef = sign * (float(num) if num is not None else 1.0)
        if var is None:
            offset += coef
        else:
            j = get_var(var)
            coefs[j] = coefs.get(j, 0.0) + coef
        pos = m.end()
    return coefs, offset


def read_lp(text: str) -> MilpModel:
    """Parse LP text into a model.  Maximize sections are negated into the
    minimize convention (the reported objective flips sign accordingly)."""
    # strip comments, split logical lines
    lines = []
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].rstrip()
        if line.strip():
            lines.append(line)

    section = None
    sense_max = False
    obj_parts: list = []
    row_parts: list = []
    bound_lines: list = []
    binary_names: list = []

    for line in lines:
        m = _SECTION_RE.match(line)
        if m:
            word = re.sub(r"\s+", " ", m.group(1).lower())
            if word in ("minimize", "min"):
                section = "obj"
                sense_max = False
            elif word in ("maximize", "max"):
                section = "obj"
                sense_max = True
            elif word in ("subject to", "s.t.", "st"):
                section = "rows"
            elif word == "bounds":
                section = "bounds"
            elif word in ("binary", "binaries", "bin"):
                section = "binary"
            elif word in ("general", "generals"):
                raise LpFormatError("general integers are not supported")
            else:
                section = "end"
            continue
        if section == "obj":
            obj_parts.append(line)
        elif section == "rows":
            row_parts.append(line)
        elif section == "bounds":
            bound_lines.append(line)
        elif section == "binary":
            binary_names.extend(line.split())
        elif section is None:
            raise LpFormatError(f"content before any section: {line!r}")

    # logical rows may wrap across lines; rejoin then split on labels
    model = MilpModel()
    order: dict = {}

    def get_var(name: str) -> int:
        if name not in order:
            order[name] = model.add_var(name=name, lower=0.0, upper=INF)
        return order[name]

    obj_text = " ".join(obj_parts)
    if ":" in obj_text:
        obj_text = obj_text.split(":", 1)[1]
    obj_coefs, offset = _parse_expr(obj_text, get_var)

    rows_text = " ".join(row_parts)
    # split into labelled constraints on "name:" markers
    pieces = re.split(rf"(?:^|\s)({_NAME})\s*:", rows_text)
    chunks = []
    if pieces[0].strip():
        chunks.append(pieces[0])
    for k in range(1, len(pieces), 2):
        chunks.append(pieces[k + 1])
    for chunk in chunks:
        m = re.search(r"(<=|>=|=)\s*(" + _BOUND_NUM + r")\s*$", chunk.strip())
        if not m:
            raise LpFormatError(f"no relation in constraint {chunk!r}")
        op, rhs = m.group(1), _parse_number(m.group(2))
        coefs, const = _parse_expr(chunk.strip()[: m.start()], get_var)
        sense = {"<=": LE, ">=": GE, "=": EQ}[op]
        model.add_row(coefs, sense, rhs - const)

    for line in bound_lines:
        s = line.strip()
        mfree = re.fullmatch(rf"({_NAME})\s+free", s, re.IGNORECASE)
        if mfree:
            j = get_var(mfree.group(1))
            model.lower[j], model.upper[j] = -INF, INF
            continue
        m2 = re.fullmatch(
            rf"({_BOUND_NUM})\s*<=\s*({_NAME})\s*<=\s*({_BOUND_NUM})", s)
        if m2:
            j = get_var(m2.group(2))
            model.lower[j] = _parse_number(m2.group(1))
            model.upper[j] = _parse_number(m2.group(3))
            continue
        m3 = re.fullmatch(rf"({_NAME})\s*(<=|>=|=)\s*({_BOUND_NUM})", s)
        if m3:
            j = get_var(m3.group(1))
            val = _parse_number(m3.group(3))
            if m3.group(2) == "<=":
                model.upper[j] = val
            elif m3.group(2) == ">=":
                model.lower[j] = val
            else:
                model.lower[j] = model.upper[j] = val
            continue
        raise LpFormatError(f"cannot parse bound line {s!r}")

    for name in binary_names:
        j = get_var(name)
        model.binary[j] = True
        if model.lower[j] == 0.0 and model.upper[j] == INF:
            model.upper[j] = 1.0

    sign = -1.0 if sense_max else 1.0
    for j, c in obj_coefs.items():
        model.obj[j] = sign * c
    model.offset = sign * offset

    # canonical x<id> files should preserve id order
    if order and all(re.fullmatch(r"x\d+", n) for n in order):
        target = {n: int(n[1:]) for n in order}
        if sorted(target.values()) == list(range(len(order))) and any(
                target[n] != j for n, j in order.items()):
            perm = [None] * len(order)
            for n, j in order.items():
                perm[target[n]] = j
            model2 = MilpModel(offset=model.offset)
            remap = {}
            for new_id, old_id in enumerate(perm):
                name = f"x{new_id}"
                model2.add_var(name=name, lower=model.lower[old_id],
                               upper=model.upper[old_id],
                               obj=model.obj[old_id],
                               binary=model.binary[old_id])
                remap[old_id] = new_id
            for coefs, sense, rhs in model.rows:
                model2.add_row({remap[j]: a for j, a in coefs.items()}, sense, rhs)
            return model2
    return model
