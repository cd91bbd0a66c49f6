"""Text export and import of :class:`MIPModel`: free MPS and an LP text format.

Numbers are written with 12 significant digits, so a model read back from
its own export reproduces every coefficient of the written text, and
exporting it again yields the same bytes.
"""

from __future__ import annotations

import math
import re
from typing import Dict, List, Optional, Tuple

from .problem import MIPModel, ModelError

FORMATS = ("mps_free", "lp_text")
OBJ_ROW = "obj"
_LP_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\[\]]*$")
_LP_RESERVED = {"st", "s.t.", "subject", "to", "bounds", "bound", "general", "generals", "gen", "binary",
                "binaries", "bin", "end", "free", "inf", "infinity", "maximize", "minimize", "max", "min"}


class ExportError(ValueError):
    """The model cannot be written or a file cannot be read back."""


def fmt(x: float) -> str:
    if x == math.inf:
        return "inf"
    if x == -math.inf:
        return "-inf"
    s = "%.12g" % x
    return "0" if s == "-0" else s


def _check_names(model: MIPModel, lp: bool) -> None:
    seen: Dict[str, str] = {}
    for kind, names in (("variable", [v.name for v in model.variables]),
                        ("row", [c.name for c in model.constraints])):
        for name in names:
            if not name or any(ch.isspace() for ch in name):
                raise ExportError(f"{kind} name {name!r} cannot be written")
            if lp and (not _LP_NAME.match(name) or name.lower() in _LP_RESERVED):
                raise ExportError(f"{kind} name {name!r} is not a valid LP identifier")
            if name == OBJ_ROW:
                raise ExportError(f"{kind} name {name!r} collides with the objective row")
            if lp and name in seen and seen[name] != kind:
                raise ExportError(f"name {name!r} is used by a row and a variable")
            seen[name] = kind


# ---------------------------------------------------------------------------
# MPS


def write_mps(model: MIPModel) -> str:
    _check_names(model, lp=False)
    out = [f"NAME {model.name}" if model.name and not any(c.isspace() for c in model.name) else "NAME model"]
    out.append("OBJSENSE")
    out.append("    MAX" if model.sense == "max" else "    MIN")
    out.append("ROWS")
    out.append(f" N  {OBJ_ROW}")
    kinds = {"<=": "L", ">=": "G", "=": "E"}
    for con in model.constraints:
        out.append(f" {kinds[con.sense]}  {con.name}")
    entries: Dict[str, List[Tuple[str, float]]] = {v.name: [] for v in model.variables}
    for v, c in model.objective:
        entries[v].append((OBJ_ROW, c))
    for con in model.constraints:
        for v, c in con.terms:
            entries[v].append((con.name, c))
    out.append("COLUMNS")
    in_int = False
    marker = 0
    for var in model.variables:
        if var.is_integral != in_int:
            tag = "'INTORG'" if var.is_integral else "'INTEND'"
            out.append(f"    MARKER{marker} 'MARKER' {tag}")
            marker += 1
            in_int = var.is_integral
        items = entries[var.name] or [(OBJ_ROW, 0.0)]
        for row, c in items:
            out.append(f"    {var.name} {row} {fmt(c)}")
    if in_int:
        out.append(f"    MARKER{marker} 'MARKER' 'INTEND'")
    out.append("RHS")
    if model.objective_constant != 0.0:
        out.append(f"    RHS {OBJ_ROW} {fmt(-model.objective_constant)}")
    for con in model.constraints:
        if con.rhs != 0.0:
            out.append(f"    RHS {con.name} {fmt(con.rhs)}")
    out.append("BOUNDS")
    for var in model.variables:
        name = var.name
        if var.kind == "binary":
            out.append(f" BV BND {name}")
            if var.lo != 0.0:
                out.append(f" LO BND {name} {fmt(var.lo)}")
            if var.hi != 1.0:
                out.append(f" UP BND {name} {fmt(var.hi)}")
            continue
        lo, hi = var.lo, var.hi
        if lo == -math.inf and hi == math.inf:
            out.append(f" FR BND {name}")
            continue
        if var.kind == "integer" or lo != 0.0:
            out.append(f" MI BND {name}" if lo == -math.inf else f" LO BND {name} {fmt(lo)}")
        if hi != math.inf:
            out.append(f" UP BND {name} {fmt(hi)}")
        elif var.kind == "integer":
            out.append(f" PL BND {name}")
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def read_mps(text: str) -> MIPModel:
    try:
        return _read_mps(text)
    except ModelError as exc:
        raise ExportError(str(exc)) from None


def _read_mps(text: str) -> MIPModel:
    section = None
    name = "model"
    sense = "min"
    rows: List[Tuple[str, str]] = []
    row_kind: Dict[str, str] = {}
    obj_row = None
    columns: List[str] = []
    col_kind: Dict[str, str] = {}
    coefs: Dict[str, Dict[str, float]] = {}
    rhs: Dict[str, float] = {}
    bounds: Dict[str, List] = {}
    integer = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.startswith("*"):
            continue
        tok = raw.split()
        if not raw[0].isspace():
            section = tok[0].upper()
            if section == "NAME":
                name = tok[1] if len(tok) > 1 else "model"
            elif section == "OBJSENSE" and len(tok) > 1:
                sense = "max" if tok[1].upper().startswith("MAX") else "min"
            elif section == "ENDATA":
                break
            elif section not in ("ROWS", "COLUMNS", "RHS", "BOUNDS", "RANGES", "OBJSENSE"):
                raise ExportError(f"line {lineno}: unknown section {tok[0]!r}")
            continue
        try:
            if section == "OBJSENSE":
                sense = "max" if tok[0].upper().startswith("MAX") else "min"
            elif section == "ROWS":
                kind, rname = tok[0].upper(), tok[1]
                if rname in row_kind:
                    raise ExportError(f"line {lineno}: duplicate row {rname!r}")
                row_kind[rname] = kind
                if kind == "N":
                    if obj_row is None:
                        obj_row = rname
                else:
                    rows.append((rname, kind))
            elif section == "COLUMNS":
                if len(tok) >= 3 and tok[1] == "'MARKER'":
                    integer = tok[2] == "'INTORG'"
                    continue
                col = tok[0]
                if col not in coefs:
                    columns.append(col)
                    coefs[col] = {}
                    col_kind[col] = "integer" if integer else "continuous"
                for r, v in zip(tok[1::2], tok[2::2]):
                    if r not in row_kind:
                        raise ExportError(f"line {lineno}: unknown row {r!r}")
                    coefs[col][r] = coefs[col].get(r, 0.0) + float(v)
            elif section == "RHS":
                for r, v in zip(tok[1::2], tok[2::2]):
                    rhs[r] = float(v)
            elif section == "BOUNDS":
                bounds.setdefault(tok[2], []).append((tok[0].upper(), float(tok[3]) if len(tok) > 3 else None))
            elif section == "RANGES":
                raise ExportError(f"line {lineno}: RANGES are not supported")
            else:
                raise ExportError(f"line {lineno}: data outside a section")
        except (IndexError, ValueError) as exc:
            if isinstance(exc, ExportError):
                raise
            raise ExportError(f"line {lineno}: malformed entry {raw.strip()!r}") from None
    model = MIPModel(name)
    for col in columns:
        kind = col_kind[col]
        lo, hi = 0.0, math.inf
        if kind == "integer" and col not in bounds:
            hi = 1.0  # MPS convention for integer columns without bounds
        for btype, val in bounds.get(col, []):
            if btype == "BV":
                kind, lo, hi = "binary", 0.0, 1.0
            elif btype == "LO":
                lo = val
            elif btype == "UP":
                hi = val
            elif btype == "FX":
                lo = hi = val
            elif btype == "FR":
                lo, hi = -math.inf, math.inf
            elif btype == "MI":
                lo = -math.inf
            elif btype == "PL":
                hi = math.inf
            else:
                raise ExportError(f"unknown bound type {btype!r}")
        model.add_var(col, kind, lo, hi)
    for b in bounds:
        if b not in coefs:
            raise ExportError(f"bound on unknown column {b!r}")
    senses = {"L": "<=", "G": ">=", "E": "="}
    by_row: Dict[str, List[Tuple[str, float]]] = {r: [] for r, _ in rows}
    objective = []
    for col in columns:
        for r, v in coefs[col].items():
            if r == obj_row:
                objective.append((col, v))
            elif r in by_row:
                by_row[r].append((col, v))
    for r, kind in rows:
        if kind not in senses:
            raise ExportError(f"row {r!r} has unknown type {kind!r}")
        model.add_con(r, by_row[r], senses[kind], rhs.get(r, 0.0))
    constant = -rhs.get(obj_row, 0.0) if obj_row else 0.0
    model.set_objective(sense, objective, constant + 0.0)
    return model


# ---------------------------------------------------------------------------
# LP text


def _lp_expr(terms, width: int = 8) -> List[str]:
    parts = []
    for k, (v, c) in enumerate(terms):
        s = fmt(c)
        if k == 0:
            parts.append(f"{s} {v}")
        elif s.startswith("-"):
            parts.append(f"- {s[1:]} {v}")
        else:
            parts.append(f"+ {s} {v}")
    lines = [" ".join(parts[i:i + width]) for i in range(0, len(parts), width)]
    return lines or ["0"]


def write_lp(model: MIPModel) -> str:
    _check_names(model, lp=True)
    out = [f"\\ {model.name}"]
    out.append("Maximize" if model.sense == "max" else "Minimize")
    terms = list(model.objective)
    if not terms and model.variables:
        terms = [(model.variables[0].name, 0.0)]
    body = _lp_expr(terms)
    if model.objective_constant != 0.0:
        c = fmt(model.objective_constant)
        tail = f"- {c[1:]}" if c.startswith("-") else f"+ {c}"
        body[-1] = f"{body[-1]} {tail}" if terms else c
    out.append(f" {OBJ_ROW}: {body[0]}")
    out.extend(f"   {line}" for line in body[1:])
    out.append("Subject To")
    for con in model.constraints:
        terms = list(con.terms)
        if not terms:
            if not model.variables:
                raise ExportError(f"row {con.name} has no terms and the model has no variables")
            terms = [(model.variables[0].name, 0.0)]
        body = _lp_expr(terms)
        body[-1] = f"{body[-1]} {con.sense} {fmt(con.rhs)}"
        out.append(f" {con.name}: {body[0]}")
        out.extend(f"   {line}" for line in body[1:])
    out.append("Bounds")
    for var in model.variables:
        lo, hi = var.lo, var.hi
        if lo == -math.inf and hi == math.inf:
            out.append(f" {var.name} free")
        else:
            out.append(f" {fmt(lo)} <= {var.name} <= {fmt(hi)}")
    gens = [v.name for v in model.variables if v.kind == "integer"]
    bins = [v.name for v in model.variables if v.kind == "binary"]
    if gens:
        out.append("General")
        out.extend(" " + " ".join(gens[i:i + 8]) for i in range(0, len(gens), 8))
    if bins:
        out.append("Binary")
        out.extend(" " + " ".join(bins[i:i + 8]) for i in range(0, len(bins), 8))
    out.append("End")
    return "\n".join(out) + "\n"


_SECTIONS = {
    "maximize": "max", "maximise": "max", "max": "max", "minimize": "min", "minimise": "min", "min": "min",
    "subject to": "st", "such that": "st", "st": "st", "s.t.": "st",
    "bounds": "bounds", "bound": "bounds", "general": "gen", "generals": "gen", "gen": "gen",
    "binary": "bin", "binaries": "bin", "bin": "bin", "end": "end",
}


def _num(tok: str) -> float:
    t = tok.lower()
    if t in ("inf", "+inf", "infinity", "+infinity"):
        return math.inf
    if t in ("-inf", "-infinity"):
        return -math.inf
    return float(tok)


def _parse_linear(tokens: List[str], where: str) -> Tuple[List[Tuple[str, float]], float]:
    """Terms and constant of ``[+|-] [coef] name ...`` token lists."""
    terms: List[Tuple[str, float]] = []
    constant = 0.0
    sign = 1.0
    coef: Optional[float] = None
    for tok in tokens:
        if tok in ("+", "-"):
            if coef is not None:
                constant += sign * coef
                coef = None
            sign = 1.0 if tok == "+" else -1.0
            continue
        try:
            val = _num(tok)
        except ValueError:
            if not _LP_NAME.match(tok):
                raise ExportError(f"{where}: bad token {tok!r}") from None
            terms.append((tok, sign * (1.0 if coef is None else coef)))
            sign, coef = 1.0, None
            continue
        if coef is not None:
            raise ExportError(f"{where}: two numbers in a row")
        coef = val
    if coef is not None:
        constant += sign * coef
    return terms, constant


def _split(text: str) -> List[Tuple[str, List[str]]]:
    """Section name and its logical lines (continuation lines are joined)."""
    out: List[Tuple[str, List[str]]] = []
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].rstrip()
        if not line.strip():
            continue
        key = line.strip().lower()
        if not raw[0].isspace() and key in _SECTIONS:
            out.append((_SECTIONS[key], []))
            continue
        if not out:
            raise ExportError(f"content before the first section: {line.strip()!r}")
        lines = out[-1][1]
        if raw[:3] == "   " and lines:
            lines[-1] += " " + line.strip()
        else:
            lines.append(line.strip())
    return out


def read_lp(text: str, name: str = "model") -> MIPModel:
    try:
        return _read_lp(text, name)
    except ModelError as exc:
        raise ExportError(str(exc)) from None


def _read_lp(text: str, name: str) -> MIPModel:
    first = text.splitlines()[0] if text else ""
    if first.startswith("\\"):
        name = first[1:].strip() or name
    sense = "min"
    objective: List[Tuple[str, float]] = []
    constant = 0.0
    rows: List[Tuple[str, List[Tuple[str, float]], str, float]] = []
    order: List[str] = []
    bounds: Dict[str, Tuple[float, float]] = {}
    kinds: Dict[str, str] = {}

    def see(v):
        if v not in kinds:
            kinds[v] = "continuous"
            order.append(v)

    for section, lines in _split(text):
        if section in ("max", "min"):
            sense = section
            body = " ".join(lines)
            if ":" in body:
                body = body.split(":", 1)[1]
            objective, constant = _parse_linear(body.split(), "objective")
            for v, _ in objective:
                see(v)
        elif section == "st":
            for line in lines:
                if ":" not in line:
                    raise ExportError(f"constraint without a name: {line!r}")
                rname, body = line.split(":", 1)
                m = re.search(r"(<=|>=|=<|=>|=|<|>)", body)
                if not m:
                    raise ExportError(f"row {rname.strip()}: missing sense")
                sense_tok = {"<": "<=", "=<": "<=", ">": ">=", "=>": ">="}.get(m.group(1), m.group(1))
                terms, const = _parse_linear(body[:m.start()].split(), rname.strip())
                rhs = _num(body[m.end():].strip()) - const
                for v, _ in terms:
                    see(v)
                rows.append((rname.strip(), terms, sense_tok, rhs))
        elif section == "bounds":
            for line in lines:
                tok = line.replace("<=", " <= ").replace(">=", " >= ").split()
                if len(tok) == 2 and tok[1].lower() == "free":
                    see(tok[0])
                    bounds[tok[0]] = (-math.inf, math.inf)
                elif len(tok) == 5 and tok[1] == "<=" and tok[3] == "<=":
                    see(tok[2])
                    bounds[tok[2]] = (_num(tok[0]), _num(tok[4]))
                elif len(tok) == 3 and tok[1] in ("<=", ">="):
                    see(tok[0])
                    lo, hi = bounds.get(tok[0], (0.0, math.inf))
                    bounds[tok[0]] = (lo, _num(tok[2])) if tok[1] == "<=" else (_num(tok[2]), hi)
                else:
                    raise ExportError(f"cannot read bound {line!r}")
        elif section in ("gen", "bin"):
            for line in lines:
                for v in line.split():
                    see(v)
                    kinds[v] = "integer" if section == "gen" else "binary"
        elif section == "end":
            break
    # the Bounds section lists columns in model order; others follow by first use
    listed = list(bounds)
    order = listed + [v for v in order if v not in bounds]
    model = MIPModel(name)
    for v in order:
        lo, hi = bounds.get(v, (0.0, math.inf))
        model.add_var(v, kinds[v], lo, hi)
    for rname, terms, s, rhs in rows:
        model.add_con(rname, terms, s, rhs)
    model.set_objective(sense, objective, constant)
    return model


def export_model(model: MIPModel, format: str = "mps_free") -> str:
    """Deterministic text of ``model`` in ``mps_free`` or ``lp_text`` format."""
    if format == "mps_free":
        return write_mps(model)
    if format == "lp_text":
        return write_lp(model)
    raise ExportError(f"unknown export format {format!r}; choose from {FORMATS}")


def import_model(text: str, format: str = "mps_free") -> MIPModel:
    if format == "mps_free":
        return read_mps(text)
    if format == "lp_text":
        return read_lp(text)
    raise ExportError(f"unknown export format {format!r}; choose from {FORMATS}")
