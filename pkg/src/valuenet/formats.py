"""Instance files: native JSON and MPS with an AUX companion.

AUX lines name the follower side of an MPS model: ``N k`` follower columns,
``M k`` follower rows, ``LC j`` a follower column index, ``LR i`` a follower
row index, ``LO v`` follower objective coefficients aligned with ``LC`` and
``OS s`` the follower sense (1 minimizes, -1 maximizes).  Column indices
count MPS columns in order of appearance; row indices count constraint rows
(the objective excluded).
"""

from __future__ import annotations

import json
import math
from fractions import Fraction
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .instance import BilevelInstance, InstanceError, validate_instance

FORMAT_VERSION = 1

_number = {"type": "number"}
_exact = {"oneOf": [{"type": "integer"}, {"type": "string", "pattern": r"^-?\d+(/\d+)?$"}]}
SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["format", "c", "p", "d", "A", "B", "b"],
    "additionalProperties": False,
    "properties": {
        "format": {"const": FORMAT_VERSION},
        "name": {"type": "string"},
        "c": {"type": "array", "items": _number},
        "p": {"type": "array", "items": _number},
        "d": {"type": "array", "items": _number},
        "A": {"type": "array", "items": {"type": "array", "items": _exact}},
        "B": {"type": "array", "items": {"type": "array", "items": _exact}},
        "b": {"type": "array", "items": _exact},
        "Gx": {"type": "array", "items": {"type": "array", "items": _number}},
        "Gy": {"type": "array", "items": {"type": "array", "items": _number}},
        "h": {"type": "array", "items": _number},
        "row_scale": {"type": "array", "items": {"type": "integer", "minimum": 1}},
    },
}


class FormatError(InstanceError):
    """Malformed instance file; ``line`` is set for line-oriented formats."""

    def __init__(self, message: str, line: int | None = None) -> None:
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


def _float_out(v: float):
    v = float(v)
    if not math.isfinite(v):
        raise FormatError(f"non-finite value {v}")
    if v.is_integer() and abs(v) < 2**53 and math.copysign(1.0, v) > 0:
        return int(v)
    return v


def _exact_out(v):
    if isinstance(v, Fraction) and v.denominator != 1:
        return f"{v.numerator}/{v.denominator}"
    return int(v)


def _exact_in(v):
    return Fraction(v) if isinstance(v, str) else int(v)


def instance_to_dict(inst: BilevelInstance) -> dict[str, Any]:
    out = {
        "format": FORMAT_VERSION,
        "name": inst.name,
        "c": [_float_out(v) for v in inst.c],
        "p": [_float_out(v) for v in inst.p],
        "d": [_float_out(v) for v in inst.d],
        "A": [[_exact_out(v) for v in row] for row in inst.A],
        "B": [[_exact_out(v) for v in row] for row in inst.B],
        "b": [_exact_out(v) for v in inst.b],
        "Gx": [[_float_out(v) for v in row] for row in inst.Gx],
        "Gy": [[_float_out(v) for v in row] for row in inst.Gy],
        "h": [_float_out(v) for v in inst.h],
    }
    if any(s != 1 for s in inst.row_scale):
        out["row_scale"] = list(inst.row_scale)
    return out


def write_native(inst: BilevelInstance) -> str:
    return json.dumps(instance_to_dict(inst), indent=1) + "\n"


def _matrix(rows: list, cols: int, conv) -> np.ndarray | list:
    if not rows:
        return np.zeros((0, cols))
    return [[conv(v) for v in row] for row in rows]


def instance_from_dict(data: Any) -> BilevelInstance:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise FormatError(f"{err.json_path}: {err.message}")
    n_l, n_f = len(data["c"]), len(data["p"])
    if len(data["d"]) != n_f:
        raise FormatError(f"$.d: expected {n_f} entries, got {len(data['d'])}")
    m = len(data["b"])
    m_L = len(data.get("h", []))
    for key, rows, cols in (("A", m, n_l), ("B", m, n_f), ("Gx", m_L, n_l), ("Gy", m_L, n_f)):
        mat = data.get(key, [])
        if len(mat) != rows or any(len(r) != cols for r in mat):
            raise FormatError(f"$.{key}: expected a {rows}x{cols} matrix")
    exact = lambda rows, cols: [[_exact_in(v) for v in r] for r in rows] if rows else np.zeros((0, cols), dtype=np.int64)
    inst = BilevelInstance.create(
        c=[float(v) for v in data["c"]], p=[float(v) for v in data["p"]], d=[float(v) for v in data["d"]],
        A=exact(data["A"], n_l), B=exact(data["B"], n_f), b=[_exact_in(v) for v in data["b"]],
        Gx=_matrix(data.get("Gx", []), n_l, float), Gy=_matrix(data.get("Gy", []), n_f, float),
        h=[float(v) for v in data.get("h", [])], name=data.get("name", "instance"),
        row_scale=data.get("row_scale"),
    )
    return inst


def read_native(text: str) -> BilevelInstance:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", exc.lineno) from exc
    return instance_from_dict(data)


# MPS --------------------------------------------------------------------

_SECTIONS = {"NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"}


def _num(token: str, line: int) -> Fraction:
    try:
        return Fraction(token)
    except (ValueError, ZeroDivisionError):
        raise FormatError(f"bad number {token!r}", line) from None


def _exact_from_fraction(f: Fraction):
    return int(f) if f.denominator == 1 else f


def _float_token(v: float) -> str:
    return repr(float(v))


def _float_from_token(token: str, line: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise FormatError(f"bad number {token!r}", line) from None


def parse_mps_aux(mps_text: str, aux_text: str) -> BilevelInstance:
    """Read an MPS model whose follower side is described by ``aux_text``."""
    name = "instance"
    section = None
    obj_row = None
    maximize = False
    rows: dict[str, str] = {}
    row_order: list[str] = []
    cols: dict[str, int] = {}
    col_order: list[str] = []
    entries: dict[tuple[str, str], str] = {}
    integer_cols: set[str] = set()
    in_int = False
    rhs: dict[str, str] = {}
    bounds: dict[str, list] = {}
    for lineno, raw in enumerate(mps_text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("*"):
            continue
        tokens = raw.split()
        if not raw[0].isspace():
            head = tokens[0].upper()
            if head == "NAME":
                name = tokens[1] if len(tokens) > 1 else name
                section = "NAME"
                continue
            if head == "OBJSENSE":
                section = "OBJSENSE"
                if len(tokens) > 1:
                    maximize = tokens[1].upper() in ("MAX", "MAXIMIZE")
                continue
            if head in _SECTIONS:
                section = head
                if head == "ENDATA":
                    break
                continue
            if section != "OBJSENSE":
                raise FormatError(f"unknown section {tokens[0]!r}", lineno)
        if section == "OBJSENSE":
            maximize = tokens[0].upper() in ("MAX", "MAXIMIZE")
        elif section == "ROWS":
            if len(tokens) != 2 or tokens[0].upper() not in ("N", "G", "L", "E"):
                raise FormatError(f"bad ROWS entry {raw.strip()!r}", lineno)
            sense, rname = tokens[0].upper(), tokens[1]
            if sense == "N":
                if obj_row is None:
                    obj_row = rname
                rows[rname] = "N"
                continue
            rows[rname] = sense
            row_order.append(rname)
        elif section == "COLUMNS":
            if len(tokens) >= 3 and tokens[1].strip("'").upper() == "MARKER":
                marker = tokens[2].strip("'").upper()
                in_int = marker == "INTORG"
                continue
            if len(tokens) not in (3, 5):
                raise FormatError(f"bad COLUMNS entry {raw.strip()!r}", lineno)
            cname = tokens[0]
            if cname not in cols:
                cols[cname] = len(col_order)
                col_order.append(cname)
            if in_int:
                integer_cols.add(cname)
            for rname, value in zip(tokens[1::2], tokens[2::2]):
                if rname not in rows:
                    raise FormatError(f"unknown row {rname!r}", lineno)
                _num(value, lineno)
                entries[(cname, rname)] = value
        elif section == "RHS":
            pairs = tokens[1:] if len(tokens) % 2 == 1 else tokens
            for rname, value in zip(pairs[0::2], pairs[1::2]):
                if rname not in rows:
                    raise FormatError(f"unknown row {rname!r}", lineno)
                _num(value, lineno)
                rhs[rname] = value
        elif section == "BOUNDS":
            if len(tokens) < 3:
                raise FormatError(f"bad BOUNDS entry {raw.strip()!r}", lineno)
            kind, cname = tokens[0].upper(), tokens[2]
            if cname not in cols:
                raise FormatError(f"unknown column {cname!r}", lineno)
            value = _num(tokens[3], lineno) if len(tokens) > 3 else None
            lo, hi = bounds.get(cname, [Fraction(0), None])
            if kind == "BV":
                lo, hi = Fraction(0), Fraction(1)
                integer_cols.add(cname)
            elif kind == "UP":
                hi = value
            elif kind == "LO":
                lo = value
            elif kind == "FX":
                lo = hi = value
            else:
                raise FormatError(f"column {cname!r} has unsupported bound type {kind}", lineno)
            bounds[cname] = [lo, hi]
        else:
            raise FormatError(f"data outside a section: {raw.strip()!r}", lineno)
    for cname in col_order:
        lo, hi = bounds.get(cname, [Fraction(0), None])
        if cname not in integer_cols or lo != 0 or hi != 1:
            raise FormatError(f"column {cname!r} is not binary")
    aux = _parse_aux(aux_text)
    n_cols = len(col_order)
    for j in aux["LC"]:
        if not 0 <= j < n_cols:
            raise FormatError(f"follower column index {j} out of range", aux["lines"]["LC"][j])
    for i in aux["LR"]:
        if not 0 <= i < len(row_order):
            raise FormatError(f"follower row index {i} out of range", aux["lines"]["LR"][i])
    if aux["N"] is not None and aux["N"] != len(aux["LC"]):
        raise FormatError(f"N says {aux['N']} follower columns but {len(aux['LC'])} are listed")
    if aux["M"] is not None and aux["M"] != len(aux["LR"]):
        raise FormatError(f"M says {aux['M']} follower rows but {len(aux['LR'])} are listed")
    if len(aux["LO"]) != len(aux["LC"]):
        raise FormatError("LO must give one coefficient per LC column")
    fol_cols = [col_order[j] for j in aux["LC"]]
    lead_cols = [c for c in col_order if c not in set(fol_cols)]
    fol_rows = [row_order[i] for i in aux["LR"]]
    lead_rows = [r for r in row_order if r not in set(fol_rows)]

    def obj(cname: str) -> float:
        token = entries.get((cname, obj_row)) if obj_row else None
        if token is None:
            return 0.0
        v = _float_from_token(token, None)
        return -v if maximize else v

    c = [obj(cn) for cn in lead_cols]
    p = [obj(cn) for cn in fol_cols]
    d = [(-v if aux["OS"] == -1 else v) for v in aux["LO"]]

    def expand(rnames: list[str], exact: bool):
        left, right, rhs_out = [], [], []
        for rname in rnames:
            conv = (lambda t: _num(t, None)) if exact else (lambda t: _float_from_token(t, None))
            zero = Fraction(0) if exact else 0.0
            lrow = [conv(entries[(cn, rname)]) if (cn, rname) in entries else zero for cn in lead_cols]
            rrow = [conv(entries[(cn, rname)]) if (cn, rname) in entries else zero for cn in fol_cols]
            r = conv(rhs[rname]) if rname in rhs else zero
            sense = rows[rname]
            if sense in ("G", "E"):
                left.append(lrow), right.append(rrow), rhs_out.append(r)
            if sense in ("L", "E"):
                left.append([-v for v in lrow]), right.append([-v for v in rrow]), rhs_out.append(-r)
        return left, right, rhs_out

    A, B, b = expand(fol_rows, exact=True)
    Gx, Gy, h = expand(lead_rows, exact=False)
    return BilevelInstance.create(
        c=c, p=p, d=d,
        A=[[_exact_from_fraction(v) for v in row] for row in A] if A else np.zeros((0, len(lead_cols)), dtype=np.int64),
        B=[[_exact_from_fraction(v) for v in row] for row in B] if B else np.zeros((0, len(fol_cols)), dtype=np.int64),
        b=[_exact_from_fraction(v) for v in b],
        Gx=Gx if Gx else None, Gy=Gy if Gy else None, h=h if h else None, name=name,
    )


def _parse_aux(text: str) -> dict[str, Any]:
    out: dict[str, Any] = {"N": None, "M": None, "LC": [], "LR": [], "LO": [], "OS": 1,
                           "lines": {"LC": {}, "LR": {}}}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split()
        if not tokens or tokens[0].startswith("#"):
            continue
        key = tokens[0].upper()
        if key not in ("N", "M", "LC", "LR", "LO", "OS") or len(tokens) < 2:
            raise FormatError(f"bad AUX entry {raw.strip()!r}", lineno)
        try:
            if key in ("N", "M"):
                out[key] = int(tokens[1])
            elif key in ("LC", "LR"):
                for t in tokens[1:]:
                    idx = int(t)
                    out["lines"][key].setdefault(idx, lineno)
                    out[key].append(idx)
            elif key == "LO":
                out["LO"].extend(float(t) for t in tokens[1:])
            else:
                out["OS"] = int(tokens[1])
                if out["OS"] not in (1, -1):
                    raise FormatError(f"OS must be 1 or -1, got {out['OS']}", lineno)
        except ValueError:
            raise FormatError(f"bad AUX entry {raw.strip()!r}", lineno) from None
    return out


def _is_positive_zero(v: float) -> bool:
    return v == 0 and math.copysign(1.0, v) > 0


def write_mps_aux(inst: BilevelInstance) -> tuple[str, str]:
    """MPS text with leader rows first, then interaction rows, plus the AUX text."""
    if not inst.is_integral:
        raise InstanceError("MPS export needs integral interaction data; apply scale_to_integer first")
    name = inst.name.split()[0] if inst.name.strip() else "instance"
    xcols = [f"X{k}" for k in range(inst.n_l)]
    ycols = [f"Y{k}" for k in range(inst.n_f)]
    lrows = [f"L{i}" for i in range(inst.m_L)]
    irows = [f"I{i}" for i in range(inst.m)]
    out = [f"NAME {name}", "ROWS", " N OBJ"]
    out += [f" G {r}" for r in lrows + irows]
    out.append("COLUMNS")
    out.append("    MARKER                 'MARKER'                 'INTORG'")

    def column(cname, obj, lead, inter):
        lines = []
        if not _is_positive_zero(obj):
            lines.append(f"    {cname} OBJ {_float_token(obj)}")
        for r, v in zip(lrows, lead):
            if not _is_positive_zero(v):
                lines.append(f"    {cname} {r} {_float_token(v)}")
        for r, v in zip(irows, inter):
            if v != 0:
                lines.append(f"    {cname} {r} {int(v)}")
        return lines or [f"    {cname} OBJ 0"]

    for k, cname in enumerate(xcols):
        out += column(cname, inst.c[k], inst.Gx[:, k], inst.A[:, k])
    for k, cname in enumerate(ycols):
        out += column(cname, inst.p[k], inst.Gy[:, k], inst.B[:, k])
    out.append("    MARKER                 'MARKER'                 'INTEND'")
    out.append("RHS")
    for r, v in zip(lrows, inst.h):
        if not _is_positive_zero(v):
            out.append(f"    RHS {r} {_float_token(v)}")
    for r, v in zip(irows, inst.b):
        if v != 0:
            out.append(f"    RHS {r} {int(v)}")
    out.append("BOUNDS")
    out += [f" BV BND {cname}" for cname in xcols + ycols]
    out.append("ENDATA")
    aux = [f"N {inst.n_f}", f"M {inst.m}"]
    aux += [f"LC {inst.n_l + k}" for k in range(inst.n_f)]
    aux += [f"LR {inst.m_L + i}" for i in range(inst.m)]
    aux += [f"LO {_float_token(v)}" for v in inst.d]
    aux.append("OS 1")
    return "\n".join(out) + "\n", "\n".join(aux) + "\n"


def load_instance(path: str | Path, aux: str | Path | None = None) -> BilevelInstance:
    """Read ``.json`` natively, anything else as MPS with an AUX file (default: same stem, ``.aux``)."""
    path = Path(path)
    try:
        if path.suffix.lower() == ".json":
            inst = read_native(path.read_text())
        else:
            aux_path = Path(aux) if aux is not None else path.with_suffix(".aux")
            inst = parse_mps_aux(path.read_text(), aux_path.read_text())
    except OSError as exc:
        raise FormatError(f"cannot read {exc.filename}: {exc.strerror}") from exc
    issues = validate_instance(inst)
    if issues:
        raise FormatError(f"{path}: " + "; ".join(issues))
    return inst


def save_instance(inst: BilevelInstance, path: str | Path) -> list[Path]:
    """Write ``.json`` natively, otherwise MPS plus a sibling ``.aux``; returns the written paths."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        path.write_text(write_native(inst))
        return [path]
    mps, aux = write_mps_aux(inst)
    path.write_text(mps)
    aux_path = path.with_suffix(".aux")
    aux_path.write_text(aux)
    return [path, aux_path]


__all__ = [
    "FORMAT_VERSION", "FormatError", "SCHEMA", "instance_from_dict", "instance_to_dict", "load_instance",
    "parse_mps_aux", "read_native", "save_instance", "write_mps_aux", "write_native",
]
