"""Fixed-format MPS export/import for ModelSpec objects.

Row and column names are mangled to 8-character tokens (R0000001,
C0000001) to respect the fixed format; the original names are preserved in
leading comment lines (``* COLNAME short original``) so that re-importing a
file written here restores the exact ModelSpec.  Files from other tools
work too, minus the name restoration.  Numbers are written with repr(), the
shortest representation that round-trips a double exactly.
"""

from __future__ import annotations

from pathlib import Path

from paradarp.formulation import BINARY, CONTINUOUS, EQ, GE, LE, ModelSpec

INF = float("inf")

_SENSE_TO_ROW = {LE: "L", GE: "G", EQ: "E"}
_ROW_TO_SENSE = {v: k for k, v in _SENSE_TO_ROW.items()}


class MpsError(ValueError):
    """Malformed or unsupported MPS content."""


def _fmt(value: float) -> str:
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def export_mps(spec: ModelSpec, path) -> None:
    """Write the model in fixed-format MPS (minimization recorded explicitly)."""
    path = Path(path)
    col_short = {i: f"C{i + 1:07d}" for i in range(spec.num_vars)}
    row_short = {i: f"R{i + 1:07d}" for i in range(spec.num_constraints)}

    lines = []
    lines.append(f"* Problem: {spec.name}")
    for i, v in enumerate(spec.variables):
        lines.append(f"* COLNAME {col_short[i]} {v.name}")
    for i, con in enumerate(spec.constraints):
        lines.append(f"* ROWNAME {row_short[i]} {con.name}")
    lines.append(f"NAME          {spec.name[:60]}")
    lines.append("OBJSENSE")
    lines.append("    MIN")
    lines.append("ROWS")
    lines.append(" N  COST")
    for i, con in enumerate(spec.constraints):
        lines.append(f" {_SENSE_TO_ROW[con.sense]}  {row_short[i]}")

    # column-major coefficient map
    by_col: dict[int, list[tuple[str, float]]] = {i: [] for i in range(spec.num_vars)}
    for j, coef in spec.objective:
        by_col[j].append(("COST", coef))
    for i, con in enumerate(spec.constraints):
        for j, coef in con.coeffs:
            by_col[j].append((row_short[i], coef))

    lines.append("COLUMNS")
    in_int = False
    marker = 0
    for i, v in enumerate(spec.variables):
        want_int = v.kind == BINARY
        if want_int != in_int:
            marker += 1
            tag = "'INTORG'" if want_int else "'INTEND'"
            lines.append(f"    MARKER{marker:04d}  'MARKER'                 {tag}")
            in_int = want_int
        for row_name, coef in by_col[i]:
            lines.append(f"    {col_short[i]:<8}  {row_name:<8}  {_fmt(coef)}")
    if in_int:
        marker += 1
        lines.append(f"    MARKER{marker:04d}  'MARKER'                 'INTEND'")

    lines.append("RHS")
    for i, con in enumerate(spec.constraints):
        if con.rhs != 0.0:
            lines.append(f"    RHS       {row_short[i]:<8}  {_fmt(con.rhs)}")

    lines.append("BOUNDS")
    for i, v in enumerate(spec.variables):
        name = col_short[i]
        if v.kind == BINARY:
            lines.append(f" BV BND       {name}")
            continue
        if v.lower == v.upper:
            lines.append(f" FX BND       {name:<8}  {_fmt(v.lower)}")
            continue
        if v.lower == -INF and v.upper == INF:
            lines.append(f" FR BND       {name}")
            continue
        if v.lower == -INF:
            lines.append(f" MI BND       {name}")
        elif v.lower != 0.0:
            lines.append(f" LO BND       {name:<8}  {_fmt(v.lower)}")
        if v.upper != INF:
            lines.append(f" UP BND       {name:<8}  {_fmt(v.upper)}")
    lines.append("ENDATA")
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


def import_mps(path) -> ModelSpec:
    """Parse fixed-format MPS back into a ModelSpec."""
    text = Path(path).read_text(encoding="ascii")
    col_names: dict[str, str] = {}
    row_names: dict[str, str] = {}
    section = None
    obj_row = None
    problem_name = "model"
    maximize = False
    pending_objsense = False

    rows: list[tuple[str, str]] = []  # (sense letter, short name)
    col_order: list[str] = []
    col_int: dict[str, bool] = {}
    col_entries: dict[str, list[tuple[str, float]]] = {}
    rhs: dict[str, float] = {}
    bounds: dict[str, list[tuple[str, float]]] = {}
    in_int = False

    for raw in text.splitlines():
        if not raw.strip():
            continue
        if raw.startswith("*"):
            parts = raw.split()
            if len(parts) >= 4 and parts[1] == "COLNAME":
                col_names[parts[2]] = parts[3]
            elif len(parts) >= 4 and parts[1] == "ROWNAME":
                row_names[parts[2]] = parts[3]
            continue
        head = raw[:1] != " "
        tokens = raw.split()
        if head:
            keyword = tokens[0].upper()
            if keyword in ("NAME", "OBJSENSE", "ROWS", "COLUMNS", "RHS",
                           "RANGES", "BOUNDS", "ENDATA"):
                section = keyword
                pending_objsense = section == "OBJSENSE"
                if keyword == "NAME" and len(tokens) > 1:
                    problem_name = tokens[1]
                if keyword == "ENDATA":
                    break
                continue
            raise MpsError(f"unexpected section header {tokens[0]!r}")
        if pending_objsense:
            maximize = tokens[0].upper() in ("MAX", "MAXIMIZE")
            pending_objsense = False
            continue
        if section == "ROWS":
            sense, name = tokens[0].upper(), tokens[1]
            if sense == "N":
                if obj_row is None:
                    obj_row = name
                continue
            if sense not in _ROW_TO_SENSE:
                raise MpsError(f"unsupported row sense {sense!r}")
            rows.append((sense, name))
        elif section == "COLUMNS":
            if len(tokens) >= 3 and tokens[1] == "'MARKER'":
                in_int = tokens[2] == "'INTORG'"
                continue
            name = tokens[0]
            if name not in col_entries:
                col_entries[name] = []
                col_order.append(name)
                col_int[name] = in_int
            pairs = tokens[1:]
            if len(pairs) % 2:
                raise MpsError(f"odd COLUMNS entry: {raw!r}")
            for rname, value in zip(pairs[::2], pairs[1::2]):
                col_entries[name].append((rname, float(value)))
        elif section == "RHS":
            pairs = tokens[1:]
            for rname, value in zip(pairs[::2], pairs[1::2]):
                rhs[rname] = float(value)
        elif section == "RANGES":
            raise MpsError("RANGES section is not supported")
        elif section == "BOUNDS":
            kind = tokens[0].upper()
            name = tokens[2]
            value = float(tokens[3]) if len(tokens) > 3 else 0.0
            bounds.setdefault(name, []).append((kind, value))

    if obj_row is None:
        raise MpsError("no objective (N) row found")

    spec = ModelSpec(name=problem_name)
    positions: dict[str, int] = {}
    for short in col_order:
        lo, up = 0.0, INF
        kind = CONTINUOUS
        for bkind, value in bounds.get(short, []):
            if bkind == "UP":
                up = value
            elif bkind == "LO":
                lo = value
            elif bkind == "FX":
                lo = up = value
            elif bkind == "FR":
                lo, up = -INF, INF
            elif bkind == "MI":
                lo = -INF
            elif bkind == "PL":
                up = INF
            elif bkind == "BV":
                lo, up = 0.0, 1.0
                kind = BINARY
            else:
                raise MpsError(f"unsupported bound type {bkind!r}")
        if col_int[short] or kind == BINARY:
            if (lo, up) not in ((0.0, 1.0), (0.0, INF)):
                raise MpsError(f"integer column {short} is not binary")
            kind = BINARY
            lo, up = 0.0, 1.0
        positions[short] = spec.add_variable(
            col_names.get(short, short), kind, lo, up)

    row_sense = {name: sense for sense, name in rows}
    row_coeffs: dict[str, list[tuple[int, float]]] = {name: [] for _, name in rows}
    objective: list[tuple[int, float]] = []
    for short in col_order:
        for rname, value in col_entries[short]:
            if rname == obj_row:
                objective.append((positions[short], -value if maximize else value))
            elif rname in row_coeffs:
                row_coeffs[rname].append((positions[short], value))
            else:
                raise MpsError(f"entry for undeclared row {rname!r}")
    spec.objective = objective
    for sense, name in rows:
        spec.add_constraint(
            row_names.get(name, name), row_coeffs[name],
            _ROW_TO_SENSE[sense], rhs.get(name, 0.0),
        )
    return spec
