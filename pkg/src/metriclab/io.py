"""File formats: the .ums metric-space text format, fragment dumps,
permutation and step-function files, and exact-rational JSON reports."""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence, Union

from .katetov import PartialIsometry, UrysohnFragment
from .metric import (MetricSpace, MetricValidationError, RationalLike, frac,
                     metric_violations)


class FormatError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _content_lines(text: str) -> list[tuple[int, str]]:
    """(1-based line number, content) with comments and blanks stripped."""
    out = []
    for i, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            out.append((i, body))
    return out


@dataclass(frozen=True)
class ParsedMatrix:
    kind: str  # "metric" | "squared"
    rows: tuple
    labels: Optional[tuple]


def parse_space_text(text: str) -> ParsedMatrix:
    """Parse the .ums grammar: optional `squared` header, point count,
    optional labels line, then the strict upper triangle row by row."""
    lines = _content_lines(text)
    if not lines:
        raise FormatError("empty file")
    pos = 0
    kind = "metric"
    if lines[pos][1].lower() == "squared":
        kind = "squared"
        pos += 1
        if pos >= len(lines):
            raise FormatError("missing point count after 'squared' header")
    ln, body = lines[pos]
    try:
        n = int(body)
    except ValueError:
        raise FormatError(f"expected point count, got {body!r}", ln) from None
    if n < 1:
        raise FormatError("point count must be positive", ln)
    pos += 1
    labels = None
    if pos < len(lines) and lines[pos][1].startswith("labels:"):
        ln, body = lines[pos]
        labels = tuple(body[len("labels:"):].split())
        if len(labels) != n:
            raise FormatError(f"{len(labels)} labels for {n} points", ln)
        pos += 1
    rows = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n - 1):
        if pos >= len(lines):
            raise FormatError(f"missing distance row for point {i}")
        ln, body = lines[pos]
        entries = body.split()
        if len(entries) != n - 1 - i:
            raise FormatError(
                f"row for point {i} has {len(entries)} entries, expected {n - 1 - i}", ln)
        for k, entry in enumerate(entries):
            j = i + 1 + k
            try:
                val = frac(entry)
            except (ValueError, ZeroDivisionError, TypeError):
                raise FormatError(f"bad rational {entry!r} (column {k + 1})", ln) from None
            rows[i][j] = val
            rows[j][i] = val
        pos += 1
    if pos != len(lines):
        raise FormatError("trailing content after the distance rows", lines[pos][0])
    return ParsedMatrix(kind, tuple(tuple(r) for r in rows), labels)


def parse_space_file(path, *, validate: bool = True) -> MetricSpace:
    """Read a .ums metric space; validation runs by default."""
    pm = parse_space_text(Path(path).read_text())
    if pm.kind != "metric":
        raise FormatError("file holds squared distances, not a metric space")
    if validate:
        return MetricSpace(pm.rows, pm.labels)
    return MetricSpace(pm.rows, pm.labels, _checked=True)


def parse_matrix_file(path) -> ParsedMatrix:
    return parse_space_text(Path(path).read_text())


def format_space(space: MetricSpace, *, squared: bool = False, header: str = "") -> str:
    lines = []
    if header:
        lines.append(f"# {header}")
    if squared:
        lines.append("squared")
    lines.append(str(space.n))
    if space.labels != tuple(f"p{i}" for i in range(space.n)):
        lines.append("labels: " + " ".join(space.labels))
    for i in range(space.n - 1):
        lines.append(" ".join(str(space.rows[i][j]) for j in range(i + 1, space.n)))
    return "\n".join(lines) + "\n"


def write_space(space: MetricSpace, path, **kw) -> None:
    Path(path).write_text(format_space(space, **kw))


def format_partial_isometries(frag: UrysohnFragment) -> str:
    """One line per generator: `k: i->j, i->j, ...` over the forward map."""
    lines = []
    for k, iso in enumerate(frag.generators):
        pairs = ", ".join(f"{p}->{q}" for p, q in sorted(iso.fwd.items()))
        lines.append(f"{k}: {pairs}")
    return "\n".join(lines) + ("\n" if lines else "")


def parse_partial_isometries(text: str) -> list[dict[int, int]]:
    maps: dict[int, dict[int, int]] = {}
    for ln, body in _content_lines(text):
        if ":" not in body:
            raise FormatError("expected `k: i->j, ...`", ln)
        head, rest = body.split(":", 1)
        try:
            k = int(head.strip())
        except ValueError:
            raise FormatError(f"bad generator index {head!r}", ln) from None
        mapping: dict[int, int] = {}
        rest = rest.strip()
        if rest:
            for part in rest.split(","):
                part = part.replace("→", "->").strip()
                if "->" not in part:
                    raise FormatError(f"bad pair {part!r}", ln)
                a, b = part.split("->", 1)
                mapping[int(a)] = int(b)
        if k in maps:
            raise FormatError(f"generator {k} listed twice", ln)
        maps[k] = mapping
    return [maps[k] for k in sorted(maps)]


def dump_fragment(frag: UrysohnFragment, space_path, isos_path) -> None:
    write_space(frag.space, space_path)
    Path(isos_path).write_text(format_partial_isometries(frag))


def restore_fragment(space_path, isos_path, *, budget: int = 10_000) -> UrysohnFragment:
    space = parse_space_file(space_path)
    frag = UrysohnFragment(space, budget=budget)
    for mapping in parse_partial_isometries(Path(isos_path).read_text()):
        frag.add_generator(mapping)
    return frag


def parse_permutations(text: str) -> list[tuple[int, ...]]:
    """One permutation per line as space-separated images."""
    out = []
    for ln, body in _content_lines(text):
        try:
            images = tuple(int(t) for t in body.split())
        except ValueError:
            raise FormatError("permutation entries must be integers", ln) from None
        if sorted(images) != list(range(len(images))):
            raise FormatError("not a permutation of 0..n-1", ln)
        out.append(images)
    return out


def parse_step_function_text(text: str, target) -> "StepFunction":
    """Lines `t_i t_{i+1} value_label`; labels resolve against metric-space
    labels, integers are accepted for any target."""
    from .concentration import StepFunction

    pieces = []
    for ln, body in _content_lines(text):
        parts = body.split()
        if len(parts) != 3:
            raise FormatError("expected `t_i t_{i+1} value`", ln)
        a, b, v = parts
        try:
            av, bv = frac(a), frac(b)
        except (ValueError, TypeError):
            raise FormatError("bad breakpoint", ln) from None
        if isinstance(target, MetricSpace) and v in target.labels:
            val = target.label_index(v)
        else:
            try:
                val = int(v)
            except ValueError:
                raise FormatError(f"unknown value {v!r}", ln) from None
        pieces.append((av, bv, val))
    pieces.sort()
    if not pieces:
        raise FormatError("empty step function")
    cuts = [pieces[0][0]]
    values = []
    for a, b, v in pieces:
        if a != cuts[-1]:
            raise FormatError(f"intervals do not tile [0,1): gap or overlap at {a}")
        cuts.append(b)
        values.append(v)
    return StepFunction(target, cuts, values)


# --------------------------------------------------------------------------
# Reports


def jsonable(obj):
    """Recursively convert a report object; Fractions become 'p/q' strings."""
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, MetricSpace):
        return {"n": obj.n, "labels": list(obj.labels),
                "rows": [[str(v) for v in row] for row in obj.rows]}
    if obj is None or isinstance(obj, (bool, int, float, str)):
        return obj
    return str(obj)


def emit_report(data: dict, path=None, *, timestamp: bool = True) -> str:
    """Serialize with stable field order and exact rationals; optionally
    prepend a timestamp field (the only field runs may differ in)."""
    body = {}
    if timestamp:
        body["timestamp"] = datetime.now(timezone.utc).isoformat()
    body.update(jsonable(data))
    text = json.dumps(body, indent=2) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def parse_report(text: str) -> dict:
    """Round-trip parse; rationals stay as exact 'p/q' strings."""
    return json.loads(text)


def strip_timestamp(report_text: str) -> str:
    data = parse_report(report_text)
    data.pop("timestamp", None)
    return json.dumps(data, indent=2) + "\n"
