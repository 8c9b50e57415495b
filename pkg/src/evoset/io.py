"""Text interchange formats for chains, profiles, set families and traces.

Floats are written with 17 significant digits so every file round-trips to
the same doubles.
"""
from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np
import scipy.sparse as sp

from .chain import ChainKernel, build_chain
from .errors import ValidationError
from .profiles import StepFunctionProfile


def fmt(x: float) -> str:
    return f"{float(x):.17g}"


# --------------------------------------------------------------------------
# chains


def dumps_chain(chain: ChainKernel, include_pi: bool = True) -> str:
    """Chain as TSV: ``states n``, then ``x y p`` lines, then an optional pi block."""
    P = chain.P.tocoo()
    order = np.lexsort((P.col, P.row))
    lines = [f"states\t{chain.n}"]
    lines += [f"{P.row[k]}\t{P.col[k]}\t{fmt(P.data[k])}" for k in order]
    if include_pi:
        lines.append("pi")
        lines += [f"{x}\t{fmt(w)}" for x, w in enumerate(chain.pi)]
    return "\n".join(lines) + "\n"


def loads_chain(text: str) -> ChainKernel:
    """Parse the TSV chain format; any whitespace separates fields."""
    lines = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or lines[0][0] != "states" or len(lines[0]) != 2:
        raise ValidationError("chain file must start with 'states <n>'")
    n = int(lines[0][1])
    rows, cols, vals = [], [], []
    pi = None
    body = lines[1:]
    for k, parts in enumerate(body):
        if parts == ["pi"]:
            block = body[k + 1:]
            if len(block) != n:
                raise ValidationError(f"pi block needs {n} lines, found {len(block)}")
            pi = np.zeros(n)
            for x, w in block:
                pi[int(x)] = float(w)
            break
        if len(parts) != 3:
            raise ValidationError(f"bad transition line: {' '.join(parts)!r}")
        x, y, p = int(parts[0]), int(parts[1]), float(parts[2])
        if not (0 <= x < n and 0 <= y < n):
            raise ValidationError(f"state id out of range in line {' '.join(parts)!r}")
        rows.append(x)
        cols.append(y)
        vals.append(p)
    P = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    P.sum_duplicates()
    return build_chain(P, pi=pi)


def write_chain(chain: ChainKernel, path, include_pi: bool = True) -> None:
    Path(path).write_text(dumps_chain(chain, include_pi))


def read_chain(path) -> ChainKernel:
    return loads_chain(Path(path).read_text())


# --------------------------------------------------------------------------
# profiles

PROFILE_HEADER = ["gauge", "floor", "tail", "provenance"]


def dumps_profile(profile: StepFunctionProfile) -> str:
    """Profile CSV: a metadata header row and its values, then ``r,value`` rows."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PROFILE_HEADER)
    w.writerow([profile.gauge, fmt(profile.floor), fmt(profile.tail), profile.provenance])
    w.writerow(["r", "value"])
    for r, v in profile.points:
        w.writerow([fmt(r), fmt(v)])
    return buf.getvalue()


def loads_profile(text: str) -> StepFunctionProfile:
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if len(rows) < 3 or rows[0][:3] != PROFILE_HEADER[:3] or rows[2] != ["r", "value"]:
        raise ValidationError("profile CSV must start with 'gauge,floor,tail' and an 'r,value' header")
    meta = dict(zip(rows[0], rows[1]))
    pts = np.array([[float(a), float(b)] for a, b in rows[3:]])
    if pts.size == 0:
        raise ValidationError("profile CSV has no points")
    return StepFunctionProfile(meta["gauge"], pts[:, 0], pts[:, 1], float(meta["tail"]),
                               float(meta["floor"]), meta.get("provenance", "exact"))


def write_profile(profile: StepFunctionProfile, path) -> None:
    Path(path).write_text(dumps_profile(profile))


def read_profile(path) -> StepFunctionProfile:
    return loads_profile(Path(path).read_text())


# --------------------------------------------------------------------------
# set families and traces


def dumps_family(family: Iterable[Iterable[int]]) -> str:
    return "".join(",".join(str(int(x)) for x in S) + "\n" for S in family)


def loads_family(text: str) -> list[list[int]]:
    return [[int(x) for x in ln.split(",") if x.strip()] for ln in text.splitlines() if ln.strip()]


def write_family(family, path) -> None:
    Path(path).write_text(dumps_family(family))


def read_family(path) -> list[list[int]]:
    return loads_family(Path(path).read_text())


def dumps_trace(trace) -> str:
    """Trace CSV with columns step, set, measure, weight, u (blank u at step 0)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "set", "measure", "weight", "u"])
    us = [""] + [fmt(u) for u in trace.u_draws]
    for k, (S, wt, u) in enumerate(zip(trace.sets, trace.weights, us)):
        w.writerow([k, S.encode(), fmt(S.measure), fmt(wt), u])
    return buf.getvalue()


def write_text(text: str, path, stream: TextIO | None = None) -> None:
    """Write to ``path``, or to ``stream`` when path is None or '-'."""
    if path is None or str(path) == "-":
        stream.write(text)
    else:
        Path(path).write_text(text)
