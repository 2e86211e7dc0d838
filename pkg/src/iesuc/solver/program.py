"""Mixed-integer programs with linear and second-order cone rows.

A :class:`ConicProgram` is

    minimize    c @ x + c0
    subject to  row_lo <= A @ x <= row_hi
                lb <= x <= ub,  x[integer] integral
                || (u_1(x), ..., u_k(x)) ||_2 <= t(x)   for every cone

where ``t`` and the ``u_i`` are affine expressions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class SolverError(RuntimeError):
    """Numerical failure inside a solver; never swallowed."""


@dataclass(frozen=True)
class Affine:
    """``const + sum(coefs[k] * x[cols[k]])``."""

    cols: tuple[int, ...]
    coefs: tuple[float, ...]
    const: float = 0.0

    @classmethod
    def of(cls, terms: dict[int, float] | None = None, const: float = 0.0) -> "Affine":
        terms = terms or {}
        return cls(tuple(terms), tuple(float(v) for v in terms.values()), float(const))

    def value(self, x: np.ndarray) -> float:
        if not self.cols:
            return self.const
        return self.const + float(np.dot(self.coefs, x[list(self.cols)]))


@dataclass(frozen=True)
class SocConstraint:
    """``||members|| <= bound``, all sides affine in x."""

    bound: Affine
    members: tuple[Affine, ...]
    tag: str = ""

    def residual(self, x: np.ndarray) -> float:
        """Positive when violated."""
        u = np.array([m.value(x) for m in self.members])
        return float(np.linalg.norm(u)) - self.bound.value(x)


@dataclass
class ConicProgram:
    c: np.ndarray
    A: sp.csr_matrix
    row_lo: np.ndarray
    row_hi: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integer: np.ndarray
    cones: list[SocConstraint] = field(default_factory=list)
    c0: float = 0.0
    row_tags: list[str] | None = None
    names: list[str] | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.size
        self.A = sp.csr_matrix(self.A, shape=(self.A.shape[0], n))
        self.row_lo = np.asarray(self.row_lo, dtype=float)
        self.row_hi = np.asarray(self.row_hi, dtype=float)
        self.lb = np.asarray(self.lb, dtype=float)
        self.ub = np.asarray(self.ub, dtype=float)
        self.integer = np.asarray(self.integer, dtype=bool)
        if not (self.lb.size == self.ub.size == self.integer.size == n):
            raise ValueError("bound/integrality arrays must match the number of columns")
        if not (self.row_lo.size == self.row_hi.size == self.A.shape[0]):
            raise ValueError("row bound arrays must match the number of rows")
        if self.integer.any() and not np.all(np.isfinite(self.lb[self.integer])
                                             & np.isfinite(self.ub[self.integer])):
            raise ValueError("integer variables need finite bounds")

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def m(self) -> int:
        return self.A.shape[0]

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x) + self.c0

    def with_objective(self, c: np.ndarray, c0: float) -> "ConicProgram":
        return ConicProgram(c, self.A, self.row_lo, self.row_hi, self.lb, self.ub,
                            self.integer, self.cones, c0, self.row_tags, self.names)

    def with_bounds(self, lb: np.ndarray, ub: np.ndarray) -> "ConicProgram":
        return ConicProgram(self.c, self.A, self.row_lo, self.row_hi, lb, ub,
                            self.integer, self.cones, self.c0, self.row_tags, self.names)

    def relaxed(self) -> "ConicProgram":
        """Same program with integrality dropped."""
        return ConicProgram(self.c, self.A, self.row_lo, self.row_hi, self.lb, self.ub,
                            np.zeros(self.n, dtype=bool), self.cones, self.c0,
                            self.row_tags, self.names)

    def max_row_violation(self, x: np.ndarray) -> float:
        if self.m == 0:
            return 0.0
        ax = self.A @ x
        return float(max(np.max(self.row_lo - ax, initial=0.0), np.max(ax - self.row_hi, initial=0.0)))

    def max_cone_violation(self, x: np.ndarray) -> float:
        return max((k.residual(x) for k in self.cones), default=0.0)


@dataclass
class SolverOptions:
    gap: float = 1e-4
    cone_tol: float = 1e-7
    int_tol: float = 1e-6
    node_limit: int = 100_000
    time_limit: float = math.inf
    max_oa_rounds: int = 200
    branching: str = "most-fractional"
    lp_engine: str = "highs"
    heuristics: bool = True

    def __post_init__(self):
        if self.gap <= 0 or self.cone_tol <= 0 or self.int_tol <= 0:
            raise ValueError("solver tolerances must be > 0")
        if self.cone_tol < 1e-9:
            # LP rows are only met to 1e-9, so a tighter cone test cannot be satisfied
            raise ValueError("cone_tol below the LP feasibility tolerance (1e-9)")
        if self.branching not in ("most-fractional",):
            raise ValueError(f"unknown branching rule {self.branching!r}")


@dataclass
class NodeEvent:
    node: int
    depth: int
    bound: float
    incumbent: float
    global_bound: float


@dataclass
class SolveResult:
    status: str  # optimal | infeasible | unbounded | limit
    x: np.ndarray | None
    objective: float
    bound: float
    gap: float
    nodes: int = 0
    lp_solves: int = 0
    cuts: int = 0
    trace: list[NodeEvent] = field(default_factory=list)
    oa_history: list[list[float]] = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


# --- exchange files --------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def _affine_line(a: Affine) -> str:
    terms = " ".join(f"{c}:{_fmt(v)}" for c, v in zip(a.cols, a.coefs))
    return f"{_fmt(a.const)} {terms}".rstrip()


def _parse_affine(text: str) -> Affine:
    parts = text.split()
    terms = {}
    for tok in parts[1:]:
        c, v = tok.split(":")
        terms[int(c)] = float(v)
    return Affine.of(terms, float(parts[0]))


def write_program(p: ConicProgram, path: str | Path) -> None:
    """Sparse text export: one line per column, row and cone member."""
    lines = ["IESUC-PROGRAM 1", f"OBJCONST {_fmt(p.c0)}", f"VARS {p.n}"]
    for k in range(p.n):
        name = p.names[k] if p.names else f"x{k}"
        kind = "I" if p.integer[k] else "C"
        lines.append(f"{k} {name} {kind} {_fmt(p.lb[k])} {_fmt(p.ub[k])} {_fmt(p.c[k])}")
    lines.append(f"ROWS {p.m}")
    A = p.A.tocsr()
    for r in range(p.m):
        tag = p.row_tags[r] if p.row_tags else "row"
        lo, hi = A.indptr[r], A.indptr[r + 1]
        terms = " ".join(f"{c}:{_fmt(v)}" for c, v in zip(A.indices[lo:hi], A.data[lo:hi]))
        lines.append(f"{r} {tag} {_fmt(p.row_lo[r])} {_fmt(p.row_hi[r])} {terms}".rstrip())
    lines.append(f"CONES {len(p.cones)}")
    for k, cone in enumerate(p.cones):
        lines.append(f"CONE {k} {cone.tag or 'soc'} {len(cone.members)}")
        lines.append("B " + _affine_line(cone.bound))
        for mem in cone.members:
            lines.append("M " + _affine_line(mem))
    lines.append("END")
    Path(path).write_text("\n".join(lines) + "\n")


def read_program(path: str | Path) -> ConicProgram:
    lines = Path(path).read_text().splitlines()
    it = iter(lines)
    if next(it).split()[0] != "IESUC-PROGRAM":
        raise ValueError(f"{path}: not a program file")
    c0 = float(next(it).split()[1])
    n = int(next(it).split()[1])
    names, kinds, lb, ub, c = [], [], [], [], []
    for _ in range(n):
        _, name, kind, l, u, obj = next(it).split()
        names.append(name)
        kinds.append(kind == "I")
        lb.append(float(l))
        ub.append(float(u))
        c.append(float(obj))
    m = int(next(it).split()[1])
    rows, cols, vals, lo, hi, tags = [], [], [], [], [], []
    for r in range(m):
        parts = next(it).split()
        tags.append(parts[1])
        lo.append(float(parts[2]))
        hi.append(float(parts[3]))
        for tok in parts[4:]:
            cc, v = tok.split(":")
            rows.append(r)
            cols.append(int(cc))
            vals.append(float(v))
    ncones = int(next(it).split()[1])
    cones = []
    for _ in range(ncones):
        _, _, tag, nm = next(it).split()
        bound = _parse_affine(next(it)[2:])
        members = tuple(_parse_affine(next(it)[2:]) for _ in range(int(nm)))
        cones.append(SocConstraint(bound, members, tag))
    A = sp.csr_matrix((vals, (rows, cols)), shape=(m, n))
    return ConicProgram(np.array(c), A, np.array(lo), np.array(hi), np.array(lb),
                        np.array(ub), np.array(kinds, dtype=bool), cones, c0, tags, names)


def write_result(res: SolveResult, path: str | Path) -> None:
    lines = [f"STATUS {res.status}", f"OBJECTIVE {_fmt(res.objective)}",
             f"BOUND {_fmt(res.bound)}", f"GAP {_fmt(res.gap)}"]
    if res.x is None:
        lines.append("VALUES 0")
    else:
        lines.append(f"VALUES {res.x.size}")
        lines.extend(_fmt(v) for v in res.x)
    Path(path).write_text("\n".join(lines) + "\n")


def write_node_trace(trace: list[NodeEvent], path: str | Path) -> None:
    """One line per branch-and-bound node: id, depth, node bound, incumbent, global bound."""
    lines = ["node depth bound incumbent global_bound"]
    lines += [f"{e.node} {e.depth} {_fmt(e.bound)} {_fmt(e.incumbent)} {_fmt(e.global_bound)}"
              for e in trace]
    Path(path).write_text("\n".join(lines) + "\n")


def read_result(path: str | Path) -> SolveResult:
    lines = Path(path).read_text().splitlines()
    head = dict(line.split(maxsplit=1) for line in lines[:5])
    n = int(head["VALUES"])
    x = np.array([float(v) for v in lines[5:5 + n]]) if n else None
    return SolveResult(head["STATUS"], x, float(head["OBJECTIVE"]), float(head["BOUND"]),
                       float(head["GAP"]))
