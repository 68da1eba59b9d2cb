"""Solver-agnostic conic program container.

Holds a real variable vector with linear objective and linear / SOC / PSD
constraint blocks, delegates solving to a cvxpy backend, and provides an
independent numpy feasibility checker plus a text dump for cross-checks.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .robustify import LmiBlock, SocBlock

DEFAULT_FEAS_TOL = 1e-8


class SolveStatus(Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    NUMERICAL_TROUBLE = "NumericalTrouble"


@dataclass
class SolveResult:
    status: SolveStatus
    v: np.ndarray | None = None
    objective_value: float | None = None
    solve_time_s: float = 0.0
    message: str = ""


@dataclass
class ConicProgram:
    n_vars: int = 0
    objective: np.ndarray = field(default_factory=lambda: np.zeros(0))
    obj_offset: float = 0.0
    eq_constraints: list = field(default_factory=list)    # (row, rhs)
    ineq_constraints: list = field(default_factory=list)  # (row, rhs, sense in {"<=", ">="})
    soc_blocks: list = field(default_factory=list)        # (SocBlock, index array)
    psd_blocks: list = field(default_factory=list)        # (LmiBlock, index array)
    lb: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ub: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def add_var_block(self, count: int, lb: float = -np.inf, ub: float = np.inf) -> range:
        start = self.n_vars
        self.n_vars += count
        self.objective = np.concatenate([self.objective, np.zeros(count)])
        self.lb = np.concatenate([self.lb, np.full(count, lb)])
        self.ub = np.concatenate([self.ub, np.full(count, ub)])
        return range(start, self.n_vars)

    def set_cost(self, indices, coeffs):
        self.objective[np.asarray(indices)] = coeffs

    def _check_indices(self, idx):
        idx = np.asarray(idx, dtype=int)
        if idx.size and (idx.min() < 0 or idx.max() >= self.n_vars):
            raise IndexError("constraint references variables outside the program")
        return idx

    def _full_row(self, row: np.ndarray) -> np.ndarray:
        """Zero-pad a row written before later variable blocks were added."""
        row = np.asarray(row, dtype=float)
        if row.size > self.n_vars:
            raise ValueError("constraint row longer than the variable vector")
        if row.size < self.n_vars:
            row = np.concatenate([row, np.zeros(self.n_vars - row.size)])
        return row

    def add_eq(self, row: np.ndarray, rhs: float):
        self.eq_constraints.append((np.asarray(row, dtype=float), float(rhs)))

    def add_ineq(self, row: np.ndarray, rhs: float, sense: str = "<="):
        if sense not in ("<=", ">="):
            raise ValueError("sense must be '<=' or '>='")
        self.ineq_constraints.append((np.asarray(row, dtype=float), float(rhs), sense))

    def add_soc(self, block: SocBlock, indices):
        idx = self._check_indices(indices)
        assert block.a_bar.size == idx.size
        self.soc_blocks.append((block, idx))

    def add_psd(self, block: LmiBlock, indices):
        idx = self._check_indices(indices)
        assert block.n_local == idx.size
        self.psd_blocks.append((block, idx))

    def objective_at(self, v: np.ndarray) -> float:
        return float(self.objective @ v + self.obj_offset)


def solve(prog: ConicProgram, solver: str = "CLARABEL", verbose: bool = False) -> SolveResult:
    """Hand the program to the conic backend; never silently returns a point."""
    import cvxpy as cp

    v = cp.Variable(prog.n_vars)
    cons = []
    finite_lb = np.isfinite(prog.lb)
    finite_ub = np.isfinite(prog.ub)
    if finite_lb.any():
        cons.append(v[finite_lb] >= prog.lb[finite_lb])
    if finite_ub.any():
        cons.append(v[finite_ub] <= prog.ub[finite_ub])
    for row, rhs in prog.eq_constraints:
        cons.append(prog._full_row(row) @ v == rhs)
    for row, rhs, sense in prog.ineq_constraints:
        row = prog._full_row(row)
        cons.append(row @ v <= rhs if sense == "<=" else row @ v >= rhs)
    for block, idx in prog.soc_blocks:
        xs = v[idx]
        cons.append(cp.SOC(block.rhs - block.a_bar @ xs, block.scale * (block.theta_sqrt @ xs)))
    for block, idx in prog.psd_blocks:
        expr = cp.reshape(block.g @ v[idx] + block.c, (block.size, block.size), order="C")
        cons.append((expr + expr.T) / 2 >> 0)

    problem = cp.Problem(cp.Minimize(prog.objective @ v), cons)
    t0 = time.perf_counter()
    try:
        with warnings.catch_warnings():
            # inaccurate-solution warnings are surfaced via SolveResult.message
            warnings.simplefilter("ignore")
            problem.solve(solver=solver, verbose=verbose)
    except cp.error.SolverError as exc:
        return SolveResult(SolveStatus.NUMERICAL_TROUBLE, message=str(exc),
                           solve_time_s=time.perf_counter() - t0)
    dt = time.perf_counter() - t0

    status = problem.status
    if status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        msg = "inaccurate" if status == cp.OPTIMAL_INACCURATE else ""
        return SolveResult(SolveStatus.OPTIMAL, v=np.asarray(v.value, dtype=float),
                           objective_value=float(problem.value) + prog.obj_offset,
                           solve_time_s=dt, message=msg)
    if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        return SolveResult(SolveStatus.INFEASIBLE, solve_time_s=dt, message=status)
    if status in (cp.UNBOUNDED, cp.UNBOUNDED_INACCURATE):
        return SolveResult(SolveStatus.UNBOUNDED, solve_time_s=dt, message=status)
    return SolveResult(SolveStatus.NUMERICAL_TROUBLE, solve_time_s=dt, message=str(status))


def max_violation(prog: ConicProgram, v: np.ndarray) -> float:
    """Independent feasibility audit (pure numpy, no solver involvement)."""
    worst = 0.0
    finite_lb = np.isfinite(prog.lb)
    finite_ub = np.isfinite(prog.ub)
    if finite_lb.any():
        worst = max(worst, float(np.max(prog.lb[finite_lb] - v[finite_lb], initial=0.0)))
    if finite_ub.any():
        worst = max(worst, float(np.max(v[finite_ub] - prog.ub[finite_ub], initial=0.0)))
    for row, rhs in prog.eq_constraints:
        worst = max(worst, abs(float(prog._full_row(row) @ v - rhs)))
    for row, rhs, sense in prog.ineq_constraints:
        val = float(prog._full_row(row) @ v - rhs)
        worst = max(worst, val if sense == "<=" else -val)
    for block, idx in prog.soc_blocks:
        worst = max(worst, block.violation(v[idx]))
    for block, idx in prog.psd_blocks:
        worst = max(worst, -block.min_eig(v[idx]))
    return worst


# ---------------------------------------------------------------------------
# Text dump / parse (dense rows, decimal text, 17 significant digits)

def _fmt(x: float) -> str:
    return "%.17g" % x


def _fmt_vec(v) -> str:
    return " ".join(_fmt(x) for x in np.asarray(v, dtype=float).ravel())


def dump_program(prog: ConicProgram) -> str:
    out = ["CONICPROGRAM v1", f"VARS {prog.n_vars}"]
    out.append("LB " + _fmt_vec(prog.lb))
    out.append("UB " + _fmt_vec(prog.ub))
    out.append("OFFSET " + _fmt(prog.obj_offset))
    out.append("OBJ " + _fmt_vec(prog.objective))
    out.append(f"EQ {len(prog.eq_constraints)}")
    for row, rhs in prog.eq_constraints:
        out.append(_fmt(rhs) + " | " + _fmt_vec(prog._full_row(row)))
    out.append(f"INEQ {len(prog.ineq_constraints)}")
    for row, rhs, sense in prog.ineq_constraints:
        out.append(f"{sense} " + _fmt(rhs) + " | " + _fmt_vec(prog._full_row(row)))
    out.append(f"SOC {len(prog.soc_blocks)}")
    for block, idx in prog.soc_blocks:
        out.append("IDX " + " ".join(str(i) for i in idx))
        out.append("A " + _fmt_vec(block.a_bar))
        out.append("TDIAG " + _fmt_vec(np.diag(block.theta_sqrt)))
        out.append("SCALE " + _fmt(block.scale))
        out.append("RHS " + _fmt(block.rhs))
    out.append(f"PSD {len(prog.psd_blocks)}")
    for block, idx in prog.psd_blocks:
        out.append(f"SIZE {block.size} {block.n_local}")
        out.append("IDX " + " ".join(str(i) for i in idx))
        out.append("C " + _fmt_vec(block.c))
        rows, cols = np.nonzero(block.g)
        out.append(f"G {rows.size}")
        for r, cc in zip(rows, cols):
            out.append(f"{r} {cc} " + _fmt(block.g[r, cc]))
    out.append("END")
    return "\n".join(out) + "\n"


def parse_program(text: str) -> ConicProgram:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    it = iter(lines)

    def expect(prefix: str) -> str:
        ln = next(it)
        if not ln.startswith(prefix):
            raise ValueError(f"expected {prefix!r}, got {ln!r}")
        return ln[len(prefix):].strip()

    def floats(s: str) -> np.ndarray:
        return np.array([float(t) for t in s.split()]) if s else np.zeros(0)

    expect("CONICPROGRAM v1")
    n = int(expect("VARS"))
    prog = ConicProgram()
    prog.n_vars = n
    prog.lb = floats(expect("LB"))
    prog.ub = floats(expect("UB"))
    prog.obj_offset = float(expect("OFFSET"))
    prog.objective = floats(expect("OBJ"))
    for _ in range(int(expect("EQ"))):
        rhs_s, _, row_s = next(it).partition(" | ")
        prog.eq_constraints.append((floats(row_s), float(rhs_s)))
    for _ in range(int(expect("INEQ"))):
        head, _, row_s = next(it).partition(" | ")
        sense, rhs_s = head.split()
        prog.ineq_constraints.append((floats(row_s), float(rhs_s), sense))
    for _ in range(int(expect("SOC"))):
        idx = np.array([int(t) for t in expect("IDX").split()], dtype=int)
        a = floats(expect("A"))
        tdiag = floats(expect("TDIAG"))
        scale = float(expect("SCALE"))
        rhs = float(expect("RHS"))
        prog.soc_blocks.append((SocBlock(a, np.diag(tdiag), scale, rhs), idx))
    for _ in range(int(expect("PSD"))):
        size_s = expect("SIZE").split()
        size, n_local = int(size_s[0]), int(size_s[1])
        idx = np.array([int(t) for t in expect("IDX").split()], dtype=int)
        block = LmiBlock(size, n_local)
        block._c[:] = floats(expect("C"))
        nnz = int(expect("G"))
        for _ in range(nnz):
            r_s, c_s, v_s = next(it).split()
            block._g[int(r_s), int(c_s)] = float(v_s)
        prog.psd_blocks.append((block, idx))
    expect("END")
    return prog
