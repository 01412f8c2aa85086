"""Linear programming and branch-and-bound kernel.

A small dense revised-simplex solver with dual prices, plus a depth-first
branch-and-bound layer with relative-gap and wall-time controls. The kernel
is generic: it knows nothing about optics. Problems are always stated as
maximization; variables default to [0, inf) bounds.

Scale target: a few hundred rows, a few thousand columns (master problems
whose column pool grows while the row set stays fixed). The basis inverse
is kept dense, updated in product form, and refactorized periodically.
Entering columns follow Dantzig's rule with an automatic switch to Bland's
rule after a degenerate stall, so the solver cannot cycle.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

INF = math.inf

LE, EQ, GE = "<=", "==", ">="
_RELATIONS = (LE, EQ, GE)

RowSpec = Tuple[Dict[int, float], str, float]


@dataclass
class SolveOptions:
    relative_gap: float = 0.0
    time_limit: Optional[float] = None  # seconds
    feasibility_tolerance: float = 1e-7
    integrality_tolerance: float = 1e-6

    def __post_init__(self):
        if self.feasibility_tolerance <= 0 or self.integrality_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if self.relative_gap < 0:
            raise ValueError("relative gap must be nonnegative")
        if self.time_limit is not None and self.time_limit <= 0:
            raise ValueError("time limit must be positive")


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded | gap_reached | time_limit
    objective: Optional[float]
    x: Optional[np.ndarray]
    duals: Optional[np.ndarray]  # per original row; LP relaxations only
    relative_gap: float
    wall_time: float
    iterations: int = 0
    best_bound: Optional[float] = None
    basis: Optional[Tuple[tuple, ...]] = None  # opaque warm-start handle

    @property
    def is_optimal(self) -> bool:
        return self.status == "optimal"


class LinearProgram:
    """Sparse row-oriented maximization program with labeled rows."""

    def __init__(self, name: str = ""):
        self.name = name
        self.sense = "max"
        self.obj: List[float] = []
        self.lower: List[float] = []
        self.upper: List[float] = []
        self.integer: List[bool] = []
        self.col_labels: List[Optional[str]] = []
        self.rows: List[RowSpec] = []
        self.row_labels: List[Optional[str]] = []
        self._row_by_label: Dict[str, int] = {}

    @property
    def num_vars(self) -> int:
        return len(self.obj)

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    def add_var(
        self,
        obj: float = 0.0,
        lb: float = 0.0,
        ub: float = INF,
        integer: bool = False,
        label: Optional[str] = None,
    ) -> int:
        if not math.isfinite(obj):
            raise ValueError("objective coefficient must be finite")
        if lb > ub:
            raise ValueError(f"variable bounds crossed: [{lb}, {ub}]")
        self.obj.append(float(obj))
        self.lower.append(float(lb))
        self.upper.append(float(ub))
        self.integer.append(bool(integer))
        self.col_labels.append(label)
        return self.num_vars - 1

    def add_row(self, coeffs: Dict[int, float], relation: str, rhs: float, label: Optional[str] = None) -> int:
        if relation not in _RELATIONS:
            raise ValueError(f"relation must be one of {_RELATIONS}")
        if not math.isfinite(rhs):
            raise ValueError("right-hand side must be finite")
        clean = {}
        for j, a in coeffs.items():
            if not 0 <= j < self.num_vars:
                raise IndexError(f"row references unknown variable {j}")
            if not math.isfinite(a):
                raise ValueError("constraint coefficient must be finite")
            if a != 0.0:
                clean[int(j)] = float(a)
        self.rows.append((clean, relation, float(rhs)))
        self.row_labels.append(label)
        if label is not None:
            if label in self._row_by_label:
                raise ValueError(f"duplicate row label {label!r}")
            self._row_by_label[label] = self.num_rows - 1
        return self.num_rows - 1

    def row_index(self, label: str) -> int:
        return self._row_by_label[label]

    def set_integer(self, indices: Sequence[int], flag: bool = True):
        for j in indices:
            self.integer[j] = flag

    def to_lp_text(self) -> str:
        """Render in the CPLEX LP text format (debug aid for cross-checks)."""

        def expr(coeffs: Dict[int, float]) -> str:
            if not coeffs:
                return "0 x0"
            parts = []
            for pos, (j, a) in enumerate(sorted(coeffs.items())):
                sign = "-" if a < 0 else ("" if pos == 0 else "+")
                mag = abs(a)
                coef = "" if mag == 1 else f"{mag:.12g} "
                parts.append(f"{sign} {coef}x{j}".strip())
            return " ".join(parts)

        lines = ["Maximize", " obj: " + expr({j: a for j, a in enumerate(self.obj) if a}), "Subject To"]
        rel_text = {LE: "<=", EQ: "=", GE: ">="}
        for i, (coeffs, rel, rhs) in enumerate(self.rows):
            label = self.row_labels[i] or f"r{i}"
            lines.append(f" {label}: {expr(coeffs)} {rel_text[rel]} {rhs:.12g}")
        lines.append("Bounds")
        for j in range(self.num_vars):
            lo, hi = self.lower[j], self.upper[j]
            hi_text = "+inf" if hi == INF else f"{hi:.12g}"
            lo_text = "-inf" if lo == -INF else f"{lo:.12g}"
            lines.append(f" {lo_text} <= x{j} <= {hi_text}")
        integers = [j for j in range(self.num_vars) if self.integer[j]]
        if integers:
            lines.append("General")
            lines.append(" " + " ".join(f"x{j}" for j in integers))
        lines.append("End")
        return "\n".join(lines) + "\n"


class _StandardForm:
    """Expansion of a LinearProgram into max c'x, Ax {<=,=,>=} b, x >= 0.

    Finite lower bounds are shifted out, free variables split into two
    nonnegative parts, finite upper bounds become extra rows. Internal
    columns carry stable keys so a basis can be re-used after the caller
    appends more variables (the column-generation warm-start pattern).
    """

    def __init__(self, program: LinearProgram, extra_rows: Sequence[RowSpec] = ()):
        self.program = program
        n = program.num_vars
        self.obj_const = 0.0
        self.col_keys: List[tuple] = []
        obj: List[float] = []
        self._plus = np.full(n, -1, dtype=int)
        self._minus = np.full(n, -1, dtype=int)
        self._shift = np.zeros(n)

        def new_col(key, c):
            self.col_keys.append(key)
            obj.append(c)
            return len(obj) - 1

        bound_rows: List[Tuple[RowSpec, tuple]] = []
        for j in range(n):
            lo, hi, c = program.lower[j], program.upper[j], program.obj[j]
            if lo == -INF:
                p = new_col(("x+", j), c)
                m = new_col(("x-", j), -c)
                self._plus[j], self._minus[j] = p, m
                if hi != INF:
                    bound_rows.append((({p: 1.0, m: -1.0}, LE, hi), ("bnd", j)))
            else:
                p = new_col(("x+", j), c)
                self._plus[j] = p
                self._shift[j] = lo
                self.obj_const += c * lo
                if hi != INF:
                    bound_rows.append((({p: 1.0}, LE, hi - lo), ("bnd", j)))

        # Standard-form rows: original rows, caller extras (branching cuts),
        # then variable-bound rows. Kinds name them stably.
        self.row_specs: List[RowSpec] = []
        self.row_kind: List[tuple] = []
        tagged = [(spec, ("row", i)) for i, spec in enumerate(program.rows)]
        tagged += [(spec, ("extra", i)) for i, spec in enumerate(extra_rows)]
        for (coeffs, rel, rhs), kind in tagged:
            new_coeffs: Dict[int, float] = {}
            shift = 0.0
            for j, a in coeffs.items():
                shift += a * self._shift[j]
                new_coeffs[self._plus[j]] = new_coeffs.get(self._plus[j], 0.0) + a
                if self._minus[j] >= 0:
                    new_coeffs[self._minus[j]] = new_coeffs.get(self._minus[j], 0.0) - a
            self.row_specs.append((new_coeffs, rel, rhs - shift))
            self.row_kind.append(kind)
        for spec, kind in bound_rows:
            self.row_specs.append(spec)
            self.row_kind.append(kind)

        self.obj = np.array(obj)
        self.num_struct = len(obj)

    def recover_x(self, xs: np.ndarray) -> np.ndarray:
        n = self.program.num_vars
        x = np.empty(n)
        for j in range(n):
            v = xs[self._plus[j]]
            if self._minus[j] >= 0:
                v -= xs[self._minus[j]]
            x[j] = v + self._shift[j]
        return x


class _Simplex:
    """Two-phase dense revised simplex over a _StandardForm."""

    REFACTOR_EVERY = 64
    STALL_LIMIT = 60  # degenerate pivots before switching to Bland's rule

    def __init__(self, form: _StandardForm, tol: float):
        self.form = form
        self.tol = tol
        m = len(form.row_specs)
        ns = form.num_struct

        # Dense constraint matrix with rows flipped so every rhs is >= 0.
        self.flip = np.ones(m)
        rels = []
        b = np.zeros(m)
        for i, (coeffs, rel, rhs) in enumerate(form.row_specs):
            if rhs < 0:
                self.flip[i] = -1.0
                rhs = -rhs
                rel = {LE: GE, GE: LE, EQ: EQ}[rel]
            rels.append(rel)
            b[i] = rhs
        self.b = b

        dense = np.zeros((m, ns))
        for i, (coeffs, _, _) in enumerate(form.row_specs):
            for j, a in coeffs.items():
                dense[i, j] = a * self.flip[i]

        self.col_keys: List[tuple] = list(form.col_keys)
        blocks = [dense]
        art_rows = []
        self._slack_row: Dict[int, int] = {}
        for i, rel in enumerate(rels):
            if rel in (LE, GE):
                e = np.zeros((m, 1))
                e[i, 0] = 1.0 if rel == LE else -1.0
                if rel == LE:
                    self._slack_row[len(self.col_keys)] = i
                self.col_keys.append(("s", form.row_kind[i]))
                blocks.append(e)
            if rel in (GE, EQ):
                art_rows.append(i)
        self.num_real = len(self.col_keys)

        self.art_of_row: Dict[int, int] = {}
        for i in art_rows:
            e = np.zeros((m, 1))
            e[i, 0] = 1.0
            self.art_of_row[i] = len(self.col_keys)
            self.col_keys.append(("a", i))
            blocks.append(e)

        self.A = np.hstack(blocks)
        self.m = m
        self.n = self.A.shape[1]
        self.cost = np.zeros(self.n)
        self.cost[:ns] = form.obj
        self.iterations = 0

    def _initial_basis(self) -> List[int]:
        basis = [-1] * self.m
        for j, i in self._slack_row.items():
            basis[i] = j
        for i in range(self.m):
            if basis[i] < 0:
                basis[i] = self.art_of_row[i]
        return basis

    def _basis_from_keys(self, keys: Sequence[tuple]) -> Optional[List[int]]:
        if len(keys) != self.m:
            return None
        index_of = {key: j for j, key in enumerate(self.col_keys)}
        cols = []
        for key in keys:
            j = index_of.get(key)
            if j is None or j >= self.num_real:
                return None
            cols.append(j)
        try:
            binv = np.linalg.inv(self.A[:, cols])
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(binv)):
            return None
        if np.abs(self.A[:, cols] @ binv - np.eye(self.m)).max() > 1e-8:
            return None
        if (binv @ self.b).min() < -self.tol:
            return None
        return cols

    def solve(self, warm_keys: Optional[Sequence[tuple]] = None, max_iter: int = 2_000_000):
        """Returns (status, basis, binv); status: optimal|infeasible|unbounded."""
        basis = self._basis_from_keys(warm_keys) if warm_keys is not None else None
        if basis is None:
            basis = self._initial_basis()
            if any(self.col_keys[j][0] == "a" for j in basis):
                phase1_cost = np.zeros(self.n)
                phase1_cost[self.num_real :] = -1.0
                status, basis, binv = self._optimize(phase1_cost, basis, max_iter, phase1=True)
                xb = binv @ self.b
                art_value = sum(
                    xb[i] for i in range(self.m) if self.col_keys[basis[i]][0] == "a"
                )
                if status != "optimal" or art_value > 1e2 * self.tol:
                    return "infeasible", basis, binv
                basis = self._expel_artificials(basis, binv)
        return self._optimize(self.cost, basis, max_iter, phase1=False)

    def _expel_artificials(self, basis: List[int], binv: np.ndarray) -> List[int]:
        """Pivot zero-valued artificials out of the basis where possible.

        An artificial that cannot be pivoted out sits on a redundant row:
        its basis row stays identically zero over real columns, so it can
        never turn positive in phase 2.
        """
        basis_set = set(basis)
        for i in range(self.m):
            if self.col_keys[basis[i]][0] != "a":
                continue
            row = binv[i] @ self.A[:, : self.num_real]
            pivot = next(
                (j for j in range(self.num_real) if j not in basis_set and abs(row[j]) > 1e-9),
                None,
            )
            if pivot is not None:
                basis_set.discard(basis[i])
                basis_set.add(pivot)
                basis[i] = pivot
                binv = np.linalg.inv(self.A[:, basis])
        return basis

    def _optimize(self, cost, basis, max_iter, phase1):
        binv = np.linalg.inv(self.A[:, basis])
        enterable = self.n if phase1 else self.num_real
        in_basis = np.zeros(self.n, dtype=bool)
        in_basis[basis] = True
        basis_arr = np.array(basis)
        bland = False
        stall = 0
        last_obj = -INF
        since_refactor = 0

        while True:
            self.iterations += 1
            if self.iterations > max_iter:
                raise RuntimeError("simplex iteration cap exceeded")
            xb = binv @ self.b
            y = cost[basis_arr] @ binv
            rc = cost[:enterable] - y @ self.A[:, :enterable]
            candidates = np.where(~in_basis[:enterable] & (rc > self.tol))[0]
            if candidates.size == 0:
                return "optimal", list(basis_arr), binv
            if bland:
                enter = int(candidates[0])
            else:
                enter = int(candidates[np.argmax(rc[candidates])])

            d = binv @ self.A[:, enter]
            positive = d > self.tol
            if not positive.any():
                return "unbounded", list(basis_arr), binv
            ratios = np.full(self.m, INF)
            ratios[positive] = xb[positive] / d[positive]
            best_ratio = ratios.min()
            ties = np.where(positive & (ratios <= best_ratio + 1e-12))[0]
            leave_row = int(ties[np.argmin(basis_arr[ties])])

            in_basis[basis_arr[leave_row]] = False
            in_basis[enter] = True
            basis_arr[leave_row] = enter

            piv = d[leave_row]
            pivot_row = binv[leave_row] / piv
            binv = binv - np.outer(d, pivot_row)
            binv[leave_row] = pivot_row
            since_refactor += 1
            if since_refactor >= self.REFACTOR_EVERY:
                binv = np.linalg.inv(self.A[:, basis_arr])
                since_refactor = 0

            obj = float(cost[basis_arr] @ (binv @ self.b))
            if obj > last_obj + 1e-12:
                stall = 0
                bland = False
            else:
                stall += 1
                if stall >= self.STALL_LIMIT:
                    bland = True
            last_obj = obj

    def extract(self, basis: Sequence[int], binv: np.ndarray):
        xb = binv @ self.b
        xs = np.zeros(self.n)
        for i, j in enumerate(basis):
            xs[j] = max(0.0, xb[i])
        y = self.cost[np.array(basis)] @ binv
        return xs, y


def solve_lp(
    program: LinearProgram,
    options: Optional[SolveOptions] = None,
    warm_basis: Optional[Tuple[tuple, ...]] = None,
    extra_rows: Sequence[RowSpec] = (),
) -> LpSolution:
    """Solve the LP relaxation (integrality ignored): primal plus duals.

    ``warm_basis`` re-uses the basis handle of a previous solution of the
    same program, valid as long as rows are unchanged and variables were
    only appended. ``extra_rows`` are solved against without mutating the
    program (used for branch-and-bound cuts); duals are reported for the
    program's own rows only, with signs relative to each row as written.
    """
    options = options or SolveOptions()
    start = time.perf_counter()
    form = _StandardForm(program, extra_rows)
    simplex = _Simplex(form, options.feasibility_tolerance)
    status, basis, binv = simplex.solve(warm_keys=warm_basis)
    wall = time.perf_counter() - start
    if status != "optimal":
        return LpSolution(status, None, None, None, INF, wall, simplex.iterations)
    xs, y = simplex.extract(basis, binv)
    x = form.recover_x(xs)
    objective = float(simplex.cost @ xs) + form.obj_const
    duals = np.zeros(program.num_rows)
    for internal, kind in enumerate(form.row_kind):
        if kind[0] == "row":
            duals[kind[1]] = y[internal] * simplex.flip[internal]
    basis_keys = tuple(simplex.col_keys[j] for j in basis)
    return LpSolution(
        "optimal",
        objective,
        x,
        duals,
        0.0,
        wall,
        simplex.iterations,
        best_bound=objective,
        basis=basis_keys,
    )


def _most_fractional(x: np.ndarray, mask: Sequence[bool], tol: float) -> Optional[int]:
    best_j, best_frac = None, tol
    for j, is_int in enumerate(mask):
        if not is_int:
            continue
        frac = abs(x[j] - round(x[j]))
        if frac > best_frac:
            best_j, best_frac = j, frac
    return best_j


def check_feasible(program: LinearProgram, x: np.ndarray, options: SolveOptions) -> Optional[float]:
    """Objective of ``x`` if it satisfies bounds, rows, and integrality."""
    for j in range(program.num_vars):
        if not program.lower[j] - 1e-9 <= x[j] <= program.upper[j] + 1e-9:
            return None
        if program.integer[j] and abs(x[j] - round(x[j])) > options.integrality_tolerance:
            return None
    for coeffs, rel, rhs in program.rows:
        lhs = sum(a * x[j] for j, a in coeffs.items())
        slack_tol = options.feasibility_tolerance * max(1.0, abs(rhs))
        if rel == LE and lhs > rhs + slack_tol:
            return None
        if rel == GE and lhs < rhs - slack_tol:
            return None
        if rel == EQ and abs(lhs - rhs) > slack_tol:
            return None
    return float(sum(c * x[j] for j, c in enumerate(program.obj) if c))


def solve_milp(
    program: LinearProgram,
    options: Optional[SolveOptions] = None,
    initial_solution: Optional[np.ndarray] = None,
) -> LpSolution:
    """Branch-and-bound over the kernel LP: depth-first, most-fractional.

    Returns the best incumbent with a proved relative gap
    (bound - incumbent) / max(1, |incumbent|) at or below
    ``options.relative_gap``, or the best found when the time limit hits.
    ``initial_solution`` seeds the incumbent when it checks out feasible and
    integral. Exploration order is fixed, so results are deterministic.
    """
    options = options or SolveOptions()
    start = time.perf_counter()
    mask = list(program.integer)
    if not any(mask):
        sol = solve_lp(program, options)
        return sol

    root = solve_lp(program, options)
    if root.status != "optimal":
        return LpSolution(root.status, None, None, None, INF, time.perf_counter() - start, root.iterations)

    incumbent_obj = -INF
    incumbent_x: Optional[np.ndarray] = None
    if initial_solution is not None:
        value = check_feasible(program, np.asarray(initial_solution, dtype=float), options)
        if value is not None:
            incumbent_obj = value
            incumbent_x = np.asarray(initial_solution, dtype=float).copy()
    residual_bound = -INF  # max bound among nodes discarded before proving optimality
    iterations = 0
    nodes = 0

    def scale(v: float) -> float:
        return max(1.0, abs(v))

    # Node: (negated depth kept implicit by stack order, cuts, parent bound).
    stack: List[Tuple[Tuple[RowSpec, ...], float]] = [((), root.objective)]

    timed_out = False
    while stack:
        if options.time_limit is not None and time.perf_counter() - start > options.time_limit:
            timed_out = True
            break
        cuts, parent_bound = stack.pop()
        if incumbent_obj > -INF:
            allowance = (options.relative_gap + 1e-9) * scale(incumbent_obj)
            if parent_bound <= incumbent_obj + allowance:
                residual_bound = max(residual_bound, parent_bound)
                continue
        node = solve_lp(program, options, extra_rows=cuts) if cuts else root
        nodes += 1
        iterations += node.iterations
        if node.status != "optimal":
            continue
        bound = node.objective
        if incumbent_obj > -INF and bound <= incumbent_obj + (options.relative_gap + 1e-9) * scale(incumbent_obj):
            residual_bound = max(residual_bound, bound)
            continue
        branch_var = _most_fractional(node.x, mask, options.integrality_tolerance)
        if branch_var is None:
            if bound > incumbent_obj:
                incumbent_obj = bound
                incumbent_x = node.x.copy()
            continue
        value = node.x[branch_var]
        down = ({branch_var: 1.0}, LE, math.floor(value))
        up = ({branch_var: 1.0}, GE, math.ceil(value))
        first, second = (down, up) if value - math.floor(value) <= 0.5 else (up, down)
        stack.append((cuts + (second,), bound))
        stack.append((cuts + (first,), bound))

    wall = time.perf_counter() - start
    open_bound = max((pb for _, pb in stack), default=-INF)
    best_bound = max(incumbent_obj, residual_bound, open_bound)
    if incumbent_x is None:
        status = "time_limit" if timed_out else "infeasible"
        return LpSolution(status, None, None, None, INF, wall, iterations, best_bound=None)
    gap = max(0.0, (best_bound - incumbent_obj) / scale(incumbent_obj))
    if timed_out:
        status = "time_limit"
    elif gap > 1e-9:
        status = "gap_reached"
    else:
        status = "optimal"
    x = incumbent_x.copy()
    for j, is_int in enumerate(mask):
        if is_int:
            x[j] = round(x[j])
    return LpSolution(status, incumbent_obj, x, None, gap, wall, iterations, best_bound=best_bound)
