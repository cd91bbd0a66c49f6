"""Generic mixed-integer linear model container and its matrix form."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

VAR_KINDS = ("binary", "integer", "continuous")
SENSES = ("<=", "=", ">=")


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class Role:
    """Semantic meaning of a variable, e.g. ``Role("edge", (2, 3))``."""

    kind: str
    key: Tuple = ()


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str = "continuous"
    lo: float = 0.0
    hi: float = math.inf

    def __post_init__(self):
        if self.kind not in VAR_KINDS:
            raise ModelError(f"variable {self.name}: unknown kind {self.kind!r}")
        if self.kind == "binary":
            object.__setattr__(self, "lo", max(0.0, float(self.lo)))
            object.__setattr__(self, "hi", min(1.0, float(self.hi)))
        if self.lo > self.hi:
            raise ModelError(f"variable {self.name}: empty domain [{self.lo}, {self.hi}]")

    @property
    def is_integral(self) -> bool:
        return self.kind != "continuous"


@dataclass(frozen=True)
class Constraint:
    name: str
    terms: Tuple[Tuple[str, float], ...]
    sense: str
    rhs: float

    def __post_init__(self):
        if self.sense not in SENSES:
            raise ModelError(f"constraint {self.name}: unknown sense {self.sense!r}")

    def activity(self, values: Mapping[str, float]) -> float:
        return sum(c * values[v] for v, c in self.terms)

    def violation(self, values: Mapping[str, float]) -> float:
        a = self.activity(values)
        if self.sense == "<=":
            return max(0.0, a - self.rhs)
        if self.sense == ">=":
            return max(0.0, self.rhs - a)
        return abs(a - self.rhs)


@dataclass
class MatrixForm:
    """Minimization form: min c @ x + offset, row_lo <= A x <= row_hi, lo <= x <= hi."""

    c: np.ndarray
    offset: float
    A: sparse.csr_matrix
    row_lo: np.ndarray
    row_hi: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    integral: np.ndarray
    sign: float  # +1 if the model minimizes, -1 if it maximizes

    @property
    def shape(self) -> Tuple[int, int]:
        return self.A.shape


class MIPModel:
    """Variables, linear rows and a linear objective, plus a name registry.

    Built incrementally with :meth:`add_var` / :meth:`add_con`; treat it as
    immutable once handed to a solver.
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: List[Variable] = []
        self.constraints: List[Constraint] = []
        self.sense = "min"
        self.objective: Tuple[Tuple[str, float], ...] = ()
        self.objective_constant = 0.0
        self.registry: Dict[str, Role] = {}
        self._index: Dict[str, int] = {}
        self._row_names: set = set()
        self._matrix: Optional[MatrixForm] = None

    # construction

    def add_var(self, name: str, kind: str = "continuous", lo: float = 0.0, hi: float = math.inf,
                role: Optional[Role] = None) -> str:
        if name in self._index:
            raise ModelError(f"duplicate variable name {name!r}")
        var = Variable(name, kind, float(lo), float(hi))
        self._index[name] = len(self.variables)
        self.variables.append(var)
        self.registry[name] = role if role is not None else Role("aux", ())
        self._matrix = None
        return name

    def add_con(self, name: str, terms: Iterable[Tuple[str, float]], sense: str, rhs: float) -> Constraint:
        if name in self._row_names:
            raise ModelError(f"duplicate constraint name {name!r}")
        merged: Dict[str, float] = {}
        for v, c in terms:
            if v not in self._index:
                raise ModelError(f"constraint {name} references unknown variable {v!r}")
            merged[v] = merged.get(v, 0.0) + float(c)
        con = Constraint(name, tuple((v, c) for v, c in merged.items() if c != 0.0), sense, float(rhs))
        self._row_names.add(name)
        self.constraints.append(con)
        self._matrix = None
        return con

    def set_objective(self, sense: str, terms: Iterable[Tuple[str, float]], constant: float = 0.0) -> None:
        if sense not in ("min", "max"):
            raise ModelError(f"objective sense must be min or max, got {sense!r}")
        merged: Dict[str, float] = {}
        for v, c in terms:
            if v not in self._index:
                raise ModelError(f"objective references unknown variable {v!r}")
            merged[v] = merged.get(v, 0.0) + float(c)
        self.sense = sense
        self.objective = tuple((v, c) for v, c in merged.items() if c != 0.0)
        self.objective_constant = float(constant)
        self._matrix = None

    # queries

    @property
    def num_vars(self) -> int:
        return len(self.variables)

    @property
    def num_rows(self) -> int:
        return len(self.constraints)

    def index(self, name: str) -> int:
        return self._index[name]

    def has_var(self, name: str) -> bool:
        return name in self._index

    def var(self, name: str) -> Variable:
        return self.variables[self._index[name]]

    def names_with_role(self, kind: str) -> List[str]:
        return [v.name for v in self.variables if self.registry[v.name].kind == kind]

    def count(self, kind: Optional[str] = None, role: Optional[str] = None) -> int:
        n = 0
        for v in self.variables:
            if kind is not None and v.kind != kind:
                continue
            if role is not None and self.registry[v.name].kind != role:
                continue
            n += 1
        return n

    def rows_named(self, prefix: str) -> List[Constraint]:
        return [c for c in self.constraints if c.name.startswith(prefix)]

    def objective_value(self, values: Mapping[str, float]) -> float:
        return self.objective_constant + sum(c * values[v] for v, c in self.objective)

    def assignment(self, x: Sequence[float]) -> Dict[str, float]:
        return {v.name: float(x[k]) for k, v in enumerate(self.variables)}

    def vector(self, values: Mapping[str, float]) -> np.ndarray:
        return np.array([values[v.name] for v in self.variables], dtype=float)

    def matrix(self) -> MatrixForm:
        if self._matrix is None:
            self._matrix = self._build_matrix()
        return self._matrix

    def _build_matrix(self) -> MatrixForm:
        n, m = self.num_vars, self.num_rows
        rows, cols, vals = [], [], []
        row_lo = np.full(m, -np.inf)
        row_hi = np.full(m, np.inf)
        for r, con in enumerate(self.constraints):
            for v, c in con.terms:
                rows.append(r)
                cols.append(self._index[v])
                vals.append(c)
            if con.sense in ("<=", "="):
                row_hi[r] = con.rhs
            if con.sense in (">=", "="):
                row_lo[r] = con.rhs
        A = sparse.csr_matrix((vals, (rows, cols)), shape=(m, n), dtype=float)
        sign = 1.0 if self.sense == "min" else -1.0
        c = np.zeros(n)
        for v, coef in self.objective:
            c[self._index[v]] += sign * coef
        lo = np.array([v.lo for v in self.variables], dtype=float)
        hi = np.array([v.hi for v in self.variables], dtype=float)
        integral = np.array([v.is_integral for v in self.variables], dtype=bool)
        return MatrixForm(c, sign * self.objective_constant, A, row_lo, row_hi, lo, hi, integral, sign)

    def relaxed(self) -> "MIPModel":
        """Copy with every integrality requirement dropped."""
        out = MIPModel(self.name + "_lp")
        for v in self.variables:
            out.add_var(v.name, "continuous", v.lo, v.hi, self.registry[v.name])
        for con in self.constraints:
            out.add_con(con.name, con.terms, con.sense, con.rhs)
        out.set_objective(self.sense, self.objective, self.objective_constant)
        return out

    def __repr__(self) -> str:
        return f"MIPModel({self.name!r}, vars={self.num_vars}, rows={self.num_rows}, sense={self.sense})"


def max_violation(model: MIPModel, values: Mapping[str, float]) -> float:
    worst = 0.0
    for con in model.constraints:
        worst = max(worst, con.violation(values))
    for v in model.variables:
        x = values[v.name]
        worst = max(worst, v.lo - x, x - v.hi)
    return worst
