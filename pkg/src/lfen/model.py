"""A small polynomial model IR: variables, polynomial rows, one objective.

Polynomials are dictionaries mapping a sorted tuple of variable indices (the
monomial's factors, repeated for powers) to a coefficient; the empty tuple is
the constant term.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .exceptions import ModelError

CONTINUOUS = "continuous"
BINARY = "binary"
SENSES = ("=", "<=", ">=")
DROP_TOL = 1e-15


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str
    lower: float
    upper: float
    index: int


Polynomial = dict  # tuple[int, ...] -> float


@dataclass(frozen=True)
class Constraint:
    terms: dict
    sense: str
    rhs: float
    tag: str = ""

    @property
    def degree(self) -> int:
        return max((len(k) for k in self.terms), default=0)


class Evaluation(NamedTuple):
    objective: float
    violations: np.ndarray        # per constraint
    bound_violations: np.ndarray  # per variable
    integrality: dict             # binary variable name -> distance to {0, 1}

    @property
    def max_violation(self) -> float:
        parts = [0.0]
        if self.violations.size:
            parts.append(float(self.violations.max()))
        if self.bound_violations.size:
            parts.append(float(self.bound_violations.max()))
        parts.extend(self.integrality.values())
        return max(parts)


def canonical(terms: dict) -> dict:
    """Sort factor tuples, merge duplicates, drop negligible coefficients."""
    out: dict = {}
    for key, coef in terms.items():
        key = tuple(sorted(key))
        out[key] = out.get(key, 0.0) + float(coef)
    return {k: v for k, v in sorted(out.items(), key=lambda kv: (len(kv[0]), kv[0]))
            if abs(v) > DROP_TOL}


@dataclass
class Model:
    name: str = "model"
    variables: list = field(default_factory=list)
    constraints: list = field(default_factory=list)
    objective: dict = field(default_factory=dict)
    direction: str = "max"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self._index = {v.name: v.index for v in self.variables}
        self._frozen = False
        self._compiled = None

    # construction -------------------------------------------------------
    def _check_mutable(self):
        if self._frozen:
            raise ModelError("model is frozen")

    def add_variable(self, name: str, lower: float = 0.0, upper: float = 1.0,
                     kind: str = CONTINUOUS) -> int:
        self._check_mutable()
        if name in self._index:
            raise ModelError(f"duplicate variable name {name!r}")
        if kind not in (CONTINUOUS, BINARY):
            raise ModelError(f"unknown variable kind {kind!r}")
        lower, upper = float(lower), float(upper)
        if kind == BINARY:
            lower, upper = max(lower, 0.0), min(upper, 1.0)
        if lower > upper:
            raise ModelError(f"variable {name!r} has lower bound {lower} > upper bound {upper}")
        idx = len(self.variables)
        self.variables.append(Variable(name, kind, lower, upper, idx))
        self._index[name] = idx
        return idx

    def var(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise ModelError(f"undeclared variable {name!r}") from None

    def has_var(self, name: str) -> bool:
        return name in self._index

    def _resolve(self, factor) -> int:
        if isinstance(factor, str):
            return self.var(factor)
        idx = int(factor)
        if not 0 <= idx < len(self.variables):
            raise ModelError(f"undeclared variable index {idx}")
        return idx

    def poly(self, terms) -> dict:
        """Build a canonical polynomial.

        ``terms`` is either a mapping ``{factors: coef}`` or an iterable of
        ``(coef, factors)`` pairs; factors are variable names or indices.
        """
        items = terms.items() if isinstance(terms, dict) else ((f, c) for c, f in terms)
        raw: dict = {}
        for factors, coef in items:
            if isinstance(factors, (str, int, np.integer)):
                factors = (factors,)
            key = tuple(sorted(self._resolve(f) for f in factors))
            raw[key] = raw.get(key, 0.0) + float(coef)
        return canonical(raw)

    def add_constraint(self, terms, sense: str, rhs: float = 0.0, tag: str = "") -> int:
        self._check_mutable()
        if sense not in SENSES:
            raise ModelError(f"unknown sense {sense!r}")
        poly = self.poly(terms)
        const = poly.pop((), 0.0)
        rhs = float(rhs) - const
        if not np.isfinite(rhs):
            raise ModelError(f"constraint {tag!r} has a non-finite right-hand side")
        if not poly:
            raise ModelError(f"constraint {tag!r} has no variable terms")
        self.constraints.append(Constraint(poly, sense, rhs, tag))
        return len(self.constraints) - 1

    def set_objective(self, terms, direction: str = "max") -> None:
        self._check_mutable()
        if direction not in ("max", "min"):
            raise ModelError(f"unknown direction {direction!r}")
        self.objective = self.poly(terms)
        self.direction = direction

    def freeze(self) -> "Model":
        self._frozen = True
        return self

    @property
    def frozen(self) -> bool:
        return self._frozen

    # queries ------------------------------------------------------------
    @property
    def num_vars(self) -> int:
        return len(self.variables)

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    @property
    def lower(self) -> np.ndarray:
        return np.array([v.lower for v in self.variables])

    @property
    def upper(self) -> np.ndarray:
        return np.array([v.upper for v in self.variables])

    @property
    def binaries(self) -> list[int]:
        return [v.index for v in self.variables if v.kind == BINARY]

    @property
    def objective_degree(self) -> int:
        return max((len(k) for k in self.objective), default=0)

    @property
    def constraint_degree(self) -> int:
        return max((c.degree for c in self.constraints), default=0)

    @property
    def degree(self) -> int:
        return max(self.objective_degree, self.constraint_degree)

    def census(self) -> dict:
        """Counts of variables by kind and constraints by degree."""
        by_degree: dict = {}
        for c in self.constraints:
            by_degree[c.degree] = by_degree.get(c.degree, 0) + 1
        return {
            "continuous": sum(v.kind == CONTINUOUS for v in self.variables),
            "binary": sum(v.kind == BINARY for v in self.variables),
            "constraints_by_degree": dict(sorted(by_degree.items())),
            "objective_degree": self.objective_degree,
        }

    def nonlinear_tags(self) -> list[str]:
        return [c.tag for c in self.constraints if c.degree > 1]

    def __eq__(self, other):
        if not isinstance(other, Model):
            return NotImplemented
        return (self.variables == other.variables and self.constraints == other.constraints
                and self.objective == other.objective and self.direction == other.direction)

    __hash__ = None

    # evaluation ---------------------------------------------------------
    def assignment_vector(self, assignment) -> np.ndarray:
        """Accept a name->value mapping or a full-length vector."""
        if isinstance(assignment, dict):
            x = np.empty(self.num_vars)
            for v in self.variables:
                if v.name not in assignment:
                    raise ModelError(f"assignment misses variable {v.name!r}")
                x[v.index] = assignment[v.name]
            return x
        x = np.asarray(assignment, dtype=np.float64).ravel()
        if x.shape[0] != self.num_vars:
            raise ModelError(f"assignment has {x.shape[0]} entries, model has {self.num_vars} variables")
        return x

    def _compile(self):
        if self._compiled is not None and self._frozen:
            return self._compiled
        rows, coefs, keys = [], [], []
        for r, con in enumerate(self.constraints):
            for key, coef in con.terms.items():
                rows.append(r)
                coefs.append(coef)
                keys.append(key)
        self._compiled = (_compile_terms(keys, coefs, self.num_vars), np.array(rows, dtype=np.intp),
                          _compile_terms(list(self.objective), list(self.objective.values()),
                                         self.num_vars))
        return self._compiled

    def constraint_lhs(self, x) -> np.ndarray:
        terms, rows, _ = self._compile()
        vals = _eval_terms(terms, x)
        return np.bincount(rows, weights=vals, minlength=len(self.constraints)) if rows.size \
            else np.zeros(len(self.constraints))

    def objective_value(self, x) -> float:
        _, _, obj = self._compile()
        return float(_eval_terms(obj, x).sum()) if obj[1].size else float(self.objective.get((), 0.0))

    def evaluate(self, assignment) -> Evaluation:
        x = self.assignment_vector(assignment)
        lhs = self.constraint_lhs(x)
        viol = np.empty(len(self.constraints))
        for r, con in enumerate(self.constraints):
            diff = lhs[r] - con.rhs
            if con.sense == "=":
                viol[r] = abs(diff)
            elif con.sense == "<=":
                viol[r] = max(0.0, diff)
            else:
                viol[r] = max(0.0, -diff)
        bound = np.maximum(0.0, np.maximum(self.lower - x, x - self.upper))
        integ = {}
        for i in self.binaries:
            integ[self.variables[i].name] = float(min(abs(x[i]), abs(1.0 - x[i])))
        return Evaluation(self.objective_value(x), viol, bound, integ)


def _compile_terms(keys, coefs, num_vars):
    """Pack monomials into a padded factor-index matrix; index ``num_vars`` holds 1.0."""
    width = max((len(k) for k in keys), default=0)
    idx = np.full((len(keys), max(width, 1)), num_vars, dtype=np.intp)
    for t, key in enumerate(keys):
        idx[t, :len(key)] = key
    return idx, np.array(coefs, dtype=np.float64)


def _eval_terms(compiled, x) -> np.ndarray:
    idx, coefs = compiled
    if coefs.size == 0:
        return coefs
    ext = np.append(np.asarray(x, dtype=np.float64), 1.0)
    return coefs * np.prod(ext[idx], axis=1)


def linear_terms(terms: dict) -> Iterable[tuple[int, float]]:
    for key, coef in terms.items():
        if len(key) == 1:
            yield key[0], coef
