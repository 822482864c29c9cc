"""Thin mixed-integer solver abstraction.

Models are accumulated as sparse triplets plus variable bounds and solved
through a pluggable backend.  The backend is chosen by name, by the
``GRIDFREQ_SOLVER`` environment variable, or defaults to the HiGHS solver
shipped with scipy.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, milp

INF = float("inf")


class SolverConfigError(RuntimeError):
    pass


@dataclass
class SolveResult:
    status: str                  # optimal | feasible-gap | infeasible | timeout
    x: np.ndarray | None
    objective: float | None
    mip_gap: float | None

    @property
    def has_solution(self) -> bool:
        return self.x is not None


@dataclass
class SolverModel:
    """Linear MIP in triplet form with range rows."""

    lb: list[float] = field(default_factory=list)
    ub: list[float] = field(default_factory=list)
    is_int: list[bool] = field(default_factory=list)
    obj: dict[int, float] = field(default_factory=dict)
    row_entries: list[list[tuple[int, float]]] = field(default_factory=list)
    row_lo: list[float] = field(default_factory=list)
    row_hi: list[float] = field(default_factory=list)
    row_tags: list[str] = field(default_factory=list)
    var_names: list[str] = field(default_factory=list)

    @property
    def n_vars(self) -> int:
        return len(self.lb)

    @property
    def n_rows(self) -> int:
        return len(self.row_entries)

    def add_var(self, lb: float = 0.0, ub: float = INF, binary: bool = False,
                name: str = "") -> int:
        self.lb.append(lb)
        self.ub.append(ub)
        self.is_int.append(binary)
        self.var_names.append(name or f"x{len(self.lb) - 1}")
        return len(self.lb) - 1

    def add_vars(self, n: int, lb: float = 0.0, ub: float = INF,
                 binary: bool = False, name: str = "") -> np.ndarray:
        start = self.n_vars
        self.lb.extend([lb] * n)
        self.ub.extend([ub] * n)
        self.is_int.extend([binary] * n)
        self.var_names.extend(f"{name}{start + j}" for j in range(n))
        return np.arange(start, start + n)

    def add_row(self, entries: list[tuple[int, float]], lo: float, hi: float,
                tag: str = "") -> int:
        for idx, _ in entries:
            if not 0 <= idx < self.n_vars:
                raise IndexError(f"row references unknown variable {idx}")
        self.row_entries.append(entries)
        self.row_lo.append(lo)
        self.row_hi.append(hi)
        self.row_tags.append(tag)
        return len(self.row_entries) - 1

    def add_le(self, entries, rhs, tag: str = "") -> int:
        return self.add_row(entries, -INF, rhs, tag)

    def add_ge(self, entries, rhs, tag: str = "") -> int:
        return self.add_row(entries, rhs, INF, tag)

    def add_eq(self, entries, rhs, tag: str = "") -> int:
        return self.add_row(entries, rhs, rhs, tag)

    def set_objective(self, coeffs: dict[int, float]) -> None:
        self.obj = dict(coeffs)

    def matrix(self) -> sp.csr_matrix:
        rows, cols, vals = [], [], []
        for r, entries in enumerate(self.row_entries):
            for idx, coef in entries:
                rows.append(r)
                cols.append(idx)
                vals.append(coef)
        return sp.csr_matrix((vals, (rows, cols)),
                             shape=(self.n_rows, self.n_vars))

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        for idx, coef in self.obj.items():
            c[idx] = coef
        return c

    def residuals(self, x: np.ndarray) -> np.ndarray:
        """Per-row constraint violation of a candidate point (>= 0)."""
        ax = self.matrix() @ x
        lo = np.array(self.row_lo)
        hi = np.array(self.row_hi)
        return np.maximum(np.maximum(lo - ax, ax - hi), 0.0)

    def write_lp(self, path) -> None:
        """Debug dump in a readable LP-style text format."""
        with open(path, "w") as fh:
            fh.write("minimize\n  ")
            terms = [f"{coef:+g} {self.var_names[i]}"
                     for i, coef in sorted(self.obj.items())]
            fh.write(" ".join(terms) or "0")
            fh.write("\nsubject to\n")
            for r, entries in enumerate(self.row_entries):
                expr = " ".join(f"{coef:+g} {self.var_names[i]}"
                                for i, coef in entries)
                lo, hi = self.row_lo[r], self.row_hi[r]
                tag = self.row_tags[r] or f"r{r}"
                if lo == hi:
                    fh.write(f"  {tag}: {expr} = {lo:g}\n")
                elif lo == -INF:
                    fh.write(f"  {tag}: {expr} <= {hi:g}\n")
                elif hi == INF:
                    fh.write(f"  {tag}: {expr} >= {lo:g}\n")
                else:
                    fh.write(f"  {tag}: {lo:g} <= {expr} <= {hi:g}\n")
            fh.write("bounds\n")
            for j in range(self.n_vars):
                kind = "int" if self.is_int[j] else "cont"
                fh.write(f"  {self.lb[j]:g} <= {self.var_names[j]} <= "
                         f"{self.ub[j]:g} {kind}\n")


class HighsBackend:
    """MILP backend over scipy's bundled HiGHS solver."""

    name = "highs"

    def solve(self, model: SolverModel, mip_gap: float = 1e-4,
              time_limit: float = 600.0) -> SolveResult:
        c = model.objective_vector()
        integrality = np.array(model.is_int, dtype=int)
        bounds = Bounds(np.array(model.lb), np.array(model.ub))
        constraints = []
        if model.n_rows:
            constraints.append(LinearConstraint(
                model.matrix(), np.array(model.row_lo),
                np.array(model.row_hi)))
        res = milp(c, constraints=constraints, integrality=integrality,
                   bounds=bounds,
                   options={"mip_rel_gap": mip_gap,
                            "time_limit": time_limit,
                            "disp": False})
        gap = getattr(res, "mip_gap", None)
        if res.status == 0:
            return SolveResult("optimal", res.x, float(res.fun), gap)
        if res.status == 2:
            return SolveResult("infeasible", None, None, None)
        if res.status == 1 and res.x is not None:
            return SolveResult("timeout", res.x, float(res.fun), gap)
        if res.status == 1:
            return SolveResult("timeout", None, None, None)
        return SolveResult("infeasible", None, None, None)


_BACKENDS = {"highs": HighsBackend}


def get_backend(name: str | None = None):
    """Backend by explicit name, GRIDFREQ_SOLVER, or the default."""
    name = name or os.environ.get("GRIDFREQ_SOLVER") or "highs"
    try:
        return _BACKENDS[name.lower()]()
    except KeyError:
        raise SolverConfigError(
            f"no backend configured: unknown solver {name!r}; "
            f"available: {sorted(_BACKENDS)}") from None
