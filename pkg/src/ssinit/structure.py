"""Matching, block-lower-triangular ordering and tearing of flat problems."""

from __future__ import annotations

import heapq
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import kernels
from .errors import StructuralSingularityError

FULL = "full"
SIMPLIFIED = "simplified"
DEFAULT_PREFERENCES = ("pressure", "temperature", "composition", "current")


class IncidenceProblem:
    """Bare incidence pattern with the attributes structural analysis reads.

    Useful for tests and benchmarks that have no residual functions.
    """

    def __init__(self, incidence: Sequence[Sequence[int]], n_vars: int | None = None,
                 kinds: Sequence[str] | None = None, names: Sequence[str] | None = None,
                 equation_names: Sequence[str] | None = None, simplified=None):
        self._inc = {FULL: [tuple(sorted(set(r))) for r in incidence]}
        self._inc[SIMPLIFIED] = ([tuple(sorted(set(r))) for r in simplified]
                                 if simplified is not None else self._inc[FULL])
        if n_vars is None:
            n_vars = 1 + max((max(r) for r in incidence if r), default=-1)
        self.n = n_vars
        self.names = list(names) if names is not None else [f"x{i}" for i in range(n_vars)]
        self.kinds = list(kinds) if kinds is not None else [""] * n_vars
        self.equation_names = (list(equation_names) if equation_names is not None
                               else [f"e{i}" for i in range(len(incidence))])

    def incidence(self, regime: str = FULL):
        return self._inc[regime]


def _equation_names(problem):
    names = getattr(problem, "equation_names", None)
    if names is None:
        names = [eq.name for eq in problem.equations]
    return names


def _kinds(problem):
    kinds = getattr(problem, "kinds", None)
    if kinds is None:
        kinds = [v.kind for v in problem.unknowns]
    return kinds


def to_csr(rows: Sequence[Sequence[int]]):
    indptr = np.zeros(len(rows) + 1, dtype=np.intp)
    for i, r in enumerate(rows):
        indptr[i + 1] = indptr[i] + len(r)
    indices = np.fromiter((c for r in rows for c in r), dtype=np.intp, count=int(indptr[-1]))
    return indptr, indices


@dataclass
class Matching:
    """Equation-to-variable assignment (-1 where unmatched)."""

    var_of_eq: np.ndarray
    eq_of_var: np.ndarray

    @property
    def assignment(self) -> dict[int, int]:
        return {e: int(v) for e, v in enumerate(self.var_of_eq) if v >= 0}

    @property
    def cardinality(self) -> int:
        return int(np.count_nonzero(self.var_of_eq >= 0))


def maximum_matching(incidence, n_vars: int) -> Matching:
    indptr, indices = to_csr(incidence)
    row, col = kernels.max_matching(indptr, indices, len(incidence), n_vars)
    return Matching(np.asarray(row), np.asarray(col))


def match_variables(problem, regime: str = FULL) -> Matching:
    """Perfect matching of equations to unknowns, or a singularity error."""
    inc = problem.incidence(regime)
    m = maximum_matching(inc, problem.n)
    n_eq = len(inc)
    if m.cardinality == n_eq == problem.n:
        return m
    eq_names = _equation_names(problem)
    bad_eqs = [eq_names[e] for e in range(n_eq) if m.var_of_eq[e] < 0]
    bad_vars = [problem.names[v] for v in range(problem.n) if m.eq_of_var[v] < 0]
    parts = [f"structurally singular ({n_eq} equations, {problem.n} unknowns, "
             f"matching of size {m.cardinality})"]
    if bad_vars:
        parts.append("unmatched variables: " + ", ".join(bad_vars[:20]))
    if bad_eqs:
        parts.append("unmatched equations: " + ", ".join(bad_eqs[:20]))
    raise StructuralSingularityError("; ".join(parts), unmatched_equations=bad_eqs,
                                     unmatched_variables=bad_vars, matching=m)


@dataclass
class StrongComponent:
    """Equations and variables solved together; indices refer to the problem."""

    equations: tuple[int, ...]
    variables: tuple[int, ...]
    tearing_variables: tuple[int, ...] = ()
    torn_equations: tuple[int, ...] = ()
    # (equation, variable) pairs solved in order once the tearing variables are known
    assignments: tuple[tuple[int, int], ...] = ()

    @property
    def size(self) -> int:
        return len(self.equations)

    @property
    def is_torn(self) -> bool:
        return bool(self.assignments) and len(self.tearing_variables) < self.size


@dataclass
class BltOrdering:
    components: list[StrongComponent]
    regime: str = FULL

    @property
    def sizes(self) -> list[int]:
        return [c.size for c in self.components]

    def histogram(self) -> dict[int, int]:
        return dict(sorted(Counter(self.sizes).items()))

    def __len__(self):
        return len(self.components)


def blt_decompose(problem, regime: str = FULL, matching: Matching | None = None,
                  tearing: bool = False, preferences=DEFAULT_PREFERENCES) -> BltOrdering:
    """Strong components of the matched dependency graph in solution order.

    Among components that are ready to be solved, the one containing the
    lowest equation index goes first, so the order is fully determined by the
    declaration order.
    """
    inc = problem.incidence(regime)
    if matching is None:
        matching = match_variables(problem, regime)
    var_of_eq = matching.var_of_eq
    eq_of_var = matching.eq_of_var
    n = len(inc)
    # edge e -> f when e reads the variable that f is solved for
    deps = [sorted({int(eq_of_var[v]) for v in row if v != var_of_eq[e]}) for e, row in enumerate(inc)]
    indptr, indices = to_csr(deps)
    labels, count = kernels.strongly_connected(indptr, indices, n)
    labels = [int(x) for x in labels]
    members: list[list[int]] = [[] for _ in range(count)]
    for e in range(n):
        members[labels[e]].append(e)
    comp_deps = [set() for _ in range(count)]
    users = [set() for _ in range(count)]
    for e in range(n):
        a = labels[e]
        for f in deps[e]:
            b = labels[f]
            if b != a:
                comp_deps[a].add(b)
                users[b].add(a)
    pending = [len(d) for d in comp_deps]
    heap = [(members[c][0], c) for c in range(count) if pending[c] == 0]
    heapq.heapify(heap)
    components = []
    while heap:
        _, c = heapq.heappop(heap)
        eqs = tuple(members[c])
        comp = StrongComponent(eqs, tuple(sorted(int(var_of_eq[e]) for e in eqs)))
        if tearing and comp.size > 1:
            comp = tear(comp, problem, preferences, regime)
        components.append(comp)
        for u in users[c]:
            pending[u] -= 1
            if pending[u] == 0:
                heapq.heappush(heap, (members[u][0], u))
    return BltOrdering(components, regime)


def tear(component: StrongComponent, problem, preferences=DEFAULT_PREFERENCES,
         regime: str = FULL) -> StrongComponent:
    """Greedy tearing.

    Equations with a single unknown left are causalized (lowest index
    first).  When none exists a tearing variable is chosen: variables whose
    kind appears in ``preferences`` go first by rank, the rest only once no
    preferred kind remains; ties go to the variable occurring in most of the
    remaining equations, then to the lowest index.
    """
    if component.size <= 1:
        return component
    inc = problem.incidence(regime)
    kinds = _kinds(problem)
    rank = {k: i for i, k in enumerate(preferences)}
    big = len(preferences)
    unknown = set(component.variables)
    remaining = {e: set(inc[e]) & unknown for e in component.equations}
    tearing: list[int] = []
    assignments: list[tuple[int, int]] = []
    while unknown:
        single = [e for e, vs in remaining.items() if len(vs) == 1]
        if single:
            e = min(single)
            (v,) = remaining.pop(e)
            assignments.append((e, v))
        else:
            occ = Counter(v for vs in remaining.values() for v in vs)
            v = min(unknown, key=lambda v: (rank.get(kinds[v], big), -occ[v], v))
            tearing.append(v)
        unknown.discard(v)
        for vs in remaining.values():
            vs.discard(v)
    torn = tuple(sorted(remaining))
    return replace(component, tearing_variables=tuple(tearing), torn_equations=torn,
                   assignments=tuple(assignments))


def check_topological(ordering: BltOrdering, problem) -> bool:
    """True when no component reads a variable solved by a later component."""
    inc = problem.incidence(ordering.regime)
    solved_at = {}
    for k, comp in enumerate(ordering.components):
        for v in comp.variables:
            solved_at[v] = k
    for k, comp in enumerate(ordering.components):
        for e in comp.equations:
            if any(solved_at.get(v, -1) > k for v in inc[e]):
                return False
    return True
