"""Exact Wasserstein distances between finitely supported mixing measures.

The solver is a dense network simplex on the K1 x K2 transportation problem
(K is small here, at most a few dozen components, so no sparse machinery).
Optimality is certified at exit: the final basis must price out with reduced
costs >= -PIVOT_TOL, and the returned plan's marginals are re-solved exactly
on the optimal tree. `wasserstein_oracle` enumerates every basic feasible
solution instead and exists only to cross-check the solver in tests.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core_stats import DimensionMismatchError, SimplexVector, _readonly

__all__ = [
    "MixingMeasure",
    "TransportPlan",
    "PerturbationBounds",
    "wasserstein",
    "wasserstein_oracle",
    "match_components",
    "perturbation_bounds",
]

PIVOT_TOL = 1e-12
MARGINAL_TOL = 1e-10


@dataclass(frozen=True)
class MixingMeasure:
    """Finitely supported measure: weights over K atoms in R^d."""

    weights: SimplexVector
    atoms: np.ndarray

    def __post_init__(self) -> None:
        atoms = _readonly(np.atleast_2d(self.atoms))
        if atoms.shape[0] != len(self.weights):
            raise ValueError(f"atoms rows ({atoms.shape[0]}) must match weights length ({len(self.weights)})")
        if not np.all(np.isfinite(atoms)):
            raise ValueError("atoms must be finite")
        object.__setattr__(self, "atoms", atoms)

    @property
    def num_components(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    @staticmethod
    def from_arrays(weights, atoms) -> "MixingMeasure":
        return MixingMeasure(SimplexVector(np.asarray(weights, dtype=float)), np.asarray(atoms, dtype=float))


@dataclass(frozen=True)
class TransportPlan:
    """Coupling between two mixing measures; marginals must match weights."""

    mass: np.ndarray
    source: MixingMeasure
    target: MixingMeasure

    def __post_init__(self) -> None:
        mass = _readonly(np.atleast_2d(self.mass))
        if mass.shape != (self.source.num_components, self.target.num_components):
            raise ValueError(f"mass shape {mass.shape} does not match measures")
        if np.any(mass < 0):
            raise ValueError("coupling mass must be nonnegative")
        row_err = np.max(np.abs(mass.sum(axis=1) - self.source.weights.probs))
        col_err = np.max(np.abs(mass.sum(axis=0) - self.target.weights.probs))
        if row_err > MARGINAL_TOL or col_err > MARGINAL_TOL:
            raise ValueError(f"coupling marginals off by ({row_err:.2e}, {col_err:.2e})")
        object.__setattr__(self, "mass", mass)


@dataclass(frozen=True)
class PerturbationBounds:
    """Component-recovery error bounds implied by a W1 perturbation radius."""

    atom_bound: float
    weight_bound: float
    valid: bool


def _cost_matrix(p1: MixingMeasure, p2: MixingMeasure, r: float) -> np.ndarray:
    if p1.dim != p2.dim:
        raise DimensionMismatchError(f"atom dimension mismatch: {p1.dim} vs {p2.dim}")
    diff = p1.atoms[:, None, :] - p2.atoms[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    return dist**r


def _northwest_corner(a: np.ndarray, b: np.ndarray) -> list[tuple[int, int]]:
    m, n = a.size, b.size
    sa, sb = a.copy(), b.copy()
    basis = []
    i = j = 0
    while True:
        t = min(sa[i], sb[j])
        basis.append((i, j))
        sa[i] -= t
        sb[j] -= t
        if i == m - 1 and j == n - 1:
            break
        if i == m - 1:
            j += 1
        elif j == n - 1:
            i += 1
        elif sa[i] <= sb[j]:
            i += 1
        else:
            j += 1
    return basis


def _tree_flows(basis: list[tuple[int, int]], a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact flows on a spanning-tree basis via leaf elimination."""
    m, n = a.size, b.size
    res = np.concatenate([a, b]).astype(float)
    deg = np.zeros(m + n, dtype=int)
    incident: list[list[int]] = [[] for _ in range(m + n)]
    for e, (i, j) in enumerate(basis):
        deg[i] += 1
        deg[m + j] += 1
        incident[i].append(e)
        incident[m + j].append(e)
    alive = np.ones(len(basis), dtype=bool)
    flow = np.zeros(len(basis))
    queue = [u for u in range(m + n) if deg[u] == 1]
    while queue:
        u = queue.pop()
        edge = next((e for e in incident[u] if alive[e]), None)
        if edge is None:
            continue
        i, j = basis[edge]
        other = m + j if u == i else i
        flow[edge] = res[u]
        res[u] = 0.0
        res[other] -= flow[edge]
        alive[edge] = False
        deg[u] -= 1
        deg[other] -= 1
        if deg[other] == 1:
            queue.append(other)
    x = np.zeros((m, n))
    for e, (i, j) in enumerate(basis):
        x[i, j] = flow[e] if flow[e] > 0 else 0.0
    return x


def _solve_potentials(basis: list[tuple[int, int]], cost: np.ndarray, m: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    u = np.full(m, np.nan)
    v = np.full(n, np.nan)
    adj: list[list[tuple[int, int, int]]] = [[] for _ in range(m + n)]
    for i, j in basis:
        adj[i].append((m + j, i, j))
        adj[m + j].append((i, i, j))
    u[0] = 0.0
    stack = [0]
    seen = np.zeros(m + n, dtype=bool)
    seen[0] = True
    while stack:
        node = stack.pop()
        for nbr, i, j in adj[node]:
            if seen[nbr]:
                continue
            if nbr >= m:
                v[nbr - m] = cost[i, j] - u[i]
            else:
                u[nbr] = cost[i, j] - v[j]
            seen[nbr] = True
            stack.append(nbr)
    if np.any(np.isnan(u)) or np.any(np.isnan(v)):
        raise RuntimeError("basis does not span the transportation graph")
    return u, v


def _find_cycle_path(basis: list[tuple[int, int]], enter: tuple[int, int], m: int, n: int) -> list[tuple[int, int]]:
    """Basis-edge path from the entering cell's row node to its column node."""
    adj: list[list[tuple[int, tuple[int, int]]]] = [[] for _ in range(m + n)]
    for cell in basis:
        i, j = cell
        adj[i].append((m + j, cell))
        adj[m + j].append((i, cell))
    start, goal = enter[0], m + enter[1]
    parent: dict[int, tuple[int, tuple[int, int]]] = {start: (-1, (-1, -1))}
    stack = [start]
    while stack:
        node = stack.pop()
        if node == goal:
            break
        for nbr, cell in adj[node]:
            if nbr not in parent:
                parent[nbr] = (node, cell)
                stack.append(nbr)
    path = []
    node = goal
    while node != start:
        prev, cell = parent[node]
        path.append(cell)
        node = prev
    path.reverse()
    return path


def _network_simplex(a: np.ndarray, b: np.ndarray, cost: np.ndarray) -> tuple[np.ndarray, float]:
    """Exact transportation solve; returns (plan, cost). Marginals must balance."""
    m, n = cost.shape
    basis = _northwest_corner(a, b)
    x = _tree_flows(basis, a, b)
    basis_set = set(basis)
    max_pivots = 200 * (m + n) * (m + n) + 2000
    for _ in range(max_pivots):
        u, v = _solve_potentials(basis, cost, m, n)
        reduced = cost - u[:, None] - v[None, :]
        for i, j in basis:
            reduced[i, j] = 0.0
        enter_flat = int(np.argmin(reduced))
        ei, ej = divmod(enter_flat, n)
        if reduced[ei, ej] >= -PIVOT_TOL:
            plan = _tree_flows(basis, a, b)
            return plan, float(np.sum(plan * cost))
        path = _find_cycle_path(basis, (ei, ej), m, n)
        # cycle = entering (+), then path edges alternating (-, +, -, ...)
        minus_edges = path[0::2]
        theta = min(x[i, j] for i, j in minus_edges)
        leave = next((i, j) for i, j in minus_edges if x[i, j] <= theta)
        x[ei, ej] += theta
        sign = -1.0
        for i, j in path:
            x[i, j] += sign * theta
            sign = -sign
        basis_set.remove(leave)
        basis_set.add((ei, ej))
        basis = [c if c != leave else (ei, ej) for c in basis]
        x[leave] = 0.0
    raise RuntimeError("network simplex exceeded pivot limit (cycling?)")


def wasserstein(p1: MixingMeasure, p2: MixingMeasure, r: float = 1.0) -> tuple[float, TransportPlan]:
    """W_r distance and an optimal coupling between two mixing measures.

    Solves min_q sum_{k,k'} q_{kk'} ||mu_{1,k} - mu_{2,k'}||^r over couplings
    with the given marginals, exactly; returns (cost^{1/r}, plan).
    """
    if r < 1:
        raise ValueError(f"order r must be >= 1, got {r}")
    cost = _cost_matrix(p1, p2, r)
    w1, w2 = p1.weights.probs, p2.weights.probs
    rows = np.flatnonzero(w1 > 0)
    cols = np.flatnonzero(w2 > 0)
    sub_plan, total = _network_simplex(w1[rows], w2[cols], cost[np.ix_(rows, cols)])
    mass = np.zeros((p1.num_components, p2.num_components))
    mass[np.ix_(rows, cols)] = sub_plan
    distance = max(total, 0.0) ** (1.0 / r)
    return distance, TransportPlan(mass=mass, source=p1, target=p2)


def _spanning_bases(m: int, n: int):
    """All edge subsets of K_{m,n} that form spanning trees."""
    cells = [(i, j) for i in range(m) for j in range(n)]
    size = m + n - 1
    for subset in itertools.combinations(cells, size):
        parent = list(range(m + n))

        def find(u: int) -> int:
            while parent[u] != u:
                parent[u] = parent[parent[u]]
                u = parent[u]
            return u

        acyclic = True
        for i, j in subset:
            ru, rv = find(i), find(m + j)
            if ru == rv:
                acyclic = False
                break
            parent[ru] = rv
        if acyclic:
            yield list(subset)


def wasserstein_oracle(p1: MixingMeasure, p2: MixingMeasure, r: float = 1.0) -> float:
    """Brute-force W_r by enumerating all basic feasible solutions.

    Test-only oracle; restricted to at most 4 components per measure.
    """
    if p1.num_components > 4 or p2.num_components > 4:
        raise ValueError("oracle is limited to measures with at most 4 components")
    if r < 1:
        raise ValueError(f"order r must be >= 1, got {r}")
    cost = _cost_matrix(p1, p2, r)
    a, b = p1.weights.probs, p2.weights.probs
    best = math.inf
    for basis in _spanning_bases(a.size, b.size):
        flows = _tree_flows_signed(basis, a, b)
        if np.min(flows) < -1e-12:
            continue
        c = sum(max(f, 0.0) * cost[i, j] for f, (i, j) in zip(flows, basis))
        best = min(best, c)
    return max(best, 0.0) ** (1.0 / r)


def _tree_flows_signed(basis: list[tuple[int, int]], a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Leaf-elimination flows, keeping negative values (infeasibility signal)."""
    m, n = a.size, b.size
    res = np.concatenate([a, b]).astype(float)
    deg = np.zeros(m + n, dtype=int)
    incident: list[list[int]] = [[] for _ in range(m + n)]
    for e, (i, j) in enumerate(basis):
        deg[i] += 1
        deg[m + j] += 1
        incident[i].append(e)
        incident[m + j].append(e)
    alive = np.ones(len(basis), dtype=bool)
    flow = np.zeros(len(basis))
    queue = [u for u in range(m + n) if deg[u] == 1]
    while queue:
        u = queue.pop()
        edge = next((e for e in incident[u] if alive[e]), None)
        if edge is None:
            continue
        i, j = basis[edge]
        other = m + j if u == i else i
        flow[edge] = res[u]
        res[u] = 0.0
        res[other] -= flow[edge]
        alive[edge] = False
        deg[u] -= 1
        deg[other] -= 1
        if deg[other] == 1:
            queue.append(other)
    return flow


def _assignment_cost(cost: np.ndarray) -> float:
    if cost.size == 0:
        return 0.0
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum())


def match_components(p_hat: MixingMeasure, p_star: MixingMeasure) -> tuple[np.ndarray, float, float]:
    """Optimal label matching between two equal-size mixing measures.

    Finds the permutation sigma minimizing sum_k ||mu_hat_k - mu_star_{sigma(k)}||
    (ties broken toward the lexicographically smallest permutation) and returns
    (sigma, max atom error, L1 weight error) under that matching.
    """
    if p_hat.num_components != p_star.num_components:
        raise ValueError("measures must have the same number of components")
    cost = _cost_matrix(p_hat, p_star, 1.0)
    k = cost.shape[0]
    total = _assignment_cost(cost)
    tol = 1e-12 * (1.0 + abs(total))
    available = list(range(k))
    perm = np.empty(k, dtype=int)
    prefix = 0.0
    for row in range(k):
        rest_rows = np.arange(row + 1, k)
        for j in available:
            remaining = [c for c in available if c != j]
            completion = _assignment_cost(cost[np.ix_(rest_rows, remaining)])
            if prefix + cost[row, j] + completion <= total + tol:
                perm[row] = j
                prefix += cost[row, j]
                available.remove(j)
                break
        else:  # pragma: no cover - assignment always completes
            raise RuntimeError("failed to extend optimal assignment")
    atom_err = float(np.max(np.linalg.norm(p_hat.atoms - p_star.atoms[perm], axis=1)))
    weight_err = float(np.sum(np.abs(p_hat.weights.probs - p_star.weights.probs[perm])))
    return perm, atom_err, weight_err


def perturbation_bounds(eps: float, delta: float, zeta: float) -> PerturbationBounds:
    """Error bounds for matched components of a measure within W1 radius eps.

    Requires min component weight > delta and pairwise atom gaps >= zeta.
    Atom errors are below eps/delta and the L1 weight error below
    eps/(zeta - eps/delta); both only certify anything when eps < zeta*delta,
    otherwise the result is flagged invalid (never thrown).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not (0 < delta < 1):
        raise ValueError("delta must lie in (0,1)")
    if zeta <= 0:
        raise ValueError("zeta must be positive")
    atom_bound = eps / delta
    valid = eps < zeta * delta
    weight_bound = eps / (zeta - atom_bound) if valid else math.inf
    return PerturbationBounds(atom_bound=atom_bound, weight_bound=weight_bound, valid=valid)
