"""Budget-constrained prize-collecting route solver.

The main solver is an ant colony system whose pheromone matrix can be
seeded ("inherited") from the best route of a previous planning round.
Routes are repaired with a drop operator (remove lowest value-per-cost
nodes until the budget holds) and improved with an add operator (insert
highest value-per-cost nodes while the budget allows) plus a 2-opt pass.
An exhaustive depth-first search doubles as an exact oracle on small
instances.

Hot loops are compiled with numba and operate on plain float64 arrays;
the public functions below wrap them behind small dataclasses. All
randomness flows through a counter-based Philox generator, so a given
seed reproduces bit-identical results across platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numba import njit

from .errors import InfeasibleRouteError

__all__ = [
    "CostGraph",
    "PathSolution",
    "AcsParams",
    "PheromoneMatrix",
    "nearest_neighbor_path",
    "drop_value",
    "drop_operator",
    "add_value",
    "add_operator",
    "two_opt",
    "select_next_node",
    "local_update",
    "global_update",
    "solve_iacs",
    "exact_solve",
    "evaluate_sequence",
    "validate_path",
]

_TAU_FLOOR = 1e-12


@dataclass(frozen=True)
class CostGraph:
    """Deterministic reduction of one planning round.

    Index 0 is the route start (the vehicle's current position), index
    ``n_nodes - 1`` the end depot; both carry zero prize and service cost.
    ``node_ids`` optionally maps graph indices back to instance node ids.
    """

    n_nodes: int
    prize: np.ndarray
    service_cost: np.ndarray
    edge_cost: np.ndarray
    budget: float
    node_ids: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "prize", np.ascontiguousarray(self.prize, dtype=np.float64))
        object.__setattr__(self, "service_cost",
                           np.ascontiguousarray(self.service_cost, dtype=np.float64))
        object.__setattr__(self, "edge_cost",
                           np.ascontiguousarray(self.edge_cost, dtype=np.float64))
        n = self.n_nodes
        if n < 2:
            raise ValueError("graph needs at least start and end depots")
        if self.prize.shape != (n,) or self.service_cost.shape != (n,):
            raise ValueError("prize/service_cost must have one entry per node")
        if self.edge_cost.shape != (n, n):
            raise ValueError("edge_cost must be an n x n matrix")
        if not np.all(np.isfinite(self.edge_cost)) or np.any(self.edge_cost < 0):
            raise ValueError("edge costs must be finite and nonnegative")
        for idx in (0, n - 1):
            if self.prize[idx] != 0 or self.service_cost[idx] != 0:
                raise ValueError("depot prize and service cost must be zero")
        if not math.isfinite(self.budget):
            raise ValueError("budget must be finite")

    @property
    def end(self) -> int:
        return self.n_nodes - 1


@dataclass(frozen=True)
class PathSolution:
    """A route through the graph with its bookkeeping totals."""

    sequence: tuple[int, ...]
    total_prize: float
    total_cost: float
    feasible: bool

    @property
    def interior(self) -> tuple[int, ...]:
        return self.sequence[1:-1]


@dataclass(frozen=True)
class AcsParams:
    """Colony parameters. The defaults match the tuned operating point."""

    n_ants: int = 40
    n_iterations: int = 250
    beta_heuristic: float = 2.0
    rho_local: float = 0.1
    alpha_global: float = 0.1
    q0: float = 0.9
    epsilon: float = 1e-4
    max_no_improve: int = 25
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_ants < 1 or self.n_iterations < 1 or self.max_no_improve < 1:
            raise ValueError("counts must be positive")
        for name in ("rho_local", "alpha_global"):
            v = getattr(self, name)
            if not (0 < v < 1):
                raise ValueError(f"{name} must lie in (0, 1)")
        # the endpoints are the pure-sampling / pure-exploitation limits
        if not (0 <= self.q0 <= 1):
            raise ValueError("q0 must lie in [0, 1]")


@dataclass
class PheromoneMatrix:
    """Dense pheromone levels; entries stay strictly positive."""

    tau: np.ndarray
    tau0: float

    @classmethod
    def uniform(cls, n_nodes: int, tau0: float) -> "PheromoneMatrix":
        tau0 = max(tau0, _TAU_FLOOR)
        return cls(tau=np.full((n_nodes, n_nodes), tau0, dtype=np.float64), tau0=tau0)


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------

@njit(cache=True)
def _path_cost(seq, k, edge, service):
    cost = 0.0
    for t in range(k - 1):
        cost += edge[seq[t], seq[t + 1]]
    for t in range(1, k - 1):
        cost += service[seq[t]]
    return cost


@njit(cache=True)
def _sorted_prize(seq, k, prize):
    # interior prize summed in ascending node order, so two routes over the
    # same node set compare exactly equal regardless of visit order
    ids = np.sort(seq[1:k - 1].copy())
    total = 0.0
    for t in range(ids.size):
        total += prize[ids[t]]
    return total


@njit(cache=True)
def _select_from_weights(weights, m, q, q0, u):
    wmax = weights[0]
    for t in range(1, m):
        if weights[t] > wmax:
            wmax = weights[t]
    if wmax <= 0.0:
        # degenerate: nothing to distinguish the candidates, pick uniformly
        idx = int(u * m)
        return m - 1 if idx >= m else idx
    if q <= q0:
        best = 0
        bw = weights[0]
        for t in range(1, m):
            if weights[t] > bw:
                bw = weights[t]
                best = t
        return best
    total = 0.0
    for t in range(m):
        total += weights[t]
    threshold = u * total
    acc = 0.0
    for t in range(m):
        acc += weights[t]
        if acc >= threshold:
            return t
    return m - 1


@njit(cache=True)
def _construct_ant(prize, service, edge, budget, tau, beta, q0, uniforms, seq, in_path):
    """Build one route under the budget lookahead; returns (k, cost).

    A node is eligible only if visiting it, servicing it and then flying
    straight to the end depot still fits the budget. Consumes a fixed two
    uniforms per step plus one for the first node.
    """
    n = prize.shape[0]
    end = n - 1
    in_path[:] = False
    in_path[0] = True
    in_path[end] = True
    seq[0] = 0
    k = 1
    cost = 0.0
    r = 0
    ui = 0
    cand = np.empty(n, np.int64)
    weights = np.empty(n, np.float64)

    m = 0
    for j in range(1, end):
        if edge[0, j] + service[j] + edge[j, end] <= budget:
            cand[m] = j
            m += 1
    if m > 0:
        idx = int(uniforms[ui] * m)
        ui += 1
        if idx >= m:
            idx = m - 1
        s = cand[idx]
        cost += edge[r, s] + service[s]
        seq[k] = s
        k += 1
        in_path[s] = True
        r = s
        while True:
            m = 0
            for j in range(1, end):
                if not in_path[j] and cost + edge[r, j] + service[j] + edge[j, end] <= budget:
                    cand[m] = j
                    m += 1
            if m == 0:
                break
            for t in range(m):
                j = cand[t]
                eta = prize[j] / (edge[r, j] + service[j])
                weights[t] = tau[r, j] * eta**beta
            q = uniforms[ui]
            u = uniforms[ui + 1]
            ui += 2
            s = cand[_select_from_weights(weights, m, q, q0, u)]
            cost += edge[r, s] + service[s]
            seq[k] = s
            k += 1
            in_path[s] = True
            r = s
    seq[k] = end
    k += 1
    cost += edge[r, end]
    return k, cost


@njit(cache=True)
def _two_opt_inplace(seq, k, edge, cost):
    """First-improvement segment reversals on edge costs; safe for
    asymmetric matrices (reversed segments are re-summed)."""
    improved = True
    while improved:
        improved = False
        for i in range(1, k - 2):
            for j in range(i + 1, k - 1):
                old = edge[seq[i - 1], seq[i]] + edge[seq[j], seq[j + 1]]
                new = edge[seq[i - 1], seq[j]] + edge[seq[i], seq[j + 1]]
                for t in range(i, j):
                    old += edge[seq[t], seq[t + 1]]
                    new += edge[seq[t + 1], seq[t]]
                if new < old - 1e-12:
                    lo, hi = i, j
                    while lo < hi:
                        seq[lo], seq[hi] = seq[hi], seq[lo]
                        lo += 1
                        hi -= 1
                    cost += new - old
                    improved = True
                    break
            if improved:
                break
    return cost


@njit(cache=True)
def _drop_step(seq, k, edge, service, prize):
    """Index and drop-cost of the interior node with minimum drop value."""
    best_pos = -1
    best_val = np.inf
    best_node = -1
    best_dc = 0.0
    for pos in range(1, k - 1):
        v = seq[pos]
        dc = (-edge[seq[pos - 1], seq[pos + 1]] + edge[seq[pos - 1], v]
              + edge[v, seq[pos + 1]] + service[v])
        if dc == 0.0:
            val = 0.0 if prize[v] == 0.0 else np.inf
        else:
            val = prize[v] / dc
        if val < best_val or (val == best_val and v < best_node):
            best_val = val
            best_pos = pos
            best_node = v
            best_dc = dc
    return best_pos, best_dc


@njit(cache=True)
def _drop_until_feasible(seq, k, edge, service, prize, budget, in_path, cost, prz):
    while cost > budget and k > 2:
        pos, dc = _drop_step(seq, k, edge, service, prize)
        v = seq[pos]
        cost -= dc
        prz -= prize[v]
        in_path[v] = False
        for t in range(pos, k - 1):
            seq[t] = seq[t + 1]
        k -= 1
    return k, cost, prz


@njit(cache=True)
def _best_insertion(v, seq, k, edge, service):
    """Cheapest insertion slot for node v.

    Scans every path edge when the route is short; otherwise restricts to
    edges adjacent to the node's three nearest in-path neighbors (pairs of
    neighbors that are adjacent in the path, else each neighbor's own two
    path edges). Returns (insertion cost delta, position for the new node).
    """
    if k - 2 <= 3:
        best_d = np.inf
        best_pos = -1
        for pos in range(1, k):
            a = seq[pos - 1]
            b = seq[pos]
            d = edge[a, v] + edge[v, b] - edge[a, b] + service[v]
            if d < best_d:
                best_d = d
                best_pos = pos
        return best_d, best_pos

    n1 = -1
    n2 = -1
    n3 = -1
    d1 = np.inf
    d2 = np.inf
    d3 = np.inf
    for pos in range(k):
        d = edge[seq[pos], v]
        if d < d1:
            d3, n3 = d2, n2
            d2, n2 = d1, n1
            d1, n1 = d, pos
        elif d < d2:
            d3, n3 = d2, n2
            d2, n2 = d, pos
        elif d < d3:
            d3, n3 = d, pos

    best_d = np.inf
    best_pos = -1
    found_adjacent = False
    for pos in range(1, k):
        pa = pos - 1
        a_is_nbr = pa == n1 or pa == n2 or pa == n3
        b_is_nbr = pos == n1 or pos == n2 or pos == n3
        if a_is_nbr and b_is_nbr:
            found_adjacent = True
            a = seq[pa]
            b = seq[pos]
            d = edge[a, v] + edge[v, b] - edge[a, b] + service[v]
            if d < best_d:
                best_d = d
                best_pos = pos
    if not found_adjacent:
        for nb in (n1, n2, n3):
            for pos in (nb, nb + 1):
                if 1 <= pos < k:
                    a = seq[pos - 1]
                    b = seq[pos]
                    d = edge[a, v] + edge[v, b] - edge[a, b] + service[v]
                    if d < best_d:
                        best_d = d
                        best_pos = pos
    return best_d, best_pos


@njit(cache=True)
def _add_until_saturated(seq, k, edge, service, prize, budget, in_path, allowed,
                         cost, prz):
    """Insert the highest-value affordable node until nothing fits.

    Only nodes with positive prize are considered, so every insertion
    strictly increases the collected prize.
    """
    n = prize.shape[0]
    while True:
        best_val = -1.0
        best_node = -1
        best_pos = -1
        best_d = 0.0
        for v in range(1, n - 1):
            if in_path[v] or not allowed[v] or prize[v] <= 0.0:
                continue
            d, pos = _best_insertion(v, seq, k, edge, service)
            if pos < 0 or cost + d > budget:
                continue
            val = np.inf if d == 0.0 else prize[v] / d
            if val > best_val or (val == best_val and v < best_node):
                best_val = val
                best_node = v
                best_pos = pos
                best_d = d
        if best_node < 0:
            break
        for t in range(k, best_pos, -1):
            seq[t] = seq[t - 1]
        seq[best_pos] = best_node
        k += 1
        in_path[best_node] = True
        cost += best_d
        prz += prize[best_node]
    return k, cost, prz


@njit(cache=True)
def _run_iteration(prize, service, edge, budget, tau, tau0, beta, q0, rho,
                   uniforms, lb_seq):
    """One colony iteration: every ant constructs, repairs and improves a
    route and applies the local pheromone rule; returns the local best."""
    n = prize.shape[0]
    n_ants = uniforms.shape[0]
    seq = np.empty(n, np.int64)
    in_path = np.empty(n, np.bool_)
    allowed = np.ones(n, np.bool_)
    lb_prize = -1.0
    lb_cost = np.inf
    lb_k = 0
    for m in range(n_ants):
        k, cost = _construct_ant(prize, service, edge, budget, tau, beta, q0,
                                 uniforms[m], seq, in_path)
        cost = _two_opt_inplace(seq, k, edge, cost)
        prz = _sorted_prize(seq, k, prize)
        if cost > budget:
            k, cost, prz = _drop_until_feasible(seq, k, edge, service, prize,
                                                budget, in_path, cost, prz)
        k, cost, prz = _add_until_saturated(seq, k, edge, service, prize,
                                            budget, in_path, allowed, cost, prz)
        # canonical totals for comparisons
        prz = _sorted_prize(seq, k, prize)
        cost = _path_cost(seq, k, edge, service)
        for t in range(k - 1):
            tau[seq[t], seq[t + 1]] = (1.0 - rho) * tau[seq[t], seq[t + 1]] + rho * tau0
        if prz > lb_prize or (prz == lb_prize and cost < lb_cost):
            lb_prize = prz
            lb_cost = cost
            lb_k = k
            lb_seq[:k] = seq[:k]
    return lb_prize, lb_cost, lb_k


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def evaluate_sequence(graph: CostGraph, sequence: Sequence[int]) -> tuple[float, float]:
    """Recompute (prize, cost) of a route from scratch, in plain Python.

    Intentionally independent of the compiled kernels; used as the
    feasibility validator's arithmetic.
    """
    seq = list(sequence)
    cost = 0.0
    for a, b in zip(seq, seq[1:]):
        cost += float(graph.edge_cost[a, b])
    prize = 0.0
    for v in seq[1:-1]:
        cost += float(graph.service_cost[v])
        prize += float(graph.prize[v])
    return prize, cost


def validate_path(graph: CostGraph, path: PathSolution, tol: float = 1e-9) -> None:
    """Independent route validator; raises ValueError on any violation.

    Checks depot endpoints, no repeated interior nodes, bookkeeping totals
    against a from-scratch recomputation, and the budget constraint.
    """
    seq = path.sequence
    if len(seq) < 2 or seq[0] != 0 or seq[-1] != graph.end:
        raise ValueError("route must start at index 0 and end at the end depot")
    interior = seq[1:-1]
    if len(set(interior)) != len(interior):
        raise ValueError("route revisits an interior node")
    for v in interior:
        if not (1 <= v <= graph.end - 1):
            raise ValueError(f"route contains invalid node index {v}")
    prize, cost = evaluate_sequence(graph, seq)
    if abs(cost - path.total_cost) > tol:
        raise ValueError(f"total_cost {path.total_cost} != recomputed {cost}")
    if abs(prize - path.total_prize) > tol:
        raise ValueError(f"total_prize {path.total_prize} != recomputed {prize}")
    if path.feasible and cost > graph.budget + tol:
        raise ValueError(f"cost {cost} exceeds budget {graph.budget}")
    if path.feasible != (path.total_cost <= graph.budget):
        raise ValueError("feasible flag inconsistent with cost and budget")


def _solution_from_arrays(graph: CostGraph, seq: np.ndarray, k: int,
                          prize: float, cost: float) -> PathSolution:
    return PathSolution(
        sequence=tuple(int(v) for v in seq[:k]),
        total_prize=float(prize),
        total_cost=float(cost),
        feasible=bool(cost <= graph.budget),
    )


def nearest_neighbor_path(graph: CostGraph) -> PathSolution:
    """Greedy route: repeatedly hop to the cheapest-to-reach eligible node.

    A node is eligible while visiting plus servicing it and returning
    straight to the end depot fits the budget; ties go to the lowest index.
    """
    n, end = graph.n_nodes, graph.end
    edge, service = graph.edge_cost, graph.service_cost
    if graph.budget < edge[0, end]:
        raise InfeasibleRouteError(
            f"budget {graph.budget} below direct return cost {edge[0, end]}")
    seq = [0]
    visited = set()
    cost = 0.0
    prize = 0.0
    current = 0
    while True:
        best = None
        for j in range(1, end):
            if j in visited:
                continue
            if cost + edge[current, j] + service[j] + edge[j, end] > graph.budget:
                continue
            if best is None or edge[current, j] < edge[current, best]:
                best = j
        if best is None:
            break
        cost += edge[current, best] + service[best]
        prize += graph.prize[best]
        seq.append(best)
        visited.add(best)
        current = best
    cost += edge[current, end]
    seq.append(end)
    return PathSolution(tuple(seq), float(prize), float(cost), cost <= graph.budget)


def drop_value(graph: CostGraph, path: PathSolution, index: int) -> tuple[float, float]:
    """Value-per-cost of removing the interior node at ``index``.

    The drop cost is the detour saving plus the node's service cost;
    the value is the node's prize divided by that cost.
    """
    seq = path.sequence
    if not (1 <= index <= len(seq) - 2):
        raise ValueError("index must address an interior node")
    v = seq[index]
    edge, service = graph.edge_cost, graph.service_cost
    dc = float(-edge[seq[index - 1], seq[index + 1]] + edge[seq[index - 1], v]
               + edge[v, seq[index + 1]] + service[v])
    if dc == 0.0:
        return (0.0 if graph.prize[v] == 0.0 else math.inf), dc
    return float(graph.prize[v]) / dc, dc


def drop_operator(graph: CostGraph, path: PathSolution) -> PathSolution:
    """Remove minimum-drop-value nodes until the route fits the budget."""
    n = graph.n_nodes
    seq = np.empty(n, np.int64)
    k = len(path.sequence)
    seq[:k] = path.sequence
    in_path = np.zeros(n, np.bool_)
    in_path[list(path.sequence)] = True
    k, cost, prz = _drop_until_feasible(
        seq, k, graph.edge_cost, graph.service_cost, graph.prize, graph.budget,
        in_path, path.total_cost, path.total_prize)
    if cost > graph.budget:
        raise InfeasibleRouteError("route infeasible even after dropping every node")
    return _solution_from_arrays(graph, seq, k, prz, cost)


def add_value(graph: CostGraph, path: PathSolution, node: int) -> tuple[float, int]:
    """Best insertion value and position for ``node`` (not yet in the route)."""
    if node in path.sequence:
        raise ValueError(f"node {node} is already in the route")
    n = graph.n_nodes
    seq = np.empty(n, np.int64)
    k = len(path.sequence)
    seq[:k] = path.sequence
    d, pos = _best_insertion(node, seq, k, graph.edge_cost, graph.service_cost)
    if d == 0.0:
        value = 0.0 if graph.prize[node] == 0.0 else math.inf
    else:
        value = float(graph.prize[node]) / float(d)
    return value, int(pos)


def add_operator(graph: CostGraph, path: PathSolution,
                 feasible_set: Iterable[int]) -> PathSolution:
    """Insert maximum-add-value nodes from ``feasible_set`` while they fit."""
    n = graph.n_nodes
    seq = np.empty(n, np.int64)
    k = len(path.sequence)
    seq[:k] = path.sequence
    in_path = np.zeros(n, np.bool_)
    in_path[list(path.sequence)] = True
    allowed = np.zeros(n, np.bool_)
    allowed[list(feasible_set)] = True
    k, cost, prz = _add_until_saturated(
        seq, k, graph.edge_cost, graph.service_cost, graph.prize, graph.budget,
        in_path, allowed, path.total_cost, path.total_prize)
    return _solution_from_arrays(graph, seq, k, prz, cost)


def two_opt(graph: CostGraph, path: PathSolution) -> PathSolution:
    """First-improvement 2-opt on edge costs; prize is untouched."""
    seq = np.array(path.sequence, dtype=np.int64)
    cost = _two_opt_inplace(seq, len(seq), graph.edge_cost, path.total_cost)
    return _solution_from_arrays(graph, seq, len(seq), path.total_prize, cost)


def select_next_node(graph: CostGraph, pheromone: PheromoneMatrix, current: int,
                     feasible_set: Sequence[int], params: AcsParams,
                     rng: np.random.Generator) -> int:
    """Pick the next node by the pseudo-random-proportional transition rule.

    With probability ``q0`` the candidate maximizing pheromone times
    heuristic attractiveness wins (ties to the lowest index); otherwise the
    candidate is sampled proportionally. When every weight is zero the
    choice is uniform. Always consumes exactly two uniform draws.
    """
    cand = sorted(int(v) for v in feasible_set)
    if not cand:
        raise ValueError("feasible_set must be nonempty")
    weights = np.empty(len(cand), np.float64)
    for t, j in enumerate(cand):
        eta = graph.prize[j] / (graph.edge_cost[current, j] + graph.service_cost[j])
        weights[t] = pheromone.tau[current, j] * eta**params.beta_heuristic
    q = rng.random()
    u = rng.random()
    return cand[_select_from_weights(weights, len(cand), q, params.q0, u)]


def local_update(pheromone: PheromoneMatrix, edge: tuple[int, int],
                 rho: float = 0.1) -> None:
    """Decay one traversed edge toward the initial pheromone level."""
    r, s = edge
    pheromone.tau[r, s] = (1.0 - rho) * pheromone.tau[r, s] + rho * pheromone.tau0


def global_update(pheromone: PheromoneMatrix, best_path: PathSolution,
                  best_prize: float, best_cost: float, alpha: float = 0.1) -> None:
    """Evaporate everywhere and deposit prize/cost on the best route's edges."""
    pheromone.tau *= (1.0 - alpha)
    deposit = alpha * (best_prize / best_cost)
    seq = best_path.sequence
    for a, b in zip(seq, seq[1:]):
        pheromone.tau[a, b] += deposit


def _tau0_from_path(prize: float, cost: float, length: int) -> float:
    if length < 2 or cost <= 0 or prize <= 0:
        return _TAU_FLOOR
    return max(prize / (cost * (length - 1)), _TAU_FLOOR)


def _repair_inherited(graph: CostGraph, inherited: Sequence[int]) -> tuple[np.ndarray, int, float, float]:
    """Rebase an earlier route on the current graph: keep its valid interior
    nodes in order, then add affordable nodes and drop until feasible."""
    n, end = graph.n_nodes, graph.end
    seen = set()
    interior = []
    for v in inherited:
        v = int(v)
        if 1 <= v <= end - 1 and v not in seen:
            seen.add(v)
            interior.append(v)
    seq = np.empty(n, np.int64)
    seq[0] = 0
    for t, v in enumerate(interior):
        seq[1 + t] = v
    k = len(interior) + 2
    seq[k - 1] = end
    in_path = np.zeros(n, np.bool_)
    in_path[seq[:k]] = True
    allowed = np.ones(n, np.bool_)
    cost = _path_cost(seq, k, graph.edge_cost, graph.service_cost)
    prz = _sorted_prize(seq, k, graph.prize)
    k, cost, prz = _add_until_saturated(seq, k, graph.edge_cost, graph.service_cost,
                                        graph.prize, graph.budget, in_path, allowed,
                                        cost, prz)
    k, cost, prz = _drop_until_feasible(seq, k, graph.edge_cost, graph.service_cost,
                                        graph.prize, graph.budget, in_path, cost, prz)
    cost = _path_cost(seq, k, graph.edge_cost, graph.service_cost)
    prz = _sorted_prize(seq, k, graph.prize)
    return seq, k, prz, cost


def solve_iacs(graph: CostGraph, params: AcsParams,
               inherited_path: PathSolution | Sequence[int] | None = None,
               fitness_csv=None) -> PathSolution:
    """Run the inherited ant colony system and return the global-best route.

    When ``inherited_path`` is given, its stale nodes are pruned, the route
    is repaired against the current graph (add, then drop) and it seeds both
    the initial pheromone level and the incumbent best. Otherwise the
    nearest-neighbor route seeds them. The incumbent only changes when an
    ant clears the improvement tolerance, and the search stops early after
    ``max_no_improve`` stagnant iterations. ``fitness_csv`` optionally dumps
    the per-iteration incumbent fitness for convergence plots.
    """
    n, end = graph.n_nodes, graph.end
    prize, service, edge = graph.prize, graph.service_cost, graph.edge_cost
    budget = graph.budget
    if budget < edge[0, end]:
        raise InfeasibleRouteError(
            f"budget {budget} below direct return cost {edge[0, end]}")

    if inherited_path is not None:
        seq0 = (inherited_path.sequence if isinstance(inherited_path, PathSolution)
                else inherited_path)
        gb_seq_arr, gb_k, gb_prize, gb_cost = _repair_inherited(graph, seq0)
        gb_seq = np.array(gb_seq_arr[:gb_k], dtype=np.int64)
    else:
        nn = nearest_neighbor_path(graph)
        gb_seq = np.array(nn.sequence, dtype=np.int64)
        gb_k = len(nn.sequence)
        gb_prize = _sorted_prize(gb_seq, gb_k, prize)
        gb_cost = float(nn.total_cost)

    tau0 = _tau0_from_path(gb_prize, gb_cost, gb_k)
    tau = np.full((n, n), tau0, dtype=np.float64)

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(params.rng_seed)))
    n_interior = n - 2
    width = 1 + 2 * max(1, n_interior)
    lb_seq = np.empty(n, np.int64)
    no_improve = 0
    fitness_rows = []
    for it in range(params.n_iterations):
        if no_improve >= params.max_no_improve:
            break
        uniforms = rng.random((params.n_ants, width))
        lb_prize, lb_cost, lb_k = _run_iteration(
            prize, service, edge, budget, tau, tau0, params.beta_heuristic,
            params.q0, params.rho_local, uniforms, lb_seq)
        if (lb_prize >= gb_prize + params.epsilon
                or (lb_prize == gb_prize and lb_cost <= gb_cost - params.epsilon)):
            gb_prize = lb_prize
            gb_cost = lb_cost
            gb_k = lb_k
            gb_seq = lb_seq[:lb_k].copy()
            tau *= (1.0 - params.alpha_global)
            deposit = params.alpha_global * (gb_prize / gb_cost)
            for t in range(gb_k - 1):
                tau[gb_seq[t], gb_seq[t + 1]] += deposit
        else:
            no_improve += 1
        if fitness_csv is not None:
            fitness_rows.append((it, gb_prize, gb_cost))

    if fitness_csv is not None:
        with open(fitness_csv, "w", encoding="utf-8") as fh:
            fh.write("iteration,best_prize,best_cost\n")
            for it, p, c in fitness_rows:
                fh.write(f"{it},{p!r},{c!r}\n")
    return _solution_from_arrays(graph, gb_seq, gb_k, gb_prize, gb_cost)


def exact_solve(graph: CostGraph) -> PathSolution:
    """Exhaustive search over node subsets and visit orders (small graphs).

    Depth-first enumeration of every ordered subset, pruning branches whose
    partial cost plus the direct return already exceeds the budget. Returns
    a maximum-prize feasible route; ties break toward lower cost. Refuses
    graphs with more than 12 interior nodes.
    """
    n, end = graph.n_nodes, graph.end
    n_interior = n - 2
    if n_interior > 12:
        raise ValueError("exact_solve is limited to 12 interior nodes")
    edge = graph.edge_cost
    service = graph.service_cost
    prize = graph.prize
    budget = graph.budget
    if budget < edge[0, end]:
        raise InfeasibleRouteError(
            f"budget {budget} below direct return cost {edge[0, end]}")

    best_prize = -1.0
    best_cost = math.inf
    best_seq: tuple[int, ...] = (0, end)
    stack = [0]

    def consider(cost: float, prz: float):
        nonlocal best_prize, best_cost, best_seq
        total = cost + edge[stack[-1], end]
        if total > budget:
            return
        if prz > best_prize + 1e-12 or (abs(prz - best_prize) <= 1e-12
                                        and total < best_cost - 1e-12):
            best_prize = prz
            best_cost = total
            best_seq = tuple(stack) + (end,)

    def dfs(cost: float, prz: float, visited: int):
        consider(cost, prz)
        current = stack[-1]
        for j in range(1, end):
            bit = 1 << j
            if visited & bit:
                continue
            c2 = cost + edge[current, j] + service[j]
            if c2 + edge[j, end] > budget:
                continue
            stack.append(j)
            dfs(c2, prz + prize[j], visited | bit)
            stack.pop()

    dfs(0.0, 0.0, 0)
    return PathSolution(best_seq, float(best_prize), float(best_cost), True)
