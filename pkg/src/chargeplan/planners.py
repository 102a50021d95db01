"""Mission-level planning policies.

Each planner turns the current mission state into a route from the
vehicle's position back to the end depot. The adaptive planner sweeps a
range of confidence levels over the posterior power predictive, solves a
route per level and keeps the best weighted compromise between confidence
and collected prize. The baselines plan at prior mean powers (optionally
rescaled by the most recent estimation error) or vote over routes solved
at randomly sampled power levels.

Route sequences at this level use instance node ids: element 0 is the
vehicle's current node id (0 while still at the start depot), the last
element is the end depot id ``n_nodes + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ._rng import derive_seed
from .energy import (
    NormalDist,
    NormalGammaPosterior,
    ObservationWindow,
    predictive_quantile,
)
from .errors import InfeasibleRouteError, MissionOver
from .instance import (
    REGIMES,
    Instance,
    RegimePowers,
    Vec3,
    charge_cost,
    node_prize,
)
from .solver import AcsParams, CostGraph, PathSolution, solve_iacs

__all__ = [
    "PlannerConfig",
    "MissionState",
    "CandidatePath",
    "PLANNER_NAMES",
    "initial_mission_state",
    "build_cost_graph",
    "plan_offline",
    "plan_online_adapt",
    "plan_romp",
    "plan_weighted_err",
    "plan_mcgreedy",
    "score_candidates",
    "weighted_error_ratio",
    "prior_mean_powers",
]

PLANNER_NAMES = ("offline", "romp", "weighted_err", "mcgreedy", "adapt")


@dataclass(frozen=True)
class PlannerConfig:
    """Knobs shared by the online planners."""

    theta_min: float = 0.75
    theta_max: float = 0.999
    n_theta_candidates: int = 5
    w_theta: float = 0.5
    w_prize: float = 0.5
    acs: AcsParams = field(default_factory=AcsParams)
    mc_samples: int = 100
    w_act: float = 0.5
    w_est: float = 0.5

    def __post_init__(self):
        if not (0.0 < self.theta_min < self.theta_max < 1.0):
            raise ValueError("need 0 < theta_min < theta_max < 1")
        if self.n_theta_candidates < 1 or self.mc_samples < 1:
            raise ValueError("candidate counts must be positive")
        if abs(self.w_theta + self.w_prize - 1.0) > 1e-9:
            raise ValueError("w_theta + w_prize must equal 1")
        if abs(self.w_act + self.w_est - 1.0) > 1e-9:
            raise ValueError("w_act + w_est must equal 1")


@dataclass(frozen=True)
class MissionState:
    """Everything the online planners may look at between two legs."""

    instance: Instance
    current_position: Vec3
    current_node_id: int
    consumed: float
    elapsed_time: float
    unvisited: tuple[int, ...]
    priors: dict[str, NormalDist]
    posteriors: dict[str, NormalGammaPosterior]
    window: ObservationWindow

    @property
    def residual_energy(self) -> float:
        return self.instance.flight.battery_capacity - self.consumed


@dataclass(frozen=True)
class CandidatePath:
    """One confidence level's route together with its selection score."""

    theta: float
    solution: PathSolution
    score: float


def initial_mission_state(instance: Instance, priors: dict[str, NormalDist],
                          posteriors: dict[str, NormalGammaPosterior],
                          ) -> MissionState:
    return MissionState(
        instance=instance,
        current_position=instance.start_depot,
        current_node_id=0,
        consumed=0.0,
        elapsed_time=0.0,
        unvisited=tuple(n.id for n in instance.nodes),
        priors=dict(priors),
        posteriors=dict(posteriors),
        window=ObservationWindow(),
    )


def prior_mean_powers(priors: dict[str, NormalDist]) -> RegimePowers:
    return RegimePowers(*(priors[r].mean for r in REGIMES))


def _edge_matrix(positions: np.ndarray, flight, powers: RegimePowers) -> np.ndarray:
    """Dense leg-energy matrix; matches ``travel_cost`` entrywise."""
    xy = positions[:, :2]
    diff = xy[:, None, :] - xy[None, :, :]
    d = np.hypot(diff[..., 0], diff[..., 1])
    tk = powers.takeoff * (flight.cruise_altitude - positions[:, 2]) / flight.speed_takeoff
    ld = powers.landing * (flight.cruise_altitude - positions[:, 2]) / flight.speed_landing
    return (tk[:, None] + powers.cruise * d / flight.speed_cruise + ld[None, :]) * 1e-3


def build_cost_graph(state: MissionState, power_levels: RegimePowers) -> CostGraph:
    """Deterministic planning graph for the current state.

    Start is the vehicle's position, end is the end depot, the budget is
    the residual energy minus the reserve. Prizes and service costs are
    evaluated at the current elapsed time. Raises MissionOver once the
    budget is gone.
    """
    if min(power_levels) <= 0:
        raise ValueError("power levels must be strictly positive")
    inst = state.instance
    budget = state.residual_energy - inst.flight.energy_reserve
    if budget <= 0:
        raise MissionOver(f"planning budget exhausted ({budget:.3f} kJ)")
    ids = tuple(sorted(state.unvisited))
    nodes = [inst.node_by_id(i) for i in ids]
    n = len(ids) + 2
    positions = np.empty((n, 3))
    positions[0] = state.current_position
    for t, node in enumerate(nodes):
        positions[1 + t] = node.position
    positions[n - 1] = inst.end_depot
    prize = np.zeros(n)
    service = np.zeros(n)
    for t, node in enumerate(nodes):
        prize[1 + t] = node_prize(node, inst.charger, state.elapsed_time)
        service[1 + t] = charge_cost(node, inst.charger, state.elapsed_time)
    edge = _edge_matrix(positions, inst.flight, power_levels)
    node_ids = (state.current_node_id, *ids, inst.end_depot_id)
    return CostGraph(n_nodes=n, prize=prize, service_cost=service, edge_cost=edge,
                     budget=float(budget), node_ids=node_ids)


def _to_id_space(solution: PathSolution, graph: CostGraph) -> PathSolution:
    ids = graph.node_ids
    return replace(solution, sequence=tuple(ids[v] for v in solution.sequence))


def _inherited_indices(inherited, graph: CostGraph) -> list[int] | None:
    """Map an id-space route onto the current graph, dropping stale ids."""
    if inherited is None:
        return None
    seq = inherited.sequence if isinstance(inherited, PathSolution) else inherited
    index_of = {nid: idx for idx, nid in enumerate(graph.node_ids)}
    out = []
    for nid in seq:
        idx = index_of.get(int(nid))
        if idx is not None and 1 <= idx <= graph.end - 1:
            out.append(idx)
    return out


def _direct_return(state: MissionState, powers: RegimePowers) -> PathSolution:
    """Fallback route straight home, flagged infeasible if even that
    exceeds the remaining budget."""
    from .instance import travel_cost

    inst = state.instance
    cost = travel_cost(state.current_position, inst.end_depot, inst.flight, powers)
    budget = state.residual_energy - inst.flight.energy_reserve
    return PathSolution(
        sequence=(state.current_node_id, inst.end_depot_id),
        total_prize=0.0,
        total_cost=float(cost),
        feasible=bool(cost <= budget),
    )


def plan_offline(instance: Instance, prior_dists: dict[str, NormalDist],
                 acs_params: AcsParams) -> PathSolution:
    """Initial route from the start depot at prior mean powers."""
    powers = prior_mean_powers(prior_dists)
    positions = np.empty((instance.n_nodes + 2, 3))
    positions[0] = instance.start_depot
    for node in instance.nodes:
        positions[node.id] = node.position
    positions[-1] = instance.end_depot
    n = instance.n_nodes + 2
    prize = np.zeros(n)
    service = np.zeros(n)
    for node in instance.nodes:
        prize[node.id] = node_prize(node, instance.charger, 0.0)
        service[node.id] = charge_cost(node, instance.charger, 0.0)
    edge = _edge_matrix(positions, instance.flight, powers)
    budget = instance.flight.battery_capacity - instance.flight.energy_reserve
    graph = CostGraph(n_nodes=n, prize=prize, service_cost=service, edge_cost=edge,
                      budget=budget,
                      node_ids=(0, *range(1, instance.n_nodes + 1), instance.end_depot_id))
    return _to_id_space(solve_iacs(graph, acs_params), graph)


def score_candidates(thetas: Sequence[float], prizes: Sequence[float],
                     config: PlannerConfig) -> np.ndarray:
    """Weighted score of each candidate: confidence level normalized over
    the configured sweep range plus prize normalized over the candidate
    set. A degenerate prize spread contributes zero for everyone."""
    thetas = np.asarray(thetas, dtype=float)
    prizes = np.asarray(prizes, dtype=float)
    span_t = config.theta_max - config.theta_min
    t_term = (thetas - config.theta_min) / span_t if span_t > 0 else np.zeros_like(thetas)
    p_span = prizes.max() - prizes.min() if prizes.size else 0.0
    if p_span > 0:
        p_term = (prizes - prizes.min()) / p_span
    else:
        p_term = np.zeros_like(prizes)
    return config.w_theta * t_term + config.w_prize * p_term


def theta_grid(config: PlannerConfig) -> np.ndarray:
    return np.linspace(config.theta_min, config.theta_max, config.n_theta_candidates)


def quantile_powers(posteriors: dict[str, NormalGammaPosterior], theta: float,
                    ) -> RegimePowers:
    return RegimePowers(*(predictive_quantile(posteriors[r], theta) for r in REGIMES))


def plan_online_adapt(state: MissionState, config: PlannerConfig,
                      inherited: PathSolution | Sequence[int] | None,
                      ) -> CandidatePath:
    """Sweep the confidence range, solve one route per level, keep the best.

    Routes identical across several levels collapse into one candidate at
    the highest level. If no level admits a feasible route the direct
    return is issued. Exact score ties resolve toward the higher prize and
    then the higher confidence: the two extreme levels always tie at w/2
    whenever they hold the prize extremes, and preferring confidence there
    would discard a feasible prize-bearing route for an empty one,
    violating the no-degradation guarantee for inherited routes.
    """
    candidates: dict[tuple[int, ...], tuple[float, PathSolution]] = {}
    for i, theta in enumerate(theta_grid(config)):
        theta = float(theta)
        powers = quantile_powers(state.posteriors, theta)
        graph = build_cost_graph(state, powers)
        acs = replace(config.acs, rng_seed=derive_seed(config.acs.rng_seed, i))
        try:
            solution = solve_iacs(graph, acs, _inherited_indices(inherited, graph))
        except InfeasibleRouteError:
            continue
        solution = _to_id_space(solution, graph)
        candidates[solution.sequence] = (theta, solution)

    if not candidates:
        return CandidatePath(theta=config.theta_max,
                             solution=_direct_return(
                                 state, quantile_powers(state.posteriors, config.theta_max)),
                             score=0.0)

    entries = list(candidates.values())
    scores = score_candidates([t for t, _ in entries], [s.total_prize for _, s in entries],
                              config)
    best = 0
    for i in range(1, len(entries)):
        key_i = (scores[i], entries[i][1].total_prize, entries[i][0])
        key_b = (scores[best], entries[best][1].total_prize, entries[best][0])
        if key_i > key_b:
            best = i
    theta, solution = entries[best]
    return CandidatePath(theta=theta, solution=solution, score=float(scores[best]))


def plan_romp(state: MissionState, acs_params: AcsParams,
              inherited: PathSolution | Sequence[int] | None) -> PathSolution:
    """Re-plan with prior mean powers; no use of online observations."""
    powers = prior_mean_powers(state.priors)
    graph = build_cost_graph(state, powers)
    try:
        return _to_id_space(solve_iacs(graph, acs_params,
                                       _inherited_indices(inherited, graph)), graph)
    except InfeasibleRouteError:
        return _direct_return(state, powers)


def weighted_error_ratio(planned: float, actual: float,
                         w_act: float = 0.5, w_est: float = 0.5) -> float:
    """Multiplicative correction from the most recent leg's estimation error."""
    if planned <= 0:
        raise ValueError("planned leg energy must be positive")
    return w_act * ((actual - planned) / planned + 1.0) + w_est


def plan_weighted_err(state: MissionState, acs_params: AcsParams,
                      config: PlannerConfig,
                      last_leg: tuple[float, float] | None,
                      inherited: PathSolution | Sequence[int] | None) -> PathSolution:
    """Re-plan at prior means with every edge cost scaled by the error ratio
    of the most recent leg (planned vs actual energy). Before the first leg
    the ratio is 1."""
    if last_leg is None:
        r_err = 1.0
    else:
        planned, actual = last_leg
        r_err = weighted_error_ratio(planned, actual, config.w_act, config.w_est)
    powers = prior_mean_powers(state.priors)
    graph = build_cost_graph(state, powers)
    if r_err != 1.0:
        graph = replace(graph, edge_cost=graph.edge_cost * r_err)
    try:
        return _to_id_space(solve_iacs(graph, acs_params,
                                       _inherited_indices(inherited, graph)), graph)
    except InfeasibleRouteError:
        return _direct_return(state, powers)


def select_most_frequent(entries) -> list:
    """Voting rule for sampled routes: highest occurrence count wins, ties
    break toward higher prize, then lower cost."""
    return max(entries, key=lambda e: (e[0], e[1].total_prize, -e[1].total_cost))


def _mcgreedy_detailed(state: MissionState, acs_params: AcsParams,
                       config: PlannerConfig, rng: np.random.Generator,
                       inherited: PathSolution | Sequence[int] | None,
                       ) -> tuple[PathSolution, RegimePowers]:
    """Vote over routes solved at uniformly sampled power levels.

    Per regime, levels are drawn between the smallest and largest observed
    reading (prior mean when a regime has no readings yet). The most
    frequent route wins; ties break toward higher prize, then lower cost.
    Returns the winner plus the power triple of the first sample that
    produced it (its costs are reported under that triple).
    """
    bounds = []
    for r in REGIMES:
        samples = state.window.samples(r)
        if samples:
            bounds.append((min(samples), max(samples)))
        else:
            mean = state.priors[r].mean
            bounds.append((mean, mean))
    tally: dict[tuple[int, ...], list] = {}
    fallback_powers = prior_mean_powers(state.priors)
    for s in range(config.mc_samples):
        powers = RegimePowers(*(float(rng.uniform(lo, hi)) for lo, hi in bounds))
        graph = build_cost_graph(state, powers)
        acs = replace(acs_params, rng_seed=derive_seed(acs_params.rng_seed, s))
        try:
            solution = solve_iacs(graph, acs, _inherited_indices(inherited, graph))
        except InfeasibleRouteError:
            continue
        solution = _to_id_space(solution, graph)
        entry = tally.get(solution.sequence)
        if entry is None:
            tally[solution.sequence] = [1, solution, powers]
        else:
            entry[0] += 1
    if not tally:
        return _direct_return(state, fallback_powers), fallback_powers
    best = select_most_frequent(tally.values())
    return best[1], best[2]


def plan_mcgreedy(state: MissionState, acs_params: AcsParams, config: PlannerConfig,
                  rng: np.random.Generator,
                  inherited: PathSolution | Sequence[int] | None) -> PathSolution:
    solution, _ = _mcgreedy_detailed(state, acs_params, config, rng, inherited)
    return solution
