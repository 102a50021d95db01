"""Stochastic mission execution and trace recording.

The simulator flies one mission: it follows the current plan leg by leg,
drawing the actual average power of every reading period from a hidden
truth distribution, recharges nodes, and re-plans after each recharge
(except for the blind offline baseline). Everything observable is written
into a MissionTrace whose records are exact enough to replay the energy
bookkeeping and the posterior sequence bit for bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from time import perf_counter
from typing import NamedTuple

import numpy as np

from ._rng import derive_seed, philox
from .energy import (
    NormalDist,
    NormalGammaPosterior,
    ObservationWindow,
    default_priors,
    ng_from_normal,
    update_posterior,
    window_push,
)
from .errors import MissionOver
from .instance import REGIMES, Instance, RegimePowers, travel_cost
from .planners import (
    MissionState,
    PlannerConfig,
    PLANNER_NAMES,
    initial_mission_state,
    plan_offline,
    plan_online_adapt,
    plan_romp,
    plan_weighted_err,
    prior_mean_powers,
    quantile_powers,
    weighted_error_ratio,
    _mcgreedy_detailed,
)
from .solver import PathSolution

__all__ = [
    "TruthModel",
    "LegObservation",
    "LegRecord",
    "ChargeRecord",
    "ReplanRecord",
    "MissionTrace",
    "MissionSeeds",
    "make_truth",
    "simulate_leg",
    "simulate_charge",
    "run_mission",
    "verify_energy_conservation",
    "verify_posterior_replay",
]


@dataclass(frozen=True)
class TruthModel:
    """Hidden ground-truth power distributions: the priors shifted in mean
    by ``delta_mu`` and scaled in spread by ``delta_sigma``."""

    dists: dict[str, NormalDist]
    delta_mu: float
    delta_sigma: float


def make_truth(priors: dict[str, NormalDist], delta_mu: float,
               delta_sigma: float) -> TruthModel:
    if 1.0 + delta_sigma < 0:
        raise ValueError("delta_sigma must keep the scale nonnegative")
    # variance written as (1+ds)^2 * var so a zero shift is an exact identity
    dists = {
        r: NormalDist(mean=(1.0 + delta_mu) * priors[r].mean,
                      variance=(1.0 + delta_sigma) ** 2 * priors[r].variance)
        for r in REGIMES
    }
    return TruthModel(dists=dists, delta_mu=delta_mu, delta_sigma=delta_sigma)


class LegObservation(NamedTuple):
    """One power reading: regime, absolute timestamp, average power and the
    portion of the reading period it covers (the final tick of a regime is
    prorated)."""

    regime: str
    timestamp: float
    power: float
    dt: float


@dataclass(frozen=True)
class LegRecord:
    from_id: int
    to_id: int
    planned_energy: float
    actual_energy: float
    observations: tuple[LegObservation, ...]
    durations: tuple[float, float, float]
    completed: bool


@dataclass(frozen=True)
class ChargeRecord:
    node_id: int
    prize: float
    cost: float
    duration: float
    completed: bool


@dataclass(frozen=True)
class ReplanRecord:
    index: int
    at_node: int
    wall_time: float
    posteriors: dict[str, tuple[float, float, float, float]]
    chosen_theta: float | None
    planned_sequence: tuple[int, ...]


@dataclass(frozen=True)
class MissionSeeds:
    offline: int
    truth: int
    solver: int
    mc: int


@dataclass(frozen=True)
class MissionTrace:
    """Full audit record of one executed mission."""

    instance_name: str
    planner: str
    seeds: MissionSeeds
    delta_mu: float
    delta_sigma: float
    offline_sequence: tuple[int, ...]
    legs: tuple[LegRecord, ...]
    charges: tuple[ChargeRecord, ...]
    replans: tuple[ReplanRecord, ...]
    status: str
    final_residual: float
    total_prize: float
    total_cost: float
    battery_capacity: float
    energy_reserve: float
    window_length: float
    reading_period: float
    prior_ng: dict[str, tuple[float, float, float, float]]

    @property
    def success(self) -> bool:
        return self.status == "success"

    @property
    def replan_wall_times(self) -> tuple[float, ...]:
        return tuple(r.wall_time for r in self.replans)

    def to_dict(self, include_timing: bool = True) -> dict:
        doc = {
            "instance_name": self.instance_name,
            "planner": self.planner,
            "seeds": {"offline": self.seeds.offline, "truth": self.seeds.truth,
                      "solver": self.seeds.solver, "mc": self.seeds.mc},
            "delta_mu": self.delta_mu,
            "delta_sigma": self.delta_sigma,
            "offline_sequence": list(self.offline_sequence),
            "legs": [
                {
                    "from_id": leg.from_id,
                    "to_id": leg.to_id,
                    "planned_energy": leg.planned_energy,
                    "actual_energy": leg.actual_energy,
                    "observations": [list(o) for o in leg.observations],
                    "durations": list(leg.durations),
                    "completed": leg.completed,
                }
                for leg in self.legs
            ],
            "charges": [
                {"node_id": c.node_id, "prize": c.prize, "cost": c.cost,
                 "duration": c.duration, "completed": c.completed}
                for c in self.charges
            ],
            "replans": [
                {
                    "index": r.index,
                    "at_node": r.at_node,
                    **({"wall_time": r.wall_time} if include_timing else {}),
                    "posteriors": {k: list(v) for k, v in r.posteriors.items()},
                    "chosen_theta": r.chosen_theta,
                    "planned_sequence": list(r.planned_sequence),
                }
                for r in self.replans
            ],
            "status": self.status,
            "final_residual": self.final_residual,
            "total_prize": self.total_prize,
            "total_cost": self.total_cost,
            "battery_capacity": self.battery_capacity,
            "energy_reserve": self.energy_reserve,
            "window_length": self.window_length,
            "reading_period": self.reading_period,
            "prior_ng": {k: list(v) for k, v in self.prior_ng.items()},
        }
        return doc

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(self.to_dict(include_timing=include_timing), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "MissionTrace":
        return cls(
            instance_name=doc["instance_name"],
            planner=doc["planner"],
            seeds=MissionSeeds(**doc["seeds"]),
            delta_mu=doc["delta_mu"],
            delta_sigma=doc["delta_sigma"],
            offline_sequence=tuple(doc["offline_sequence"]),
            legs=tuple(
                LegRecord(
                    from_id=leg["from_id"],
                    to_id=leg["to_id"],
                    planned_energy=leg["planned_energy"],
                    actual_energy=leg["actual_energy"],
                    observations=tuple(LegObservation(*o) for o in leg["observations"]),
                    durations=tuple(leg["durations"]),
                    completed=leg["completed"],
                )
                for leg in doc["legs"]
            ),
            charges=tuple(ChargeRecord(**c) for c in doc["charges"]),
            replans=tuple(
                ReplanRecord(
                    index=r["index"],
                    at_node=r["at_node"],
                    wall_time=r.get("wall_time", float("nan")),
                    posteriors={k: tuple(v) for k, v in r["posteriors"].items()},
                    chosen_theta=r["chosen_theta"],
                    planned_sequence=tuple(r["planned_sequence"]),
                )
                for r in doc["replans"]
            ),
            status=doc["status"],
            final_residual=doc["final_residual"],
            total_prize=doc["total_prize"],
            total_cost=doc["total_cost"],
            battery_capacity=doc["battery_capacity"],
            energy_reserve=doc["energy_reserve"],
            window_length=doc["window_length"],
            reading_period=doc["reading_period"],
            prior_ng={k: tuple(v) for k, v in doc["prior_ng"].items()},
        )

    @classmethod
    def from_json(cls, text: str) -> "MissionTrace":
        return cls.from_dict(json.loads(text))


def simulate_leg(state: MissionState, to: int, truth: TruthModel, flight,
                 rng: np.random.Generator, planned_energy: float = float("nan"),
                 ) -> tuple[LegRecord, MissionState, bool]:
    """Fly one leg, drawing an average power per reading period.

    Each regime is split into full reading periods plus a prorated final
    tick; each tick's power is an independent draw from the truth
    distribution, clamped at 0 W. The mission fails the instant the
    residual energy falls below the reserve; the partial leg and its
    observations stay recorded.
    """
    inst = state.instance
    to_pos = inst.end_depot if to == inst.end_depot_id else inst.node_by_id(to).position
    h = flight.cruise_altitude
    d = math.hypot(to_pos[0] - state.current_position[0],
                   to_pos[1] - state.current_position[1])
    durations = (
        (h - state.current_position[2]) / flight.speed_takeoff,
        d / flight.speed_cruise,
        (h - to_pos[2]) / flight.speed_landing,
    )
    period = state.window.reading_period
    capacity = flight.battery_capacity
    reserve = flight.energy_reserve
    window = state.window
    observations: list[LegObservation] = []
    leg_energy = 0.0
    time_flown = 0.0
    ok = True
    for regime, duration in zip(REGIMES, durations):
        if not ok:
            break
        n_full = int(duration // period)
        remainder = duration - n_full * period
        ticks = [period] * n_full + ([remainder] if remainder > 1e-9 else [])
        dist_r = truth.dists[regime]
        for dt in ticks:
            power = dist_r.mean + dist_r.sd * rng.standard_normal()
            if power < 0.0:
                power = 0.0
            leg_energy += power * dt * 1e-3
            time_flown += dt
            ts = state.elapsed_time + time_flown
            window = window_push(window, regime, ts, power)
            observations.append(LegObservation(regime, ts, power, dt))
            if capacity - (state.consumed + leg_energy) < reserve:
                ok = False
                break
    record = LegRecord(
        from_id=state.current_node_id,
        to_id=to,
        planned_energy=planned_energy,
        actual_energy=leg_energy,
        observations=tuple(observations),
        durations=durations,
        completed=ok,
    )
    new_state = replace(
        state,
        consumed=state.consumed + leg_energy,
        elapsed_time=state.elapsed_time + time_flown,
        window=window,
        current_position=to_pos if ok else state.current_position,
        current_node_id=to if ok else state.current_node_id,
    )
    return record, new_state, ok


def simulate_charge(state: MissionState, node_id: int, charger,
                    ) -> tuple[ChargeRecord, MissionState, bool]:
    """Recharge one node in full, or fail if the battery cannot cover it.

    There is no partial delivery: an interrupted charge records the energy
    drawn until the battery hit the reserve, delivers no prize, and ends
    the mission.
    """
    from .instance import charge_cost, charge_time, node_prize

    inst = state.instance
    if node_id not in state.unvisited:
        raise ValueError(f"node {node_id} already visited")
    node = inst.node_by_id(node_id)
    prize = node_prize(node, charger, state.elapsed_time)
    cost = charge_cost(node, charger, state.elapsed_time)
    duration = charge_time(node, charger, state.elapsed_time)
    available = state.residual_energy - inst.flight.energy_reserve
    if cost > available:
        drawn = max(available, 0.0)
        frac = drawn / cost if cost > 0 else 0.0
        record = ChargeRecord(node_id, 0.0, drawn, duration * frac, False)
        new_state = replace(state, consumed=state.consumed + drawn,
                            elapsed_time=state.elapsed_time + duration * frac)
        return record, new_state, False
    record = ChargeRecord(node_id, prize, cost, duration, True)
    new_state = replace(
        state,
        consumed=state.consumed + cost,
        elapsed_time=state.elapsed_time + duration,
        unvisited=tuple(i for i in state.unvisited if i != node_id),
    )
    return record, new_state, True


def run_mission(instance: Instance, planner: str, truth: TruthModel,
                seeds: MissionSeeds, config: PlannerConfig | None = None,
                offline_path: PathSolution | None = None) -> MissionTrace:
    """Execute one mission under the given planner and hidden truth.

    The offline baseline follows the initial route blindly; the online
    planners re-plan after every completed recharge. Failures are recorded
    outcomes, never exceptions. Passing a precomputed ``offline_path``
    lets several planners share the identical initial route.
    """
    config = config or PlannerConfig()
    if planner not in PLANNER_NAMES:
        raise ValueError(f"unknown planner {planner!r}; expected one of {PLANNER_NAMES}")
    flight, charger = instance.flight, instance.charger
    priors = default_priors(flight.uav_mass, flight.air_density)
    ng0 = {r: ng_from_normal(priors[r]) for r in REGIMES}
    if offline_path is None:
        offline_path = plan_offline(instance, priors,
                                    replace(config.acs, rng_seed=seeds.offline))
    state = initial_mission_state(instance, priors, ng0)
    truth_rng = philox(seeds.truth)
    plan_seq: tuple[int, ...] = offline_path.sequence
    plan_powers = prior_mean_powers(priors)
    legs: list[LegRecord] = []
    charges: list[ChargeRecord] = []
    replans: list[ReplanRecord] = []
    status = "success"
    replan_idx = 0
    end_id = instance.end_depot_id

    while True:
        next_id = plan_seq[1]
        to_pos = instance.end_depot if next_id == end_id else instance.node_by_id(next_id).position
        planned_e = travel_cost(state.current_position, to_pos, flight, plan_powers)
        leg, state, ok = simulate_leg(state, next_id, truth, flight, truth_rng,
                                      planned_energy=planned_e)
        legs.append(leg)
        if not ok:
            status = "failure"
            break
        if next_id == end_id:
            break
        charge, state, ok = simulate_charge(state, next_id, charger)
        charges.append(charge)
        if not ok:
            status = "failure"
            break

        if planner == "offline":
            plan_seq = plan_seq[1:]
            continue

        posteriors = {r: update_posterior(ng0[r], state.window.samples(r))
                      for r in REGIMES}
        state = replace(state, posteriors=posteriors)
        inherited = plan_seq[1:]
        acs = replace(config.acs, rng_seed=derive_seed(seeds.solver, replan_idx))
        theta: float | None = None
        t0 = perf_counter()
        try:
            if planner == "adapt":
                cand = plan_online_adapt(state, replace(config, acs=acs), inherited)
                solution = cand.solution
                theta = cand.theta
                plan_powers = quantile_powers(state.posteriors, theta)
            elif planner == "romp":
                solution = plan_romp(state, acs, inherited)
                plan_powers = prior_mean_powers(priors)
            elif planner == "weighted_err":
                last = (legs[-1].planned_energy, legs[-1].actual_energy)
                solution = plan_weighted_err(state, acs, config, last, inherited)
                r_err = weighted_error_ratio(last[0], last[1], config.w_act, config.w_est)
                plan_powers = RegimePowers(*(p * r_err for p in prior_mean_powers(priors)))
            else:  # mcgreedy
                mc_rng = philox(derive_seed(seeds.mc, replan_idx))
                solution, mc_powers = _mcgreedy_detailed(state, acs, config, mc_rng,
                                                         inherited)
                plan_powers = mc_powers
        except MissionOver:
            solution = PathSolution(sequence=(state.current_node_id, end_id),
                                    total_prize=0.0, total_cost=0.0, feasible=False)
        wall = perf_counter() - t0
        replans.append(ReplanRecord(
            index=replan_idx,
            at_node=state.current_node_id,
            wall_time=wall,
            posteriors={r: (p.mu, p.kappa, p.alpha_bi, p.beta_bi)
                        for r, p in state.posteriors.items()},
            chosen_theta=theta,
            planned_sequence=solution.sequence,
        ))
        replan_idx += 1
        plan_seq = solution.sequence

    total_prize = 0.0
    for c in charges:
        total_prize += c.prize
    return MissionTrace(
        instance_name=instance.name,
        planner=planner,
        seeds=seeds,
        delta_mu=truth.delta_mu,
        delta_sigma=truth.delta_sigma,
        offline_sequence=offline_path.sequence,
        legs=tuple(legs),
        charges=tuple(charges),
        replans=tuple(replans),
        status=status,
        final_residual=flight.battery_capacity - state.consumed,
        total_prize=total_prize,
        total_cost=state.consumed,
        battery_capacity=flight.battery_capacity,
        energy_reserve=flight.energy_reserve,
        window_length=state.window.window_length,
        reading_period=state.window.reading_period,
        prior_ng={r: (p.mu, p.kappa, p.alpha_bi, p.beta_bi) for r, p in ng0.items()},
    )


# ---------------------------------------------------------------------------
# Trace audits. Both replays repeat the simulator's arithmetic in the same
# order, so the comparisons are exact (==), not approximate.
# ---------------------------------------------------------------------------

def verify_energy_conservation(trace: MissionTrace) -> None:
    """Replay the energy bookkeeping and require bitwise agreement."""
    consumed = 0.0
    for i, leg in enumerate(trace.legs):
        leg_energy = 0.0
        for obs in leg.observations:
            leg_energy += obs.power * obs.dt * 1e-3
        if leg_energy != leg.actual_energy:
            raise ValueError(f"leg {i}: recorded actual energy does not match "
                             f"its observations ({leg.actual_energy} vs {leg_energy})")
        consumed += leg.actual_energy
        if i < len(trace.charges):
            consumed += trace.charges[i].cost
    if consumed != trace.total_cost:
        raise ValueError(f"consumed energy replay {consumed} != recorded "
                         f"total_cost {trace.total_cost}")
    if trace.battery_capacity - consumed != trace.final_residual:
        raise ValueError("final residual inconsistent with replayed consumption")
    prize = 0.0
    for c in trace.charges:
        prize += c.prize
    if prize != trace.total_prize:
        raise ValueError(f"prize replay {prize} != recorded total_prize {trace.total_prize}")


def verify_posterior_replay(trace: MissionTrace) -> None:
    """Re-derive every re-plan's posteriors from the recorded observations
    and require bitwise agreement with the recorded hyperparameters."""
    prior = {r: NormalGammaPosterior(*trace.prior_ng[r]) for r in trace.prior_ng}
    window = ObservationWindow(window_length=trace.window_length,
                               reading_period=trace.reading_period)
    for k, rp in enumerate(trace.replans):
        if k >= len(trace.legs):
            raise ValueError(f"replan {k} has no matching leg")
        for obs in trace.legs[k].observations:
            window = window_push(window, obs.regime, obs.timestamp, obs.power)
        for regime, recorded in rp.posteriors.items():
            post = update_posterior(prior[regime], window.samples(regime))
            replayed = (post.mu, post.kappa, post.alpha_bi, post.beta_bi)
            if replayed != tuple(recorded):
                raise ValueError(
                    f"replan {rp.index}: posterior for {regime} does not replay "
                    f"({recorded} vs {replayed})")
