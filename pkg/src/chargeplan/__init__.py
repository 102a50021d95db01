"""Adaptive planning and simulation for UAV recharge missions."""

from .errors import (
    ChargePlanError,
    InfeasibleRouteError,
    InstanceFormatError,
    MissionOver,
    ModelError,
)
from .instance import (
    REGIMES,
    ChargerModel,
    FlightProfile,
    Instance,
    NodeSpec,
    RegimePowers,
    charge_cost,
    charge_time,
    generate_instance,
    load_instance,
    node_prize,
    save_instance,
    travel_cost,
)
from .energy import (
    DEFAULT_COEFFICIENTS,
    NormalDist,
    NormalGammaPosterior,
    ObservationWindow,
    RegressionCoefficients,
    default_priors,
    ng_from_normal,
    predictive_cdf,
    predictive_quantile,
    prior_from_coefficients,
    update_posterior,
    window_push,
)
from .solver import (
    AcsParams,
    CostGraph,
    PathSolution,
    PheromoneMatrix,
    add_operator,
    add_value,
    drop_operator,
    drop_value,
    exact_solve,
    nearest_neighbor_path,
    select_next_node,
    solve_iacs,
    two_opt,
    validate_path,
)
from .planners import (
    CandidatePath,
    MissionState,
    PlannerConfig,
    build_cost_graph,
    plan_mcgreedy,
    plan_offline,
    plan_online_adapt,
    plan_romp,
    plan_weighted_err,
)
from .sim import (
    MissionSeeds,
    MissionTrace,
    TruthModel,
    make_truth,
    run_mission,
    simulate_charge,
    simulate_leg,
    verify_energy_conservation,
    verify_posterior_replay,
)
from .harness import (
    ExperimentConfig,
    InstanceSpec,
    MetricsRecord,
    compute_metrics,
    run_experiment,
    theta_sensitivity_sweep,
    validate_traces,
)

__version__ = "0.1.0"
