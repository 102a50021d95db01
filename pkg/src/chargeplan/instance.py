"""Problem instance data and the prize / cost functions.

A mission instance is a set of rechargeable sensor nodes in the plane, a
start and an end depot, a charger model describing the inductive recharge
hardware, and a flight profile describing the vehicle. All energies are
kept in kJ, powers in W, times in s; unit conversions happen inside the
functions below so callers never mix units.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from typing import NamedTuple, Sequence

import numpy as np

from .errors import InstanceFormatError, ModelError

INSTANCE_FORMAT = "chargeplan-instance-v1"

#: Flight regimes, in the order they occur within one leg.
REGIMES = ("takeoff", "cruise", "landing")

Vec3 = tuple[float, float, float]


class RegimePowers(NamedTuple):
    """Average power (W) assumed for each flight regime."""

    takeoff: float
    cruise: float
    landing: float


@dataclass(frozen=True)
class NodeSpec:
    """One rechargeable sensor node.

    ``initial_voltage`` is the supercapacitor voltage at mission start;
    the chargeable energy of the node is derived from it.
    """

    id: int
    position: Vec3
    initial_voltage: float

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(c) for c in self.position))
        if len(self.position) != 3:
            raise ValueError(f"node {self.id}: position must have 3 coordinates")


@dataclass(frozen=True)
class ChargerModel:
    """Recharge hardware constants shared by all nodes.

    The node-side store is a supercapacitor charged at constant current
    through an inductive link; ``eta_ipt`` is the air-gap link efficiency
    and ``eta_cc`` the constant-current charger efficiency. ``depletion_rate``

    is the rate (kJ/s) at which a node's chargeable energy grows while it
    keeps sensing.
    """

    capacitance: float = 10.0          # F
    v_max: float = 42.0                # V
    v_min: float = 20.0                # V
    avg_current: float = 0.825         # A
    eta_ipt: float = 0.40
    eta_cc: float = 0.90
    depletion_rate: float = 2.19e-6    # kJ/s

    def __post_init__(self):
        if self.capacitance <= 0:
            raise ValueError("capacitance must be positive")
        if not (0 <= self.v_min < self.v_max):
            raise ValueError("voltage range requires 0 <= v_min < v_max")
        if self.avg_current <= 0:
            raise ValueError("avg_current must be positive")
        for name in ("eta_ipt", "eta_cc"):
            eta = getattr(self, name)
            if not (0 < eta <= 1):
                raise ValueError(f"{name} must lie in (0, 1]")
        if self.depletion_rate < 0:
            raise ValueError("depletion_rate must be nonnegative")

    @property
    def full_prize(self) -> float:
        """Chargeable energy (kJ) of a fully depleted node."""
        return 0.5 * self.capacitance * (self.v_max**2 - self.v_min**2) * 1e-3


@dataclass(frozen=True)
class FlightProfile:
    """Vehicle flight constants: one cruise altitude, three regime speeds."""

    cruise_altitude: float = 30.0      # m
    speed_takeoff: float = 3.0         # m/s
    speed_cruise: float = 10.0         # m/s
    speed_landing: float = 2.0         # m/s
    uav_mass: float = 3.93             # kg
    air_density: float = 1.225         # kg/m^3
    battery_capacity: float = 359.64   # kJ
    energy_reserve: float = 0.0        # kJ

    def __post_init__(self):
        for name in ("cruise_altitude", "speed_takeoff", "speed_cruise",
                     "speed_landing", "uav_mass", "air_density"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.energy_reserve < 0:
            raise ValueError("energy_reserve must be nonnegative")
        if self.battery_capacity <= self.energy_reserve:
            raise ValueError("battery_capacity must exceed energy_reserve")


@dataclass(frozen=True)
class Instance:
    """A complete mission instance. Immutable; safe to share across runs."""

    nodes: tuple[NodeSpec, ...]
    start_depot: Vec3 = (0.0, 0.0, 0.0)
    end_depot: Vec3 = (0.0, 0.0, 0.0)
    charger: ChargerModel = field(default_factory=ChargerModel)
    flight: FlightProfile = field(default_factory=FlightProfile)
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "start_depot", tuple(float(c) for c in self.start_depot))
        object.__setattr__(self, "end_depot", tuple(float(c) for c in self.end_depot))
        ids = [n.id for n in self.nodes]
        if sorted(ids) != list(range(1, len(ids) + 1)):
            raise ValueError("node ids must be 1..N, unique and contiguous")
        for n in self.nodes:
            if not (self.charger.v_min <= n.initial_voltage <= self.charger.v_max):
                raise ValueError(
                    f"node {n.id}: initial_voltage {n.initial_voltage} outside "
                    f"[{self.charger.v_min}, {self.charger.v_max}]"
                )
            z = n.position[2]
            if z < 0 or z >= self.flight.cruise_altitude:
                raise ValueError(
                    f"node {n.id}: altitude {z} must satisfy 0 <= z < cruise altitude"
                )

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def end_depot_id(self) -> int:
        """Sentinel id used for the end depot in route sequences."""
        return len(self.nodes) + 1

    def node_by_id(self, node_id: int) -> NodeSpec:
        node = self.nodes[node_id - 1]
        if node.id != node_id:  # nodes are stored ordered by id
            raise KeyError(node_id)
        return node


def node_prize(node: NodeSpec, charger: ChargerModel, elapsed_t: float) -> float:
    """Chargeable energy (kJ) of ``node`` after ``elapsed_t`` seconds.

    Grows linearly at the depletion rate from the initial deficit, and is
    capped by the capacitor's usable energy span.
    """
    if elapsed_t < 0:
        raise ValueError("elapsed_t must be nonnegative")
    base = 0.5 * charger.capacitance * (charger.v_max**2 - node.initial_voltage**2) * 1e-3
    return min(base + charger.depletion_rate * elapsed_t, charger.full_prize)


def travel_cost(from_pos: Sequence[float], to_pos: Sequence[float],
                flight: FlightProfile, powers: RegimePowers) -> float:
    """Energy (kJ) for one leg: vertical takeoff, level cruise, vertical landing.

    Cruise distance is horizontal; both cruise endpoints sit at the cruise
    altitude, so the vertical segments are charged to takeoff and landing.
    """
    if min(powers) <= 0:
        raise ValueError("regime powers must be strictly positive")
    d = math.hypot(to_pos[0] - from_pos[0], to_pos[1] - from_pos[1])
    h = flight.cruise_altitude
    joules = (
        powers.takeoff * (h - from_pos[2]) / flight.speed_takeoff
        + powers.cruise * d / flight.speed_cruise
        + powers.landing * (h - to_pos[2]) / flight.speed_landing
    )
    return joules * 1e-3


def charge_cost(node: NodeSpec, charger: ChargerModel, elapsed_t: float) -> float:
    """Vehicle-side energy (kJ) to deliver the node's current prize."""
    if charger.eta_ipt <= 0:
        raise ModelError("eta_ipt must be positive")
    return node_prize(node, charger, elapsed_t) / charger.eta_ipt


def charge_time(node: NodeSpec, charger: ChargerModel, elapsed_t: float) -> float:
    """Duration (s) of a constant-current recharge of the node's current deficit."""
    prize_joules = node_prize(node, charger, elapsed_t) * 1e3
    v_sq = charger.v_max**2 - 2.0 * prize_joules / charger.capacitance
    if v_sq < 0:
        raise ModelError("prize exceeds capacitor capacity")
    v_current = math.sqrt(v_sq)
    return charger.capacitance * (charger.v_max - v_current) / charger.avg_current / charger.eta_cc


def generate_instance(n_nodes: int, area_side: float, seed: int,
                      charger: ChargerModel | None = None,
                      flight: FlightProfile | None = None,
                      start_depot: Vec3 = (0.0, 0.0, 0.0),
                      end_depot: Vec3 = (0.0, 0.0, 0.0),
                      name: str = "") -> Instance:
    """Sample a random instance: nodes uniform over an ``area_side`` square.

    Node altitudes are 0 (ground sensors) and initial voltages are uniform
    over [v_min, v_max). Deterministic and platform-stable for a given seed
    (counter-based Philox generator). Instances generated with the same seed
    but different ``n_nodes`` share no positional prefix.
    """
    if n_nodes < 1:
        raise ValueError("n_nodes must be >= 1")
    if area_side <= 0:
        raise ValueError("area_side must be positive")
    charger = charger or ChargerModel()
    flight = flight or FlightProfile()
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    xy = rng.uniform(0.0, area_side, size=(n_nodes, 2))
    volts = rng.uniform(charger.v_min, charger.v_max, size=n_nodes)
    nodes = tuple(
        NodeSpec(id=i + 1, position=(float(xy[i, 0]), float(xy[i, 1]), 0.0),
                 initial_voltage=float(volts[i]))
        for i in range(n_nodes)
    )
    return Instance(nodes=nodes, start_depot=start_depot, end_depot=end_depot,
                    charger=charger, flight=flight, name=name)


def save_instance(instance: Instance, path) -> None:
    """Write an instance as versioned JSON. ``load_instance`` round-trips it."""
    doc = {
        "format": INSTANCE_FORMAT,
        "name": instance.name,
        "start_depot": list(instance.start_depot),
        "end_depot": list(instance.end_depot),
        "charger": asdict(instance.charger),
        "flight": asdict(instance.flight),
        "nodes": [
            {"id": n.id, "position": list(n.position), "initial_voltage": n.initial_voltage}
            for n in instance.nodes
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_instance(path) -> Instance:
    """Read an instance file, validating format tag, fields and invariants."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InstanceFormatError(exc.msg, path=path, line=exc.lineno) from exc

    def require(mapping, key, where):
        try:
            return mapping[key]
        except (KeyError, TypeError):
            raise InstanceFormatError("missing required field", path=path,
                                      field=f"{where}.{key}" if where else key) from None

    fmt = require(doc, "format", "")
    if fmt != INSTANCE_FORMAT:
        raise InstanceFormatError(f"unsupported format tag {fmt!r}", path=path, field="format")
    try:
        charger = ChargerModel(**require(doc, "charger", ""))
        flight = FlightProfile(**require(doc, "flight", ""))
        nodes = tuple(
            NodeSpec(
                id=require(nd, "id", f"nodes[{i}]"),
                position=tuple(require(nd, "position", f"nodes[{i}]")),
                initial_voltage=require(nd, "initial_voltage", f"nodes[{i}]"),
            )
            for i, nd in enumerate(require(doc, "nodes", ""))
        )
        return Instance(
            nodes=nodes,
            start_depot=tuple(require(doc, "start_depot", "")),
            end_depot=tuple(require(doc, "end_depot", "")),
            charger=charger,
            flight=flight,
            name=doc.get("name", ""),
        )
    except InstanceFormatError:
        raise
    except (TypeError, ValueError) as exc:
        raise InstanceFormatError(str(exc), path=path) from exc
