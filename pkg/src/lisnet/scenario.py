"""Fleet scenarios: renewable availability, capacity windows, dispatch loop.

A fleet mixes renewable units, whose capacity window is pinned to the power
their tracker currently extracts (so the network must absorb everything
they have), and dispatchable units with static windows. The day runner
rebuilds the apportioning problem at every dispatch instant from the
windows in force, runs one consensus-and-terminate cycle, and pushes the
resulting commands through each unit's tracking model.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Sequence

from .apportioning import ApportionProblem, closed_form_oracle
from .errors import ConfigurationError
from .netsim import CycleResult, DelayModel, run_cycle
from .termination import CheckpointSchedule
from .topology import Graph, build_weights, diameter

RES = "res"
NON_RES = "non_res"

TRACK_INSTANT = "instant"
TRACK_LAG = "lag"


@dataclass(frozen=True)
class PowerProfile:
    """Piecewise-linear watts-versus-hours curve."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.points) < 2:
            raise ConfigurationError("profile needs at least two points")
        hours = [t for t, _ in self.points]
        if any(b <= a for a, b in zip(hours, hours[1:])):
            raise ConfigurationError("profile hours must strictly increase")
        if any(w < 0 for _, w in self.points):
            raise ConfigurationError("profile power must be non-negative")

    @classmethod
    def sunny_day(cls) -> "PowerProfile":
        """Ramp to 1 kW over three hours, hold two, ramp back down by hour eight."""
        return cls(((0.0, 0.0), (3.0, 1000.0), (5.0, 1000.0), (8.0, 0.0)))

    @property
    def start(self) -> float:
        return self.points[0][0]

    @property
    def end(self) -> float:
        return self.points[-1][0]

    def power_at(self, t_hours: float) -> float:
        if not self.start <= t_hours <= self.end:
            raise ConfigurationError(
                f"time {t_hours} h outside profile domain "
                f"[{self.start}, {self.end}] h"
            )
        for (t0, w0), (t1, w1) in zip(self.points, self.points[1:]):
            if t_hours <= t1:
                return w0 + (w1 - w0) * (t_hours - t0) / (t1 - t0)
        return self.points[-1][1]


@dataclass(frozen=True)
class LisUnit:
    """One local inverter system: either renewable or dispatchable."""

    uid: int
    kind: str
    pi_min: float | None = None
    pi_max: float | None = None
    profile: PowerProfile | None = None
    tracking: str = TRACK_INSTANT
    lag_seconds: float | None = None

    def __post_init__(self):
        if self.kind == NON_RES:
            if self.pi_min is None or self.pi_max is None:
                raise ConfigurationError(f"unit {self.uid}: static bounds required")
            if not 0 <= self.pi_min < self.pi_max:
                raise ConfigurationError(
                    f"unit {self.uid}: bounds [{self.pi_min}, {self.pi_max}] invalid"
                )
        elif self.kind == RES:
            if self.profile is None:
                raise ConfigurationError(f"unit {self.uid}: renewable needs a profile")
        else:
            raise ConfigurationError(f"unit {self.uid}: unknown kind {self.kind!r}")
        if self.tracking == TRACK_LAG:
            if self.lag_seconds is None or self.lag_seconds <= 0:
                raise ConfigurationError(
                    f"unit {self.uid}: lag tracking needs a positive time constant"
                )
        elif self.tracking != TRACK_INSTANT:
            raise ConfigurationError(
                f"unit {self.uid}: unknown tracking mode {self.tracking!r}"
            )


def bounds_at(
    unit: LisUnit, t_hours: float, epsilon: float
) -> tuple[float, float] | None:
    """Capacity window at time t, or None when a renewable has nothing to offer.

    A renewable's floor sits epsilon below its currently available power, so
    any feasible apportionment must take essentially all of it. A unit whose
    available power is zero cannot hold a non-degenerate window and sits the
    cycle out.
    """
    if unit.kind == NON_RES:
        return (unit.pi_min, unit.pi_max)
    p = unit.profile.power_at(t_hours)
    if p <= 0.0:
        return None
    return (max(p - epsilon, 0.0), p)


def track(unit: LisUnit, command: float, dt_seconds: float, previous: float = 0.0) -> float:
    """Power actually delivered after ``dt_seconds`` of following ``command``."""
    if unit.tracking == TRACK_INSTANT:
        return command
    alpha = 1.0 - math.exp(-dt_seconds / unit.lag_seconds)
    return previous + (command - previous) * alpha


class Tracker:
    """Holds one unit's delivered output across dispatch intervals."""

    def __init__(self, unit: LisUnit, initial: float = 0.0):
        self.unit = unit
        self.output = initial

    def step(self, command: float, dt_seconds: float) -> float:
        self.output = track(self.unit, command, dt_seconds, self.output)
        return self.output


@dataclass(frozen=True)
class DispatchSchedule:
    """Demand shape and timing for a day of repeated dispatch cycles."""

    demand: float | PowerProfile
    consensus_period: float = 1.0
    dispatch_period: float = 60.0
    epsilon: float = 1.0

    def __post_init__(self):
        if self.consensus_period <= 0 or self.dispatch_period <= 0:
            raise ConfigurationError("periods must be positive")
        if self.dispatch_period < self.consensus_period:
            raise ConfigurationError(
                "dispatch period must cover at least one consensus iteration"
            )
        if self.epsilon <= 0:
            raise ConfigurationError("epsilon must be positive")

    def demand_at(self, t_hours: float) -> float:
        if isinstance(self.demand, PowerProfile):
            return self.demand.power_at(t_hours)
        return float(self.demand)

    @property
    def iteration_budget(self) -> int:
        return int(self.dispatch_period / self.consensus_period)


@dataclass
class DispatchRecord:
    """Everything decided and delivered at one dispatch instant."""

    index: int
    t_hours: float
    feasible: bool
    participants: tuple[int, ...]
    demand: float
    commands: dict[int, float]
    delivered: dict[int, float]
    total_command: float
    total_delivered: float
    theta: int | None
    iterations: int | None
    budget_exceeded: bool
    oracle: dict[int, float] | None


@dataclass
class DayResult:
    """Full-day dispatch trace plus run-wide audit summaries."""

    records: list[DispatchRecord]
    infeasible_count: int
    budget_exceeded_count: int
    max_conservation_error: float
    trace_rows: list[dict]


def run_day(
    fleet: Sequence[LisUnit],
    graph: Graph,
    schedule: DispatchSchedule,
    delay_model: DelayModel,
    rho: float,
    *,
    demand_nodes: frozenset[int] | set[int] | None = None,
    seed: int = 0,
    start_hours: float | None = None,
    end_hours: float | None = None,
    diameter_bound: int | None = None,
    record: str = "none",
    with_oracle: bool = False,
) -> DayResult:
    """Repeated dispatch over a day: rebuild, solve, and track at each instant.

    Infeasible instants are flagged and the previous commands held. A cycle
    that needs more iterations than the dispatch period covers still runs
    to termination and dispatches its result, but the overrun is flagged on
    the record; this happens when a renewable sits a cycle out and the
    shrunken graph both slows mixing and lengthens the checkpoint period.
    """
    units = {u.uid: u for u in fleet}
    if set(units) != set(graph.nodes):
        raise ConfigurationError("fleet ids must match the graph's nodes")
    profiles = [u.profile for u in fleet if u.kind == RES]
    if start_hours is None:
        start_hours = max(p.start for p in profiles) if profiles else 0.0
    if end_hours is None:
        end_hours = min(p.end for p in profiles) if profiles else start_hours
    if end_hours < start_hours:
        raise ConfigurationError("day must end at or after its start")
    rng = random.Random(seed)
    trackers = {uid: Tracker(unit) for uid, unit in units.items()}
    records: list[DispatchRecord] = []
    trace_rows: list[dict] = []
    prev_commands = {uid: 0.0 for uid in units}
    infeasible = 0
    overruns = 0
    worst_leak = 0.0
    step_hours = schedule.dispatch_period / 3600.0
    n_instants = int(round((end_hours - start_hours) / step_hours)) + 1
    for index in range(n_instants):
        t = start_hours + index * step_hours
        cycle_seed = rng.randrange(2**32)
        window = {}
        for uid, unit in sorted(units.items()):
            b = bounds_at(unit, t, schedule.epsilon)
            if b is not None:
                window[uid] = b
        participants = tuple(sorted(window))
        demand = schedule.demand_at(t)
        result: CycleResult | None = None
        feasible = bool(participants)
        if feasible:
            total_min = sum(lo for lo, _ in window.values())
            total_max = sum(hi for _, hi in window.values())
            feasible = total_min <= demand <= total_max
        subgraph = graph.induced(participants) if participants else None
        if feasible and not subgraph.is_connected():
            feasible = False
        if feasible:
            circulating = sorted(set(demand_nodes or ()) & set(participants))
            if not circulating:
                circulating = [participants[0]]
            problem = ApportionProblem(demand, window, frozenset(circulating))
            weights = build_weights(subgraph)
            d_bound = diameter(subgraph)
            if diameter_bound is not None:
                d_bound = max(d_bound, diameter_bound)
            cycle_schedule = CheckpointSchedule(max(1, d_bound), delay_model.tau_bar)
            result = run_cycle(
                subgraph,
                weights,
                problem,
                delay_model,
                cycle_schedule,
                rho,
                seed=cycle_seed,
                record=record,
            )
            budget_exceeded = result.steps > schedule.iteration_budget
            if budget_exceeded:
                overruns += 1
            commands = {uid: 0.0 for uid in units}
            commands.update(result.commands.commands)
            worst_leak = max(worst_leak, result.max_conservation_error)
        else:
            infeasible += 1
            budget_exceeded = False
            commands = dict(prev_commands)
        delivered = {
            uid: trackers[uid].step(commands[uid], schedule.dispatch_period)
            for uid in sorted(units)
        }
        oracle = None
        if with_oracle and result is not None:
            oracle = dict(closed_form_oracle(problem).commands)
        records.append(
            DispatchRecord(
                index=index,
                t_hours=t,
                feasible=feasible,
                participants=participants,
                demand=demand,
                commands=commands,
                delivered=delivered,
                total_command=sum(commands.values()),
                total_delivered=sum(delivered.values()),
                theta=result.theta if result else None,
                iterations=result.steps if result else None,
                budget_exceeded=budget_exceeded,
                oracle=oracle,
            )
        )
        if result is not None and record != "none":
            for row in result.trace_rows:
                row = dict(row)
                row["cycle"] = index
                trace_rows.append(row)
        prev_commands = commands
    return DayResult(
        records=records,
        infeasible_count=infeasible,
        budget_exceeded_count=overruns,
        max_conservation_error=worst_leak,
        trace_rows=trace_rows,
    )


def six_lis_fleet() -> list[LisUnit]:
    """The canonical six-unit validation fleet: unit 2 renewable, rest static."""
    return [
        LisUnit(uid=1, kind=NON_RES, pi_min=0.0, pi_max=1500.0),
        LisUnit(uid=2, kind=RES, profile=PowerProfile.sunny_day()),
        LisUnit(uid=3, kind=NON_RES, pi_min=0.0, pi_max=1000.0),
        LisUnit(uid=4, kind=NON_RES, pi_min=0.0, pi_max=1200.0),
        LisUnit(uid=5, kind=NON_RES, pi_min=0.0, pi_max=1500.0),
        LisUnit(uid=6, kind=NON_RES, pi_min=0.0, pi_max=2000.0),
    ]
