"""Delay-tolerant consensus apportioning for fleets of local inverter systems.

The package splits into a protocol layer (topology, consensus, termination,
apportioning), a deterministic lockstep simulator (netsim), the fleet and
dispatch modeling (scenario), and a command-line front end (cli).
"""

from .apportioning import (
    ApportionProblem,
    ReferenceCommand,
    closed_form_oracle,
    init_states,
    net_reserve,
    reference_command,
)
from .consensus import (
    ConsensusState,
    Envelope,
    RatioView,
    absorb,
    emit,
    global_extremes_oracle,
    ratio,
)
from .errors import (
    ConfigurationError,
    FeasibilityError,
    InvariantError,
    LisnetError,
    NonTerminationError,
    ProtocolError,
)
from .netsim import (
    AuditReport,
    CycleResult,
    DelayModel,
    Mailbox,
    Simulation,
    run_cycle,
    run_naive_averaging,
    simulate_averaging,
)
from .scenario import (
    DispatchSchedule,
    LisUnit,
    PowerProfile,
    Tracker,
    bounds_at,
    run_day,
    six_lis_fleet,
    track,
)
from .termination import (
    CheckpointEvent,
    CheckpointSchedule,
    NodeMachine,
    TerminationState,
    checkpoint,
    epoch_update,
    run_node_step,
)
from .topology import Graph, WeightMatrix, build_weights, diameter

__version__ = "0.1.0"

__all__ = [
    "ApportionProblem",
    "AuditReport",
    "CheckpointEvent",
    "CheckpointSchedule",
    "ConfigurationError",
    "ConsensusState",
    "CycleResult",
    "DelayModel",
    "DispatchSchedule",
    "Envelope",
    "FeasibilityError",
    "Graph",
    "InvariantError",
    "LisnetError",
    "LisUnit",
    "Mailbox",
    "NodeMachine",
    "NonTerminationError",
    "PowerProfile",
    "ProtocolError",
    "RatioView",
    "ReferenceCommand",
    "Simulation",
    "TerminationState",
    "Tracker",
    "WeightMatrix",
    "absorb",
    "bounds_at",
    "build_weights",
    "checkpoint",
    "closed_form_oracle",
    "diameter",
    "emit",
    "epoch_update",
    "global_extremes_oracle",
    "init_states",
    "net_reserve",
    "ratio",
    "reference_command",
    "run_cycle",
    "run_day",
    "run_naive_averaging",
    "run_node_step",
    "simulate_averaging",
    "six_lis_fleet",
    "track",
]
