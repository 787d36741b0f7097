"""Energy-efficient joint unicast/multicast beamforming for multi-cell MIMO.

Library layout:

- `scenario`: topology, power/radio parameters, Rayleigh channel draws
- `metrics`: exact SINR / MSE / rate / power / EE evaluation
- `mmse`: closed-form MMSE receive beamformers
- `conic`: real conic-program IR (linear + SOC + exponential cones)
- `sca`: the successive-convex-approximation optimization loop
- `cli`: the `beamform-ee` experiment harness
"""

from .errors import ConfigurationError, InfeasibleError, NumericalError, SolverError
from .metrics import BeamformerSet, RateReport, ReceiverSet
from .scenario import (
    ChannelSet,
    PowerModel,
    RadioConfig,
    RateTargets,
    Scenario,
    ScenarioConfig,
    Topology,
    build_paper_topology,
    generate_channels,
    pathloss_db,
)
from .sca import IterateState, SolverOptions, count_active_unicast_streams, initialize, run

__all__ = [
    "BeamformerSet",
    "ChannelSet",
    "ConfigurationError",
    "InfeasibleError",
    "IterateState",
    "NumericalError",
    "PowerModel",
    "RadioConfig",
    "RateReport",
    "RateTargets",
    "ReceiverSet",
    "Scenario",
    "ScenarioConfig",
    "SolverError",
    "SolverOptions",
    "Topology",
    "build_paper_topology",
    "count_active_unicast_streams",
    "generate_channels",
    "initialize",
    "pathloss_db",
    "run",
]
