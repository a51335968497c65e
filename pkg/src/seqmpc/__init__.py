"""Multistep sequential finite-control-set MPC with a k-best sphere decoder.

Library layout:

- `transforms`: Clarke/Park frames and the pseudo-inverse reconstruction
- `plant`: ground-truth NPC back-to-back PMSG simulation
- `prediction`: Euler one-step and condensed multistep models, imbalance rollout
- `solver`: condensation, k-best sphere decoder, enumeration oracle, pair selection
- `controller`: one receding-horizon control step
- `harness`: scenarios, closed-loop driver, metrics, sweeps, CSV/config I/O
- `_kernels`: numba-compiled hot loops (set SEQMPC_NUMBA=0 for the pure path)
"""

from ._kernels import JIT_ENABLED
from .controller import ControllerConfig, ControlDecision, ReferenceState, control_step
from .harness import RunMetrics, ScenarioConfig, TimeSeries, run_scenario, sweep
from .plant import (
    DcLinkState,
    GridParams,
    MachineParams,
    MechState,
    PlantState,
    SwitchState,
    plant_step,
)
from .prediction import SwitchSequence
from .solver import CandidateList, QpForm, brute_force_kbest, k_best, sphere_decode

__version__ = "0.1.0"

__all__ = [
    "JIT_ENABLED",
    "ControllerConfig",
    "ControlDecision",
    "ReferenceState",
    "control_step",
    "RunMetrics",
    "ScenarioConfig",
    "TimeSeries",
    "run_scenario",
    "sweep",
    "DcLinkState",
    "GridParams",
    "MachineParams",
    "MechState",
    "PlantState",
    "SwitchState",
    "plant_step",
    "SwitchSequence",
    "CandidateList",
    "QpForm",
    "brute_force_kbest",
    "k_best",
    "sphere_decode",
    "__version__",
]
