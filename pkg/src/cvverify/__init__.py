"""Simulator and verification toolkit for blind delegated continuous-variable
computation built on cubic-phase resource states.

Subpackages by responsibility:

- fock: truncated number-basis linear algebra (quadratures, unitaries,
  tensor bookkeeping, fidelity)
- states: the cubic-phase resource state and adversarial server states
- witness: the homodyne-measurable fidelity witness and its exact evaluation
- homodyne: quadrature rotation, outcome densities and seeded sampling
- estimator: importance-sampling estimation, sample complexity, accept rule
- injection: gate teleportation of the cubic phase gate
- protocol: end-to-end runs, server-view audits, verifiability Monte Carlo
- cli: seeded experiment runner with JSON/CSV reports
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    ContractViolation,
    CvVerifyError,
    DegenerateError,
    DimensionError,
    TruncationError,
)
from .fock import DensityMatrix, FockState, build_quadratures, fidelity
from .states import AdversarySpec, ResourceSpec, adversary_state, cubic_phase_state
from .witness import WitnessSpec, build_witness, fidelity_lower_bound
from .estimator import Decision, decide, estimate_lower_bound, make_plan
from .injection import analytic_target, inject_cubic
from .protocol import (
    BobView,
    ProtocolParams,
    Transcript,
    blindness_audit,
    plan_request,
    run_protocol,
    verifiability_monte_carlo,
)
