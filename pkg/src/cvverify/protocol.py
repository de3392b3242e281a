"""End-to-end delegated-computation protocol with verification.

One run: the client plans a request (how many copies the test needs),
the server supplies an i.i.d. block per its adversary model, the client
estimates the fidelity lower bound by homodyne importance sampling and
accepts or rejects, and on accept consumes one copy to teleport the first
requested cubic gate onto her input, scoring the exact incorrectness
probability of the conditional output.

The server's view contains only the copy count, modes per copy and the
public resource label; the requested gate strengths and the input state
never enter it.  Fixed seeds make every run, and therefore every report,
bit-identical regardless of worker count.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .estimator import (
    Decision,
    EstimateReport,
    SamplingPlan,
    decide,
    estimate_lower_bound,
    make_plan,
)
from .fock import DensityMatrix, FockState, fidelity
from .homodyne import HomodyneSampler
from .injection import InjectionContext
from .states import AdversarySpec, ResourceSpec, adversary_state, cubic_phase_state
from .witness import WitnessSpec, build_witness, fidelity_lower_bound

__all__ = [
    "ProtocolParams",
    "BobView",
    "PlanRequest",
    "Transcript",
    "plan_request",
    "run_protocol",
    "verifiability_monte_carlo",
    "blindness_audit",
    "RunContext",
]

INJECTION_DIM = 24
INJECTION_TAIL_TOL = 1e-6


@dataclass(frozen=True)
class ProtocolParams:
    """Everything the client chooses before contacting the server.

    gamma_list holds the secret gate strengths (one per mode); only
    (gamma_tilde, s) and the copy count become visible to the server.
    """

    modes: int
    gamma_tilde: float
    s: float
    gamma_list: tuple[float, ...]
    f_threshold: float
    beta: float
    eta: float
    dim: int = 40
    seed: int = 0
    injection_dim: int = INJECTION_DIM

    def __post_init__(self):
        object.__setattr__(self, "gamma_list", tuple(float(g) for g in self.gamma_list))
        if self.modes < 1:
            raise ConfigError("modes must be >= 1")
        if len(self.gamma_list) != self.modes:
            raise ConfigError(
                f"gamma_list has {len(self.gamma_list)} entries for {self.modes} modes"
            )
        if not 0.0 < self.f_threshold < 1.0:
            raise ConfigError("threshold fidelity must lie in (0, 1)")
        if not 0.0 < self.beta < 1.0:
            raise ConfigError("significance level must lie in (0, 1)")
        if self.eta <= 0 or self.eta > (1.0 - self.f_threshold) / 2.0 + 1e-15:
            gap = (1.0 - self.f_threshold) / 2.0
            raise ConfigError(
                f"eta must satisfy 0 < eta <= (1 - F_T)/2 = {gap:.6g}; got {self.eta}"
            )
        if self.s <= 0:
            raise ConfigError("squeezing width s must be positive")

    def resource(self, dim: int | None = None, tail_tol: float | None = None) -> ResourceSpec:
        return ResourceSpec(
            gamma_tilde=self.gamma_tilde,
            s=self.s,
            modes=self.modes,
            dim=dim if dim is not None else self.dim,
            tail_tol=tail_tol if tail_tol is not None else 1e-8,
        )

    def to_dict(self) -> dict:
        return {
            "modes": self.modes,
            "gamma_tilde": self.gamma_tilde,
            "s": self.s,
            "gamma_list": list(self.gamma_list),
            "f_threshold": self.f_threshold,
            "beta": self.beta,
            "eta": self.eta,
            "dim": self.dim,
            "seed": self.seed,
            "injection_dim": self.injection_dim,
        }


@dataclass(frozen=True)
class BobView:
    """Exactly what the server learns from a request: nothing else."""

    copies_requested: int
    modes_per_copy: int
    requested_state_id: tuple[float, float]  # (gamma_tilde, s)

    def to_dict(self) -> dict:
        return {
            "copies_requested": self.copies_requested,
            "modes_per_copy": self.modes_per_copy,
            "requested_state_id": list(self.requested_state_id),
        }


@dataclass(frozen=True)
class PlanRequest:
    trials: int
    copies: int
    bob_view: BobView
    plan: SamplingPlan


def plan_request(params: ProtocolParams) -> PlanRequest:
    """Plan the request: N test copies plus one computation copy.

    The trial count comes from the honest-state second moment, so the
    request depends only on (modes, gamma_tilde, s, eta, beta), never on
    the secret gate list or the input state.
    """
    spec = build_witness(params.resource())
    plan = make_plan(spec, params.eta, params.beta, seed=params.seed)
    view = BobView(
        copies_requested=plan.trials + 1,
        modes_per_copy=params.modes,
        requested_state_id=(params.gamma_tilde, params.s),
    )
    return PlanRequest(trials=plan.trials, copies=plan.trials + 1, bob_view=view, plan=plan)


@dataclass(frozen=True)
class Transcript:
    """Full record of one protocol run."""

    run_index: int
    bob_view: BobView
    plan: SamplingPlan
    estimate: EstimateReport
    decision: Decision
    fidelity_exact: float
    f_low_exact: float
    injection: dict | None
    incorrectness: float | None

    def to_dict(self) -> dict:
        return {
            "run_index": self.run_index,
            "bob_view": self.bob_view.to_dict(),
            "plan": self.plan.to_dict(),
            "estimate": self.estimate.to_dict(),
            "decision": self.decision.value,
            "fidelity_exact": self.fidelity_exact,
            "f_low_exact": self.f_low_exact,
            "injection": self.injection,
            "incorrectness": self.incorrectness,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


class RunContext:
    """Shared immutable state for repeated protocol runs against one adversary.

    Building the witness, the server state, the homodyne tables and the
    injection circuit once makes Monte-Carlo sweeps cheap; individual runs
    then differ only in their random streams.
    """

    def __init__(self, params: ProtocolParams, adversary: AdversarySpec,
                 input_state: FockState | None = None):
        self.params = params
        self.adversary = adversary
        self.spec: WitnessSpec = build_witness(params.resource())
        self.rho: DensityMatrix = adversary_state(adversary, params.resource())
        self.sigma: FockState = cubic_phase_state(params.resource())
        self.fidelity_exact = fidelity(self.sigma, self.rho)
        self.f_low_exact = fidelity_lower_bound(self.rho, self.spec)
        self.base_plan = make_plan(self.spec, params.eta, params.beta, seed=params.seed)
        self.samplers = {0: HomodyneSampler(self.rho)}
        self.bob_view = BobView(
            copies_requested=self.base_plan.trials + 1,
            modes_per_copy=params.modes,
            requested_state_id=(params.gamma_tilde, params.s),
        )
        inj_dim = params.injection_dim
        inj_resource = params.resource(dim=inj_dim, tail_tol=INJECTION_TAIL_TOL)
        self.input_state = (
            input_state if input_state is not None else FockState.vacuum(inj_dim)
        )
        if self.input_state.dim != inj_dim:
            raise ConfigError("input state must live at the injection dimension")
        self.injection = InjectionContext(
            self.input_state,
            adversary_state(adversary, inj_resource),
            gamma=params.gamma_list[0],
            gamma_tilde=params.gamma_tilde,
            s=params.s,
        )

    def run(self, run_index: int = 0, workers: int = 1) -> Transcript:
        ss = np.random.SeedSequence(entropy=self.params.seed, spawn_key=(run_index,))
        est_child, branch_child = ss.spawn(2)
        plan = self.base_plan.with_seed(int(est_child.generate_state(1, np.uint64)[0]))
        report = estimate_lower_bound(
            self.rho, self.spec, plan, workers=workers, samplers=self.samplers
        )
        # decision recomputed from the rule so the transcript cannot drift from it
        decision = decide(report.f_low_est, self.params.f_threshold, self.params.eta)
        injection = None
        incorrectness = None
        if decision is Decision.ACCEPT:
            branch_rng = np.random.Generator(np.random.PCG64(branch_child))
            result = self.injection.run(self.injection.sample_outcome(branch_rng), fixed=False)
            injection = result.to_dict()
            incorrectness = 1.0 - result.fidelity_to_target
        return Transcript(
            run_index=run_index,
            bob_view=self.bob_view,
            plan=plan,
            estimate=report,
            decision=decision,
            fidelity_exact=self.fidelity_exact,
            f_low_exact=self.f_low_exact,
            injection=injection,
            incorrectness=incorrectness,
        )


def run_protocol(
    params: ProtocolParams,
    adversary: AdversarySpec,
    input_state: FockState | None = None,
    run_index: int = 0,
    workers: int = 1,
    context: RunContext | None = None,
) -> Transcript:
    """Execute one full protocol run; deterministic given (params.seed, run_index)."""
    ctx = context if context is not None else RunContext(params, adversary, input_state)
    return ctx.run(run_index=run_index, workers=workers)


def verifiability_monte_carlo(
    params: ProtocolParams,
    adversary: AdversarySpec,
    runs: int,
    workers: int = 1,
    context: RunContext | None = None,
) -> dict:
    """Estimate P(incorrect and accept) over repeated runs and compare with
    the bound epsilon = 1 - (1 - beta) F_T.

    Runs are independent and keyed by run index, so the aggregate is
    deterministic for a fixed seed under any worker count.
    """
    if runs < 100:
        raise ConfigError("verifiability estimation needs at least 100 runs")
    ctx = context if context is not None else RunContext(params, adversary)

    def one(run_index: int):
        t = ctx.run(run_index=run_index)
        joint = t.incorrectness if t.decision is Decision.ACCEPT else 0.0
        return (t.decision is Decision.ACCEPT, joint, t)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one, range(runs)))
    else:
        outcomes = [one(i) for i in range(runs)]

    accepts = sum(1 for a, _, _ in outcomes if a)
    joint = sum(j for _, j, _ in outcomes) / runs
    epsilon = 1.0 - (1.0 - params.beta) * params.f_threshold
    sigma_binomial = math.sqrt(max(joint * (1.0 - joint), 1e-12) / runs)
    return {
        "runs": runs,
        "accept_rate": accepts / runs,
        "joint_prob_est": joint,
        "epsilon_bound": epsilon,
        "binomial_sigma": sigma_binomial,
        "violation": bool(joint > epsilon + 3.0 * sigma_binomial),
        "fidelity_exact": ctx.fidelity_exact,
        "f_low_exact": ctx.f_low_exact,
        "transcripts": [t for _, _, t in outcomes],
    }


def blindness_audit(params_a: ProtocolParams, params_b: ProtocolParams) -> dict:
    """Compare the server views of two parameter choices.

    Views are comparable only at equal mode count (the copy bound is the
    one sanctioned leak); comparable views must be field-for-field equal
    whenever the public (gamma_tilde, s, eta, beta, F_T) agree.
    """
    view_a = plan_request(params_a).bob_view
    view_b = plan_request(params_b).bob_view
    comparable = params_a.modes == params_b.modes
    return {
        "comparable": comparable,
        "identical_views": comparable and view_a == view_b,
        "view_a": view_a.to_dict(),
        "view_b": view_b.to_dict(),
    }
