"""Importance-sampling estimation of the witness expectation.

Each trial draws a term index i with probability p(i) = |lambda_i| / sum|lambda|,
measures the corresponding homodyne observable on a fresh copy of the
state, and records F = sum|lambda| * sign(lambda_i) * f for outcome f.
The trial mean plus the constant witness offset is an unbiased estimate
of the fidelity lower bound, and the deviation probability obeys

    P(|estimate - exact| >= eta) <= 8 exp(-N eta^2 / (33 <F^2>)),

which fixes the number of copies N = ceil(33 <F^2> ln(8/beta) / eta^2)
needed for precision eta at significance beta.

Determinism: trials are partitioned into fixed-size chunks and each chunk
draws from its own counter-based stream keyed by (seed, chunk index), so
reports are bit-identical for a fixed seed regardless of how many workers
execute the chunks.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import ConfigError, DimensionError
from .fock import DensityMatrix, FockState
from .homodyne import HomodyneSampler
from .states import cubic_phase_state
from .witness import WitnessSpec

__all__ = [
    "Decision",
    "SamplingPlan",
    "EstimateReport",
    "sample_complexity",
    "make_plan",
    "second_moment_exact",
    "estimate_lower_bound",
    "decide",
]

TAIL_CONSTANT = 33.0
TAIL_PREFACTOR = 8.0
MIN_TRIALS = 100
CHUNK = 4096
_MASK64 = (1 << 64) - 1


class Decision(str, Enum):
    ACCEPT = "accept"
    REJECT = "reject"


@dataclass(frozen=True)
class SamplingPlan:
    """Everything needed to run one estimation: p(i), trial count and seed."""

    index_probs: np.ndarray
    sum_abs_lambda: float
    trials: int
    seed: int
    second_moment: float
    second_moment_source: str

    def __post_init__(self):
        p = np.asarray(self.index_probs, dtype=float)
        object.__setattr__(self, "index_probs", p)
        if abs(p.sum() - 1.0) > 1e-12:
            raise ConfigError(f"index probabilities sum to {p.sum()}")

    def with_seed(self, seed: int) -> "SamplingPlan":
        return replace(self, seed=int(seed))

    def to_dict(self) -> dict:
        return {
            "index_probs": [float(v) for v in self.index_probs],
            "sum_abs_lambda": self.sum_abs_lambda,
            "trials": self.trials,
            "seed": self.seed,
            "second_moment": self.second_moment,
            "second_moment_source": self.second_moment_source,
        }


@dataclass(frozen=True)
class EstimateReport:
    """Outcome of one estimation run."""

    f_low_est: float
    trials: int
    empirical_second_moment: float
    per_index_counts: np.ndarray
    seed: int

    def to_dict(self) -> dict:
        return {
            "f_low_est": self.f_low_est,
            "trials": self.trials,
            "empirical_second_moment": self.empirical_second_moment,
            "per_index_counts": [int(c) for c in self.per_index_counts],
            "seed": self.seed,
        }


def sample_complexity(second_moment: float, eta: float, beta: float) -> int:
    """N = ceil(33 <F^2> ln(8/beta) / eta^2), clamped to at least MIN_TRIALS."""
    n = math.ceil(TAIL_CONSTANT * second_moment * math.log(TAIL_PREFACTOR / beta) / eta**2)
    return max(MIN_TRIALS, n)


def tail_bound(trials: int, eta: float, second_moment: float) -> float:
    """Upper bound on P(|estimate - exact| >= eta) after `trials` copies."""
    return TAIL_PREFACTOR * math.exp(-trials * eta**2 / (TAIL_CONSTANT * second_moment))


def second_moment_exact(rho, spec: WitnessSpec) -> float:
    """<F^2> = (sum_j |lambda_j|) * sum_i |lambda_i| Tr(f_i^2 rho), exact traces.

    The squared observables are quadrature powers 4, 6 and 8, evaluated as
    truncation-exact matrix powers.  For an i.i.d. block this scales as
    modes^2 times the single-mode value.
    """
    if isinstance(rho, FockState):
        rho = rho.to_density()
    if rho.modes == 1:
        marginals = {k: rho for k in range(spec.modes)}
    elif rho.modes == spec.modes:
        marginals = {k: rho.marginal(k) for k in range(spec.modes)}
    else:
        raise DimensionError(f"state has {rho.modes} modes, witness covers {spec.modes}")
    dim = marginals[0].dim
    weighted = 0.0
    for lam, desc in spec.terms:
        weighted += abs(lam) * marginals[desc.mode].expectation(desc.squared_matrix(dim))
    return float(spec.sum_abs_lambda * weighted)


def make_plan(
    spec: WitnessSpec,
    eta: float,
    beta: float,
    rho_for_bound=None,
    second_moment_bound: float | None = None,
    seed: int = 0,
) -> SamplingPlan:
    """Build the sampling plan for precision eta and significance beta.

    The trial count requires a value for <F^2>.  By default it is computed
    exactly on the honest state (the client knows the target); passing
    `second_moment_bound` substitutes a declared energy-style bound, and
    passing `rho_for_bound` evaluates the exact trace on that state
    instead.  The report records which source was used.
    """
    if eta <= 0:
        raise ConfigError("eta must be positive")
    if not 0.0 < beta < 1.0:
        raise ConfigError("beta must lie in (0, 1)")
    if second_moment_bound is not None:
        if second_moment_bound <= 0:
            raise ConfigError("second_moment_bound must be positive")
        f2, source = float(second_moment_bound), "declared-bound"
    elif rho_for_bound is not None:
        f2, source = second_moment_exact(rho_for_bound, spec), "supplied-state"
    else:
        honest = cubic_phase_state(spec.resource)
        f2, source = second_moment_exact(honest, spec), "honest-state"
    return SamplingPlan(
        index_probs=spec.index_probabilities(),
        sum_abs_lambda=spec.sum_abs_lambda,
        trials=sample_complexity(f2, eta, beta),
        seed=int(seed),
        second_moment=f2,
        second_moment_source=source,
    )


def _chunk_stream(seed: int, chunk_index: int) -> np.random.Generator:
    key = np.array([seed & _MASK64, chunk_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def estimate_lower_bound(
    rho,
    spec: WitnessSpec,
    plan: SamplingPlan,
    workers: int = 1,
    samplers: dict | None = None,
    trial_sink=None,
) -> EstimateReport:
    """Run the importance-sampling estimation of the fidelity lower bound.

    `rho` is the single-mode state of the i.i.d. block (or the full
    M-mode density matrix, sampled through its mode marginals).
    `samplers` may carry prebuilt HomodyneSampler objects keyed by mode to
    share outcome tables across repeated runs.  `trial_sink`, if given, is
    called per chunk with (trial_indices, term_indices, outcomes, values).
    """
    if isinstance(rho, FockState):
        rho = rho.to_density()
    n_terms = len(spec.terms)
    if plan.index_probs.size != n_terms:
        raise ConfigError("plan does not match the witness term table")

    if rho.modes == 1:
        mode_states = {k: rho for k in range(spec.modes)}
    elif rho.modes == spec.modes:
        mode_states = {k: rho.marginal(k) for k in range(spec.modes)}
    else:
        raise DimensionError(f"state has {rho.modes} modes, witness covers {spec.modes}")

    if samplers is None:
        samplers = {}
    for k, state in mode_states.items():
        if k not in samplers:
            # identical marginals share one sampler
            if rho.modes == 1 and 0 in samplers:
                samplers[k] = samplers[0]
            else:
                samplers[k] = HomodyneSampler(state)

    signs = np.sign(spec.lambdas)
    powers = np.array([desc.power for _, desc in spec.terms], dtype=float)
    scales = np.array([desc.scale for _, desc in spec.terms])
    cum = np.cumsum(plan.index_probs)
    cum[-1] = 1.0
    groups = {}
    for idx, (_, desc) in enumerate(spec.terms):
        groups.setdefault((desc.mode, desc.angle), []).append(idx)

    def run_chunk(chunk_index: int):
        start = chunk_index * CHUNK
        size = min(CHUNK, plan.trials - start)
        gen = _chunk_stream(plan.seed, chunk_index)
        u = gen.random((2, size))
        term = np.searchsorted(cum, u[0], side="right").clip(0, n_terms - 1)
        outcome = np.empty(size)
        for (mode, angle), indices in groups.items():
            mask = np.isin(term, indices)
            if mask.any():
                xs = samplers[mode]._inverse_cdf(angle, u[1][mask])
                outcome[mask] = xs
        f_values = scales[term] * outcome ** powers[term]
        values = plan.sum_abs_lambda * signs[term] * f_values
        counts = np.bincount(term, minlength=n_terms)
        if trial_sink is not None:
            trial_sink(np.arange(start, start + size), term, f_values, values)
        return float(values.sum()), float((values**2).sum()), counts

    n_chunks = math.ceil(plan.trials / CHUNK)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_chunk, range(n_chunks)))
    else:
        results = [run_chunk(c) for c in range(n_chunks)]

    total = 0.0
    total_sq = 0.0
    counts = np.zeros(n_terms, dtype=np.int64)
    for s1, s2, c in results:  # fixed merge order regardless of worker count
        total += s1
        total_sq += s2
        counts += c
    return EstimateReport(
        f_low_est=spec.constant + total / plan.trials,
        trials=plan.trials,
        empirical_second_moment=total_sq / plan.trials,
        per_index_counts=counts,
        seed=plan.seed,
    )


def decide(f_low_est: float, f_threshold: float, eta: float) -> Decision:
    """Accept unless the estimate falls below threshold + eta.

    Requires 0 < f_threshold < 1 and 0 < eta <= (1 - f_threshold)/2, so the
    estimation precision cannot exceed half the acceptance gap.
    """
    if not 0.0 < f_threshold < 1.0:
        raise ConfigError("threshold fidelity must lie in (0, 1)")
    if eta <= 0 or eta > (1.0 - f_threshold) / 2.0 + 1e-15:
        gap = (1.0 - f_threshold) / 2.0
        raise ConfigError(f"eta must satisfy 0 < eta <= (1 - F_T)/2 = {gap:.6g}; got {eta}")
    return Decision.REJECT if f_low_est < f_threshold + eta else Decision.ACCEPT
