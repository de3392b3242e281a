"""Resource states and adversarial server states.

The honest resource is a cubic-phase state: the position wavefunction
psi(x) proportional to exp(i gamma_tilde x^3) exp(-x^2 / (2 s^2)), i.e. a
width-s Gaussian with a cubic phase.  It is built by projecting the
wavefunction onto Hermite functions with grid quadrature rather than by
multiplying truncated gate matrices, which sidesteps truncation error in
the cubic gate during preparation (the gate-matrix route is still used as
a cross-check in the injection module).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, TruncationError
from .fock import DensityMatrix, FockState
from .homodyne import QuadratureGrid, hermite_functions

__all__ = [
    "ResourceSpec",
    "AdversarySpec",
    "ADVERSARY_KINDS",
    "cubic_phase_state",
    "resource_block",
    "adversary_state",
    "orthogonalized_excited_state",
]

DEFAULT_DIM = 40
DEFAULT_TAIL_TOL = 1e-8


@dataclass(frozen=True)
class ResourceSpec:
    """Everything that defines the requested resource block.

    gamma_tilde: cubicity of the advertised state (public).
    s: squeezing width of the advertised state (public).
    modes: number of single-mode copies consumed per computation.
    dim: truncation dimension used for single-mode work.
    """

    gamma_tilde: float
    s: float
    modes: int = 1
    dim: int = DEFAULT_DIM
    tail_tol: float = DEFAULT_TAIL_TOL

    def __post_init__(self):
        if self.s <= 0:
            raise ConfigError("squeezing width s must be positive")
        if self.modes < 1:
            raise ConfigError("modes must be >= 1")
        if self.dim < 2:
            raise ConfigError("truncation dimension must be >= 2")


ADVERSARY_KINDS = (
    "honest",
    "wrong_gamma",
    "gaussian_only",
    "vacuum",
    "thermal_mix",
    "orthogonal_mix",
)


@dataclass(frozen=True)
class AdversarySpec:
    """Parameterized family of server states used in simulations.

    kind            state sent by the server
    -----------     --------------------------------------------------
    honest          the advertised cubic-phase state
    wrong_gamma     cubic-phase state with cubicity `gamma_value`
    gaussian_only   squeezed vacuum, cubic phase dropped
    vacuum          |0><0|
    thermal_mix     (1-weight) honest + weight * matched thermal state
    orthogonal_mix  (1-weight) honest + weight * orthogonal pure state
    """

    kind: str = "honest"
    gamma_value: float | None = None
    weight: float | None = None

    def __post_init__(self):
        if self.kind not in ADVERSARY_KINDS:
            raise ConfigError(f"unknown adversary kind {self.kind!r}; choose from {ADVERSARY_KINDS}")
        if self.kind == "wrong_gamma" and self.gamma_value is None:
            raise ConfigError("wrong_gamma requires gamma_value")
        if self.kind in ("thermal_mix", "orthogonal_mix"):
            if self.weight is None or not 0.0 <= self.weight <= 1.0:
                raise ConfigError(f"{self.kind} requires a mixing weight in [0, 1]")

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.gamma_value is not None:
            out["gamma"] = self.gamma_value
        if self.weight is not None:
            out["weight"] = self.weight
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "AdversarySpec":
        extra = set(data) - {"kind", "gamma", "weight"}
        if extra:
            raise ConfigError(f"unknown adversary keys {sorted(extra)}")
        return cls(
            kind=data.get("kind", "honest"),
            gamma_value=data.get("gamma"),
            weight=data.get("weight"),
        )


def _wavefunction(x: np.ndarray, gamma_tilde: float, s: float) -> np.ndarray:
    norm = 1.0 / math.sqrt(s * math.sqrt(math.pi))
    return norm * np.exp(1j * gamma_tilde * x**3 - x**2 / (2.0 * s * s))


def cubic_phase_state(spec: ResourceSpec, grid: QuadratureGrid | None = None) -> FockState:
    """Fock expansion of the cubic-phase wavefunction by grid quadrature.

    Raises TruncationError when the truncation cannot hold the state: the
    projected amplitudes must account for all but `tail_tol` of the mass
    and the top level must be essentially empty.
    """
    grid = grid if grid is not None else QuadratureGrid.for_dim(spec.dim)
    psi = _wavefunction(grid.points, spec.gamma_tilde, spec.s)
    phi = hermite_functions(spec.dim, grid.points)
    amps = phi @ (grid.weights * psi)
    captured = float(np.sum(np.abs(amps) ** 2))
    deficit = abs(1.0 - captured)
    top = float(np.abs(amps[-1]) ** 2)
    if max(deficit, top) > spec.tail_tol:
        raise TruncationError(
            f"dim={spec.dim} too small: mass deficit {deficit:.2e}, top level {top:.2e} "
            f"(tolerance {spec.tail_tol:.1e})"
        )
    return FockState(amps).normalized()


def resource_block(spec: ResourceSpec) -> list[FockState]:
    """The advertised block: `modes` references to one identical pure state."""
    state = cubic_phase_state(spec)
    return [state] * spec.modes


def orthogonalized_excited_state(spec: ResourceSpec) -> FockState:
    """A pure state exactly orthogonal to the honest one (Gram-Schmidt on |1>)."""
    psi = cubic_phase_state(spec)
    one = FockState.basis(spec.dim, 1)
    overlap = psi.overlap(one)
    return FockState(one.amplitudes - overlap * psi.amplitudes).normalized()


def _thermal_state(dim: int, mean_occupation: float) -> DensityMatrix:
    if mean_occupation <= 0:
        return FockState.vacuum(dim).to_density()
    ratio = mean_occupation / (1.0 + mean_occupation)
    weights = ratio ** np.arange(dim)
    weights /= weights.sum()
    return DensityMatrix(np.diag(weights).astype(complex))


def adversary_state(adversary: AdversarySpec, resource: ResourceSpec) -> DensityMatrix:
    """Single-mode state the server actually sends, as a density matrix.

    The server is restricted to identical independent preparation, so an
    M-mode block being a product of `modes` copies of this state.
    """
    psi = cubic_phase_state(resource)
    if adversary.kind == "honest":
        rho = psi.to_density()
    elif adversary.kind == "wrong_gamma":
        altered = ResourceSpec(
            gamma_tilde=float(adversary.gamma_value),
            s=resource.s,
            modes=resource.modes,
            dim=resource.dim,
            tail_tol=resource.tail_tol,
        )
        rho = cubic_phase_state(altered).to_density()
    elif adversary.kind == "gaussian_only":
        gaussian = ResourceSpec(0.0, resource.s, resource.modes, resource.dim, resource.tail_tol)
        rho = cubic_phase_state(gaussian).to_density()
    elif adversary.kind == "vacuum":
        rho = FockState.vacuum(resource.dim).to_density()
    elif adversary.kind == "thermal_mix":
        p = float(adversary.weight)
        n_bar = float(psi.expectation(np.diag(np.arange(resource.dim)).astype(complex)))
        thermal = _thermal_state(resource.dim, n_bar)
        rho = DensityMatrix((1.0 - p) * psi.to_density().matrix + p * thermal.matrix)
    elif adversary.kind == "orthogonal_mix":
        q = float(adversary.weight)
        perp = orthogonalized_excited_state(resource)
        rho = DensityMatrix((1.0 - q) * psi.to_density().matrix + q * perp.to_density().matrix)
    else:  # pragma: no cover - guarded by AdversarySpec
        raise ConfigError(f"unhandled adversary kind {adversary.kind!r}")
    return rho.validate(trace_atol=1e-9, eig_atol=1e-9)
