"""Dense linear algebra over a truncated number basis.

Conventions used throughout the package: hbar = 1, [x, p] = i,
x = (a + a^dag)/sqrt(2), p = i(a^dag - a)/sqrt(2), so the vacuum has
<x^2> = <p^2> = 1/2.

Operators are plain complex ndarrays of shape (d^m, d^m) for m modes.
States and density matrices are thin immutable wrappers that carry the
mode bookkeeping and the structural invariants (normalization, positivity,
tail mass).  Matrix functions of Hermitian generators are evaluated by
eigendecomposition, never by series, so the results are unitary to
tolerance in the truncated space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ContractViolation, DimensionError

__all__ = [
    "FockState",
    "DensityMatrix",
    "Quadratures",
    "destroy",
    "build_quadratures",
    "quadrature_power",
    "hermitian_exponential",
    "position_phase_gate",
    "squeezer",
    "cubic_gate",
    "tensor",
    "partial_trace",
    "project_ancilla",
    "fidelity",
    "unitary_deviation",
    "hermitian_deviation",
]

UNITARY_ATOL = 1e-10
PURITY_ATOL = 1e-8


def _as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    return m


def _mode_dim(total: int, modes: int) -> int:
    dim = round(total ** (1.0 / modes))
    if dim**modes != total:
        raise DimensionError(f"length {total} is not a perfect {modes}-mode size")
    return dim


@dataclass(frozen=True)
class FockState:
    """A (possibly unnormalized) pure state over `modes` modes of equal dimension.

    Treat instances as immutable; operations return new states.
    """

    amplitudes: np.ndarray
    modes: int = 1

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        object.__setattr__(self, "amplitudes", amps)
        if self.modes < 1:
            raise DimensionError("modes must be >= 1")
        _mode_dim(amps.size, self.modes)

    @property
    def dim(self) -> int:
        """Truncation dimension per mode."""
        return _mode_dim(self.amplitudes.size, self.modes)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "FockState":
        n = self.norm
        if n < 1e-12:
            raise ContractViolation("cannot normalize a numerically null state")
        return FockState(self.amplitudes / n, self.modes)

    def tail_mass(self) -> float:
        """Occupation of the top truncation level, maximized over modes."""
        d = self.dim
        probs = np.abs(self.amplitudes.reshape([d] * self.modes)) ** 2
        worst = 0.0
        for axis in range(self.modes):
            worst = max(worst, float(np.take(probs, d - 1, axis=axis).sum()))
        return worst

    def to_density(self) -> "DensityMatrix":
        v = self.normalized().amplitudes
        return DensityMatrix(np.outer(v, v.conj()), self.modes)

    def overlap(self, other: "FockState") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def expectation(self, op: np.ndarray) -> float:
        """<psi|op|psi> for Hermitian op (real part returned)."""
        return float(np.real(np.vdot(self.amplitudes, op @ self.amplitudes)))

    @classmethod
    def basis(cls, dim: int, n: int) -> "FockState":
        if not 0 <= n < dim:
            raise DimensionError(f"level {n} outside [0, {dim})")
        v = np.zeros(dim, dtype=complex)
        v[n] = 1.0
        return cls(v)

    @classmethod
    def vacuum(cls, dim: int) -> "FockState":
        return cls.basis(dim, 0)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian positive-semidefinite unit-trace matrix over `modes` modes."""

    matrix: np.ndarray
    modes: int = 1

    def __post_init__(self):
        m = _as_matrix(self.matrix)
        object.__setattr__(self, "matrix", m)
        if self.modes < 1:
            raise DimensionError("modes must be >= 1")
        _mode_dim(m.shape[0], self.modes)

    @property
    def dim(self) -> int:
        return _mode_dim(self.matrix.shape[0], self.modes)

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    @property
    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def validate(self, trace_atol: float = 1e-10, eig_atol: float = 1e-10) -> "DensityMatrix":
        """Raise ContractViolation unless Hermitian, unit-trace and PSD within tolerance."""
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > 1e-10:
            raise ContractViolation("density matrix is not Hermitian")
        if abs(self.trace - 1.0) > trace_atol:
            raise ContractViolation(f"trace {self.trace} deviates from 1")
        lowest = float(np.linalg.eigvalsh(m)[0])
        if lowest < -eig_atol:
            raise ContractViolation(f"negative eigenvalue {lowest}")
        return self

    def is_pure(self, atol: float = PURITY_ATOL) -> bool:
        return abs(self.purity - 1.0) <= atol

    def expectation(self, op: np.ndarray) -> float:
        return float(np.real(np.trace(op @ self.matrix)))

    def components(self, cut: float = 1e-12) -> list[tuple[float, FockState]]:
        """Spectral decomposition as (weight, pure state) pairs, heaviest first."""
        w, v = np.linalg.eigh(self.matrix)
        order = np.argsort(w)[::-1]
        out = []
        for idx in order:
            if w[idx] > cut:
                out.append((float(w[idx]), FockState(v[:, idx], self.modes)))
        return out

    def marginal(self, mode: int) -> "DensityMatrix":
        return partial_trace(self, keep=[mode])


class Quadratures(NamedTuple):
    x: np.ndarray
    p: np.ndarray
    n: np.ndarray


def destroy(dim: int) -> np.ndarray:
    """Annihilation operator with <n|a|n+1> = sqrt(n+1)."""
    if dim < 2:
        raise DimensionError("truncation dimension must be >= 2")
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


@lru_cache(maxsize=None)
def build_quadratures(dim: int) -> Quadratures:
    """Position, momentum and number operators at truncation `dim`.

    [x, p] = i holds exactly on the interior block; truncation corrupts
    only the final diagonal entry of the commutator.
    """
    a = destroy(dim)
    adag = a.conj().T
    x = (a + adag) / math.sqrt(2.0)
    p = 1j * (adag - a) / math.sqrt(2.0)
    n = np.diag(np.arange(dim, dtype=float)).astype(complex)
    for m in (x, p, n):
        m.setflags(write=False)
    return Quadratures(x=x, p=p, n=n)


@lru_cache(maxsize=None)
def quadrature_power(dim: int, angle: float, power: int) -> np.ndarray:
    """Truncation-exact matrix of (cos(angle) x + sin(angle) p)**power.

    Built in a padded space and cropped, so every entry equals the exact
    matrix element of the untruncated operator.  Naive powers of the
    truncated quadrature are corrupted in the last `power - 1` rows and
    columns by ladder paths that leave the truncated space.
    """
    if power < 1:
        raise DimensionError("power must be >= 1")
    big = build_quadratures(dim + power)
    op = math.cos(angle) * big.x + math.sin(angle) * big.p
    full = np.linalg.matrix_power(op, power)
    out = np.ascontiguousarray(full[:dim, :dim])
    out.setflags(write=False)
    return out


def hermitian_deviation(h: np.ndarray) -> float:
    return float(np.max(np.abs(h - h.conj().T)))


def unitary_deviation(u: np.ndarray) -> float:
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def hermitian_exponential(h: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """exp(i * scale * h) for Hermitian h, via eigendecomposition.

    The result is unitary to within UNITARY_ATOL regardless of the
    conditioning of a power-series evaluation.
    """
    h = _as_matrix(h)
    tol = 1e-12 * max(1.0, float(np.max(np.abs(h))))
    if hermitian_deviation(h) > tol:
        raise ContractViolation("generator is not Hermitian within tolerance")
    w, v = np.linalg.eigh((h + h.conj().T) / 2.0)
    return (v * np.exp(1j * scale * w)) @ v.conj().T


@lru_cache(maxsize=None)
def _position_eigensystem(dim: int):
    w, v = np.linalg.eigh(build_quadratures(dim).x)
    w.setflags(write=False)
    v.setflags(write=False)
    return w, v


def position_phase_gate(dim: int, phase) -> np.ndarray:
    """exp(i * phase(x)) as a matrix function of the truncated position operator.

    Exactly unitary in the truncated space for any real-valued `phase`.
    """
    w, v = _position_eigensystem(dim)
    return (v * np.exp(1j * phase(w))) @ v.conj().T


def squeezer(dim: int, s: float) -> np.ndarray:
    """Squeezing unitary that maps the vacuum to a width-s Gaussian.

    Generator (xp + px) with exponent -log(s)/2, so that
    S(s)^dag x S(s) = s x and |<x|S(s)|0>|^2 has variance s^2/2.
    """
    if s <= 0:
        raise ContractViolation("squeezing width must be positive")
    q = build_quadratures(dim)
    return hermitian_exponential(q.x @ q.p + q.p @ q.x, -0.5 * math.log(s))


def cubic_gate(dim: int, gamma: float) -> np.ndarray:
    """exp(i * gamma * x^3) built as a function of the truncated position operator."""
    return position_phase_gate(dim, lambda xs: gamma * xs**3)


def tensor(a, b):
    """Kronecker product of two operators, states or density matrices."""
    if isinstance(a, FockState) and isinstance(b, FockState):
        if a.dim != b.dim:
            raise DimensionError("per-mode dimensions differ")
        return FockState(np.kron(a.amplitudes, b.amplitudes), a.modes + b.modes)
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        if a.dim != b.dim:
            raise DimensionError("per-mode dimensions differ")
        return DensityMatrix(np.kron(a.matrix, b.matrix), a.modes + b.modes)
    if isinstance(a, np.ndarray) and isinstance(b, np.ndarray):
        return np.kron(a, b)
    raise DimensionError(f"cannot tensor {type(a).__name__} with {type(b).__name__}")


def partial_trace(rho: DensityMatrix, keep: Sequence[int] | int) -> DensityMatrix:
    """Trace out all modes not listed in `keep` (indices into 0..modes-1)."""
    if isinstance(keep, (int, np.integer)):
        keep = [int(keep)]
    keep = sorted(set(int(k) for k in keep))
    m, d = rho.modes, rho.dim
    if any(k < 0 or k >= m for k in keep):
        raise DimensionError(f"keep={keep} outside mode range [0, {m})")
    if len(keep) == m:
        return rho
    t = rho.matrix.reshape([d] * (2 * m))
    current = list(range(m))
    for mode in reversed([k for k in range(m) if k not in keep]):
        axis = current.index(mode)
        t = np.trace(t, axis1=axis, axis2=axis + len(current))
        current.pop(axis)
    size = d ** len(keep)
    return DensityMatrix(t.reshape(size, size), len(keep))


def project_ancilla(state, bra: np.ndarray):
    """Project the last mode onto a bra row vector (components <bra|n>).

    Returns the unnormalized conditional object on the remaining modes and
    the branch weight (its squared norm / trace).  For an improper position
    bra the weight is a probability density, not a probability.
    """
    bra = np.asarray(bra, dtype=complex).reshape(-1)
    if isinstance(state, FockState):
        if state.modes < 2:
            raise DimensionError("projection requires at least two modes")
        d = state.dim
        if bra.size != d:
            raise DimensionError("bra length does not match the mode dimension")
        block = state.amplitudes.reshape(d ** (state.modes - 1), d)
        reduced = block @ bra
        weight = float(np.real(np.vdot(reduced, reduced)))
        return FockState(reduced, state.modes - 1), weight
    if isinstance(state, DensityMatrix):
        if state.modes < 2:
            raise DimensionError("projection requires at least two modes")
        d = state.dim
        rest = d ** (state.modes - 1)
        t = state.matrix.reshape(rest, d, rest, d)
        reduced = np.einsum("abcd,b,d->ac", t, bra, bra.conj())
        weight = float(np.real(np.trace(reduced)))
        return DensityMatrix(reduced, state.modes - 1), weight
    raise DimensionError(f"cannot project a {type(state).__name__}")


def _pure_vector(sigma) -> np.ndarray:
    if isinstance(sigma, FockState):
        return sigma.normalized().amplitudes
    if isinstance(sigma, DensityMatrix):
        if abs(sigma.purity - 1.0) > PURITY_ATOL:
            raise ContractViolation(f"first fidelity argument must be pure, purity={sigma.purity}")
        weight, state = sigma.components()[0]
        return state.normalized().amplitudes
    raise DimensionError(f"cannot interpret {type(sigma).__name__} as a pure state")


def fidelity(sigma, rho) -> float:
    """Squared-overlap fidelity Tr(sigma rho) with sigma pure.

    Linear in the second argument; equals |<sigma|rho>|^2 when both are pure.
    """
    v = _pure_vector(sigma)
    if isinstance(rho, FockState):
        w = rho.normalized().amplitudes
        if w.size != v.size:
            raise DimensionError("state dimensions differ")
        val = abs(np.vdot(v, w)) ** 2
    elif isinstance(rho, DensityMatrix):
        if rho.matrix.shape[0] != v.size:
            raise DimensionError("state dimensions differ")
        val = float(np.real(np.vdot(v, rho.matrix @ v)))
    else:
        raise DimensionError(f"cannot interpret {type(rho).__name__} as a state")
    return float(min(max(val, 0.0), 1.0 + 1e-9))
