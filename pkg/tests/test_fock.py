"""Truncated-basis linear algebra: operators, unitaries, composition, fidelity."""

import math

import numpy as np
import pytest

from cvverify.errors import ContractViolation, DimensionError
from cvverify.fock import (
    DensityMatrix,
    FockState,
    build_quadratures,
    fidelity,
    hermitian_exponential,
    partial_trace,
    project_ancilla,
    quadrature_power,
    squeezer,
    tensor,
    unitary_deviation,
)
from cvverify.homodyne import hermite_functions


def gaussian_overlap(s):
    # |<0|width-s Gaussian>|^2 in closed form
    return 2.0 * s / (s * s + 1.0)


def squeezed_vacuum_series(s, dim):
    # Fock expansion of the width-s Gaussian: even levels only,
    # c_{2n} = sqrt((2n)!)/(2^n n!) * tanh(r)^n / sqrt(cosh r), r = log s
    r = math.log(s)
    amps = np.zeros(dim, dtype=complex)
    for n in range(dim // 2):
        amps[2 * n] = (
            math.sqrt(math.factorial(2 * n))
            / (2**n * math.factorial(n))
            * math.tanh(r) ** n
            / math.sqrt(math.cosh(r))
        )
    return amps


class TestQuadratures:
    def test_ladder_element(self):
        q = build_quadratures(2)
        assert q.x[0, 1] == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-15)

    def test_number_diagonal(self):
        q = build_quadratures(5)
        assert q.n[3, 3] == pytest.approx(3.0)
        assert np.count_nonzero(q.n - np.diag(np.diag(q.n))) == 0

    def test_commutator_on_interior_block(self):
        dim = 40
        q = build_quadratures(dim)
        comm = q.x @ q.p - q.p @ q.x
        interior = slice(0, dim - 2)
        assert np.max(np.abs(comm[interior, interior] - 1j * np.eye(dim - 2))) < 1e-10

    def test_rejects_tiny_dimension(self):
        with pytest.raises(DimensionError):
            build_quadratures(1)

    def test_exact_power_reproduces_number_identity(self):
        # x^2 + p^2 = 2n + 1 holds on the full block for truncation-exact powers
        dim = 30
        q = build_quadratures(dim)
        x2 = quadrature_power(dim, 0.0, 2)
        p2 = quadrature_power(dim, math.pi / 2.0, 2)
        assert np.max(np.abs(x2 + p2 - (2 * q.n + np.eye(dim)))) < 1e-12

    def test_exact_power_is_padding_independent(self):
        dim = 16
        big = build_quadratures(dim + 12)
        op = math.cos(0.3) * big.x + math.sin(0.3) * big.p
        reference = np.linalg.matrix_power(op, 4)[:dim, :dim]
        # direct construction pads by exactly the power
        probe = quadrature_power(dim, 0.3, 4)
        assert np.max(np.abs(probe - reference)) < 1e-12


class TestHermitianExponential:
    def test_zero_generator_gives_identity(self):
        h = np.zeros((6, 6), dtype=complex)
        assert np.allclose(hermitian_exponential(h, 3.7), np.eye(6))

    def test_number_generator_gives_diagonal_phases(self):
        q = build_quadratures(8)
        theta = 0.41
        u = hermitian_exponential(q.n, -theta)
        assert np.allclose(np.diag(u), np.exp(-1j * theta * np.arange(8)), atol=1e-12)

    def test_rejects_non_hermitian(self):
        bad = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
        with pytest.raises(ContractViolation):
            hermitian_exponential(bad)

    def test_unitarity(self):
        q = build_quadratures(40)
        u = hermitian_exponential(q.x @ q.p + q.p @ q.x, 0.5 * math.log(2.0))
        assert unitary_deviation(u) < 1e-10

    def test_squeezer_vacuum_overlap_closed_form(self):
        # width-2 Gaussian against the vacuum: 2s/(s^2+1) = 0.8
        u = squeezer(40, 2.0)
        overlap = abs(u[0, 0]) ** 2
        assert overlap == pytest.approx(gaussian_overlap(2.0), abs=1e-8)

    def test_squeezer_column_matches_series(self):
        # padded so the image of the vacuum is converged on the compared block
        dim, big = 40, 80
        u = squeezer(big, 2.0)
        series = squeezed_vacuum_series(2.0, big)
        assert np.max(np.abs(u[:dim, 0] - series[:dim])) < 1e-8


class TestComposition:
    def test_tensor_identity(self):
        eye = np.eye(5, dtype=complex)
        assert np.array_equal(tensor(eye, eye), np.eye(25))

    def test_partial_trace_product_state(self):
        zero = FockState.basis(6, 0).to_density()
        three = FockState.basis(6, 3).to_density()
        joint = tensor(zero, three)
        assert np.max(np.abs(partial_trace(joint, keep=0).matrix - zero.matrix)) < 1e-12
        assert np.max(np.abs(partial_trace(joint, keep=1).matrix - three.matrix)) < 1e-12

    def test_partial_trace_preserves_trace(self, rng):
        g = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
        rho = DensityMatrix(g @ g.conj().T / np.trace(g @ g.conj().T).real, modes=2)
        assert partial_trace(rho, keep=0).trace == pytest.approx(1.0, abs=1e-12)

    def test_partial_trace_of_product_recovers_factor(self, rng):
        def random_density(d):
            g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
            m = g @ g.conj().T
            return DensityMatrix(m / np.trace(m).real)

        a, b = random_density(5), random_density(5)
        assert np.max(np.abs(partial_trace(tensor(a, b), keep=0).matrix - a.matrix)) < 1e-12

    def test_project_ancilla_vacuum_at_origin(self):
        two_mode = tensor(FockState.vacuum(12), FockState.vacuum(12))
        bra = hermite_functions(12, np.array([0.0]))[:, 0]
        reduced, weight = project_ancilla(two_mode, bra)
        assert weight == pytest.approx(1.0 / math.sqrt(math.pi), abs=1e-10)
        assert reduced.modes == 1

    def test_project_ancilla_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            project_ancilla(tensor(FockState.vacuum(6), FockState.vacuum(6)), np.ones(5))


class TestFidelity:
    def test_identical_states(self):
        v = FockState.vacuum(10)
        assert fidelity(v, v) == pytest.approx(1.0, abs=1e-14)

    def test_orthogonal_states(self):
        assert fidelity(FockState.basis(10, 0), FockState.basis(10, 1)) == 0.0

    def test_vacuum_vs_squeezed(self):
        dim = 40
        squeezed = FockState(squeezer(dim, 2.0)[:, 0])
        assert fidelity(FockState.vacuum(dim), squeezed) == pytest.approx(0.8, abs=1e-8)

    def test_rejects_mixed_first_argument(self):
        mixed = DensityMatrix(np.diag([0.5, 0.5]).astype(complex))
        with pytest.raises(ContractViolation):
            fidelity(mixed, FockState.vacuum(2))

    def test_linear_in_second_argument(self, rng):
        dim = 12
        sigma = FockState.vacuum(dim)

        def random_density(d):
            g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
            m = g @ g.conj().T
            return DensityMatrix(m / np.trace(m).real)

        rho1, rho2 = random_density(dim), random_density(dim)
        for a in (0.0, 0.25, 0.5, 0.9, 1.0):
            mix = DensityMatrix(a * rho1.matrix + (1 - a) * rho2.matrix)
            expected = a * fidelity(sigma, rho1) + (1 - a) * fidelity(sigma, rho2)
            assert fidelity(sigma, mix) == pytest.approx(expected, abs=1e-12)


class TestStateInvariants:
    def test_normalization(self):
        state = FockState(np.array([3.0, 4.0], dtype=complex)).normalized()
        assert state.norm == pytest.approx(1.0, abs=1e-12)

    def test_tail_mass_reads_top_level(self):
        amps = np.zeros(8)
        amps[-1] = 0.1
        amps[0] = math.sqrt(1 - 0.01)
        assert FockState(amps).tail_mass() == pytest.approx(0.01, abs=1e-12)

    def test_density_validation_catches_negative_eigenvalue(self):
        bad = np.diag([1.5, -0.5]).astype(complex)
        with pytest.raises(ContractViolation):
            DensityMatrix(bad).validate()
