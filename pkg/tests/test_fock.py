import math

import numpy as np
import pytest

from kerrblockade.fock import (
    DensityMatrix,
    KetState,
    Operator,
    Truncation,
    TruncationError,
    UndefinedG2Error,
    annihilation,
    average_displaced_vacuum,
    coherent_state,
    creation,
    displacement_operator,
    fock_state,
    g2_instantaneous,
    number_op,
    parity_op,
    quadrature_ops,
    squeeze_operator,
    thermal_state,
    trace_distance,
    wigner_point,
)


def _interior_norm(m: np.ndarray, keep: int) -> float:
    return float(np.abs(m[:keep, :keep]).max())


class TestLadderOperators:
    def test_annihilation_on_fock2(self):
        t = Truncation(3)
        a = annihilation(t)
        out = a.matrix @ fock_state(2, t).amplitudes
        assert abs(out[1] - math.sqrt(2)) < 1e-15
        assert abs(out[0]) == 0 and abs(out[2]) == 0

    def test_vacuum_annihilated(self):
        t = Truncation(2)
        a = annihilation(t)
        assert np.all(a.matrix @ fock_state(0, t).amplitudes == 0)

    def test_number_eigenvalue(self):
        t = Truncation(4)
        n = creation(t) @ annihilation(t)
        out = n.matrix @ fock_state(3, t).amplitudes
        assert abs(out[3] - 3.0) < 1e-15

    def test_rejects_dim_below_2(self):
        with pytest.raises(ValueError):
            Truncation(1)

    @pytest.mark.parametrize("dim", [2, 5, 16, 40])
    def test_commutator_identity(self, dim):
        t = Truncation(dim)
        a = annihilation(t).matrix
        comm = a @ a.conj().T - a.conj().T @ a - np.eye(dim)
        # truncation breaks the identity only in the top level
        assert _interior_norm(comm, dim - 1) < 1e-12


class TestCoherentState:
    def test_vacuum(self):
        t = Truncation(12)
        c = coherent_state(0.0, t)
        assert abs(c.amplitudes[0] - 1.0) < 1e-15

    def test_mean_photon_number_alpha1(self):
        # guard needs dim >= 17 for |alpha|=1
        c = coherent_state(1.0, Truncation(17))
        assert abs(c.to_density().n_mean() - 1.0) < 1e-10

    def test_mean_photon_number_alpha25(self):
        # oracle: |alpha|^2 evaluated by summing the truncated series
        alpha, dim = 2.5, 40
        n = np.arange(dim)
        series = np.exp(-abs(alpha) ** 2) * abs(alpha) ** (2 * n) / [math.factorial(k) for k in n]
        expected = float((n * series).sum() / series.sum())
        assert abs(expected - 6.25) < 1e-8
        c = coherent_state(alpha, Truncation(dim))
        assert abs(c.to_density().n_mean() - expected) < 1e-8

    def test_truncation_guard(self):
        with pytest.raises(TruncationError):
            coherent_state(3.0, Truncation(12))


class TestDisplacementOperator:
    def test_zero_is_identity(self):
        t = Truncation(11)
        d = displacement_operator(0.0, t)
        assert np.abs(d.matrix - np.eye(11)).max() < 1e-14

    def test_inverse_displacement(self):
        t = Truncation(40)
        alpha = 2.5
        prod = displacement_operator(alpha, t).matrix @ displacement_operator(-alpha, t).matrix
        keep = t.dim - math.ceil(6 * alpha)
        assert _interior_norm(prod - np.eye(t.dim), keep) < 1e-8

    def test_matches_series_coherent_state(self):
        # independent construction: series coherent state vs D(alpha)|0>
        t = Truncation(40)
        alpha = 2.5
        from_op = displacement_operator(alpha, t).matrix[:, 0]
        series = coherent_state(alpha, t).amplitudes
        phase = np.vdot(series, from_op)
        phase /= abs(phase)
        assert np.abs(from_op - phase * series).max() < 1e-8

    def test_unitary_on_interior_block(self):
        t = Truncation(40)
        alpha = 2.0
        d = displacement_operator(alpha, t).matrix
        gram = d.conj().T @ d
        keep = t.dim - math.ceil(6 * alpha)
        assert _interior_norm(gram - np.eye(t.dim), keep) < 1e-8


class TestThermalState:
    def test_zero_temperature(self):
        t = Truncation(8)
        rho = thermal_state(0.0, t)
        assert abs(rho.matrix[0, 0] - 1.0) < 1e-15

    def test_mean_occupation(self):
        # oracle: geometric series evaluated directly
        nbar, dim = 0.01, 10
        q = nbar / (1 + nbar)
        p = q ** np.arange(dim)
        p /= p.sum()
        expected = float(np.arange(dim) @ p)
        rho = thermal_state(nbar, Truncation(dim))
        assert abs(rho.n_mean() - expected) < 1e-12
        assert abs(rho.n_mean() - nbar) < 1e-8

    def test_purity(self):
        # analytic thermal purity 1/(1+2 nbar)
        rho = thermal_state(0.5, Truncation(40))
        assert abs(rho.purity() - 0.5) < 1e-6

    def test_tail_guard(self):
        with pytest.raises(TruncationError):
            thermal_state(1.0, Truncation(8))


class TestSqueezeOperator:
    def test_identity_at_zero(self):
        t = Truncation(20)
        s = squeeze_operator(0.0, t)
        assert np.abs(s.matrix - np.eye(20)).max() < 1e-14

    def test_vacuum_variances(self):
        t = Truncation(30)
        xi = 0.1
        s = squeeze_operator(xi, t)
        vac = fock_state(0, t).amplitudes
        psi = KetState(t, s.matrix @ vac)
        x, y = quadrature_ops(t)
        var_x = psi.expectation(x @ x).real - psi.expectation(x).real ** 2
        var_y = psi.expectation(y @ y).real - psi.expectation(y).real ** 2
        assert abs(var_x - math.exp(-2 * xi) / 2) < 1e-6
        assert abs(var_y - math.exp(0.2) / 2) < 1e-6
        assert abs(math.exp(0.2) / 2 - 0.61070) < 1e-5

    def test_inverse(self):
        t = Truncation(30)
        prod = squeeze_operator(0.1, t).matrix @ squeeze_operator(-0.1, t).matrix
        assert _interior_norm(prod - np.eye(30), 20) < 1e-8


class TestG2:
    def test_fock1_is_zero(self):
        rho = fock_state(1, Truncation(5)).to_density()
        assert g2_instantaneous(rho) == 0.0

    def test_coherent_is_one(self):
        rho = coherent_state(1.3, Truncation(22)).to_density()
        assert abs(g2_instantaneous(rho) - 1.0) < 1e-8

    def test_thermal_is_two(self):
        rho = thermal_state(0.5, Truncation(60))
        assert abs(g2_instantaneous(rho) - 2.0) < 1e-6

    def test_fock_n_formula(self):
        for n in range(1, 6):
            rho = fock_state(n, Truncation(8)).to_density()
            assert abs(g2_instantaneous(rho) - (n - 1) / n) < 1e-8

    def test_floor_signal(self):
        rho = fock_state(0, Truncation(4)).to_density()
        with pytest.raises(UndefinedG2Error):
            g2_instantaneous(rho)


class TestWignerPoint:
    def test_vacuum_origin(self):
        rho = fock_state(0, Truncation(12)).to_density()
        assert abs(wigner_point(rho, 0.0) - 2 / math.pi) < 1e-12

    def test_fock1_origin(self):
        rho = fock_state(1, Truncation(12)).to_density()
        assert abs(wigner_point(rho, 0.0) + 2 / math.pi) < 1e-12

    def test_coherent_at_center(self):
        alpha = 1.2
        rho = coherent_state(alpha, Truncation(20)).to_density()
        assert abs(wigner_point(rho, alpha) - 2 / math.pi) < 1e-8


class TestTypeInvariants:
    def test_ket_norm_enforced(self):
        with pytest.raises(ValueError):
            KetState(Truncation(3), np.array([1.0, 1.0, 0.0]))

    def test_density_trace_enforced(self):
        with pytest.raises(ValueError):
            DensityMatrix(Truncation(2), np.diag([0.7, 0.7]))

    def test_density_hermiticity_enforced(self):
        m = np.array([[0.5, 0.3], [0.1, 0.5]], dtype=complex)
        with pytest.raises(ValueError):
            DensityMatrix(Truncation(2), m)

    def test_density_positivity_enforced(self):
        m = np.diag([1.5, -0.5]).astype(complex)
        with pytest.raises(ValueError):
            DensityMatrix(Truncation(2), m)

    def test_operator_sparse_dense_agree(self):
        t = Truncation(25)
        op = number_op(t)
        assert np.abs(op.sparse().toarray() - op.matrix).max() < 1e-14

    def test_parity(self):
        t = Truncation(5)
        assert np.allclose(parity_op(t).matrix.diagonal(), [1, -1, 1, -1, 1])


class TestChannelSampling:
    def test_sampled_displacements_match_thermal_channel(self):
        # Monte-Carlo oracle: averaged noisy displacements of vacuum equal a
        # displaced thermal state of occupation sigma^2.
        alpha, sigma = 2.0, 0.1
        t = Truncation(36)
        rng = np.random.default_rng(20240817)
        sampled = average_displaced_vacuum(alpha, sigma, 100_000, t, rng)
        d = displacement_operator(alpha, t).matrix
        th = thermal_state(sigma**2, t).matrix
        analytic = DensityMatrix(t, d @ th @ d.conj().T, _validate=False)
        assert trace_distance(sampled, analytic) < 0.01
