import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from conftest import HALDANE_TOPO, uniform_flake
from nhloc.errors import DomainError, SymmetryError, ValidationError
from nhloc.localizer import (
    C_KAPPA,
    C_RHO,
    DiracOperator,
    assemble_even_localizer,
    assemble_odd_localizer,
    certify_hypotheses,
    clifford,
    odd_localizer_from_blocks,
    window,
)
from nhloc.model import A, LatticeGeometry, RegionParams, build_chiral_chain

probes = st.tuples(st.floats(-12, 12), st.floats(-12, 12))


def single_site():
    return LatticeGeometry(np.zeros((1, 2)), np.array([A]), np.zeros(1, dtype=int))


class TestClifford:
    def test_relations(self):
        g1, g2, g3 = clifford(2)
        one = np.eye(2)
        for g in (g1, g2, g3):
            np.testing.assert_allclose(g @ g, one, atol=1e-14)
            np.testing.assert_allclose(g, g.conj().T, atol=1e-14)
        for a, b in ((g1, g2), (g1, g3), (g2, g3)):
            np.testing.assert_allclose(a @ b + b @ a, 0, atol=1e-14)
        np.testing.assert_array_equal(g3, np.diag([1, -1]))

    def test_scalar(self):
        assert clifford(1)[0].shape == (1, 1)

    def test_unsupported(self):
        with pytest.raises(NotImplementedError):
            clifford(3)


class TestDirac:
    def test_off_diagonal_block(self):
        pos = np.array([[1.0, 2.0], [-3.0, 0.5]])
        D = DiracOperator(pos, (0.5, -1.0)).matrix().toarray()
        D0 = DiracOperator(pos, (0.5, -1.0)).d0().toarray()
        np.testing.assert_allclose(D[2:, :2], D0)
        np.testing.assert_allclose(np.diag(D0), [0.5 + 3j, -3.5 + 1.5j])
        # D^2 = |D|^2 on each sector
        r2 = DiracOperator(pos, (0.5, -1.0)).abs_diagonal() ** 2
        np.testing.assert_allclose(np.diag(D @ D).real, np.tile(r2, 2))


class TestEvenLocalizer:
    def test_single_site(self):
        h = 0.3 - 0.7j
        L = assemble_even_localizer(sp.csr_matrix([[h]]), single_site(), 1.0)
        np.testing.assert_array_equal(L.matrix, [[-h, 0], [0, np.conj(h)]])

    def test_hermitian_input(self, hermitian_flake):
        geom, H = hermitian_flake
        L = assemble_even_localizer(H, geom, 0.1, (0.4, -1.3)).matrix
        assert np.abs(L - L.conj().T).max() < 1e-14 * np.linalg.norm(L, 2)
        ev = np.linalg.eigvals(L)
        assert np.abs(ev.imag).max() < 1e-10 * np.linalg.norm(L, 2)

    def test_blocks(self, fig1):
        geom, H = fig1
        L = assemble_even_localizer(H, geom, 0.1, (1.0, 2.0), rho=4.0)
        n = L.grading_size
        assert L.dimension == 2 * len(L.retained) == 2 * n
        Hc = H.toarray()[np.ix_(L.retained, L.retained)]
        np.testing.assert_array_equal(L.matrix[:n, :n], -Hc)
        np.testing.assert_array_equal(L.matrix[n:, n:], Hc.conj().T)
        np.testing.assert_array_equal(L.matrix[:n, n:], L.matrix[n:, :n].conj().T)

    @given(st.floats(-10, 10), probes)
    def test_shift_identity(self, s, probe):
        geom, H = uniform_flake(RegionParams(0.3, 1.0, 0.2, 1.0, 0.1), 3.0)
        n = H.shape[0]
        Ls = assemble_even_localizer(H + 1j * s * sp.identity(n), geom, 0.2, probe).matrix
        L = assemble_even_localizer(H, geom, 0.2, probe).matrix
        np.testing.assert_array_equal(Ls, L - 1j * s * np.eye(2 * n))

    @given(st.floats(0.1, 5), probes)
    def test_scaling_covariance(self, lam, probe):
        geom, H = uniform_flake(RegionParams(0.3, 1.0, 0.2, 1.0, 0.1), 3.0)
        L1 = assemble_even_localizer(lam * H, geom, lam * 0.3, probe).matrix
        L2 = lam * assemble_even_localizer(H, geom, 0.3, probe).matrix
        np.testing.assert_allclose(L1, L2, rtol=1e-14, atol=1e-14)

    def test_window_closed_ball(self):
        pos = np.array([[0.0, 0.0], [3.0, 4.0], [6.0, 0.0]])
        np.testing.assert_array_equal(window(pos, (0, 0), 5.0), [0, 1])
        with pytest.raises(DomainError):
            window(pos, (100, 100), 1.0)

    @given(st.floats(0.5, 6), st.floats(0.0, 4), probes)
    def test_truncation_nesting(self, r1, extra, probe):
        geom, H = uniform_flake(HALDANE_TOPO, 4.0)
        r2 = r1 + extra
        try:
            small = assemble_even_localizer(H, geom, 0.1, probe, r1)
        except DomainError:
            return
        big = assemble_even_localizer(H, geom, 0.1, probe, r2)
        assert set(small.retained) <= set(big.retained)
        idx = np.searchsorted(big.retained, small.retained)
        nb = big.grading_size
        sel = np.concatenate([idx, idx + nb])
        np.testing.assert_array_equal(big.matrix[np.ix_(sel, sel)], small.matrix)

    def test_bad_kappa(self, fig1):
        with pytest.raises(ValidationError):
            assemble_even_localizer(fig1[1], fig1[0], 0.0)


class TestOddLocalizer:
    def test_single_cell(self):
        L = odd_localizer_from_blocks(np.ones((1, 1)), np.ones((1, 1)), [0.0], [0.0], 1.0, 0.0)
        np.testing.assert_array_equal(L.matrix, [[0, 1], [1, 0]])
        ev = np.linalg.eigvalsh(L.matrix)
        assert (ev > 0).sum() - (ev < 0).sum() == 0

    def test_hermitian_chiral(self):
        chain = build_chiral_chain(12, 0.4, 1.0, 0.2, seed=1)
        L = assemble_odd_localizer(chain.H, chain.J, chain.geometry, 0.5, 5.25).matrix
        np.testing.assert_allclose(L, L.conj().T, atol=1e-15)

    def test_chirality_violation(self):
        chain = build_chiral_chain(6, 0.4, 1.0)
        H = chain.H + 0.1 * sp.identity(12)
        with pytest.raises(SymmetryError):
            assemble_odd_localizer(H, chain.J, chain.geometry, 0.5)


class TestCertificate:
    def test_zero_hamiltonian(self, fig1):
        geom, H = fig1
        c = certify_hypotheses(sp.csr_matrix(H.shape, dtype=complex), geom, 0.1, None, 1.0)
        assert c.N == 0 and math.isinf(c.kappa_max)

    def test_diagonal_hamiltonian(self, fig1):
        geom, H = fig1
        c = certify_hypotheses(sp.diags(H.diagonal()), geom, 0.1, 5.0, 0.5)
        assert c.N == 0 and math.isinf(c.kappa_max)
        assert c.satisfied[0]

    def test_formulas(self, fig1):
        geom, H = fig1
        c = certify_hypotheses(H, geom, 0.1, 20.0, 0.15)
        assert c.kappa_max == pytest.approx(C_KAPPA * c.g**3 / (c.H_norm * c.N))
        assert c.rho_min == pytest.approx(C_RHO * (c.g / c.kappa) * (1 + c.Im_H_norm / c.g))
        assert c.N == max(c.commutator_norm, c.abs_commutator_norm)
        assert c.Im_H_norm == pytest.approx(0.2, abs=1e-12)
        # the bounds are far from optimal: kappa = 0.1 violates them
        assert not c.satisfied[0]
        assert not c.ok

    def test_commutator_matches_dense(self):
        geom, H = uniform_flake(HALDANE_TOPO, 2.5)
        c = certify_hypotheses(H, geom, 0.1, None, 0.5, probe=(0.3, 0.1))
        Hd = H.toarray()
        pos = geom.positions - [0.3, 0.1]
        X, Y = np.diag(pos[:, 0]), np.diag(pos[:, 1])
        g1, g2, _ = clifford(2)
        D = np.kron(g1, X) + np.kron(g2, Y)
        Hx = np.kron(np.eye(2), Hd)
        assert c.commutator_norm == pytest.approx(np.linalg.norm(D @ Hx - Hx @ D, 2), rel=1e-12)
        R = np.diag(np.hypot(*pos.T))
        assert c.abs_commutator_norm == pytest.approx(np.linalg.norm(R @ Hd - Hd @ R, 2), rel=1e-12)
