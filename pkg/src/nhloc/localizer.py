"""Dirac operators and the even/odd non-hermitian spectral localizers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DomainError, SymmetryError, ValidationError
from .model import LatticeGeometry, tidy

C_KAPPA = 1.0 / 12.0
C_RHO = 6.0

_SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
_SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def clifford(d: int) -> list[np.ndarray]:
    """Irreducible hermitian Clifford generators.

    d = 2 gives [Gamma_1, Gamma_2, Gamma_3] with Gamma_3 = diag(1, -1) the
    grading; d = 1 gives the scalar generator [1].
    """
    if d == 1:
        return [np.ones((1, 1), dtype=complex)]
    if d == 2:
        return [_SIGMA_X.copy(), _SIGMA_Y.copy(), _SIGMA_Z.copy()]
    raise NotImplementedError(f"Clifford representation for d = {d} is not supported")


@dataclass(frozen=True, eq=False)
class DiracOperator:
    """D = sum_j Gamma_j (X_j - x_j) on orbital positions, shifted by `probe`."""

    positions: np.ndarray
    probe: tuple = (0.0, 0.0)
    d: int = 2

    @property
    def gamma(self) -> list[np.ndarray]:
        return clifford(self.d)[: self.d]

    def shifted(self) -> np.ndarray:
        return np.asarray(self.positions, dtype=float)[:, : self.d] - np.asarray(self.probe, dtype=float)[: self.d]

    def d0(self) -> sp.csr_matrix:
        """Off-diagonal block (X - x) + i (Y - y) in the grading of Gamma_3."""
        if self.d != 2:
            raise ValidationError("D0 is defined for even dimension only")
        rel = self.shifted()
        return tidy(sp.diags(rel[:, 0] + 1j * rel[:, 1]))

    def matrix(self) -> sp.csr_matrix:
        rel = self.shifted()
        return tidy(sum(sp.kron(g, sp.diags(rel[:, j])) for j, g in enumerate(self.gamma)))

    def abs_diagonal(self) -> np.ndarray:
        """Diagonal of |D| per orbital; |D| = diag(r) tensor 1 on C^d'."""
        return np.linalg.norm(self.shifted(), axis=1)


@dataclass(frozen=True, eq=False)
class LocalizerMatrix:
    matrix: np.ndarray
    kappa: float
    probe: tuple
    rho: float | None
    grading_size: int
    retained: np.ndarray

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


def window(positions, center, rho, d=2) -> np.ndarray:
    """Indices of orbitals with |position - center| <= rho (closed ball)."""
    pos = np.asarray(positions, dtype=float)[:, :d]
    if rho is None:
        return np.arange(len(pos))
    dist = np.sqrt(((pos - np.asarray(center, dtype=float)[:d]) ** 2).sum(axis=1))
    keep = np.flatnonzero(dist <= rho * (1 + 1e-12))
    if len(keep) == 0:
        raise DomainError(f"no site within rho = {rho} of {tuple(center)}")
    return keep


def _as_csr(H) -> sp.csr_matrix:
    return H if sp.isspmatrix_csr(H) else sp.csr_matrix(H, dtype=complex)


def assemble_even_localizer(
    H,
    geom: LatticeGeometry,
    kappa: float,
    probe=(0.0, 0.0),
    rho: float | None = None,
    window_center=None,
) -> LocalizerMatrix:
    """L = [[-H, kappa D0^*], [kappa D0, H^*]] compressed to |D| <= rho.

    `window_center` defaults to the probe; holding it fixed while the probe
    moves keeps the matrix dimension constant along a path.
    """
    if kappa <= 0:
        raise ValidationError("kappa must be positive")
    probe = (float(probe[0]), float(probe[1]))
    pos = geom.orbital_positions()
    keep = window(pos, probe if window_center is None else window_center, rho)
    Hc = _as_csr(H)[keep][:, keep].toarray()
    rel = pos[keep] - np.asarray(probe)
    d0 = kappa * (rel[:, 0] + 1j * rel[:, 1])
    n = len(keep)
    L = np.zeros((2 * n, 2 * n), dtype=complex)
    L[:n, :n] = -Hc
    L[n:, n:] = Hc.conj().T
    idx = np.arange(n)
    L[idx, n + idx] = d0.conj()
    L[n + idx, idx] = d0
    return LocalizerMatrix(L, float(kappa), probe, rho, n, keep)


def chiral_sectors(J, tol: float = 1e-12):
    """Index sets of the +1 and -1 eigenspaces of a diagonal involution J."""
    Jc = _as_csr(J)
    off = Jc - sp.diags(Jc.diagonal())
    diag = Jc.diagonal()
    if off.count_nonzero() or np.max(np.abs(np.abs(diag) - 1), initial=0) > tol or np.max(np.abs(diag.imag), initial=0) > tol:
        raise SymmetryError("J must be a diagonal matrix with entries +-1")
    return np.flatnonzero(diag.real > 0), np.flatnonzero(diag.real < 0)


def chiral_blocks(H, J, tol: float = 1e-12):
    """(A, B, plus, minus) with H = [[0, B], [A, 0]] in the grading of J."""
    Hc = _as_csr(H)
    Jc = _as_csr(J)
    scale = max(1.0, spla.norm(Hc, 1))
    defect = Jc @ Hc @ Jc + Hc
    if defect.nnz and np.abs(defect.data).max() > tol * scale:
        raise SymmetryError(f"JHJ != -H (defect {np.abs(defect.data).max():.2e})")
    plus, minus = chiral_sectors(Jc, tol)
    A = Hc[minus][:, plus]
    B = Hc[plus][:, minus]
    return A, B, plus, minus


def odd_localizer_from_blocks(A, B, x_plus, x_minus, kappa, probe_x=0.0, rho=None) -> LocalizerMatrix:
    """L^od = [[kappa D, B], [A, -kappa D]] with D = X - x on each sector."""
    if kappa <= 0:
        raise ValidationError("kappa must be positive")
    x_plus = np.asarray(x_plus, dtype=float)
    x_minus = np.asarray(x_minus, dtype=float)
    if rho is None:
        kp, km = np.arange(len(x_plus)), np.arange(len(x_minus))
    else:
        kp = np.flatnonzero(np.abs(x_plus - probe_x) <= rho * (1 + 1e-12))
        km = np.flatnonzero(np.abs(x_minus - probe_x) <= rho * (1 + 1e-12))
        if len(kp) + len(km) == 0:
            raise DomainError(f"no site within rho = {rho} of x = {probe_x}")
    A = sp.csr_matrix(A)[km][:, kp].toarray() if sp.issparse(A) else np.asarray(A)[np.ix_(km, kp)]
    B = sp.csr_matrix(B)[kp][:, km].toarray() if sp.issparse(B) else np.asarray(B)[np.ix_(kp, km)]
    npl = len(kp)
    L = np.zeros((npl + len(km),) * 2, dtype=complex)
    L[:npl, :npl] = np.diag(kappa * (x_plus[kp] - probe_x))
    L[npl:, npl:] = np.diag(-kappa * (x_minus[km] - probe_x))
    L[:npl, npl:] = B
    L[npl:, :npl] = A
    return LocalizerMatrix(L, float(kappa), (float(probe_x),), rho, npl, np.concatenate([kp, km]))


def assemble_odd_localizer(H, J, geom: LatticeGeometry, kappa: float, probe_x: float = 0.0, rho: float | None = None) -> LocalizerMatrix:
    """Odd localizer of a chiral H (JHJ = -H) on a one-dimensional geometry."""
    A, B, plus, minus = chiral_blocks(H, J)
    x = geom.orbital_positions()[:, 0]
    return odd_localizer_from_blocks(A, B, x[plus], x[minus], kappa, probe_x, rho)


@dataclass(frozen=True)
class HypothesisCertificate:
    g: float
    H_norm: float
    Im_H_norm: float
    commutator_norm: float
    abs_commutator_norm: float
    N: float
    kappa: float
    rho: float | None
    kappa_max: float
    rho_min: float
    satisfied: tuple

    @property
    def ok(self) -> bool:
        return all(self.satisfied)


def spectral_norm(M, dense_limit: int = 2000) -> float:
    """2-norm; dense SVD for small matrices, ARPACK beyond dense_limit."""
    if M.shape[0] == 0:
        return 0.0
    if sp.issparse(M):
        if M.nnz == 0:
            return 0.0
        if max(M.shape) > dense_limit:
            return float(spla.svds(M, k=1, return_singular_vectors=False, random_state=0)[0])
        M = M.toarray()
    return float(np.linalg.norm(M, 2))


def certify_hypotheses(H, geom: LatticeGeometry, kappa: float, rho: float | None, g: float, probe=(0.0, 0.0), d: int = 2) -> HypothesisCertificate:
    """Evaluate the kappa- and rho-bounds that guarantee the localizer gap.

    Never raises on violation; the returned booleans report it. rho=None means
    no truncation, which satisfies any rho-bound.
    """
    if g <= 0:
        raise ValidationError("g must be positive")
    Hc = _as_csr(H)
    dirac = DiracOperator(geom.orbital_positions(), tuple(probe), d)
    Hext = sp.kron(sp.identity(len(dirac.gamma[0]), format="csr"), Hc, format="csr")
    Dm = dirac.matrix()
    comm = Dm @ Hext - Hext @ Dm
    R = sp.diags(dirac.abs_diagonal())
    abs_comm = R @ Hc - Hc @ R
    h_norm = spectral_norm(Hc)
    im_norm = spectral_norm((Hc - Hc.conj().T) / 2j)
    c1, c2 = spectral_norm(comm), spectral_norm(abs_comm)
    N = max(c1, c2)
    kappa_max = math.inf if h_norm * N == 0 else C_KAPPA * g**3 / (h_norm * N)
    rho_min = C_RHO * (g / kappa) * (1 + im_norm / g)
    rho_ok = True if rho is None else rho_min <= rho
    return HypothesisCertificate(g, h_norm, im_norm, c1, c2, N, float(kappa), rho, kappa_max, rho_min, (kappa <= kappa_max, rho_ok))
