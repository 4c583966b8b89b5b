"""Projections, Dirac phase and the finite-size oracles (Chern marker, chiral
winding) that the localizer signature is checked against."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .errors import GapClosedError, RankError, SeparationError, SymmetryError
from .localizer import chiral_blocks, odd_localizer_from_blocks
from .model import LatticeGeometry
from .signature import sig_eigencount

log = logging.getLogger(__name__)

RANK_THRESHOLD = 1e-8
# honeycomb with unit bond length: cell area 3 sqrt(3) / 2, two sites per cell
HONEYCOMB_SITE_AREA = 3 * np.sqrt(3) / 4


def _dense(M) -> np.ndarray:
    if sp.issparse(M):
        return M.toarray().astype(complex)
    return np.asarray(M, dtype=complex)


@dataclass(frozen=True, eq=False)
class RieszProjection:
    P: np.ndarray
    rank: int
    min_real_part_distance: float

    @property
    def non_normality(self) -> float:
        return float(np.linalg.norm(self.P - self.P.conj().T, 2)) if self.P.size else 0.0


@dataclass(frozen=True, eq=False)
class RangeProjection:
    Q: np.ndarray
    rank: int


def riesz_projection(H, gap_tolerance: float = 1e-8) -> RieszProjection:
    """Spectral idempotent onto the eigenvalues with negative real part.

    Ordered complex Schur form puts Re < 0 first, T = [[T11, T12], [0, T22]];
    the projector in that basis is [[1, Y], [0, 0]] with T11 Y - Y T22 = T12.
    """
    Hd = _dense(H)
    n = len(Hd)
    scale = max(np.linalg.norm(Hd, 2), 1e-300) if n else 1.0
    T, Z, k = la.schur(Hd, output="complex", sort="lhp")
    ev = np.diag(T)
    distance = float(np.abs(ev.real).min()) if n else np.inf
    if distance < gap_tolerance * scale:
        raise GapClosedError(f"eigenvalue within {distance:.2e} of the imaginary axis")
    if k in (0, n):
        P = np.eye(n, dtype=complex) if k == n else np.zeros((n, n), dtype=complex)
        return RieszProjection(P, k, distance)
    T11, T12, T22 = T[:k, :k], T[:k, k:], T[k:, k:]
    separation = np.abs(np.diag(T11)[:, None] - np.diag(T22)[None, :]).min()
    if separation < gap_tolerance * scale:
        raise SeparationError(f"spectral subsets only {separation:.2e} apart")
    Y = la.solve_sylvester(T11, -T22, T12)
    PT = np.zeros((n, n), dtype=complex)
    PT[:k, :k] = np.eye(k)
    PT[:k, k:] = Y
    return RieszProjection(Z @ PT @ Z.conj().T, k, distance)


def range_projection(P) -> RangeProjection:
    """Orthogonal projector Q onto Ran(P), equal to P (P^* P)^-1 P^* on Ran(P^*).

    Built from the left singular vectors of P. Nonzero singular values of an
    idempotent are >= 1, so a value within two decades of the rank threshold
    signals a broken input.
    """
    Pd = P.P if isinstance(P, RieszProjection) else _dense(P)
    if Pd.size == 0:
        return RangeProjection(Pd.copy(), 0)
    U, s, _ = la.svd(Pd)
    top = max(s[0], 1e-300)
    rel = s / top
    if np.any((rel > RANK_THRESHOLD * 1e-2) & (rel < RANK_THRESHOLD * 1e2)):
        raise RankError("singular values of P straddle the rank threshold")
    r = int(np.count_nonzero(rel > RANK_THRESHOLD)) if s[0] > RANK_THRESHOLD else 0
    Ur = U[:, :r]
    return RangeProjection(Ur @ Ur.conj().T, r)


def dirac_phase(D0) -> np.ndarray:
    """Unitary polar factor F0 = D0 |D0|^-1, set to the identity on ker D0.

    For non-normal D0 whose kernel and cokernel differ, the kernel is mapped
    onto the cokernel instead so that F0 stays unitary.
    """
    M = _dense(D0)
    n = len(M)
    if n == 0:
        return M.copy()
    U, s, Vh = la.svd(M)
    V = Vh.conj().T
    r = int(np.count_nonzero(s > 1e-10 * s[0])) if s[0] > 0 else 0
    F = U[:, :r] @ Vh[:r]
    Vk, Uk = V[:, r:], U[:, r:]
    if np.allclose(Vk @ Vk.conj().T, Uk @ Uk.conj().T, atol=1e-10):
        return F + Vk @ Vk.conj().T
    return F + Uk @ Vk.conj().T


def chern_marker(
    Q,
    geom: LatticeGeometry,
    bulk_window: float | None = None,
    center=(0.0, 0.0),
    per_site: bool = False,
    area_per_site: float = HONEYCOMB_SITE_AREA,
):
    """Local Chern marker (4 pi / a) Im (Q [X, Q] [Y, Q])_nn, averaged over the
    sites within `bulk_window` of `center` (orbitals of a site are summed).

    `a` is the area per site, which turns the per-site trace into a density;
    Q [X, Q] [Y, Q] = -Q X (1 - Q) Y Q, so this is the usual real-space marker.
    The default window is 40% of the geometry's radius.
    """
    Qd = Q.Q if isinstance(Q, RangeProjection) else _dense(Q)
    pos = geom.orbital_positions()
    x, y = pos[:, 0], pos[:, 1]
    XQ = x[:, None] * Qd - Qd * x[None, :]
    YQ = y[:, None] * Qd - Qd * y[None, :]
    local = (4 * np.pi / area_per_site) * np.einsum("ij,jk,ki->i", Qd, XQ, YQ).imag
    local = local.reshape(geom.n_sites, geom.orbital_count).sum(axis=1)
    if per_site:
        return local
    if bulk_window is None:
        bulk_window = 0.4 * geom.radius()
    inside = np.hypot(*(geom.positions - np.asarray(center)).T) <= bulk_window
    if not inside.any():
        return 0.0
    return float(local[inside].mean())


def flatten_path(H, t: float, P=None) -> np.ndarray:
    """H_t = f_t^-(H) P + f_t^+(H)(1 - P) with f_t^+-(z) = (1 - t) z +- t.

    Since both interpolating functions are affine this is (1 - t) H + t (1 - 2P);
    H_0 = H and H_1 = 1 - 2P. Chirality is preserved because JPJ = 1 - P.
    """
    Hd = _dense(H)
    if P is None:
        P = riesz_projection(Hd)
    Pd = P.P if isinstance(P, RieszProjection) else _dense(P)
    if t == 0:
        return Hd.copy()
    return (1 - t) * Hd + t * (np.eye(len(Hd)) - 2 * Pd)


def odd_index(X, x_domain, x_codomain, kappa: float, probe_x: float, rho: float | None):
    """Index of E X E + 1 - E through the hermitian odd localizer
    [[kappa D, X^*], [X, -kappa D]]; None if its gap is closed."""
    Xd = _dense(X)
    report = sig_eigencount(odd_localizer_from_blocks(Xd, Xd.conj().T, x_domain, x_codomain, kappa, probe_x, rho))
    if report.signature is None:
        return None
    return report.signature // 2 if report.signature % 2 == 0 else report.signature / 2


@dataclass(frozen=True)
class ChiralWinding:
    A: int
    B: int
    V: int
    rho: float | None

    def as_tuple(self):
        return (self.A, self.B, self.V)

    @property
    def consistent(self) -> bool:
        return self.A == -self.B == self.V


def chiral_winding(H, J, geom: LatticeGeometry, kappa: float = 0.5, probe_x: float | None = None, rho: float | None = None) -> ChiralWinding:
    """Odd index pairings of A, B and V for a line-gapped chiral H.

    V is twice the lower-left block of the Riesz projection in the J-grading.
    Each index is half the signature of the hermitian odd localizer of that
    block. If the three values violate Ind A = -Ind B = Ind V, rho is doubled
    until the window covers the whole chain.
    """
    A, B, plus, minus = chiral_blocks(H, J)
    Ad, Bd = A.toarray(), B.toarray()
    for M in (Ad, Bd):
        if M.shape[0] != M.shape[1] or np.linalg.matrix_rank(M, tol=1e-10 * max(np.abs(M).max(), 1e-300)) < len(M):
            raise GapClosedError("chiral blocks A and B must be invertible")
    Hd = _dense(H)
    P = riesz_projection(Hd).P
    Jd = np.diag(_dense(J).diagonal())
    defect = np.abs(Jd @ P @ Jd - (np.eye(len(P)) - P)).max()
    if defect > 1e-10 * max(1.0, np.abs(P).max()):
        raise SymmetryError(f"JPJ != 1 - P (defect {defect:.2e})")
    V = 2 * P[np.ix_(minus, plus)]
    x = geom.orbital_positions()[:, 0]
    xp, xm = x[plus], x[minus]
    if probe_x is None:
        # midway between two sites avoids a zero in D
        probe_x = float(np.median(x)) + 0.25

    extent = float(np.abs(x - probe_x).max())
    current = rho
    while True:
        triple = (
            odd_index(Ad, xp, xm, kappa, probe_x, current),
            odd_index(Bd, xm, xp, kappa, probe_x, current),
            odd_index(V, xp, xm, kappa, probe_x, current),
        )
        result = ChiralWinding(*triple, rho=current)
        if None not in triple and result.consistent:
            return result
        if current is None or current >= extent:
            log.warning("chiral winding inconsistent at full window: %s", triple)
            return result
        log.info("chiral winding %s inconsistent at rho=%s, escalating", triple, current)
        current = 2 * current
