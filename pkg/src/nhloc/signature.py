"""Signature of line-gapped matrices: eigenvalue count, Routh-Hurwitz integral
and spectral flow along matrix paths."""

from __future__ import annotations

import csv
import enum
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.linalg as la
from scipy.optimize import linear_sum_assignment

from .errors import AmbiguousTrackingError, QuadratureError
from .localizer import LocalizerMatrix

log = logging.getLogger(__name__)

GAP_TOLERANCE = 1e-8
RH_ROUNDING_LIMIT = 0.1
RH_CONDITION_LIMIT = 1e12
MAX_REFINEMENT = 12
ROUNDING_FLOOR = 1e3


class Method(str, enum.Enum):
    EIGENCOUNT = "eig"
    ROUTH_HURWITZ = "rh"
    SPECTRAL_FLOW = "flow"


@dataclass
class SignatureReport:
    """Outcome of a signature computation.

    `signature` is N_+ - N_-; `half_signature` is half of it and is a
    half-integer only for odd-dimensional input. Both are None when the gap is
    closed.
    """

    signature: int | None
    line_gap: float
    method: Method
    residual: float = 0.0
    eigenvalues: np.ndarray | None = None
    gap_closed: bool = False

    @property
    def half_signature(self) -> float | None:
        return None if self.signature is None else self.signature / 2

    @property
    def odd_dimension(self) -> bool:
        return self.signature is not None and self.signature % 2 != 0


def _array(L) -> np.ndarray:
    return L.matrix if isinstance(L, LocalizerMatrix) else np.asarray(L, dtype=complex)


def _scale(M: np.ndarray) -> float:
    return float(np.abs(M).sum(axis=0).max()) if M.size else 0.0


def schur_eigenvalues(M: np.ndarray) -> np.ndarray:
    """Eigenvalues with algebraic multiplicity, read off the complex Schur form."""
    T = la.schur(M, output="complex", check_finite=False)[0]
    return np.diag(T).copy()


def localizer_line_gap(L) -> float:
    """min |Re lambda| over the spectrum."""
    M = _array(L)
    if M.size == 0:
        return np.inf
    return float(np.abs(schur_eigenvalues(M).real).min())


def sig_eigencount(L, gap_tolerance: float = GAP_TOLERANCE) -> SignatureReport:
    M = _array(L)
    ev = schur_eigenvalues(M)
    gap = float(np.abs(ev.real).min()) if len(ev) else np.inf
    if gap <= gap_tolerance * _scale(M):
        return SignatureReport(None, gap, Method.EIGENCOUNT, eigenvalues=ev, gap_closed=True)
    sig = int(np.count_nonzero(ev.real > 0) - np.count_nonzero(ev.real < 0))
    return SignatureReport(sig, gap, Method.EIGENCOUNT, eigenvalues=ev)


# coarse and fine Gauss-Legendre rules on [-1, 1]
_GL_COARSE = np.polynomial.legendre.leggauss(8)
_GL_FINE = np.polynomial.legendre.leggauss(16)


def hessenberg_blocks(M: np.ndarray) -> list[np.ndarray]:
    """Unreduced diagonal blocks of the Hessenberg form of M.

    Subdiagonal entries below eps * |M|_1 are treated as zero, splitting the
    matrix into block upper-triangular form; the resolvent trace is then the
    sum over the diagonal blocks.
    """
    Hs = la.hessenberg(M, check_finite=False)
    sub = np.abs(np.diag(Hs, -1))
    cuts = np.flatnonzero(sub <= np.finfo(float).eps * max(_scale(M), 1e-300)) + 1
    edges = np.concatenate([[0], cuts, [len(M)]])
    return [Hs[a:b, a:b] for a, b in zip(edges[:-1], edges[1:])]


def resolvent_trace(blocks: list[np.ndarray], z) -> np.ndarray:
    """Tr((H - z)^-1) for Hessenberg blocks at an array of points z.

    Hyman's recursion: with x_m = 1, back-substitute rows 2..m of (H - z) x = 0
    upward; the first row then gives det(H - z) up to a z-independent factor,
    and differentiating the recursion gives its z-derivative. Columns are
    rescaled as they grow, which leaves the ratio det'/det unchanged.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    total = np.zeros(len(z), dtype=complex)
    for Hb in blocks:
        m = len(Hb)
        x = np.zeros((m, len(z)), dtype=complex)
        dx = np.zeros_like(x)
        x[m - 1] = 1.0
        for i in range(m - 1, -1, -1):
            r = Hb[i, i:] @ x[i:] - z * x[i]
            dr = Hb[i, i:] @ dx[i:] - z * dx[i] - x[i]
            if i == 0:
                total += -dr / r
                break
            x[i - 1] = -r / Hb[i, i - 1]
            dx[i - 1] = -dr / Hb[i, i - 1]
            big = np.maximum(np.abs(x[i - 1]), np.abs(dx[i - 1]))
            if np.any(big > 1e100):
                scale = np.where(big > 1e100, big, 1.0)
                x[i - 1 :] /= scale
                dx[i - 1 :] /= scale
    return total


def _gl_panel(f, a, b):
    """Coarse and fine Gauss-Legendre estimates on [a, b], plus the rounding
    noise expected in their difference.

    The noise has two sources: relative error in the integrand values and the
    representation error of the nodes themselves, which moves f by about
    |f'| eps |theta| per node.
    """
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    xs = np.concatenate([_GL_COARSE[0], _GL_FINE[0]])
    values = f(mid + half * xs)
    k = len(_GL_COARSE[0])
    spread = np.abs(values - values[0]).max()
    noise = np.finfo(float).eps * ((b - a) * np.abs(values).max() + max(1.0, abs(mid)) * spread)
    return half * (_GL_COARSE[1] @ values[:k]), half * (_GL_FINE[1] @ values[k:]), float(noise)


def sig_routh_hurwitz(L, quadrature_tolerance: float = 1e-6, max_depth: int = 50) -> SignatureReport:
    """Half-signature as (1/2 pi) int Tr((1 + isL)(L + is)^-1) ds/(1 + s^2).

    Mapped to theta in (-pi/2, pi/2) by s = tan(theta) and integrated
    panelwise; a panel is bisected while its 8- and 16-point Gauss-Legendre
    estimates differ by more than its share of `quadrature_tolerance`; a
    panel still unresolved at `max_depth` raises QuadratureError.
    Resolvent traces come from one Hessenberg reduction, so each node costs
    O(n^2). A resolvent trace above RH_CONDITION_LIMIT times 1/|L|_1 marks an
    eigenvalue on the imaginary axis and yields a gap-closed report.
    """
    M = _array(L)
    n = len(M)
    if n == 0:
        return SignatureReport(0, np.inf, Method.ROUTH_HURWITZ)
    blocks = hessenberg_blocks(M)
    limit = RH_CONDITION_LIMIT / max(_scale(M), 1e-300)
    closed = False

    def f(theta):
        nonlocal closed
        tr = resolvent_trace(blocks, -1j * np.tan(theta))
        if not np.all(np.isfinite(tr)) or np.abs(tr).max() > limit:
            closed = True
        s = np.tan(theta)
        return (1 + s**2) * tr + 1j * n * s

    total = 0.0
    unresolved = False
    # a uniform start keeps narrow peaks from hiding between nodes
    edges = np.linspace(-np.pi / 2, np.pi / 2, 9)
    stack = [(a, b, 0) for a, b in zip(edges[:-1], edges[1:])]
    while stack and not closed:
        a, b, depth = stack.pop()
        coarse, fine, noise = _gl_panel(f, a, b)
        # near a sharp peak the two rules cannot agree better than the noise
        if abs(fine - coarse) <= max(quadrature_tolerance * (b - a) / np.pi, ROUNDING_FLOOR * noise):
            total += fine
        elif depth >= max_depth:
            unresolved = True
            total += fine
        else:
            m = 0.5 * (a + b)
            stack += [(a, m, depth + 1), (m, b, depth + 1)]
    if closed:
        log.debug("Routh-Hurwitz: resolvent blew up on the imaginary axis")
        return SignatureReport(None, 0.0, Method.ROUTH_HURWITZ, residual=np.nan, gap_closed=True)
    if unresolved:
        raise QuadratureError(f"quadrature did not converge within depth {max_depth}")
    integral = (total / (2 * np.pi)).real
    sig = int(round(2 * integral))
    residual = abs(integral - sig / 2)
    if residual > RH_ROUNDING_LIMIT:
        raise QuadratureError(f"Routh-Hurwitz integral {integral:.4f} is not close to a half-integer")
    return SignatureReport(sig, np.nan, Method.ROUTH_HURWITZ, residual=residual)


@dataclass
class FlowDiagram:
    """Tracked spectra along a path; crossings hold (t, +1/-1) for rightward
    and leftward passages through Re = 0."""

    samples: np.ndarray
    tracks: np.ndarray
    crossings: list = field(default_factory=list)
    start_signature: int | None = None
    end_signature: int | None = None

    @property
    def net_flow(self) -> int:
        return int(sum(direction for _, direction in self.crossings))

    @property
    def consistent(self) -> bool:
        if self.start_signature is None or self.end_signature is None:
            return False
        return 2 * self.net_flow == self.end_signature - self.start_signature

    def flow_after(self, t: float) -> int:
        """Net flow over the part of the path with parameter > t."""
        return int(sum(d for tc, d in self.crossings if tc > t))

    def crossing_tracks(self) -> list[int]:
        """Indices of tracks whose real part changes sign at least once."""
        re = self.tracks.real
        return [k for k in range(re.shape[1]) if np.any(np.sign(re[1:, k]) != np.sign(re[:-1, k]))]

    def write_csv(self, path) -> tuple[Path, Path]:
        """Track CSV (t, track, re, im) plus a crossings sidecar (t, direction)."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "track", "re", "im"])
            for t, row in zip(self.samples, self.tracks):
                for k, z in enumerate(row):
                    w.writerow([repr(float(t)), k, repr(float(z.real)), repr(float(z.imag))])
        side = path.with_name(path.stem + "_crossings.csv")
        with side.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "direction"])
            for t, d in self.crossings:
                w.writerow([repr(float(t)), d])
        return path, side


def _match(prev: np.ndarray, cur: np.ndarray):
    cost = np.abs(prev[:, None] - cur[None, :])
    _, cols = linear_sum_assignment(cost)
    matched = cur[cols]
    return matched, np.abs(matched - prev)


def _ambiguous(prev: np.ndarray, matched: np.ndarray, disp: np.ndarray) -> bool:
    """A step is ambiguous when two eigenvalues on opposite sides of the axis
    lie within twice the largest displacement of each other: swapping them
    would change which track crosses."""
    dmax = disp.max(initial=0.0)
    if dmax == 0:
        return False
    near = np.flatnonzero((np.abs(prev.real) < 2 * dmax) | (np.abs(matched.real) < 2 * dmax))
    if len(near) < 2:
        return False
    z = prev[near]
    close = np.abs(z[:, None] - z[None, :]) < 2 * dmax
    opposite = np.sign(z.real)[:, None] != np.sign(z.real)[None, :]
    np.fill_diagonal(close, False)
    return bool(np.any(close & opposite))


def spectral_flow(
    path: Callable[[float], object],
    steps: int = 33,
    t0: float = 0.0,
    t1: float = 1.0,
    samples=None,
    gap_tolerance: float = GAP_TOLERANCE,
    max_refinement: int = MAX_REFINEMENT,
) -> FlowDiagram:
    """Track the spectrum of t -> path(t) and count crossings of Re = 0.

    Eigenvalues at consecutive samples are matched by minimal total distance;
    intervals where the matching is ambiguous are bisected up to
    `max_refinement` times. `samples` overrides the uniform grid (they must
    be increasing and include both endpoints).
    """
    grid = np.linspace(t0, t1, steps) if samples is None else np.asarray(samples, dtype=float)
    cache: dict[float, np.ndarray] = {}

    def spectrum(t):
        if t not in cache:
            cache[t] = schur_eigenvalues(_array(path(t)))
        return cache[t]

    ts = [grid[0]]
    tracks = [spectrum(grid[0])]

    def advance(ta, tb, depth):
        prev = tracks[-1]
        matched, disp = _match(prev, spectrum(tb))
        if _ambiguous(prev, matched, disp):
            if depth >= max_refinement:
                raise AmbiguousTrackingError(f"could not resolve eigenvalue tracking on [{ta}, {tb}]")
            tm = 0.5 * (ta + tb)
            advance(ta, tm, depth + 1)
            advance(tm, tb, depth + 1)
            return
        ts.append(tb)
        tracks.append(matched)

    for ta, tb in zip(grid[:-1], grid[1:]):
        advance(ta, tb, 0)

    T = np.array(tracks)
    crossings = []
    re = T.real
    for k in range(T.shape[1]):
        # samples that land exactly on the axis are skipped; the crossing is
        # placed between the neighbouring nonzero samples
        idx = np.flatnonzero(re[:, k] != 0)
        for i, j in zip(idx[:-1], idx[1:]):
            a, b = re[i, k], re[j, k]
            if (a > 0) != (b > 0):
                tc = ts[i] + (ts[j] - ts[i]) * a / (a - b)
                crossings.append((float(tc), 1 if b > a else -1))
    crossings.sort()

    def endpoint_sig(ev, M):
        gap = np.abs(ev.real).min()
        if gap <= gap_tolerance * _scale(M):
            return None
        return int(np.count_nonzero(ev.real > 0) - np.count_nonzero(ev.real < 0))

    diagram = FlowDiagram(
        np.array(ts),
        T,
        crossings,
        endpoint_sig(T[0], _array(path(ts[0]))),
        endpoint_sig(T[-1], _array(path(ts[-1]))),
    )
    if not diagram.consistent:
        log.warning(
            "spectral flow %d disagrees with endpoint signatures %s -> %s",
            diagram.net_flow, diagram.start_signature, diagram.end_signature,
        )
    return diagram


def half_signature(L, method: Method | str = Method.EIGENCOUNT, **kwargs) -> SignatureReport:
    method = Method(method)
    if method is Method.EIGENCOUNT:
        return sig_eigencount(L, **kwargs)
    if method is Method.ROUTH_HURWITZ:
        return sig_routh_hurwitz(L, **kwargs)
    raise ValueError("spectral-flow signatures need a path; use spectral_flow")
