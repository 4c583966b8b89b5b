"""Probe-grid evaluation of localizer signatures and gaps.

The flow method needs a path from a probe of known signature. Far from the
sample, kappa |D0| exceeds ||H|| on every retained site; the localizer is then
a perturbation of the hermitian, traceless-signature matrix kappa [[0, D0^*],
[D0, 0]] that is too small to reach the imaginary axis, so Sig = 0 there.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .errors import NumericalError
from .localizer import assemble_even_localizer, spectral_norm, window
from .model import LatticeGeometry
from .signature import GAP_TOLERANCE, Method, _scale, half_signature, localizer_line_gap, spectral_flow

log = logging.getLogger(__name__)

# probe spacing along flow paths inside and outside the sample
FLOW_STEP = 0.25
FAR_STEP = 2.0


@dataclass(frozen=True)
class ProbeResult:
    x: float
    y: float
    half_signature: float | None
    line_gap: float
    ms: float
    residual: float = 0.0

    @property
    def gap_closed(self) -> bool:
        return self.half_signature is None


@dataclass(frozen=True, eq=False)
class MapResult:
    """Row-major probe grid; half_signature is NaN where the gap closed."""

    xs: np.ndarray
    ys: np.ndarray
    half_signature: np.ndarray
    line_gap: np.ndarray
    ms: np.ndarray
    method: Method

    def rows(self):
        for j, y in enumerate(self.ys):
            for i, x in enumerate(self.xs):
                yield float(x), float(y), self.half_signature[j, i], self.line_gap[j, i], self.ms[j, i]

    @property
    def closed_count(self) -> int:
        return int(np.isnan(self.half_signature).sum())


def evaluate_probe(H, geom: LatticeGeometry, kappa: float, probe, rho=None, method=Method.EIGENCOUNT, **kwargs) -> ProbeResult:
    """Half-signature and gap of L_kappa,rho(H) at one probe point."""
    method = Method(method)
    if method is Method.SPECTRAL_FLOW:
        return flow_probe(H, geom, kappa, probe, rho, **kwargs)
    start = time.perf_counter()
    L = assemble_even_localizer(H, geom, kappa, probe, rho)
    rep = half_signature(L, method, **kwargs)
    gap = rep.line_gap
    if method is Method.ROUTH_HURWITZ:
        # the integral produces no eigenvalues; the gap costs one extra Schur
        gap = localizer_line_gap(L)
    ms = 1e3 * (time.perf_counter() - start)
    return ProbeResult(float(probe[0]), float(probe[1]), rep.half_signature, float(gap), ms, rep.residual)


def _block_norm(H, keep) -> float:
    Hc = H if sp.issparse(H) else sp.csr_matrix(H)
    return spectral_norm(sp.csr_matrix(Hc)[keep][:, keep])


def reference_distance(H, geom: LatticeGeometry, kappa: float, rho=None, center=(0.0, 0.0)) -> float:
    """Distance from `center` beyond which Sig(L_kappa,rho) = 0 is certified.

    At least diameter + 2 rho of the retained patch, and large enough that
    kappa times the distance to the nearest retained site exceeds ||H||.
    """
    pos = geom.orbital_positions()
    keep = window(pos, center, rho)
    reach = float(np.hypot(*(pos[keep] - np.asarray(center)).T).max())
    norm = _block_norm(H, keep)
    conventional = 2 * reach + (2 * rho if rho is not None else 0.0)
    certified = reach + 1.05 * norm / kappa + 1.0
    return max(conventional, certified)


def _path_samples(a: float, b: float, inner: float) -> np.ndarray:
    """Increasing coordinates from a to b: FLOW_STEP inside |u| <= inner,
    FAR_STEP outside."""
    lo, hi = min(a, b), max(a, b)
    pts = [np.arange(lo, hi, FAR_STEP), np.arange(max(lo, -inner), min(hi, inner), FLOW_STEP), [lo, hi]]
    u = np.unique(np.round(np.concatenate(pts), 12))
    return u[(u >= lo) & (u <= hi)]


def flow_row(H, geom: LatticeGeometry, kappa: float, y: float, xs, rho=None, window_center=None, reference=None):
    """Half-signatures along the line through y at the abscissae xs.

    One tracked path runs from a certified-trivial reference at large +x down
    to min(xs); each probe's half-signature is minus the flow between it and
    the reference. The window (if any) stays at `window_center`, default the
    origin, so the matrix size is constant along the path.
    """
    xs = np.asarray(xs, dtype=float)
    center = (0.0, 0.0) if window_center is None else tuple(window_center)
    if reference is None:
        reference = center[0] + reference_distance(H, geom, kappa, rho, center)
    reference = max(reference, xs.max())
    inner = geom.radius() + 2.0
    u = np.unique(np.concatenate([_path_samples(xs.min(), reference, inner), xs]))
    # t runs from the reference (t = 0) down to min(xs) (t = 1)
    span = reference - xs.min()
    if span == 0:
        span = 1.0
    ts = (reference - u[::-1]) / span

    def path(t):
        return assemble_even_localizer(H, geom, kappa, (reference - t * span, y), rho, window_center=center).matrix

    start = time.perf_counter()
    diagram = spectral_flow(path, samples=ts)
    elapsed = 1e3 * (time.perf_counter() - start) / max(len(xs), 1)
    if diagram.start_signature != 0:
        raise NumericalError(f"reference probe at x = {reference:.3g} is not trivial (Sig = {diagram.start_signature})")
    results = []
    for x in xs:
        t = (reference - x) / span
        k = int(np.argmin(np.abs(diagram.samples - t)))
        ev = diagram.tracks[k]
        gap = float(np.abs(ev.real).min())
        scale = _scale(path(diagram.samples[k]))
        sig = None
        if gap > GAP_TOLERANCE * scale:
            # crossings at parameters <= t have happened by the time we reach x
            sig = diagram.net_flow - diagram.flow_after(t)
        results.append(ProbeResult(float(x), float(y), sig, gap, elapsed))
    return diagram, results


def flow_probe(H, geom, kappa, probe, rho=None) -> ProbeResult:
    """Flow-based half-signature at one probe, with the window held at the probe."""
    window_center = tuple(probe) if rho is not None else None
    _, res = flow_row(H, geom, kappa, float(probe[1]), [float(probe[0])], rho, window_center=window_center)
    return res[0]


def index_map(H, geom, kappa, xs, ys, rho=None, method=Method.EIGENCOUNT, threads: int | None = None, **kwargs) -> MapResult:
    """Half-signature and gap on the grid xs x ys, evaluated row-major.

    With the flow method and no truncation each row is one path; otherwise
    each probe is independent. Work is spread over a thread pool.
    """
    method = Method(method)
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    shape = (len(ys), len(xs))
    sig = np.full(shape, np.nan)
    gap = np.full(shape, np.nan)
    ms = np.zeros(shape)

    def store(j, i, r: ProbeResult):
        sig[j, i] = np.nan if r.half_signature is None else r.half_signature
        gap[j, i] = r.line_gap
        ms[j, i] = r.ms

    with ThreadPoolExecutor(max_workers=threads) as pool:
        if method is Method.SPECTRAL_FLOW and rho is None:
            jobs = {pool.submit(flow_row, H, geom, kappa, y, xs): j for j, y in enumerate(ys)}
            for fut, j in jobs.items():
                for i, r in enumerate(fut.result()[1]):
                    store(j, i, r)
        else:
            jobs = {
                pool.submit(evaluate_probe, H, geom, kappa, (x, y), rho, method, **kwargs): (j, i)
                for j, y in enumerate(ys)
                for i, x in enumerate(xs)
            }
            for fut, (j, i) in jobs.items():
                store(j, i, fut.result())
    return MapResult(xs, ys, sig, gap, ms, method)


def gap_map(H, geom, kappa, xs, ys, rho=None, threads: int | None = None) -> MapResult:
    """Localizer gap only; skips the signature bookkeeping."""
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    shape = (len(ys), len(xs))
    gap = np.full(shape, np.nan)
    ms = np.zeros(shape)

    def one(x, y):
        start = time.perf_counter()
        g = localizer_line_gap(assemble_even_localizer(H, geom, kappa, (x, y), rho))
        return g, 1e3 * (time.perf_counter() - start)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        jobs = {pool.submit(one, x, y): (j, i) for j, y in enumerate(ys) for i, x in enumerate(xs)}
        for fut, (j, i) in jobs.items():
            gap[j, i], ms[j, i] = fut.result()
    return MapResult(xs, ys, np.full(shape, np.nan), gap, ms, Method.EIGENCOUNT)


def ldos(H, energy: float, eta: float) -> np.ndarray:
    """LDOS_n(E) = -(1/pi) Im [(E + i eta - H)^-1]_nn from one LU factorization."""
    Hd = H.toarray() if sp.issparse(H) else np.asarray(H, dtype=complex)
    z = energy + 1j * eta
    ev = la.eigvals(Hd)
    if np.abs(ev - z).min() < 1e-12:
        raise NumericalError(f"E + i eta = {z} is an eigenvalue; perturb eta")
    lu = la.lu_factor(z * np.eye(len(Hd)) - Hd)
    G = la.lu_solve(lu, np.eye(len(Hd), dtype=complex))
    return -np.diag(G).imag / np.pi
