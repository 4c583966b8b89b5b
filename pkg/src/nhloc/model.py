"""Finite lattices and non-hermitian tight-binding Hamiltonians.

Honeycomb conventions: nearest-neighbour distance 1, a hexagon centred at the
origin with an A-site at (1, 0). Next-nearest-neighbour hops pick up the phase
+phi when they circle a hexagon counter-clockwise (and -phi otherwise); flipping
this convention flips the sign of every index computed downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .errors import ConfigError, GapClosedError, ValidationError

SQRT3 = math.sqrt(3.0)

# sublattice tags
A, B = 0, 1

# region tags of the heterostructure
CORE, SHELL, LOSSY_SHELL = 0, 1, 2

PRUNE_TOL = 1e-15

_LATTICE_VECTORS = np.array([[1.5, SQRT3 / 2], [1.5, -SQRT3 / 2]])
_BASIS = np.array([[1.0, 0.0], [0.5, SQRT3 / 2]])
# nearest-neighbour vectors leaving an A-site; B-sites use the negatives
_NN_FROM_A = np.array([[-0.5, SQRT3 / 2], [-0.5, -SQRT3 / 2], [1.0, 0.0]])


@dataclass(frozen=True)
class RegionParams:
    """Haldane parameters of one region: on-site M, hoppings t and t_c,
    flux phase phi and absorption mu."""

    M: float = 0.0
    t: float = 1.0
    t_c: float = 0.0
    phi: float = 0.0
    mu: float = 0.0

    def __post_init__(self):
        if self.t < 0 or self.t_c < 0 or self.mu < 0:
            raise ValidationError(f"t, t_c and mu must be non-negative: {self}")
        if not (-math.pi < self.phi <= math.pi):
            raise ValidationError(f"phi must lie in (-pi, pi], got {self.phi}")


@dataclass(frozen=True)
class HeterostructureSpec:
    core_radius: float
    shell_radius: float
    outer_radius: float
    core: RegionParams = field(default_factory=RegionParams)
    shell: RegionParams = field(default_factory=RegionParams)
    lossy_shell: RegionParams = field(default_factory=RegionParams)

    def __post_init__(self):
        radii = (self.core_radius, self.shell_radius, self.outer_radius)
        if min(radii) <= 0:
            raise ValidationError(f"radii must be positive, got {radii}")
        if not (self.core_radius < self.shell_radius < self.outer_radius):
            raise ValidationError(f"radii must be strictly nested, got {radii}")

    def region_of(self, radius):
        """Region tag(s) for radial distance(s) from the origin."""
        r = np.asarray(radius)
        tags = np.where(r <= self.core_radius, CORE, np.where(r <= self.shell_radius, SHELL, LOSSY_SHELL))
        return tags if tags.ndim else int(tags)

    def params_by_region(self) -> dict[int, RegionParams]:
        return {CORE: self.core, SHELL: self.shell, LOSSY_SHELL: self.lossy_shell}


@dataclass(frozen=True, eq=False)
class LatticeGeometry:
    """Ordered sites with 2D positions, sublattice and region tags.

    Hilbert-space index of (site n, orbital a) is n * orbital_count + a.
    """

    positions: np.ndarray
    sublattice: np.ndarray
    region: np.ndarray
    orbital_count: int = 1
    region_bounds: tuple = ()

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise ValidationError("positions must have shape (n, 2)")
        n = len(pos)
        if len(self.sublattice) != n or len(self.region) != n:
            raise ValidationError("sublattice/region tags must match the site count")
        if self.orbital_count < 1:
            raise ValidationError("orbital_count must be positive")
        if n > 1:
            d, _ = cKDTree(pos).query(pos, k=2)
            if d[:, 1].min() <= 1e-9:
                raise ValidationError("site positions must be pairwise distinct")
        for name, arr, dtype in (("positions", pos, float), ("sublattice", self.sublattice, int), ("region", self.region, int)):
            arr = np.array(arr, dtype=dtype)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_sites(self) -> int:
        return len(self.positions)

    @property
    def dimension(self) -> int:
        return self.n_sites * self.orbital_count

    def orbital_positions(self) -> np.ndarray:
        """Positions repeated per orbital, aligned with Hilbert-space indices."""
        return np.repeat(self.positions, self.orbital_count, axis=0)

    def radius(self) -> float:
        return float(np.hypot(*self.positions.T).max()) if self.n_sites else 0.0

    def region_at(self, points) -> np.ndarray:
        """Region tags of arbitrary points, from the concentric `region_bounds`."""
        r = np.hypot(*np.atleast_2d(points).T)
        return np.searchsorted(np.asarray(self.region_bounds), r - 1e-12)


def tidy(matrix) -> sp.csr_matrix:
    """Canonical CSR form: complex128, summed duplicates, sorted indices,
    entries below PRUNE_TOL dropped."""
    m = sp.csr_matrix(matrix, dtype=np.complex128)
    m.sum_duplicates()
    m.data[np.abs(m.data) < PRUNE_TOL] = 0
    m.eliminate_zeros()
    m.sort_indices()
    return m


def _sorted_geometry(pos, sub, region, orbital_count=1, region_bounds=()) -> LatticeGeometry:
    key = np.round(pos, 9)
    order = np.lexsort((sub, key[:, 1], key[:, 0]))
    return LatticeGeometry(pos[order], sub[order], region[order], orbital_count, region_bounds)


def honeycomb_points(radius: float, center=(0.0, 0.0)):
    """All honeycomb sites within `radius` of `center` as (positions, sublattice)."""
    n = int(math.ceil(radius / 1.5)) + 2
    ij = np.array([(i, j) for i in range(-2 * n, 2 * n + 1) for j in range(-2 * n, 2 * n + 1)], dtype=float)
    origins = ij @ _LATTICE_VECTORS
    pos = np.concatenate([origins + _BASIS[A], origins + _BASIS[B]])
    sub = np.concatenate([np.full(len(origins), A), np.full(len(origins), B)])
    keep = np.hypot(*(pos - np.asarray(center)).T) <= radius + 1e-9
    return pos[keep], sub[keep]


def build_honeycomb(spec: HeterostructureSpec) -> LatticeGeometry:
    """Honeycomb flake of radius spec.outer_radius with radial region tags."""
    pos, sub = honeycomb_points(spec.outer_radius)
    bounds = (spec.core_radius, spec.shell_radius, spec.outer_radius)
    return _sorted_geometry(pos, sub, spec.region_of(np.hypot(*pos.T)), region_bounds=bounds)


def honeycomb_bonds(geom: LatticeGeometry):
    """Nearest and next-nearest neighbour pairs of a honeycomb geometry.

    Returns (nn, nnn, chirality) where nn and nnn are (k, 2) index arrays with
    i < j, and chirality[k] = +1 if the hop i -> j of the k-th NNN pair circles
    its hexagon counter-clockwise.
    """
    pos = geom.positions
    tree = cKDTree(pos)
    nn = tree.query_pairs(1.0 + 1e-6, output_type="ndarray")
    pairs = tree.query_pairs(SQRT3 + 1e-6, output_type="ndarray")
    if len(pairs) == 0:
        return nn.reshape(-1, 2), pairs.reshape(-1, 2), np.zeros(0, dtype=int)
    dist = np.hypot(*(pos[pairs[:, 1]] - pos[pairs[:, 0]]).T)
    nnn = pairs[dist > 1.5]
    nn = nn[np.hypot(*(pos[nn[:, 1]] - pos[nn[:, 0]]).T) > 0.5]
    d = pos[nnn[:, 1]] - pos[nnn[:, 0]]
    sign = np.where(geom.sublattice[nnn[:, 0]] == A, 1.0, -1.0)[:, None, None]
    # first leg i -> k (k the shared neighbour), second leg k -> j
    first = sign * _NN_FROM_A[None, :, :]
    second = d[:, None, :] - first
    hit = np.abs(np.hypot(second[..., 0], second[..., 1]) - 1.0) < 1e-6
    if not np.all(hit.sum(axis=1) == 1):
        raise ValidationError("geometry is not a honeycomb lattice with unit bond length")
    leg1 = first[hit]
    leg2 = second[hit]
    chirality = np.sign(leg1[:, 0] * leg2[:, 1] - leg1[:, 1] * leg2[:, 0]).astype(int)
    return nn, nnn, chirality


def _params_for(params_by_region: Mapping[int, RegionParams], tags):
    try:
        return [params_by_region[int(tag)] for tag in tags]
    except KeyError as exc:
        raise ConfigError(f"no parameters for region {exc.args[0]}") from None


def assemble_haldane(geom: LatticeGeometry, params_by_region: Mapping[int, RegionParams]) -> sp.csr_matrix:
    """Lossy Haldane Hamiltonian on a honeycomb geometry.

    On-site: M - i mu on A-sites and -M - i mu on B-sites (absorption on both
    sublattices). Hoppings use the parameters of the region containing the bond
    midpoint. Geometries without `region_bounds` fall back to the smaller
    endpoint tag for bonds joining two regions.
    """
    if geom.orbital_count != 1:
        raise ValidationError("Haldane assembly expects one orbital per site")
    missing = set(np.unique(geom.region).tolist()) - set(params_by_region)
    if missing:
        raise ConfigError(f"no parameters for region(s) {sorted(missing)}")
    pos = geom.positions
    n = geom.n_sites
    rows, cols, vals = [], [], []

    site_params = _params_for(params_by_region, geom.region)
    stagger = np.where(geom.sublattice == A, 1.0, -1.0)
    onsite = np.array([s * p.M - 1j * p.mu for s, p in zip(stagger, site_params)])
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(onsite)

    nn, nnn, chirality = honeycomb_bonds(geom)

    def midpoint_params(pairs):
        if geom.region_bounds:
            tags = geom.region_at(0.5 * (pos[pairs[:, 0]] + pos[pairs[:, 1]]))
        else:
            tags = np.minimum(geom.region[pairs[:, 0]], geom.region[pairs[:, 1]])
        return _params_for(params_by_region, tags)

    if len(nn):
        t = np.array([p.t for p in midpoint_params(nn)])
        rows += [nn[:, 0], nn[:, 1]]
        cols += [nn[:, 1], nn[:, 0]]
        vals += [-t.astype(complex), -t.astype(complex)]
    if len(nnn):
        ps = midpoint_params(nnn)
        t_c = np.array([p.t_c for p in ps])
        phi = np.array([p.phi for p in ps]) * chirality
        hop = -t_c * np.exp(1j * phi)  # amplitude of |j><i| for the hop i -> j
        rows += [nnn[:, 1], nnn[:, 0]]
        cols += [nnn[:, 0], nnn[:, 1]]
        vals += [hop, np.conj(hop)]

    H = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    return tidy(H)


def heterostructure(spec: HeterostructureSpec):
    """Geometry and Hamiltonian of a three-ring heterostructure."""
    geom = build_honeycomb(spec)
    H = assemble_haldane(geom, spec.params_by_region())
    return geom, H


def _dense(H) -> np.ndarray:
    return H.toarray() if sp.issparse(H) else np.asarray(H, dtype=complex)


def _sigma_min(Hd: np.ndarray, s: float) -> float:
    return float(np.linalg.svd(Hd + 1j * s * np.eye(len(Hd)), compute_uv=False)[-1])


def estimate_line_gap(H, s_range: float | None = None, grid_points: int = 129) -> float:
    """Upper estimate of g = inf_s sigma_min(H + i s).

    Grid search over [-s_range, s_range] followed by golden-section
    refinement around the best node. Raises GapClosedError below 1e-12.
    """
    if grid_points < 3:
        raise ValidationError("grid_points must be at least 3")
    Hd = _dense(H)
    if s_range is None:
        # max(|H|_1, |H|_inf) bounds the spectral norm from above
        s_range = max(np.abs(Hd).sum(axis=0).max(), np.abs(Hd).sum(axis=1).max(), 1e-300)
    grid = np.linspace(-s_range, s_range, grid_points)
    values = np.array([_sigma_min(Hd, s) for s in grid])
    k = int(np.argmin(values))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid_points - 1)]
    s_best, g = grid[k], values[k]

    invphi = (math.sqrt(5) - 1) / 2
    c, d = hi - invphi * (hi - lo), lo + invphi * (hi - lo)
    fc, fd = _sigma_min(Hd, c), _sigma_min(Hd, d)
    while hi - lo > 1e-10 * max(1.0, s_range):
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = _sigma_min(Hd, c)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = _sigma_min(Hd, d)
    for s, v in ((c, fc), (d, fd)):
        if v < g:
            s_best, g = s, v
    if g < 1e-12:
        raise GapClosedError(f"no line-gap detected (sigma_min = {g:.3e} at s = {s_best:.6g})")
    return float(g)


@dataclass(frozen=True, eq=False)
class ChiralChain:
    H: sp.csr_matrix
    J: sp.csr_matrix
    geometry: LatticeGeometry


def build_chiral_chain(
    n_cells: int,
    intra: complex,
    inter: complex,
    disorder_amplitude: float = 0.0,
    seed: int = 0,
    periodic: bool = True,
) -> ChiralChain:
    """Two-orbital chiral chain with H = [[0, B], [A, 0]] in the J-grading.

    Orbital a of cell n couples to orbital b of cell n with `intra` and to
    orbital b of cell n - 1 with `inter`. The coupling is symmetric rather
    than hermitian (B = A^T), so complex amplitudes make H non-hermitian.
    Disorder multiplies each bond by (1 + w) with w uniform in
    [-disorder_amplitude, disorder_amplitude]. Both orbitals of a cell sit at
    position (n, 0). `periodic` closes the ring so that no end modes close
    the line-gap.
    """
    if n_cells < 2:
        raise ValidationError("a chain needs at least two cells")
    rng = np.random.default_rng(seed)
    w_intra = 1 + disorder_amplitude * rng.uniform(-1, 1, n_cells)
    w_inter = 1 + disorder_amplitude * rng.uniform(-1, 1, n_cells)
    a = 2 * np.arange(n_cells)
    b = a + 1
    rows, cols, vals = [], [], []
    for n in range(n_cells):
        amp = intra * w_intra[n]
        rows += [b[n], a[n]]
        cols += [a[n], b[n]]
        vals += [amp, amp]
    last = n_cells if periodic else n_cells - 1
    for n in range(last):
        m = (n + 1) % n_cells
        amp = inter * w_inter[n]
        rows += [b[n], a[m]]
        cols += [a[m], b[n]]
        vals += [amp, amp]
    dim = 2 * n_cells
    H = tidy(sp.coo_matrix((np.asarray(vals, dtype=complex), (rows, cols)), shape=(dim, dim)))
    J = tidy(sp.diags(np.tile([1.0, -1.0], n_cells)))
    pos = np.column_stack([np.arange(n_cells, dtype=float), np.zeros(n_cells)])
    geom = LatticeGeometry(pos, np.full(n_cells, A), np.zeros(n_cells, dtype=int), orbital_count=2)
    return ChiralChain(H, J, geom)
