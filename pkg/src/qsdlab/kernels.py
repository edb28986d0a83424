"""Absorbed Markov kernels on a compact interval, and their discretization.

A kernel is described declaratively by a :class:`KernelSpec` (density family +
parameters + reference measure + grid size) and realized as a
:class:`DiscreteOperator`: a quadrature grid together with the matrix

    matrix[i, j] = g(node_i, node_j) * weight_j

so that ``matrix @ f`` evaluates the one-step expectation of a grid function
and ``nu @ matrix`` pushes a measure (vector of node masses) one step forward.
Finite chains enter through the ``explicit_matrix`` family, whose matrix is
taken verbatim.

Escape nodes are grid points whose row mass vanishes: the chain started there
is absorbed in one step almost surely.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    AllNodesEscape,
    InvalidDomain,
    NegativeDensity,
    NotApplicable,
    RowSumExceedsOne,
)

# Absolute tolerance for deciding that a grid node sits exactly on a jump of
# an indicator density.  Node spacings in practice are >= 1e-5, so this is
# unambiguous while immune to linspace rounding.
JUMP_ATOL = 1e-9

ESCAPE_TOL_DEFAULT = 1e-12

CONTINUOUS_FAMILIES = ("affine_uniform", "cubic_uniform", "gaussian_shift", "tabulated")
ALL_FAMILIES = CONTINUOUS_FAMILIES + ("explicit_matrix",)


@dataclass(frozen=True)
class StateGrid:
    """Quadrature abscissae and weights for the reference measure on [lower, upper]."""

    lower: float
    upper: float
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if nodes.ndim != 1 or weights.shape != nodes.shape:
            raise InvalidDomain("nodes and weights must be 1-D and of equal length")
        if np.any(np.diff(nodes) <= 0):
            raise InvalidDomain("nodes must be strictly increasing")
        if nodes[0] < self.lower - 1e-12 or nodes[-1] > self.upper + 1e-12:
            raise InvalidDomain("nodes must lie inside [lower, upper]")
        if weights.min() < 0 or weights.sum() <= 0:
            raise InvalidDomain("weights must be nonnegative with positive total")

    @property
    def size(self):
        return self.nodes.size

    @property
    def step(self):
        """Mesh width; uniform for the built-in grids."""
        return float(np.diff(self.nodes).max())

    def cell_edges(self):
        """Bin edges at midpoints between nodes (used to bin MC samples)."""
        mid = 0.5 * (self.nodes[1:] + self.nodes[:-1])
        return np.concatenate([[self.lower], mid, [self.upper]])


@dataclass(frozen=True)
class KernelSpec:
    """Declarative description of an absorbed kernel P(x, dy) = g(x, y) rho(dy).

    Families
    --------
    affine_uniform   params a, b, noise_halfwidth : x -> a*x + b + U[-w, w]
    cubic_uniform    params noise_halfwidth       : x -> x**3 + U[-w, w]
    gaussian_shift   params sigma [, indicator_region] : density N(y; x, sigma^2)
    tabulated        params values (N x N row-major list) : g sampled on the grid
    explicit_matrix  params matrix [, labels]     : finite substochastic chain

    ``measure_scale`` scales the reference measure (lebesgue_scaled(c)); the
    kernel itself is unchanged because densities are divided by the same c.
    """

    domain: tuple
    family: str
    params: dict = field(default_factory=dict)
    grid_size: int = 201
    measure: str = "lebesgue"
    measure_scale: float = 1.0
    quadrature: str = "trapezoid"
    name: Optional[str] = None

    def __post_init__(self):
        if self.family not in ALL_FAMILIES:
            raise InvalidDomain(f"unknown density family {self.family!r}")
        if self.family != "explicit_matrix":
            lo, hi = self.domain
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
                raise InvalidDomain(f"domain must satisfy lower < upper, got {self.domain}")
            if self.grid_size < 2:
                raise InvalidDomain("grid_size must be >= 2")
        if self.measure not in ("lebesgue", "lebesgue_scaled"):
            raise InvalidDomain(f"unknown reference measure {self.measure!r}")
        if self.measure_scale <= 0:
            raise InvalidDomain("measure_scale must be positive")
        if self.quadrature not in ("trapezoid", "ulam"):
            raise InvalidDomain(f"unknown quadrature {self.quadrature!r}")

    @property
    def is_explicit(self):
        return self.family == "explicit_matrix"


@dataclass(frozen=True)
class EscapeSet:
    """Grid nodes whose one-step survival mass is (numerically) zero."""

    indices: frozenset
    tolerance: float
    nonescape_mass_positive: bool

    def __contains__(self, i):
        return i in self.indices


@dataclass(frozen=True)
class DiscreteOperator:
    """Finite-rank realization of the kernel on a quadrature grid.

    ``matrix @ f`` acts on grid functions; ``nu @ matrix`` acts on grid
    measures (the adjoint).  Immutable after construction.

    ``row_error`` is ``(order, constant)``: the row masses match the exact
    kernel masses within ``constant * step**order`` (order 0 means unknown).
    """

    grid: StateGrid
    matrix: np.ndarray
    escape: EscapeSet
    spec: KernelSpec
    row_error: tuple = (0, math.inf)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def size(self):
        return self.matrix.shape[0]

    def row_masses(self):
        return self.matrix.sum(axis=1)

    def nonescape_indices(self):
        return np.array(sorted(set(range(self.size)) - self.escape.indices), dtype=int)


# ---------------------------------------------------------------------------
# density evaluation


def _window_values(centers, nodes, lower, upper, halfwidth):
    """Sample the indicator of the moving window (c - w, c + w) at grid nodes.

    Interior nodes that sit exactly on a window edge get the mean of the two
    one-sided limits (1/2); at a domain endpoint only the limit taken from
    inside [lower, upper] exists and is used alone.  This keeps trapezoid row
    sums exact when edges align with nodes and makes rows whose window only
    touches the domain come out exactly zero.
    """
    c = np.asarray(centers, dtype=float)[:, None]
    y = np.asarray(nodes, dtype=float)[None, :]
    t = y - c
    inside = np.abs(t) < halfwidth - JUMP_ATOL
    at_left = np.abs(t + halfwidth) <= JUMP_ATOL
    at_right = np.abs(t - halfwidth) <= JUMP_ATOL
    has_below = y > lower + JUMP_ATOL
    has_above = y < upper - JUMP_ATOL
    n_sides = np.maximum(has_below.astype(float) + has_above.astype(float), 1.0)
    n_sides = np.broadcast_to(n_sides, t.shape)
    val = inside.astype(float)
    # one-sided limits of the open-window indicator: left edge (below, above)
    # = (0, 1); right edge = (1, 0)
    val = np.where(at_left, np.broadcast_to(has_above, t.shape) / n_sides, val)
    val = np.where(at_right, np.broadcast_to(has_below, t.shape) / n_sides, val)
    return val


def _map_centers(spec, x):
    x = np.asarray(x, dtype=float)
    p = spec.params
    if spec.family == "affine_uniform":
        return p["a"] * x + p["b"]
    if spec.family == "cubic_uniform":
        return x ** 3
    if spec.family == "gaussian_shift":
        return x
    raise NotApplicable(f"{spec.family} has no deterministic part")


def kernel_density(spec, x, y):
    """Evaluate g(x, y) for a continuous family on arrays of points.

    Returns a len(x) x len(y) array.  Densities are taken with respect to the
    (possibly scaled) reference measure of ``spec``.
    """
    if spec.is_explicit:
        raise NotApplicable("explicit_matrix has no pointwise density")
    lo, hi = spec.domain
    p = spec.params
    if spec.family in ("affine_uniform", "cubic_uniform"):
        w = float(p["noise_halfwidth"])
        if w <= 0:
            raise InvalidDomain("noise_halfwidth must be positive")
        vals = _window_values(_map_centers(spec, x), y, lo, hi, w) / (2 * w)
    elif spec.family == "gaussian_shift":
        sigma = float(p.get("sigma", 1.0))
        if sigma <= 0:
            raise InvalidDomain("sigma must be positive")
        t = (np.asarray(y, float)[None, :] - np.asarray(x, float)[:, None]) / sigma
        vals = np.exp(-0.5 * t * t) / (sigma * math.sqrt(2 * math.pi))
    elif spec.family == "tabulated":
        vals = np.asarray(p["values"], dtype=float)
        if vals.shape != (np.size(x), np.size(y)):
            raise InvalidDomain("tabulated values must match the grid shape")
    else:  # pragma: no cover
        raise NotApplicable(spec.family)
    if not np.all(np.isfinite(vals)):
        raise NegativeDensity("density evaluated to a non-finite value")
    if vals.min() < 0:
        raise NegativeDensity("density evaluated below zero")
    return vals / spec.measure_scale


def analytic_row_mass(spec, x):
    """Exact one-step survival mass P(x, M) for the closed-form families.

    Returns None for tabulated densities (quadrature is all we have).
    """
    lo, hi = spec.domain
    x = np.asarray(x, dtype=float)
    if spec.family in ("affine_uniform", "cubic_uniform"):
        w = float(spec.params["noise_halfwidth"])
        c = _map_centers(spec, x)
        overlap = np.minimum(hi, c + w) - np.maximum(lo, c - w)
        return np.maximum(overlap, 0.0) / (2 * w)
    if spec.family == "gaussian_shift":
        from scipy.special import ndtr

        sigma = float(spec.params.get("sigma", 1.0))
        return ndtr((hi - x) / sigma) - ndtr((lo - x) / sigma)
    return None


def _quadrature_grid(spec):
    lo, hi = spec.domain
    n = spec.grid_size
    scale = spec.measure_scale
    if spec.quadrature == "trapezoid":
        nodes = np.linspace(lo, hi, n)
        h = (hi - lo) / (n - 1)
        weights = np.full(n, h)
        weights[0] = weights[-1] = h / 2
    else:  # ulam: one cell per node, node at the cell center
        h = (hi - lo) / n
        nodes = lo + h * (np.arange(n) + 0.5)
        weights = np.full(n, h)
    return StateGrid(lo, hi, nodes, weights * scale)


def _ulam_average_density(spec, grid, sub=4):
    """Cell-averaged density: mean of g over sub x sub points per cell pair.

    Point sampling at cell centers loses partial-cell overlaps of narrow
    window tails (breaking reachability near the domain corners), so the
    Ulam variant averages the density over each cell in both arguments.
    """
    lo, hi = spec.domain
    n = spec.grid_size
    h = (hi - lo) / n
    offsets = (np.arange(sub) + 0.5) / sub * h - h / 2
    pts = (grid.nodes[:, None] + offsets[None, :]).ravel()
    dens = kernel_density(spec, pts, pts)
    return dens.reshape(n, sub, n, sub).mean(axis=(1, 3))


def _row_error_bound(spec, grid):
    h = grid.step
    lo, hi = spec.domain
    if spec.quadrature == "ulam":
        return (0, math.inf)  # no pointwise claim for cell averages
    if spec.family == "affine_uniform":
        # window edges either align with nodes or clip at the domain; the
        # half-value rule then makes the trapezoid row sums exact
        return (2, 0.0)
    if spec.family == "cubic_uniform":
        w = float(spec.params["noise_halfwidth"])
        return (1, 1.0 / (2 * w))  # two jumps between nodes, height 1/(2w)
    if spec.family == "gaussian_shift":
        sigma = float(spec.params.get("sigma", 1.0))
        peak_dd = 1.0 / (sigma ** 3 * math.sqrt(2 * math.pi))
        return (2, (hi - lo) * peak_dd / 12.0)
    return (0, math.inf)


def build_operator(spec, escape_tol=ESCAPE_TOL_DEFAULT):
    """Realize a KernelSpec as a DiscreteOperator.

    For explicit matrices the matrix is passed through verbatim with nodes
    0..n-1 and unit weights; otherwise the density is sampled on the
    quadrature grid and multiplied by the weights column-wise.
    """
    if spec.is_explicit:
        q = np.asarray(spec.params["matrix"], dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise InvalidDomain("explicit matrix must be square")
        if q.min() < 0:
            raise NegativeDensity("explicit matrix has negative entries")
        rows = q.sum(axis=1)
        if rows.max() > 1 + 1e-12:
            raise RowSumExceedsOne(f"row sum {rows.max()} exceeds one")
        n = q.shape[0]
        grid = StateGrid(0.0, max(n - 1, 1), np.arange(n, dtype=float), np.ones(n))
        matrix = q
        row_error = (2, 0.0)
    else:
        grid = _quadrature_grid(spec)
        if spec.quadrature == "ulam" and spec.family != "tabulated":
            dens = _ulam_average_density(spec, grid)
        else:
            dens = kernel_density(spec, grid.nodes, grid.nodes)
        matrix = dens * grid.weights[None, :]
        row_error = _row_error_bound(spec, grid)
    op = DiscreteOperator(grid=grid, matrix=matrix, escape=_detect(matrix, escape_tol),
                          spec=spec, row_error=row_error)
    return op


def _detect(matrix, tol):
    rows = matrix.sum(axis=1)
    idx = frozenset(int(i) for i in np.flatnonzero(rows <= tol))
    return EscapeSet(indices=idx, tolerance=tol,
                     nonescape_mass_positive=len(idx) < len(rows))


def detect_escape_set(op, tol=ESCAPE_TOL_DEFAULT):
    """Flag nodes whose row mass is at most ``tol``.

    Raises AllNodesEscape in the degenerate case where every node is flagged
    (everything is absorbed within two steps and there is nothing to study).
    """
    if tol <= 0:
        raise InvalidDomain("tol must be positive")
    es = _detect(op.matrix, tol)
    if not es.nonescape_mass_positive:
        raise AllNodesEscape("every row mass is below tolerance")
    return es


# ---------------------------------------------------------------------------
# Hypothesis audits


@dataclass(frozen=True)
class ModulusReport:
    """Sampled continuity modulus of x -> g(x, .) in the L1(rho) norm."""

    deltas: np.ndarray
    sup_distances: np.ndarray
    probes: int
    grid_step: float
    verdict: str  # PASS | FAIL

    def table(self):
        return list(zip(self.deltas.tolist(), self.sup_distances.tolist()))


def check_h1_modulus(spec, probes=64, deltas=None):
    """Probe the uniform L1 continuity of the density in its first argument.

    For a ladder of separations delta, reports the largest discretized
    L1 distance between g(x, .) and g(z, .) over probed pairs with
    |x - z| <= delta.  A finite probe set can only sample the modulus, so the
    report records the probe count and grid step rather than claiming proof;
    the verdict is PASS when the sampled modulus decreases to the grid floor.
    """
    if spec.is_explicit:
        raise NotApplicable("modulus audit applies to density families only")
    if probes < 2:
        raise InvalidDomain("probes must be >= 2")
    lo, hi = spec.domain
    grid = _quadrature_grid(spec)
    h = grid.step
    if deltas is None:
        top = (hi - lo) / 8
        deltas = [top / 2 ** k for k in range(6)]
        deltas = [d for d in deltas if d >= h / 2] or [h]
    deltas = np.asarray(sorted(deltas, reverse=True), dtype=float)

    xs = np.linspace(lo, hi, probes)
    gx = kernel_density(spec, xs, grid.nodes)
    sups = []
    for d in deltas:
        zs = np.clip(xs + d, lo, hi)
        gz = kernel_density(spec, zs, grid.nodes)
        dist = np.abs(gx - gz) @ grid.weights
        sups.append(float(dist.max()))
    sups = np.asarray(sups)

    nonincreasing = bool(np.all(sups[1:] <= sups[:-1] * 1.05 + 1e-15))
    floor = 4 * h * max(float(gx.max()), 1.0)
    shrinks = sups[-1] <= max(0.5 * sups[0], floor)
    verdict = "PASS" if (nonincreasing and shrinks) else "FAIL"
    return ModulusReport(deltas=deltas, sup_distances=sups, probes=probes,
                         grid_step=h, verdict=verdict)


@dataclass(frozen=True)
class ReachabilityReport:
    """Directed-graph audit of irreducibility on the non-escape nodes."""

    n_nodes: int
    escape_indices: tuple
    strongly_connected: bool
    n_components: int
    graph_period: int
    all_nodes_reach_all: bool
    nonescape_mass_positive: bool

    @property
    def verdict(self):
        return "PASS" if (self.strongly_connected and self.nonescape_mass_positive) else "FAIL"


def _transitive_closure(adj):
    """Boolean reachability in >= 1 steps via repeated squaring."""
    n = adj.shape[0]
    reach = adj.astype(np.float32)
    steps = 1
    while steps < n:
        reach = np.minimum(reach + reach @ reach, 1.0)
        steps *= 2
    return reach > 0


def _graph_period(adj):
    """gcd of cycle lengths of a strongly connected digraph (BFS levels)."""
    n = adj.shape[0]
    level = np.full(n, -1)
    level[0] = 0
    frontier = [0]
    g = 0
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.flatnonzero(adj[u]):
                if level[v] < 0:
                    level[v] = level[u] + 1
                    nxt.append(int(v))
                else:
                    g = math.gcd(g, level[u] + 1 - level[v])
        frontier = nxt
    return abs(g) if g != 0 else 0


def check_h2_reachability(op):
    """Audit reachability of every node from every node among non-escape nodes.

    Edges are entries of the discretized kernel above the escape tolerance.
    Reports the number of strongly connected components and, for a single
    communicating class, its graph period.
    """
    keep = op.nonescape_indices()
    if keep.size == 0:
        raise AllNodesEscape("no non-escape nodes")
    sub = op.matrix[np.ix_(keep, keep)]
    adj = sub > op.escape.tolerance
    reach = _transitive_closure(adj)
    mutual = reach & reach.T
    # strongly connected components as equivalence classes of mutual reach
    unseen = np.ones(len(keep), dtype=bool)
    n_comp = 0
    while unseen.any():
        i = int(np.flatnonzero(unseen)[0])
        comp = mutual[i] | (np.arange(len(keep)) == i)
        unseen &= ~comp
        n_comp += 1
    connected = n_comp == 1 and bool(reach.all())
    period = _graph_period(adj) if connected else 0
    return ReachabilityReport(
        n_nodes=op.size,
        escape_indices=tuple(sorted(op.escape.indices)),
        strongly_connected=connected,
        n_components=n_comp,
        graph_period=period,
        all_nodes_reach_all=bool(reach.all()),
        nonescape_mass_positive=op.escape.nonescape_mass_positive,
    )
