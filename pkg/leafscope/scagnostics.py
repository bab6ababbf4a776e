# Copyright 2023, 2024 The leafscope Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""
Scagnostics

Scatterplot diagnostics of the contour treated as a 2-D point cloud:

    normalize -> hexagon binning -> MST -> outlier pruning
        -> MST, convex hull and alpha hull of the survivors
        -> outlying, skewed, clumpy, sparse, striated, convex,
           skinny, stringy, monotonic

The same routine runs on the Cartesian (x, y) contour and on its polar
(theta, r) samples. The polar extreme counts and the Cartesian x/y
correlation complete the contour features.
"""
import logging
import math
from collections import Counter
from typing import Optional, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import Delaunay, QhullError
from scipy.spatial.distance import pdist, squareform
from scipy.stats import spearmanr

from leafscope.contour import as_points, convex_hull
from leafscope.models import (
    AllOutliers,
    AlphaHull,
    DegenerateAxis,
    DegenerateHull,
    GeometricGraph,
    PointSet2D,
    PolarContour,
    ScagContext,
    ScagnosticMeasures,
    TooFewPoints,
)

logger = logging.getLogger(__name__)

STRIATION_COSINE = -0.75
EXTREME_BAND = 0.01
CONSTANT_RADIUS = 1e-9
SPREAD_TOLERANCE = 1e-9


######################################################################
#  B I N N I N G
######################################################################
def hex_bin(points: np.ndarray, grid: int, transpose: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """
    Aggregates unit-square points into a hexagon lattice `grid` cells wide

    Two offset rectangular lattices with row pitch sqrt(3) times the
    column pitch are overlaid and each point goes to the nearer center.
    The lattice is mirror symmetric about x = 0.5 and y = 0.5. With
    transpose the rows run along y instead of x. Returns the mean of the
    points in every occupied cell and the cell counts, sorted by cell.
    """
    coords = points[:, ::-1] if transpose else points
    nx = max(1, int(grid))
    sx = 1.0 / nx
    sy = math.sqrt(3.0) * sx
    ix = coords[:, 0] / sx
    iy = (coords[:, 1] - 0.5) / sy

    ix1, iy1 = np.rint(ix), np.rint(iy)
    ix2, iy2 = np.floor(ix), np.floor(iy)
    d1 = (ix - ix1) ** 2 + 3.0 * (iy - iy1) ** 2
    d2 = (ix - ix2 - 0.5) ** 2 + 3.0 * (iy - iy2 - 0.5) ** 2
    first = d1 <= d2

    keys = np.column_stack([
        np.where(first, 0, 1),
        np.where(first, ix1, ix2).astype(np.int64),
        np.where(first, iy1, iy2).astype(np.int64),
    ])
    _, cell, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    cell = cell.ravel()
    means = np.column_stack([
        np.bincount(cell, weights=points[:, 0]) / counts,
        np.bincount(cell, weights=points[:, 1]) / counts,
    ])
    return means, counts


def normalize_and_bin(
    raw: np.ndarray, grid: int = 40, max_cells: int = 250, transpose: bool = False
) -> PointSet2D:
    """
    Min-max normalizes both axes and hexagon-bins the points

    The lattice is halved until no more than max_cells cells are occupied.
    Identical points collapse to a single cell.
    """
    pts = np.asarray(raw, dtype=np.float64).reshape(-1, 2)
    if len(pts) < 3:
        raise TooFewPoints(f"Scagnostics need 3 points, got {len(pts)}")

    low = pts.min(axis=0)
    extent = pts.max(axis=0) - low
    if not extent.any():
        return PointSet2D(points=np.zeros((1, 2)), weights=np.array([len(pts)]))
    if not extent.all():
        raise DegenerateAxis(f"Axis {int(np.argmin(extent))} has zero extent")
    unit = (pts - low) / extent

    size = grid
    cells, counts = hex_bin(unit, size, transpose)
    while len(cells) > max_cells and size > 1:
        size //= 2
        cells, counts = hex_bin(unit, size, transpose)
    logger.debug("Binned %d points into %d cells (grid %d)", len(pts), len(cells), size)
    return PointSet2D(points=cells, weights=counts)


######################################################################
#  G R A P H S
######################################################################
def build_mst(ps: PointSet2D) -> GeometricGraph:
    """
    Euclidean minimum spanning tree by Prim's algorithm

    Ties are broken on (length, smaller index, larger index).
    """
    n = ps.n
    if n < 2:
        raise TooFewPoints(f"A spanning tree needs 2 points, got {n}")
    dist = squareform(pdist(ps.points))
    index = np.arange(n)

    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = dist[0].copy()
    source = np.zeros(n, dtype=np.int64)

    edges, lengths = [], []
    for _ in range(n - 1):
        outside = np.flatnonzero(~in_tree)
        lo = np.minimum(outside, source[outside])
        hi = np.maximum(outside, source[outside])
        pick = outside[np.lexsort((hi, lo, best[outside]))[0]]
        edges.append(sorted((int(source[pick]), int(pick))))
        lengths.append(float(best[pick]))
        in_tree[pick] = True

        new_lo = np.minimum(index, pick)
        new_hi = np.maximum(index, pick)
        old_lo = np.minimum(index, source)
        old_hi = np.maximum(index, source)
        closer = dist[pick] < best
        tied = (dist[pick] == best) & ((new_lo < old_lo) | ((new_lo == old_lo) & (new_hi < old_hi)))
        update = ~in_tree & (closer | tied)
        best[update] = dist[pick][update]
        source[update] = pick

    return GeometricGraph(
        n_vertices=n,
        edges=np.asarray(edges, dtype=np.int64).reshape(-1, 2),
        lengths=np.asarray(lengths, dtype=np.float64),
    )


def outlier_context(mst: GeometricGraph) -> ScagContext:
    """Edge-length percentiles, outlier cutoff omega and bias weight"""
    if len(mst.lengths) == 0:
        raise TooFewPoints("MST has no edges")
    q10, q25, q50, q75, q90 = np.percentile(mst.lengths, [10, 25, 50, 75, 90], method="linear")
    n = mst.n_vertices
    t = n / 500.0
    return ScagContext(
        q10=float(q10),
        q25=float(q25),
        q50=float(q50),
        q75=float(q75),
        q90=float(q90),
        omega=float(q75 + 1.5 * (q75 - q25)),
        weight=0.7 + 0.3 / (1.0 + t * t),
        n=n,
    )


def prune_outliers(ps: PointSet2D, mst: GeometricGraph, ctx: ScagContext) -> Tuple[PointSet2D, float]:
    """
    Drops vertices whose MST edges are all longer than omega

    Returns the surviving points and the outlying measure: the share of
    total MST length on edges touching an outlier, taken before removal.
    """
    long_edge = mst.lengths > ctx.omega
    degree = mst.degrees()
    long_degree = np.bincount(mst.edges[long_edge].ravel(), minlength=ps.n)
    outlier = (degree > 0) & (long_degree == degree)
    if outlier.all():
        raise AllOutliers("Every point is an outlier")

    touching = outlier[mst.edges[:, 0]] | outlier[mst.edges[:, 1]]
    total = mst.total_length
    outlying = math.fsum(mst.lengths[touching].tolist()) / total if total > 0 else 0.0
    if outlier.any():
        logger.debug("Pruned %d outliers of %d points", int(outlier.sum()), ps.n)
    return ps.subset(~outlier), outlying


def alpha_hull(ps: PointSet2D, alpha: float) -> AlphaHull:
    """
    Alpha hull from the Delaunay triangles with circumradius <= alpha

    alpha may be math.inf, which gives the convex hull. The boundary is
    every edge used by exactly one kept triangle.
    """
    if ps.n < 3:
        raise DegenerateHull(f"Alpha hull needs 3 points, got {ps.n}")
    try:
        triangulation = Delaunay(ps.points)
    except QhullError as error:
        raise DegenerateHull("Points are collinear or coincident") from error

    areas = []
    edge_use = Counter()
    for simplex in triangulation.simplices:
        pa, pb, pc = ps.points[simplex]
        ab, bc, ca = math.dist(pa, pb), math.dist(pb, pc), math.dist(pc, pa)
        area = abs((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1])) / 2.0
        if area == 0:
            continue
        if ab * bc * ca / (4.0 * area) > alpha:
            continue
        areas.append(area)
        i, j, k = (int(v) for v in simplex)
        for edge in ((i, j), (j, k), (k, i)):
            edge_use[tuple(sorted(edge))] += 1

    boundary = np.asarray(sorted(e for e, uses in edge_use.items() if uses == 1), dtype=np.int64).reshape(-1, 2)
    perimeter = math.fsum(math.dist(ps.points[i], ps.points[j]) for i, j in boundary)
    return AlphaHull(area=math.fsum(areas), perimeter=perimeter, boundary=boundary)


######################################################################
#  M E A S U R E S
######################################################################
def _clamp(value: float) -> float:
    if not math.isfinite(value):
        return 0.0
    return min(1.0, max(0.0, value))


def clumpy_measure(mst: GeometricGraph) -> float:
    """
    max over edges j of 1 - (longest edge in the smaller runt) / length j

    The runts of edge j are the components holding its two ends once
    every edge at least as long as j is removed.
    """
    best = 0.0
    n = mst.n_vertices
    for (u, v), length in zip(mst.edges.tolist(), mst.lengths.tolist()):
        if length <= 0:
            continue
        shorter = mst.lengths < length
        kept = mst.edges[shorter]
        graph = coo_matrix((np.ones(len(kept)), (kept[:, 0], kept[:, 1])), shape=(n, n))
        _, labels = connected_components(graph, directed=False)
        size_u = np.count_nonzero(labels == labels[u])
        size_v = np.count_nonzero(labels == labels[v])
        runt = labels[u] if size_u <= size_v else labels[v]
        inside = labels[kept[:, 0]] == runt
        if not inside.any():
            continue
        best = max(best, 1.0 - float(mst.lengths[shorter][inside].max()) / length)
    return best


def striated_measure(ps: PointSet2D, mst: GeometricGraph) -> float:
    """Share of vertices with two MST edges meeting at cos < -0.75"""
    neighbours = [[] for _ in range(ps.n)]
    for u, v in mst.edges.tolist():
        neighbours[u].append(v)
        neighbours[v].append(u)
    straight = 0
    for vertex, adjacent in enumerate(neighbours):
        if len(adjacent) != 2:
            continue
        a = ps.points[adjacent[0]] - ps.points[vertex]
        b = ps.points[adjacent[1]] - ps.points[vertex]
        norms = float(np.linalg.norm(a) * np.linalg.norm(b))
        if norms > 0 and float(np.dot(a, b)) / norms < STRIATION_COSINE:
            straight += 1
    return straight / ps.n


def stringy_measure(mst: GeometricGraph) -> float:
    """(|degree-2 vertices| / (|V| - |degree-1 vertices|))^3"""
    degree = mst.degrees()
    denominator = mst.n_vertices - int(np.count_nonzero(degree == 1))
    if denominator <= 0:
        return 0.0
    return (int(np.count_nonzero(degree == 2)) / denominator) ** 3


def monotonic_measure(ps: PointSet2D) -> float:
    """Squared Spearman rank correlation of the two coordinates"""
    if np.ptp(ps.points[:, 0]) == 0 or np.ptp(ps.points[:, 1]) == 0:
        return 0.0
    rho = spearmanr(ps.points[:, 0], ps.points[:, 1]).statistic
    if not math.isfinite(rho):
        return 0.0
    return float(rho) ** 2


def scagnostic_measures(
    ps: PointSet2D,
    mst: GeometricGraph,
    hull_area: float,
    alpha: AlphaHull,
    ctx: ScagContext,
    outlying: float = 0.0,
) -> ScagnosticMeasures:
    """The nine measures of a pruned point set, each clamped to [0, 1]"""
    if ps.n < 3:
        raise TooFewPoints(f"Scagnostic measures need 3 points, got {ps.n}")

    spread = ctx.q90 - ctx.q10
    q_skew = (ctx.q90 - ctx.q50) / spread if spread > SPREAD_TOLERANCE * ctx.q90 else 0.5
    convex = ctx.weight * alpha.area / hull_area if hull_area > 0 else 0.0
    if alpha.perimeter > 0:
        skinny = 1.0 - math.sqrt(4.0 * math.pi * alpha.area) / alpha.perimeter
    else:
        skinny = 1.0

    return ScagnosticMeasures(
        outlying=_clamp(outlying),
        skewed=_clamp(1.0 - ctx.weight * (1.0 - q_skew)),
        clumpy=_clamp(clumpy_measure(mst)),
        sparse=_clamp(ctx.weight * ctx.q90),
        striated=_clamp(striated_measure(ps, mst)),
        convex=_clamp(convex),
        skinny=_clamp(skinny),
        stringy=_clamp(stringy_measure(mst)),
        monotonic=_clamp(monotonic_measure(ps)),
    )


def _oriented_scagnostics(
    raw: np.ndarray, grid: int, max_cells: int, alpha: Optional[float], transpose: bool
) -> ScagnosticMeasures:
    ps = normalize_and_bin(raw, grid, max_cells, transpose)
    mst = build_mst(ps)
    pruned, outlying = prune_outliers(ps, mst, outlier_context(mst))
    if pruned.n < 3:
        raise TooFewPoints(f"Only {pruned.n} points left after pruning")

    mst = build_mst(pruned)
    ctx = outlier_context(mst)
    radius = ctx.omega if alpha is None else alpha
    try:
        hull_area = convex_hull(pruned.points).area
        shape = alpha_hull(pruned, radius)
    except DegenerateHull:
        hull_area = 0.0
        shape = AlphaHull(area=0.0, perimeter=0.0, boundary=np.zeros((0, 2), dtype=np.int64))
    return scagnostic_measures(pruned, mst, hull_area, shape, ctx, outlying)


def scagnostics(
    raw: np.ndarray,
    grid: int = 40,
    max_cells: int = 250,
    alpha: Optional[float] = None,
) -> ScagnosticMeasures:
    """
    Runs the whole chain on a raw point cloud

    Outliers are judged on the MST of the binned points; every other
    measure uses the MST and quantiles rebuilt on the survivors. The
    alpha radius defaults to the survivors' omega. The chain runs once
    with lattice rows along x and once along y and the two results are
    averaged, so a quarter turn of the cloud leaves the measures unchanged.
    """
    runs = [_oriented_scagnostics(raw, grid, max_cells, alpha, transpose) for transpose in (False, True)]
    first, second = (run.as_dict() for run in runs)
    return ScagnosticMeasures(**{name: (first[name] + second[name]) / 2.0 for name in first})


######################################################################
#  C O N T O U R   E X T R A S
######################################################################
def _cyclic_runs(flags: np.ndarray) -> int:
    if flags.all():
        return 1
    return int(np.count_nonzero(flags & ~np.roll(flags, 1)))


def polar_extreme_counts(pc: PolarContour) -> Tuple[int, int]:
    """
    Number of separate maxima and minima of r around the contour

    Samples within 1 % of the radius range of the extreme are in the
    band; each run of such samples, contiguous in theta and wrapping
    around, counts once. A constant radius (up to rounding) gives (1, 1).
    """
    radius = np.asarray(pc.radius, dtype=np.float64)
    if len(radius) < 3:
        raise TooFewPoints(f"Extreme counts need 3 samples, got {len(radius)}")
    r_max, r_min = float(radius.max()), float(radius.min())
    if r_max - r_min <= CONSTANT_RADIUS * r_max:
        return 1, 1
    eps = EXTREME_BAND * (r_max - r_min)
    return _cyclic_runs(radius >= r_max - eps), _cyclic_runs(radius <= r_min + eps)


def contour_correlation(c) -> float:
    """Pearson correlation of the contour's x and y; 0 when either is constant"""
    pts = as_points(c).astype(np.float64)
    dx = pts[:, 0] - pts[:, 0].mean()
    dy = pts[:, 1] - pts[:, 1].mean()
    sxx, syy = float(np.dot(dx, dx)), float(np.dot(dy, dy))
    if sxx == 0 or syy == 0:
        return 0.0
    return min(1.0, max(-1.0, float(np.dot(dx, dy)) / math.sqrt(sxx * syy)))
