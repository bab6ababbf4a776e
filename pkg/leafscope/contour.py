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
Contour geometry

Extracts the leaf boundary from a binary silhouette and derives the
primitives the feature modules share: region, centroid, polar form,
convex hull, minimum-area rectangle and moment ellipse.

Quantities that must survive 90 degree rotations unchanged are computed
with exact integer arithmetic where the inputs are pixel coordinates.
"""
import logging
import math
from typing import List, Tuple, Union

import cv2
import numpy as np
from scipy.spatial import ConvexHull, QhullError

from leafscope.models import (
    FOREGROUND,
    Contour,
    ConvexHullPoly,
    DegenerateContour,
    DegenerateHull,
    DegenerateRegion,
    EllipseFit,
    NoContour,
    PolarContour,
    RotatedRect,
)

logger = logging.getLogger(__name__)

PointsLike = Union[Contour, np.ndarray]


def as_points(points: PointsLike) -> np.ndarray:
    """(m, 2) array view of a Contour or any point sequence"""
    if isinstance(points, Contour):
        return points.points
    return np.asarray(points).reshape(-1, 2)


def _exact(values: np.ndarray) -> list:
    """Python ints for integral arrays, floats otherwise"""
    if np.issubdtype(values.dtype, np.integer):
        return [int(v) for v in values.ravel()]
    return [float(v) for v in values.ravel()]


######################################################################
#  B O R D E R   F O L L O W I N G
######################################################################
def extract_contours(img: np.ndarray) -> List[Contour]:
    """
    Outer boundaries of every connected foreground component

    Contours come from border following over 8-connected pixels and are
    sorted by enclosed area, largest first. Boundaries with fewer than
    three points (isolated pixels, two-pixel specks) are skipped.
    """
    mask = np.where(img > 0, 1, 0).astype(np.uint8)
    if not mask.any():
        raise NoContour("Image has no foreground pixels")

    found, _ = cv2.findContours(mask, cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_NONE)
    candidates = [c.reshape(-1, 2).astype(np.int64) for c in found if len(c) >= 3]
    if not candidates:
        raise NoContour("No boundary with at least three points")

    candidates.sort(key=lambda c: (cv2.contourArea(c.astype(np.int32)), len(c)), reverse=True)
    logger.debug("Found %d contours, largest has %d points", len(candidates), len(candidates[0]))
    return [Contour(c) for c in candidates]


def best_contour(img: np.ndarray) -> Contour:
    """The contour enclosing the largest area"""
    return extract_contours(img)[0]


######################################################################
#  R E G I O N
######################################################################
def filled_region(points: PointsLike) -> Tuple[np.ndarray, Tuple[int, int]]:
    """
    Rasterizes the region enclosed by a closed boundary

    Returns a boolean mask over the boundary's bounding box together with
    the (x, y) offset of its top-left pixel. Boundary pixels are part of
    the region.
    """
    pts = np.rint(as_points(points)).astype(np.int64)
    if len(pts) == 0:
        raise DegenerateContour("No points to fill")
    x0, y0 = int(pts[:, 0].min()), int(pts[:, 1].min())
    width = int(pts[:, 0].max()) - x0 + 1
    height = int(pts[:, 1].max()) - y0 + 1

    local = (pts - (x0, y0)).astype(np.int32)
    canvas = np.zeros((height, width), dtype=np.uint8)
    cv2.drawContours(canvas, [local.reshape(-1, 1, 2)], -1, FOREGROUND, thickness=cv2.FILLED)
    canvas[local[:, 1], local[:, 0]] = FOREGROUND
    return canvas > 0, (x0, y0)


def centroid(c: PointsLike) -> Tuple[float, float]:
    """Mean (x, y) of the pixels enclosed by the contour"""
    region, (x0, y0) = filled_region(c)
    ys, xs = np.nonzero(region)
    return (float(xs.mean()) + x0, float(ys.mean()) + y0)


######################################################################
#  P O L A R   F O R M
######################################################################
def to_polar(c: PointsLike, center: Tuple[float, float]) -> PolarContour:
    """
    Maps contour points to (theta, r) around center

    theta lies in [-pi, pi) and is strictly increasing; when two points
    share an angle the one further from the center is kept.
    """
    pts = as_points(c).astype(np.float64)
    dx = pts[:, 0] - center[0]
    dy = pts[:, 1] - center[1]
    radius = np.hypot(dx, dy)
    if not np.any(radius > 0):
        raise DegenerateContour("Every contour point coincides with the center")

    theta = np.arctan2(dy, dx)
    theta[theta >= math.pi] = -math.pi

    order = np.lexsort((-radius, theta))
    theta, radius = theta[order], radius[order]
    keep = np.ones(len(theta), dtype=bool)
    keep[1:] = theta[1:] != theta[:-1]
    return PolarContour(theta=theta[keep], radius=radius[keep])


######################################################################
#  C O N V E X   H U L L
######################################################################
def polygon_area(vertices: np.ndarray) -> float:
    """Shoelace area; exact for integer vertices"""
    xs = _exact(vertices[:, 0])
    ys = _exact(vertices[:, 1])
    count = len(xs)
    cross = [xs[i] * ys[(i + 1) % count] - xs[(i + 1) % count] * ys[i] for i in range(count)]
    if all(isinstance(v, int) for v in cross):
        return abs(sum(cross)) / 2.0
    return abs(math.fsum(cross)) / 2.0


def polygon_perimeter(vertices: np.ndarray) -> float:
    """Length of the closed polygon through the vertices"""
    steps = np.roll(vertices, -1, axis=0) - vertices
    return math.fsum(np.hypot(steps[:, 0], steps[:, 1]).tolist())


def convex_hull(points: PointsLike) -> ConvexHullPoly:
    """Convex hull with counter-clockwise vertices"""
    pts = as_points(points)
    if len(pts) < 3:
        raise DegenerateHull(f"Convex hull needs 3 points, got {len(pts)}")
    try:
        hull = ConvexHull(pts.astype(np.float64))
    except QhullError as error:
        raise DegenerateHull("Points are collinear or coincident") from error

    vertices = pts[hull.vertices]
    return ConvexHullPoly(
        vertices=vertices,
        perimeter=polygon_perimeter(vertices.astype(np.float64)),
        area=polygon_area(vertices),
    )


def contains_points(hull: ConvexHullPoly, points: np.ndarray, tolerance: float = 1e-9) -> np.ndarray:
    """True for points inside or on a counter-clockwise convex polygon"""
    verts = hull.vertices.astype(np.float64)
    starts = verts
    edges = np.roll(verts, -1, axis=0) - verts
    rel = points.astype(np.float64)[:, None, :] - starts[None, :, :]
    cross = edges[None, :, 0] * rel[:, :, 1] - edges[None, :, 1] * rel[:, :, 0]
    return np.all(cross >= -tolerance, axis=1)


######################################################################
#  M I N I M U M   A R E A   R E C T A N G L E
######################################################################
def min_area_rect(c: PointsLike) -> RotatedRect:
    """
    Smallest enclosing rectangle

    One side of the optimum is collinear with a hull edge, so every hull
    edge direction is tried. Extents use integer dot products when the
    hull vertices are pixel coordinates.
    """
    hull = convex_hull(c)
    verts = hull.vertices
    if not np.issubdtype(verts.dtype, np.integer):
        verts = verts.astype(np.float64)
    edges = np.roll(verts, -1, axis=0) - verts

    best = None
    for ex, ey in edges.tolist():
        norm2 = ex * ex + ey * ey
        if norm2 == 0:
            continue
        along = verts[:, 0] * ex + verts[:, 1] * ey
        across = verts[:, 0] * -ey + verts[:, 1] * ex
        du = along.max().item() - along.min().item()
        dv = across.max().item() - across.min().item()
        norm = math.sqrt(norm2)
        side_u, side_v = du / norm, dv / norm
        area = du * dv / norm2
        length = max(side_u, side_v)
        if best is not None and (area, length) >= (best[0], best[1]):
            continue
        mid_u = (along.max().item() + along.min().item()) / 2.0
        mid_v = (across.max().item() + across.min().item()) / 2.0
        center = ((mid_u * ex - mid_v * ey) / norm2, (mid_u * ey + mid_v * ex) / norm2)
        angle = math.atan2(ey, ex) if side_u >= side_v else math.atan2(ex, -ey)
        best = (area, length, min(side_u, side_v), center, angle)

    area, length, width, center, angle = best
    if angle >= math.pi / 2:
        angle -= math.pi
    elif angle < -math.pi / 2:
        angle += math.pi
    return RotatedRect(center=center, length=length, width=width, angle=angle)


######################################################################
#  M O M E N T   E L L I P S E
######################################################################
def region_moments(c: PointsLike) -> Tuple[int, int, int, int]:
    """
    Pixel count and scaled second central moments of the region

    Returns (n, A, B, C) with A = n^2 var(x), B = n^2 cov(x, y) and
    C = n^2 var(y), all exact integers.
    """
    region, _ = filled_region(c)
    ys, xs = np.nonzero(region)
    n = int(len(xs))
    sx, sy = int(xs.sum()), int(ys.sum())
    sxx = int(np.dot(xs.astype(np.int64), xs.astype(np.int64)))
    syy = int(np.dot(ys.astype(np.int64), ys.astype(np.int64)))
    sxy = int(np.dot(xs.astype(np.int64), ys.astype(np.int64)))
    return n, n * sxx - sx * sx, n * sxy - sx * sy, n * syy - sy * sy


def fit_ellipse(c: PointsLike) -> EllipseFit:
    """
    Ellipse with the same second moments as the filled region

    a = 2 sqrt(lambda1), b = 2 sqrt(lambda2) where lambda1 >= lambda2 are
    the eigenvalues of the pixel coordinate covariance.
    """
    n, a_mom, b_mom, c_mom = region_moments(c)
    if n == 0:
        raise DegenerateRegion("Region has no pixels")
    root = math.sqrt((a_mom - c_mom) ** 2 + 4 * b_mom * b_mom)
    scale = 2.0 * n * n
    lambda1 = ((a_mom + c_mom) + root) / scale
    lambda2 = ((a_mom + c_mom) - root) / scale
    if lambda2 <= 0:
        raise DegenerateRegion("Region has no spread along one axis")
    orientation = 0.5 * math.atan2(2 * b_mom, a_mom - c_mom)
    return EllipseFit(a=2.0 * math.sqrt(lambda1), b=2.0 * math.sqrt(lambda2), orientation=orientation)
