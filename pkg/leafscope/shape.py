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
Shape features

The 21 morphological features of a leaf silhouette: sizes measured on
the contour, its hull and its rectangle, and the dimensionless ratios
derived from them.
"""
import logging
import math
from typing import Optional, Tuple

import numpy as np
from scipy.spatial.distance import pdist

from leafscope import contour as geometry
from leafscope.models import (
    Contour,
    ConvexHullPoly,
    DegenerateFeature,
    DegenerateHull,
    DegenerateRegion,
    EllipseFit,
    RotatedRect,
    ShapeFeatures,
)

logger = logging.getLogger(__name__)

ON_HULL_TOLERANCE = 0.5


def diameter(c: geometry.PointsLike) -> float:
    """Longest distance between any two points"""
    pts = geometry.as_points(c)
    if len(pts) < 2:
        return 0.0
    try:
        pts = geometry.convex_hull(pts).vertices
    except DegenerateHull:
        pass
    return float(pdist(pts.astype(np.float64)).max())


def perimeter(c: geometry.PointsLike) -> float:
    """Sum of the distances between consecutive points, wrapping around"""
    pts = geometry.as_points(c).astype(np.float64)
    return geometry.polygon_perimeter(pts)


def region_area(img: Optional[np.ndarray], c: Contour) -> float:
    """Number of leaf pixels enclosed by the contour"""
    region, (x0, y0) = geometry.filled_region(c)
    if img is None:
        return float(np.count_nonzero(region))
    height, width = region.shape
    window = img[y0:y0 + height, x0:x0 + width] > 0
    return float(np.count_nonzero(region & window))


def eccentricity(e: EllipseFit) -> float:
    """sqrt(1 - b^2 / a^2) of the moment ellipse"""
    if e.a <= 0:
        raise DegenerateRegion("Ellipse has no semi-major axis")
    return math.sqrt(max(0.0, 1.0 - (e.b * e.b) / (e.a * e.a)))


def _ratio(name: str, numerator: float, denominator: float) -> float:
    if denominator == 0:
        raise DegenerateFeature(name)
    return numerator / denominator


def derived_shape_ratios(
    diameter_: float,
    length: float,
    width: float,
    area: float,
    perimeter_: float,
    hull: ConvexHullPoly,
    rectangularity_as_printed: bool = False,
) -> dict:
    """
    The ratio features computed from the base measurements

    Rectangularity is area / (length * width); with
    rectangularity_as_printed it is perimeter^2 / area instead.
    """
    if rectangularity_as_printed:
        rectangularity = _ratio("rectangularity", perimeter_ ** 2, area)
    else:
        rectangularity = _ratio("rectangularity", area, length * width)
    return {
        "aspect_ratio": _ratio("aspect_ratio", length, width),
        "roundness": _ratio("roundness", 4.0 * math.pi * area, perimeter_ ** 2),
        "compactness": _ratio("compactness", perimeter_ ** 2, area),
        "rectangularity": rectangularity,
        "narrow_factor": _ratio("narrow_factor", diameter_, length),
        "perim_ratio_diameter": _ratio("perim_ratio_diameter", perimeter_, diameter_),
        "perim_ratio_length": _ratio("perim_ratio_length", perimeter_, length),
        "perim_ratio_lw": _ratio("perim_ratio_lw", perimeter_, length * width),
        "perimeter_convexity": _ratio("perimeter_convexity", hull.perimeter, perimeter_),
        "area_convexity": _ratio("area_convexity", hull.area - area, area),
        "area_ratio_convexity": _ratio("area_ratio_convexity", area, hull.area),
        "equivalent_diameter": math.sqrt(4.0 * area / math.pi),
    }


def hull_point_counts(c: geometry.PointsLike, hull: ConvexHullPoly) -> Tuple[int, int]:
    """
    Returns (convex_point_count, hull_vertex_count)

    A contour point counts as convex when it lies within half a pixel of
    the hull boundary.
    """
    pts = geometry.as_points(c).astype(np.float64)
    starts = hull.vertices.astype(np.float64)
    edges = np.roll(starts, -1, axis=0) - starts
    lengths2 = np.einsum("ij,ij->i", edges, edges)

    rel = pts[:, None, :] - starts[None, :, :]
    t = np.einsum("pij,ij->pi", rel, edges) / np.where(lengths2 > 0, lengths2, 1.0)
    t = np.clip(t, 0.0, 1.0)
    closest = starts[None, :, :] + t[:, :, None] * edges[None, :, :]
    distance = np.hypot(*(pts[:, None, :] - closest).transpose(2, 0, 1)).min(axis=1)
    return int(np.count_nonzero(distance <= ON_HULL_TOLERANCE)), hull.vertex_count


def shape_features(
    img: np.ndarray,
    c: Contour,
    rectangularity_as_printed: bool = False,
) -> Tuple[ShapeFeatures, dict]:
    """
    All 21 shape features of the leaf bounded by c

    Returns the features and an extras dict holding hull_vertex_count.
    """
    hull = geometry.convex_hull(c)
    rect: RotatedRect = geometry.min_area_rect(c)
    cx, cy = geometry.centroid(c)

    base = {
        "diameter": diameter(c),
        "physiological_length": rect.length,
        "physiological_width": rect.width,
        "area": region_area(img, c),
        "perimeter": perimeter(c),
        "eccentricity": eccentricity(geometry.fit_ellipse(c)),
        "center_x": cx,
        "center_y": cy,
    }
    ratios = derived_shape_ratios(
        base["diameter"],
        base["physiological_length"],
        base["physiological_width"],
        base["area"],
        base["perimeter"],
        hull,
        rectangularity_as_printed,
    )
    convex_points, hull_vertices = hull_point_counts(c, hull)
    logger.debug("Shape: area %.0f, perimeter %.2f, %d hull vertices", base["area"], base["perimeter"], hull_vertices)
    features = ShapeFeatures(**base, **ratios, convex_point_count=float(convex_points))
    return features, {"hull_vertex_count": hull_vertices}
