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
Texture features

Gray-level co-occurrence matrices in the four adjacency directions and
the Haralick contrast, entropy, correlation and inverse difference
moments computed from them.
"""
import logging
import math
from typing import Iterable, Optional

import numpy as np
from skimage.feature import graycomatrix

from leafscope.models import (
    GLCM,
    DataValidationError,
    Direction,
    EmptyForeground,
    InsufficientPixels,
    TextureFeatures,
)

logger = logging.getLogger(__name__)

DIRECTIONS = (Direction.E, Direction.NE, Direction.N, Direction.NW)

# Pairs are counted both ways, so each direction is the same as its
# opposite; these are the opposites graycomatrix enumerates.
_ANGLES = {
    Direction.E: 0.0,
    Direction.NW: math.pi / 4,
    Direction.N: math.pi / 2,
    Direction.NE: 3 * math.pi / 4,
}


def quantize(img: np.ndarray, levels: int) -> np.ndarray:
    """Equal-width bins over the image's own value range"""
    values = img.astype(np.float64)
    low, high = float(values.min()), float(values.max())
    span = high - low if high > low else 1.0
    bins = np.floor((values - low) / span * levels)
    return np.clip(bins, 0, levels - 1).astype(np.uint8)


def build_glcm(img: np.ndarray, levels: int, direction: Direction) -> GLCM:
    """
    Normalized symmetric co-occurrence matrix at distance 1

    Gray values are first quantized to `levels` equal-width bins.
    """
    if not 2 <= levels <= 256:
        raise DataValidationError(f"levels must be in [2, 256], got {levels}")
    rows, cols = img.shape[:2]
    d_row, d_col = direction.value
    if (d_col and cols < 2) or (d_row and rows < 2):
        raise InsufficientPixels(f"{rows}x{cols} image has no pixel pairs in direction {direction.name}")

    counts = graycomatrix(
        quantize(img, levels),
        distances=[1],
        angles=[_ANGLES[direction]],
        levels=levels,
        symmetric=True,
        normed=False,
    )[:, :, 0, 0].astype(np.float64)
    total = counts.sum()
    if total == 0:
        raise InsufficientPixels(f"No pixel pairs in direction {direction.name}")
    return GLCM(h=counts / total, direction=direction)


def directional_glcms(img: np.ndarray, levels: int, directions: Iterable[Direction] = DIRECTIONS) -> list:
    """One GLCM per direction"""
    return [build_glcm(img, levels, direction) for direction in directions]


def average_glcm(glcms: list) -> GLCM:
    """Cell-wise mean of GLCMs built with the same number of levels"""
    if not glcms:
        raise DataValidationError("No GLCMs to average")
    h = np.mean([g.h for g in glcms], axis=0)
    return GLCM(h=h, direction=glcms[0].direction)


def haralick_features(g: GLCM, idm_as_printed: bool = False) -> TextureFeatures:
    """
    Contrast, entropy (log2), correlation and inverse difference moments

    Correlation of a GLCM with zero variance is 0. With idm_as_printed the
    IDM is the sum of h(a, b) / (a - b)^2 over off-diagonal cells;
    otherwise it is the sum of h(a, b) / (1 + (a - b)^2).
    """
    h = g.h
    a, b = np.meshgrid(g.levels, g.levels, indexing="ij")
    diff2 = (a - b) ** 2

    contrast = float(np.sum(diff2 * h)) / (g.n - 1)

    nonzero = h[h > 0]
    entropy = float(-np.sum(nonzero * np.log2(nonzero)))

    sigma = g.sigma_x * g.sigma_y
    if sigma > 0:
        correlation = (float(np.sum(a * b * h)) - g.mu_x * g.mu_y) / sigma
        correlation = min(1.0, max(-1.0, correlation))
    else:
        correlation = 0.0

    if idm_as_printed:
        off = diff2 > 0
        idm = float(np.sum(h[off] / diff2[off]))
    else:
        idm = float(np.sum(h / (1.0 + diff2)))

    return TextureFeatures(
        contrast=contrast,
        entropy=abs(entropy),
        correlation=correlation,
        inverse_difference_moments=idm,
    )


def leaf_crop(gray: np.ndarray, mask: Optional[np.ndarray]) -> np.ndarray:
    """Crops the gray image to the bounding box of the mask's foreground"""
    if mask is None:
        return gray
    ys, xs = np.nonzero(mask > 0)
    if len(ys) == 0:
        raise EmptyForeground("Texture mask has no foreground pixels")
    return gray[ys.min():ys.max() + 1, xs.min():xs.max() + 1]


def texture_features(
    gray: np.ndarray,
    mask: Optional[np.ndarray] = None,
    levels: int = 8,
    idm_as_printed: bool = False,
) -> TextureFeatures:
    """Haralick statistics of the direction-averaged GLCM of the leaf's bounding box"""
    crop = leaf_crop(gray, mask)
    glcm = average_glcm(directional_glcms(crop, levels))
    features = haralick_features(glcm, idm_as_printed)
    logger.debug("Texture on %dx%d crop: %s", crop.shape[1], crop.shape[0], features)
    return features
