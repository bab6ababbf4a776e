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
Image preprocessing

Turns a raw color leaf photo into a clean binary silhouette:

    BGR -> RGB -> gray -> Gaussian blur -> Otsu threshold
        -> stalk removal -> hole closing -> resize

Every function is pure and works on in-memory arrays only.
"""
import logging
from enum import Enum
from typing import Tuple, Union

import cv2
import numpy as np
from scipy import ndimage

from leafscope.models import (
    BACKGROUND,
    FOREGROUND,
    ChannelOrder,
    ColorImage,
    DataValidationError,
    DegenerateHistogram,
    EmptyForeground,
    GrayHistogram,
    InvalidKernel,
    InvalidSize,
    OtsuCandidate,
    OtsuResult,
)

logger = logging.getLogger(__name__)

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
DEFAULT_SIZE = (1600, 1200)


class Morphology(Enum):
    """Binary morphology operations"""

    ERODE = "erode"
    DILATE = "dilate"
    CLOSE = "close"


def _check_kernel(size: int) -> None:
    if size < 1 or size % 2 == 0:
        raise InvalidKernel(f"Kernel size must be odd and positive, got {size}")


######################################################################
#  C O L O R   A N D   G R A Y
######################################################################
def bgr_to_rgb(img: ColorImage) -> ColorImage:
    """Swaps the first and third channels of a BGR image"""
    if img.channel_order is not ChannelOrder.BGR:
        raise DataValidationError("bgr_to_rgb expects a BGR image")
    return ColorImage(np.ascontiguousarray(img.pixels[:, :, ::-1]), ChannelOrder.RGB)


def to_grayscale(img: ColorImage) -> np.ndarray:
    """Luma conversion: round(0.299 R + 0.587 G + 0.114 B)"""
    if img.channel_order is not ChannelOrder.RGB:
        raise DataValidationError("to_grayscale expects an RGB image")
    weights = np.asarray(LUMA_WEIGHTS, dtype=np.float64)
    gray = img.pixels.astype(np.float64) @ weights
    return np.clip(np.rint(gray), 0, 255).astype(np.uint8)


######################################################################
#  G A U S S I A N   S M O O T H I N G
######################################################################
def gaussian_kernel(kernel_size: int, sigma_x: float = 0.0) -> np.ndarray:
    """
    Normalized 1-D Gaussian kernel

    When sigma_x is 0 the standard deviation is derived from the size:
    sigma = 0.3 * ((kernel_size - 1) * 0.5 - 1) + 0.8
    """
    _check_kernel(kernel_size)
    if sigma_x < 0:
        raise InvalidKernel(f"sigma_x must be >= 0, got {sigma_x}")
    sigma = sigma_x if sigma_x > 0 else 0.3 * ((kernel_size - 1) * 0.5 - 1) + 0.8
    offsets = np.arange(kernel_size, dtype=np.float64) - (kernel_size - 1) / 2.0
    kernel = np.exp(-(offsets ** 2) / (2.0 * sigma ** 2))
    return kernel / kernel.sum()


def gaussian_blur(img: np.ndarray, kernel_size: int = 55, sigma_x: float = 0.0) -> np.ndarray:
    """
    Separable Gaussian convolution with reflected borders

    uint8 input gives rounded uint8 output; float input stays float.
    """
    kernel = gaussian_kernel(kernel_size, sigma_x)
    data = img.astype(np.float64)
    data = ndimage.correlate1d(data, kernel, axis=0, mode="reflect")
    data = ndimage.correlate1d(data, kernel, axis=1, mode="reflect")
    if img.dtype == np.uint8:
        return np.clip(np.rint(data), 0, 255).astype(np.uint8)
    return data


######################################################################
#  O T S U   T H R E S H O L D I N G
######################################################################
def otsu_from_histogram(hist: GrayHistogram) -> OtsuResult:
    """
    Sweeps every candidate u and keeps the one maximizing
    sigma^2 = P1 * P2 * (mu1 - mu2)^2 where class 1 holds levels <= u.

    The argmax is taken on exact integers so ties go to the smallest u.
    """
    counts = np.asarray(hist.counts, dtype=np.int64)
    if hist.total <= 0 or np.count_nonzero(counts) < 2:
        raise DegenerateHistogram("Histogram needs at least two occupied levels")

    levels = np.arange(len(counts), dtype=np.int64)
    n1 = np.cumsum(counts)
    s1 = np.cumsum(counts * levels)
    total_n = int(n1[-1])
    total_s = int(s1[-1])

    candidates = []
    best_u, best_num, best_den = -1, 0, 1
    for u in range(len(counts)):
        c1, c2 = int(n1[u]), total_n - int(n1[u])
        t1, t2 = int(s1[u]), total_s - int(s1[u])
        p1, p2 = c1 / total_n, c2 / total_n
        mu1 = t1 / c1 if c1 else 0.0
        mu2 = t2 / c2 if c2 else 0.0
        variance = p1 * p2 * (mu1 - mu2) ** 2 if c1 and c2 else 0.0
        candidates.append(OtsuCandidate(u, variance, p1, p2, mu1, mu2))
        if not (c1 and c2):
            continue
        # sigma^2 * N^2 = (c2 t1 - c1 t2)^2 / (c1 c2)
        num = (c2 * t1 - c1 * t2) ** 2
        den = c1 * c2
        if best_u < 0 or num * best_den > best_num * den:
            best_u, best_num, best_den = u, num, den

    return OtsuResult(
        threshold=best_u,
        best_variance=candidates[best_u].variance,
        per_candidate=candidates,
    )


def otsu_threshold(img: np.ndarray, auto_invert: bool = True) -> Tuple[OtsuResult, np.ndarray]:
    """
    Binarizes a gray image with Otsu's threshold

    Pixels <= threshold become 0, the rest 255. When auto_invert is set
    and the foreground covers more than half the image the result is
    inverted, so a dark leaf on white paper ends up as 255.
    """
    if img.size == 0:
        raise DegenerateHistogram("Empty image")
    result = otsu_from_histogram(GrayHistogram.from_values(img))
    binary = np.where(img > result.threshold, FOREGROUND, BACKGROUND).astype(np.uint8)
    if auto_invert and np.count_nonzero(binary) > binary.size / 2:
        binary = FOREGROUND - binary
    logger.debug("Otsu threshold %d (variance %.3f)", result.threshold, result.best_variance)
    return result, binary


######################################################################
#  D I S T A N C E   A N D   S T A L K
######################################################################
def distance_transform(img: np.ndarray) -> np.ndarray:
    """Exact Euclidean distance of each foreground pixel to the background"""
    return ndimage.distance_transform_edt(img > 0)


def largest_component(img: np.ndarray) -> np.ndarray:
    """Keeps the largest 8-connected foreground component"""
    labels, count = ndimage.label(img > 0, structure=np.ones((3, 3), dtype=bool))
    if count <= 1:
        return np.where(labels > 0, FOREGROUND, BACKGROUND).astype(np.uint8)
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    return np.where(labels == int(np.argmax(sizes)), FOREGROUND, BACKGROUND).astype(np.uint8)


def remove_stalk(img: np.ndarray) -> np.ndarray:
    """
    Removes thin appendages such as the leaf stalk

    The distance map of the foreground is rescaled to 8 bits and Otsu's
    method on those values gives a depth cutoff delta. Pixels deeper than
    delta form the sure foreground, which is grown back by delta inside
    the silhouette (an opening by a disk of radius delta). Anything
    thinner than 2 * delta disappears; the largest component is kept.
    """
    mask = img > 0
    if not mask.any():
        raise EmptyForeground("remove_stalk needs at least one foreground pixel")

    distance = distance_transform(img)
    peak = float(distance.max())
    scaled = np.rint(distance[mask] / peak * 255.0).astype(np.int64)
    try:
        result = otsu_from_histogram(GrayHistogram.from_values(scaled))
    except DegenerateHistogram:
        logger.debug("Flat distance histogram, stalk removal skipped")
        return img.copy()

    delta = result.threshold / 255.0 * peak
    sure = distance > delta
    regrown = ndimage.distance_transform_edt(~sure) <= delta
    opened = np.where(regrown & mask, FOREGROUND, BACKGROUND).astype(np.uint8)
    logger.debug("Stalk cutoff %.2f px of %.2f", delta, peak)
    return largest_component(opened)


######################################################################
#  M O R P H O L O G Y
######################################################################
def morphology(img: np.ndarray, kind: Morphology, kernel: int = 5) -> np.ndarray:
    """
    Square-kernel binary morphology

    Erode and Dilate treat pixels outside the image as background. Close
    (dilate then erode) runs on a copy padded by the kernel radius so it
    never removes foreground.
    """
    _check_kernel(kernel)
    structure = np.ones((kernel, kernel), dtype=bool)
    mask = img > 0
    if kind is Morphology.ERODE:
        out = ndimage.binary_erosion(mask, structure=structure, border_value=0)
    elif kind is Morphology.DILATE:
        out = ndimage.binary_dilation(mask, structure=structure, border_value=0)
    else:
        pad = kernel // 2
        padded = np.pad(mask, pad, mode="constant", constant_values=False)
        padded = ndimage.binary_dilation(padded, structure=structure, border_value=0)
        padded = ndimage.binary_erosion(padded, structure=structure, border_value=0)
        out = padded[pad:pad + mask.shape[0], pad:pad + mask.shape[1]]
    return np.where(out, FOREGROUND, BACKGROUND).astype(np.uint8)


######################################################################
#  R E S I Z E
######################################################################
def is_binary(img: np.ndarray) -> bool:
    """True when every value is 0 or 255"""
    return bool(np.isin(img, (BACKGROUND, FOREGROUND)).all())


def resize(
    img: Union[ColorImage, np.ndarray],
    target: Tuple[int, int] = DEFAULT_SIZE,
    binary: bool = None,
) -> Union[ColorImage, np.ndarray]:
    """
    Resizes to target (width, height)

    Color and gray images use bilinear interpolation; binary images use
    nearest neighbour so the value set stays {0, 255}. Pass binary to
    override the detection.
    """
    width, height = int(target[0]), int(target[1])
    if width < 1 or height < 1:
        raise InvalidSize(f"Target size must be positive, got {target}")

    if isinstance(img, ColorImage):
        if (img.width, img.height) == (width, height):
            return img
        pixels = cv2.resize(img.pixels, (width, height), interpolation=cv2.INTER_LINEAR)
        return ColorImage(pixels, img.channel_order)

    if img.shape[1] == width and img.shape[0] == height:
        return img.copy()
    nearest = is_binary(img) if binary is None else binary
    interpolation = cv2.INTER_NEAREST if nearest else cv2.INTER_LINEAR
    return cv2.resize(img, (width, height), interpolation=interpolation)
