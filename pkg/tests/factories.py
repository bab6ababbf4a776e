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
Test Factory to make synthetic leaves for testing

Silhouettes are rasterized analytically so tests know their true
area, radius and axes. LeafSpec renders a silhouette as a BGR photo of
a textured green leaf on white paper.
"""
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import cv2
import factory
import numpy as np
from factory.fuzzy import FuzzyChoice, FuzzyFloat

from leafscope.models import ChannelOrder, ColorImage, ManifestEntry

SIZE = (320, 240)
SHAPES = ("round", "simple round", "needle", "heart", "diamond")


######################################################################
#  R A S T E R   H E L P E R S
######################################################################
def _grid(size: Tuple[int, int]):
    width, height = size
    return np.mgrid[0:height, 0:width].astype(np.float64)


def _binary(mask: np.ndarray) -> np.ndarray:
    return np.where(mask, 255, 0).astype(np.uint8)


def disk_mask(radius: float, size: Tuple[int, int] = SIZE, center: Optional[Tuple[float, float]] = None) -> np.ndarray:
    """Filled disk; center defaults to the middle of the image"""
    cx, cy = center if center else (size[0] // 2, size[1] // 2)
    yy, xx = _grid(size)
    return _binary((xx - cx) ** 2 + (yy - cy) ** 2 <= radius ** 2)


def ellipse_mask(
    a: float,
    b: float,
    angle: float = 0.0,
    size: Tuple[int, int] = SIZE,
    center: Optional[Tuple[float, float]] = None,
) -> np.ndarray:
    """Filled ellipse with semi-axes a, b rotated by angle degrees"""
    cx, cy = center if center else (size[0] // 2, size[1] // 2)
    yy, xx = _grid(size)
    theta = math.radians(angle)
    u = (xx - cx) * math.cos(theta) + (yy - cy) * math.sin(theta)
    v = -(xx - cx) * math.sin(theta) + (yy - cy) * math.cos(theta)
    return _binary((u / a) ** 2 + (v / b) ** 2 <= 1.0)


def rectangle_mask(x0: int, y0: int, width: int, height: int, size: Tuple[int, int] = SIZE) -> np.ndarray:
    """Axis-aligned filled rectangle"""
    mask = np.zeros((size[1], size[0]), dtype=np.uint8)
    mask[y0:y0 + height, x0:x0 + width] = 255
    return mask


def polygon_mask(vertices, size: Tuple[int, int] = SIZE) -> np.ndarray:
    """Filled polygon through the given (x, y) vertices"""
    mask = np.zeros((size[1], size[0]), dtype=np.uint8)
    pts = np.rint(np.asarray(vertices, dtype=np.float64)).astype(np.int32).reshape(-1, 1, 2)
    cv2.fillPoly(mask, [pts], 255)
    return mask


def star_mask(outer: float, inner: float, points: int = 5, size: Tuple[int, int] = SIZE, angle: float = 0.0) -> np.ndarray:
    """Star polygon alternating between the outer and inner radius"""
    cx, cy = size[0] // 2, size[1] // 2
    vertices = []
    for i in range(2 * points):
        r = outer if i % 2 == 0 else inner
        phi = math.radians(angle) + math.pi * i / points
        vertices.append((cx + r * math.cos(phi), cy + r * math.sin(phi)))
    return polygon_mask(vertices, size)


def heart_mask(scale: float, size: Tuple[int, int] = SIZE, angle: float = 0.0) -> np.ndarray:
    """Two lobes over a triangle pointing down"""
    cx, cy = size[0] // 2, size[1] // 2
    theta = math.radians(angle)

    def place(dx, dy):
        return (cx + dx * math.cos(theta) - dy * math.sin(theta), cy + dx * math.sin(theta) + dy * math.cos(theta))

    lobe = 0.5 * scale
    left = disk_mask(lobe, size, place(-0.45 * scale, -0.3 * scale))
    right = disk_mask(lobe, size, place(0.45 * scale, -0.3 * scale))
    tip = polygon_mask([place(-0.93 * scale, -0.15 * scale), place(0.93 * scale, -0.15 * scale),
                        place(0.0, 1.1 * scale)], size)
    return np.maximum(np.maximum(left, right), tip)


def diamond_mask(half_length: float, half_width: float, size: Tuple[int, int] = SIZE, angle: float = 0.0) -> np.ndarray:
    """Rhombus with the given half diagonals"""
    cx, cy = size[0] // 2, size[1] // 2
    theta = math.radians(angle)
    corners = [(half_length, 0), (0, half_width), (-half_length, 0), (0, -half_width)]
    return polygon_mask(
        [(cx + x * math.cos(theta) - y * math.sin(theta), cy + x * math.sin(theta) + y * math.cos(theta))
         for x, y in corners],
        size,
    )


def add_stalk(mask: np.ndarray, start: Tuple[int, int], length: int, thickness: int = 3) -> np.ndarray:
    """Draws a thin vertical stalk hanging down from start"""
    out = mask.copy()
    x, y = start
    half = thickness // 2
    out[y:y + length, x - half:x - half + thickness] = 255
    return out


def photo(mask: np.ndarray, leaf_bgr=(50, 140, 60), background=(245, 245, 245), seed: int = 0) -> ColorImage:
    """Renders a binary silhouette as a textured leaf on paper"""
    rng = np.random.default_rng(seed)
    height, width = mask.shape
    pixels = np.empty((height, width, 3), dtype=np.float64)
    pixels[:] = background
    pixels += rng.normal(0.0, 2.0, size=pixels.shape)
    leaf = mask > 0
    texture = rng.normal(0.0, 12.0, size=(height, width))
    for channel in range(3):
        layer = pixels[:, :, channel]
        layer[leaf] = leaf_bgr[channel] + texture[leaf]
    return ColorImage(np.clip(np.rint(pixels), 0, 255).astype(np.uint8), ChannelOrder.BGR)


def write_png(path: Path, img: ColorImage) -> Path:
    """Saves a ColorImage as PNG"""
    path.parent.mkdir(parents=True, exist_ok=True)
    ok, encoded = cv2.imencode(".png", img.pixels)
    assert ok
    path.write_bytes(encoded.tobytes())
    return path


######################################################################
#  L E A F   S P E C S
######################################################################
@dataclass
class LeafSpec:
    """Parameters of one synthetic leaf"""

    shape: str
    length: float
    width: float
    angle: float
    species: str
    seed: int
    stalk: bool = False

    def mask(self, size: Tuple[int, int] = SIZE) -> np.ndarray:
        """Binary silhouette of the leaf"""
        if self.shape == "heart":
            mask = heart_mask(self.length, size, self.angle)
        elif self.shape == "diamond":
            mask = diamond_mask(self.length, self.width, size, self.angle)
        else:
            mask = ellipse_mask(self.length, self.width, self.angle, size)
        if self.stalk:
            ys, xs = np.nonzero(mask)
            bottom = int(ys.max())
            column = int(np.rint(xs[ys == bottom].mean()))
            mask = add_stalk(mask, (column, bottom - 2), min(40, size[1] - bottom - 2))
        return mask

    def photo(self, size: Tuple[int, int] = SIZE) -> ColorImage:
        """BGR photo of the leaf"""
        green = 120 + (self.seed * 7) % 50
        return photo(self.mask(size), leaf_bgr=(40 + self.seed % 20, green, 60), seed=self.seed)


class LeafSpecFactory(factory.Factory):
    """Creates synthetic leaves that never wilt"""

    class Meta:  # pylint: disable=too-few-public-methods
        """Maps factory to data model"""

        model = LeafSpec

    shape = FuzzyChoice(choices=["round", "simple round", "needle"])
    length = FuzzyFloat(50, 80)
    width = factory.LazyAttribute(lambda o: {"round": 0.92, "simple round": 0.65, "needle": 0.2}[o.shape] * o.length)
    angle = FuzzyFloat(0, 180)
    species = FuzzyChoice(choices=["acer", "quercus", "ginkgo"])
    seed = factory.Sequence(lambda n: n)
    stalk = False


class ManifestEntryFactory(factory.Factory):
    """Creates dataset entries"""

    class Meta:  # pylint: disable=too-few-public-methods
        """Maps factory to data model"""

        model = ManifestEntry

    path = factory.Sequence(lambda n: Path(f"leaves/leaf_{n:03d}.png"))
    id = factory.LazyAttribute(lambda o: o.path.name)
    shape = FuzzyChoice(choices=SHAPES)
    species = FuzzyChoice(choices=["acer", "quercus", "ginkgo"])


CORPUS = [
    # round
    LeafSpec("round", 70, 66, 0, "acer", 1),
    LeafSpec("round", 60, 57, 30, "acer", 2, stalk=True),
    LeafSpec("round", 80, 74, 75, "quercus", 3),
    LeafSpec("round", 55, 52, 120, "quercus", 4),
    # simple round
    LeafSpec("simple round", 85, 55, 10, "acer", 5),
    LeafSpec("simple round", 75, 50, 60, "ginkgo", 6, stalk=True),
    LeafSpec("simple round", 90, 60, 100, "ginkgo", 7),
    LeafSpec("simple round", 70, 45, 150, "acer", 8),
    # needle
    LeafSpec("needle", 100, 16, 5, "quercus", 9),
    LeafSpec("needle", 95, 14, 40, "quercus", 10),
    LeafSpec("needle", 105, 18, 85, "ginkgo", 11),
    LeafSpec("needle", 90, 15, 130, "ginkgo", 12),
    # heart
    LeafSpec("heart", 60, 0, 0, "acer", 13),
    LeafSpec("heart", 55, 0, 20, "acer", 14),
    LeafSpec("heart", 65, 0, -15, "quercus", 15),
    LeafSpec("heart", 50, 0, 180, "ginkgo", 16),
    # diamond
    LeafSpec("diamond", 90, 55, 0, "ginkgo", 17),
    LeafSpec("diamond", 80, 60, 35, "acer", 18),
    LeafSpec("diamond", 95, 50, 90, "quercus", 19),
    LeafSpec("diamond", 85, 45, 135, "quercus", 20),
]


def write_corpus(directory: Path, specs=None) -> Tuple[Path, Path]:
    """
    Writes the synthetic corpus as <shape>/leaf_NN.png plus labels.csv

    Returns (image root, labels file).
    """
    specs = CORPUS if specs is None else specs
    root = Path(directory) / "leaves"
    rows = ["filename,shape,species"]
    for index, spec in enumerate(specs, start=1):
        name = f"leaf_{index:02d}.png"
        write_png(root / spec.shape.replace(" ", "_") / name, spec.photo())
        rows.append(f"{name},{spec.shape},{spec.species}")
    labels = Path(directory) / "labels.csv"
    labels.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return root, labels
