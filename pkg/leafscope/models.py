# Copyright 2023, 2024 The leafscope Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the 'License');
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an 'AS IS' BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""
Models for the Leaf Feature Service

All of the domain types shared between the feature modules live here,
together with the error hierarchy and the fixed 52-column feature schema.

Models
------
ColorImage - an 8-bit three channel raster with a known channel order
Contour / PolarContour - the leaf boundary in Cartesian and (angle, radius) form
GLCM - a normalized gray-level co-occurrence matrix
PointSet2D / GeometricGraph / ScagContext - the scagnostics working set
FeatureVector - the 52 named features of one leaf
ProjectionModel - a fitted PCA or LDA projection

Gray and binary images are plain 2-D ``numpy.uint8`` arrays; binary images
hold only the values 0 and 255 with 255 marking the leaf.
"""
import logging
import math
from dataclasses import dataclass, field, fields
from enum import Enum
from pathlib import Path
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)

FOREGROUND = 255
BACKGROUND = 0


######################################################################
#  E R R O R S
######################################################################
class DataValidationError(Exception):
    """Used for all data errors raised while turning images into features"""


class ConfigurationError(DataValidationError):
    """A RunConfig value or config file entry is not acceptable"""


class UnreadableImage(DataValidationError):
    """An image file could not be decoded"""

    def __init__(self, path):
        super().__init__(f"Cannot decode image: {path}")
        self.path = str(path)


class InvalidKernel(DataValidationError):
    """Kernel sizes must be odd and positive"""


class InvalidSize(DataValidationError):
    """Target dimensions must be positive"""


class DegenerateHistogram(DataValidationError):
    """Otsu's method needs at least two occupied gray levels"""


class EmptyForeground(DataValidationError):
    """The binary image or mask holds no leaf pixels"""


class NoContour(DataValidationError):
    """No boundary with at least three points was found"""


class DegenerateContour(DataValidationError):
    """A contour collapses to a point"""


class DegenerateHull(DataValidationError):
    """Fewer than three non-collinear points"""


class DegenerateRegion(DataValidationError):
    """A region has no area or no spread along one axis"""


class DegenerateFeature(DataValidationError):
    """A feature formula hit a zero denominator"""

    def __init__(self, name: str):
        super().__init__(f"Feature '{name}' has a zero denominator")
        self.name = name


class InsufficientPixels(DataValidationError):
    """The image is too small for the requested adjacency direction"""


class TooFewPoints(DataValidationError):
    """A point set is too small for the requested geometry"""


class DegenerateAxis(DataValidationError):
    """One coordinate of a point set has zero extent"""


class AllOutliers(DataValidationError):
    """Outlier pruning removed every point"""


class TooFewRows(DataValidationError):
    """A feature matrix has fewer than two rows"""


class InvalidK(DataValidationError):
    """The number of projection axes is out of range"""


class NeedTwoClasses(DataValidationError):
    """LDA needs at least two classes"""


class DegenerateClass(DataValidationError):
    """An LDA class has fewer than two rows"""


class MissingLabel(DataValidationError):
    """An image has no entry in the labels file"""

    def __init__(self, path):
        super().__init__(f"No label for image: {path}")
        self.path = str(path)


class EmptyDataset(DataValidationError):
    """A dataset directory holds no supported images"""


class BatchFailed(DataValidationError):
    """More than half of a batch failed"""

    def __init__(self, failures: list, total: int):
        super().__init__(f"{len(failures)} of {total} images failed")
        self.failures = failures
        self.total = total


######################################################################
#  R A S T E R S
######################################################################
class ChannelOrder(Enum):
    """Order of the three channels of a ColorImage"""

    BGR = 0
    RGB = 1


@dataclass(frozen=True)
class ColorImage:
    """An 8-bit color image; pixels is a (height, width, 3) uint8 array"""

    pixels: np.ndarray
    channel_order: ChannelOrder = ChannelOrder.RGB

    def __post_init__(self):
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise DataValidationError(
                f"Color pixels must be (height, width, 3), got {self.pixels.shape}"
            )
        if self.pixels.shape[0] < 1 or self.pixels.shape[1] < 1:
            raise DataValidationError("Color image must be at least 1x1")
        if self.pixels.dtype != np.uint8:
            raise DataValidationError(f"Color pixels must be uint8, got {self.pixels.dtype}")

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    def channel(self, name: str) -> np.ndarray:
        """Returns the named channel ('r', 'g' or 'b') as a 2-D array"""
        index = "rgb".index(name)
        if self.channel_order is ChannelOrder.BGR:
            index = 2 - index
        return self.pixels[:, :, index]


@dataclass(frozen=True)
class GrayHistogram:
    """256-bin histogram of an 8-bit image"""

    counts: np.ndarray
    total: int

    @classmethod
    def from_values(cls, values: np.ndarray) -> "GrayHistogram":
        """Builds the histogram of any array of values in [0, 255]"""
        counts = np.bincount(np.asarray(values, dtype=np.int64).ravel(), minlength=256)[:256]
        return cls(counts=counts, total=int(counts.sum()))


class OtsuCandidate(NamedTuple):
    """Statistics of one candidate threshold u"""

    u: int
    variance: float
    p1: float
    p2: float
    mu1: float
    mu2: float


@dataclass(frozen=True)
class OtsuResult:
    """Chosen threshold plus the statistics of every candidate"""

    threshold: int
    best_variance: float
    per_candidate: List[OtsuCandidate]


######################################################################
#  C O N T O U R   G E O M E T R Y
######################################################################
@dataclass(frozen=True)
class Contour:
    """Closed boundary; points is an (m, 2) integer array of (x, y)"""

    points: np.ndarray

    def __post_init__(self):
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise DegenerateContour(f"Contour points must be (m, 2), got {self.points.shape}")
        if len(self.points) < 3:
            raise DegenerateContour(f"Contour needs 3 points, got {len(self.points)}")

    @property
    def m(self) -> int:
        return int(len(self.points))

    @property
    def x(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.points[:, 1]


@dataclass(frozen=True)
class PolarContour:
    """Contour samples as (theta, radius), theta strictly increasing in [-pi, pi)"""

    theta: np.ndarray
    radius: np.ndarray

    def __len__(self):
        return len(self.theta)


@dataclass(frozen=True)
class RotatedRect:
    """Minimum-area enclosing rectangle; length >= width"""

    center: Tuple[float, float]
    length: float
    width: float
    angle: float

    @property
    def area(self) -> float:
        return self.length * self.width


@dataclass(frozen=True)
class ConvexHullPoly:
    """Convex hull with vertices in counter-clockwise order"""

    vertices: np.ndarray
    perimeter: float
    area: float

    @property
    def vertex_count(self) -> int:
        return int(len(self.vertices))


@dataclass(frozen=True)
class EllipseFit:
    """Moment-fitted ellipse; a >= b"""

    a: float
    b: float
    orientation: float


######################################################################
#  F E A T U R E   G R O U P S
######################################################################
class _FeatureGroup:
    """Mixin giving dataclasses of floats an ordered dict form"""

    def as_dict(self) -> dict:
        return {f.name: float(getattr(self, f.name)) for f in fields(self)}


@dataclass(frozen=True)
class ShapeFeatures(_FeatureGroup):
    """The 21 shape features, in schema order"""

    diameter: float
    physiological_length: float
    physiological_width: float
    area: float
    perimeter: float
    eccentricity: float
    center_x: float
    center_y: float
    aspect_ratio: float
    roundness: float
    compactness: float
    rectangularity: float
    narrow_factor: float
    perim_ratio_diameter: float
    perim_ratio_length: float
    perim_ratio_lw: float
    perimeter_convexity: float
    area_convexity: float
    area_ratio_convexity: float
    equivalent_diameter: float
    convex_point_count: float


class Direction(Enum):
    """Adjacency directions as (row offset, column offset)"""

    E = (0, 1)
    NE = (-1, 1)
    N = (-1, 0)
    NW = (-1, -1)


@dataclass(frozen=True)
class GLCM:
    """Normalized, symmetric gray-level co-occurrence matrix"""

    h: np.ndarray
    direction: Direction

    @property
    def n(self) -> int:
        return int(self.h.shape[0])

    @property
    def levels(self) -> np.ndarray:
        return np.arange(self.n, dtype=np.float64)

    @property
    def mu_x(self) -> float:
        return float(np.sum(self.levels * self.h.sum(axis=1)))

    @property
    def mu_y(self) -> float:
        return float(np.sum(self.levels * self.h.sum(axis=0)))

    @property
    def sigma_x(self) -> float:
        return math.sqrt(float(np.sum((self.levels - self.mu_x) ** 2 * self.h.sum(axis=1))))

    @property
    def sigma_y(self) -> float:
        return math.sqrt(float(np.sum((self.levels - self.mu_y) ** 2 * self.h.sum(axis=0))))


@dataclass(frozen=True)
class TextureFeatures(_FeatureGroup):
    """Four Haralick statistics"""

    contrast: float
    entropy: float
    correlation: float
    inverse_difference_moments: float


@dataclass(frozen=True)
class ColorFeatures(_FeatureGroup):
    """Per-channel intensity proportion and normalized dispersion"""

    mean_r: float
    mean_g: float
    mean_b: float
    sd_r: float
    sd_g: float
    sd_b: float


######################################################################
#  S C A G N O S T I C S
######################################################################
@dataclass(frozen=True)
class PointSet2D:
    """Points normalized to the unit square with per-point bin counts"""

    points: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return int(len(self.points))

    def subset(self, keep: np.ndarray) -> "PointSet2D":
        """Returns the points selected by a boolean mask or index array"""
        return PointSet2D(points=self.points[keep], weights=self.weights[keep])


@dataclass(frozen=True)
class GeometricGraph:
    """Undirected graph over point indices; edges is (E, 2), lengths is (E,)"""

    n_vertices: int
    edges: np.ndarray
    lengths: np.ndarray

    @property
    def total_length(self) -> float:
        return math.fsum(self.lengths.tolist())

    def degrees(self) -> np.ndarray:
        """Degree of every vertex"""
        return np.bincount(self.edges.ravel(), minlength=self.n_vertices)


@dataclass(frozen=True)
class ScagContext:
    """MST edge-length quantiles, outlier cutoff and bias weight"""

    q10: float
    q25: float
    q50: float
    q75: float
    q90: float
    omega: float
    weight: float
    n: int

    @property
    def t(self) -> float:
        return self.n / 500.0


@dataclass(frozen=True)
class AlphaHull:
    """Union of alpha-complex triangles; boundary holds the outer edges"""

    area: float
    perimeter: float
    boundary: np.ndarray


@dataclass(frozen=True)
class ScagnosticMeasures(_FeatureGroup):
    """Nine scagnostic measures, each in [0, 1]"""

    outlying: float
    skewed: float
    clumpy: float
    sparse: float
    striated: float
    convex: float
    skinny: float
    stringy: float
    monotonic: float


######################################################################
#  F E A T U R E   S C H E M A
######################################################################
SCAGNOSTIC_NAMES = tuple(f.name for f in fields(ScagnosticMeasures))
SHAPE_NAMES = tuple(f.name for f in fields(ShapeFeatures))
TEXTURE_NAMES = tuple(f.name for f in fields(TextureFeatures))
COLOR_NAMES = tuple(f.name for f in fields(ColorFeatures))

FEATURE_NAMES = (
    SHAPE_NAMES
    + TEXTURE_NAMES
    + COLOR_NAMES
    + tuple(f"{name}_contour" for name in SCAGNOSTIC_NAMES)
    + tuple(f"{name}_polar" for name in SCAGNOSTIC_NAMES)
    + ("n_max_points", "n_min_points", "contour_correlation")
)
LABEL_COLUMNS = ("id", "label_shape", "label_species")


@dataclass
class FeatureVector:
    """The 52 features of one leaf plus diagnostic extras"""

    values: dict
    extras: dict = field(default_factory=dict)

    @classmethod
    def from_parts(
        cls,
        shape: ShapeFeatures,
        texture: TextureFeatures,
        color: ColorFeatures,
        contour_scag: ScagnosticMeasures,
        polar_scag: ScagnosticMeasures,
        extremes: Tuple[int, int],
        correlation: float,
        extras: Optional[dict] = None,
    ) -> "FeatureVector":
        """Assembles the feature groups in schema order"""
        values = {}
        values.update(shape.as_dict())
        values.update(texture.as_dict())
        values.update(color.as_dict())
        values.update({f"{k}_contour": v for k, v in contour_scag.as_dict().items()})
        values.update({f"{k}_polar": v for k, v in polar_scag.as_dict().items()})
        values["n_max_points"] = float(extremes[0])
        values["n_min_points"] = float(extremes[1])
        values["contour_correlation"] = float(correlation)
        return cls(values={name: values[name] for name in FEATURE_NAMES}, extras=extras or {})

    def is_finite(self) -> bool:
        """True when no feature is NaN or infinite"""
        return all(math.isfinite(v) for v in self.values.values())

    def serialize(self) -> dict:
        """Serializes a FeatureVector into a dictionary"""
        return {"features": dict(self.values), "extras": dict(self.extras)}


@dataclass
class FeatureMatrix:
    """One row of features per image, with ids and class labels"""

    ids: List[str]
    values: np.ndarray
    feature_names: List[str] = field(default_factory=lambda: list(FEATURE_NAMES))
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(len(self.ids), len(self.feature_names))
        if len(set(self.ids)) != len(self.ids):
            raise DataValidationError("Feature matrix ids must be unique")
        for name, column in self.labels.items():
            if len(column) != len(self.ids):
                raise DataValidationError(f"Label column {name} has {len(column)} entries for {len(self.ids)} rows")

    @property
    def rows(self) -> int:
        return len(self.ids)

    def label_column(self, name: str) -> List[str]:
        """Returns the labels named 'shape' or 'species'"""
        if name not in self.labels:
            raise DataValidationError(f"No label column '{name}'")
        return list(self.labels[name])

    def select(self, keep: np.ndarray) -> "FeatureMatrix":
        """Returns the rows selected by a boolean mask"""
        keep = np.asarray(keep, dtype=bool)
        return FeatureMatrix(
            ids=[i for i, k in zip(self.ids, keep) if k],
            values=self.values[keep],
            feature_names=list(self.feature_names),
            labels={name: [v for v, k in zip(column, keep) if k] for name, column in self.labels.items()},
        )


######################################################################
#  P R O J E C T I O N S
######################################################################
class ProjectionKind(Enum):
    """Supported projections"""

    PCA = "pca"
    LDA = "lda"


@dataclass
class ProjectionModel:
    """
    A fitted projection

    axes is a (features, k) array whose columns are the projection
    directions in the standardized feature space.
    """

    kind: ProjectionKind
    feature_names: List[str]
    means: np.ndarray
    scales: np.ndarray
    axes: np.ndarray
    explained: np.ndarray
    eigenvalues: np.ndarray
    constant_columns: List[str] = field(default_factory=list)
    classes: List[str] = field(default_factory=list)
    separation: Optional[np.ndarray] = None

    @property
    def k(self) -> int:
        return int(self.axes.shape[1])

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.explained)

    def transform(self, values: np.ndarray) -> np.ndarray:
        """Projects raw feature rows with the stored standardization"""
        values = np.atleast_2d(np.asarray(values, dtype=np.float64))
        return ((values - self.means) / self.scales) @ self.axes

    def serialize(self) -> dict:
        """Serializes a ProjectionModel into a dictionary"""
        data = {
            "kind": self.kind.value,
            "feature_names": list(self.feature_names),
            "means": self.means.tolist(),
            "scales": self.scales.tolist(),
            "constant_columns": list(self.constant_columns),
            "axes": self.axes.T.tolist(),
            "explained": self.explained.tolist(),
            "cumulative": self.cumulative.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
        }
        if self.kind is ProjectionKind.LDA:
            data["classes"] = list(self.classes)
            data["separation"] = None if self.separation is None else self.separation.tolist()
        return data

    @classmethod
    def deserialize(cls, data: dict) -> "ProjectionModel":
        """
        Deserializes a ProjectionModel from a dictionary
        Args:
            data (dict): A dictionary produced by serialize()
        """
        try:
            separation = data.get("separation")
            return cls(
                kind=ProjectionKind(data["kind"]),
                feature_names=list(data["feature_names"]),
                means=np.asarray(data["means"], dtype=np.float64),
                scales=np.asarray(data["scales"], dtype=np.float64),
                axes=np.asarray(data["axes"], dtype=np.float64).T,
                explained=np.asarray(data["explained"], dtype=np.float64),
                eigenvalues=np.asarray(data["eigenvalues"], dtype=np.float64),
                constant_columns=list(data.get("constant_columns", [])),
                classes=list(data.get("classes", [])),
                separation=None if separation is None else np.asarray(separation, dtype=np.float64),
            )
        except KeyError as error:
            raise DataValidationError("Invalid model: missing " + error.args[0]) from error
        except ValueError as error:
            raise DataValidationError("Invalid model: " + str(error)) from error


######################################################################
#  D A T A S E T S
######################################################################
@dataclass(frozen=True)
class ManifestEntry:
    """One image of a dataset and its class labels"""

    path: Path
    id: str
    shape: str = ""
    species: str = ""


@dataclass
class DatasetManifest:
    """Images of a dataset sorted by path, plus ingestion notes"""

    entries: List[ManifestEntry]
    notes: List[str] = field(default_factory=list)

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class FailureRecord:
    """Why one image produced no feature row"""

    id: str
    stage: str
    error_type: str
    message: str

    def serialize(self) -> dict:
        return {
            "id": self.id,
            "stage": self.stage,
            "error": self.error_type,
            "message": self.message,
        }
