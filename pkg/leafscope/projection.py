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
Projections

Column standardization (sample standard deviation), PCA from the
covariance eigen-decomposition and multiclass Fisher LDA from the
generalized eigenproblem of the between- and within-class scatter.
"""
import logging
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from leafscope.models import (
    DegenerateClass,
    InvalidK,
    NeedTwoClasses,
    ProjectionKind,
    ProjectionModel,
    TooFewRows,
)

logger = logging.getLogger(__name__)

RIDGE_FACTOR = 1e-6
CONDITION_LIMIT = 1e10


class Standardized(NamedTuple):
    """A standardized matrix with the parameters that produced it"""

    values: np.ndarray
    means: np.ndarray
    scales: np.ndarray
    constant: np.ndarray
    feature_names: List[str]

    @property
    def constant_columns(self) -> List[str]:
        return [name for name, flag in zip(self.feature_names, self.constant) if flag]


def standardize(
    values: np.ndarray,
    feature_names: Optional[Sequence[str]] = None,
    no_scale: bool = False,
) -> Standardized:
    """
    Centers every column and scales it to unit sample variance

    Constant columns become all zeros, keep a scale of 1 and are flagged.
    With no_scale the columns are only centered.
    """
    data = np.asarray(values, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 2:
        raise TooFewRows(f"Standardizing needs 2 rows, got {data.shape[0] if data.ndim == 2 else data.ndim}")
    names = list(feature_names) if feature_names is not None else [f"x{i}" for i in range(data.shape[1])]

    means = data.mean(axis=0)
    constant = np.ptp(data, axis=0) == 0
    if no_scale:
        scales = np.ones(data.shape[1])
    else:
        scales = data.std(axis=0, ddof=1)
        scales[constant] = 1.0
    z = (data - means) / scales
    z[:, constant] = 0.0
    if constant.any():
        logger.debug("Constant columns left at zero: %s", [n for n, c in zip(names, constant) if c])
    return Standardized(values=z, means=means, scales=scales, constant=constant, feature_names=names)


def _orient(axes: np.ndarray) -> np.ndarray:
    """Flips each column so its largest-magnitude loading is positive"""
    lead = axes[np.argmax(np.abs(axes), axis=0), np.arange(axes.shape[1])]
    return axes * np.where(lead < 0, -1.0, 1.0)


def pca_fit(std: Standardized, k: int) -> Tuple[ProjectionModel, np.ndarray]:
    """
    Principal axes of the standardized matrix

    k must lie in [1, min(rows - 1, columns)]. Returns the model and the
    (rows, k) scores.
    """
    rows, cols = std.values.shape
    if not 1 <= k <= min(rows - 1, cols):
        raise InvalidK(f"k must be in [1, {min(rows - 1, cols)}], got {k}")

    covariance = np.atleast_2d(np.cov(std.values, rowvar=False))
    eigenvalues, vectors = np.linalg.eigh(covariance)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = np.clip(eigenvalues[order], 0.0, None)
    vectors = vectors[:, order]

    total = eigenvalues.sum()
    explained = eigenvalues / total if total > 0 else np.zeros_like(eigenvalues)
    axes = _orient(vectors[:, :k])
    model = ProjectionModel(
        kind=ProjectionKind.PCA,
        feature_names=list(std.feature_names),
        means=std.means,
        scales=std.scales,
        axes=axes,
        explained=explained[:k],
        eigenvalues=eigenvalues[:k],
        constant_columns=std.constant_columns,
    )
    logger.info("PCA: first %d axes explain %.3f of the variance", min(k, 5), float(model.cumulative[min(k, 5) - 1]))
    return model, std.values @ axes


def scatter_matrices(values: np.ndarray, labels: Sequence[str]) -> Tuple[np.ndarray, np.ndarray, List[str]]:
    """Within-class and between-class scatter, plus the sorted class names"""
    labels = np.asarray(labels)
    classes = sorted(set(labels.tolist()))
    if len(classes) < 2:
        raise NeedTwoClasses(f"LDA needs 2 classes, got {len(classes)}")

    overall = values.mean(axis=0)
    cols = values.shape[1]
    within = np.zeros((cols, cols))
    between = np.zeros((cols, cols))
    for name in classes:
        members = values[labels == name]
        if len(members) < 2:
            raise DegenerateClass(f"Class '{name}' has {len(members)} row(s), LDA needs 2")
        centered = members - members.mean(axis=0)
        within += centered.T @ centered
        offset = (members.mean(axis=0) - overall)[:, None]
        between += len(members) * (offset @ offset.T)
    return within, between, classes


def class_separation(scores: np.ndarray, labels: Sequence[str]) -> np.ndarray:
    """Between-class over within-class sum of squares of every score column"""
    labels = np.asarray(labels)
    overall = scores.mean(axis=0)
    between = np.zeros(scores.shape[1])
    within = np.zeros(scores.shape[1])
    for name in sorted(set(labels.tolist())):
        members = scores[labels == name]
        center = members.mean(axis=0)
        between += len(members) * (center - overall) ** 2
        within += ((members - center) ** 2).sum(axis=0)
    return np.divide(between, within, out=np.full_like(between, np.inf), where=within > 0)


def lda_fit(std: Standardized, labels: Sequence[str], k: Optional[int] = None) -> Tuple[ProjectionModel, np.ndarray]:
    """
    Fisher discriminant axes maximizing between- against within-class scatter

    At most classes - 1 axes exist; k defaults to that. A near-singular
    within-class scatter gets a ridge of 1e-6 * trace / columns.
    """
    values = std.values
    within, between, classes = scatter_matrices(values, labels)
    cols = values.shape[1]
    limit = min(len(classes) - 1, cols)
    k = limit if k is None else k
    if not 1 <= k <= limit:
        raise InvalidK(f"k must be in [1, {limit}], got {k}")

    if np.linalg.matrix_rank(within) < cols or np.linalg.cond(within) > CONDITION_LIMIT:
        ridge = RIDGE_FACTOR * np.trace(within) / cols or RIDGE_FACTOR
        logger.warning("Within-class scatter is near singular, adding ridge %.3g", ridge)
        within = within + ridge * np.eye(cols)

    eigenvalues, vectors = linalg.eigh(between, within)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = np.clip(eigenvalues[order], 0.0, None)
    vectors = vectors[:, order][:, :k]
    axes = _orient(vectors / np.linalg.norm(vectors, axis=0))

    total = eigenvalues.sum()
    explained = eigenvalues[:k] / total if total > 0 else np.zeros(k)
    scores = values @ axes
    model = ProjectionModel(
        kind=ProjectionKind.LDA,
        feature_names=list(std.feature_names),
        means=std.means,
        scales=std.scales,
        axes=axes,
        explained=explained,
        eigenvalues=eigenvalues[:k],
        constant_columns=std.constant_columns,
        classes=classes,
        separation=class_separation(scores, labels),
    )
    logger.info("LDA: %d classes, %d axes, separation %s", len(classes), k, np.round(model.separation, 3).tolist())
    return model, scores
