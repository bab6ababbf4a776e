######################################################################
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
######################################################################

"""
Test cases for standardization, PCA and LDA
"""
import logging
from unittest import TestCase

import numpy as np

from leafscope import app, projection
from leafscope.models import DegenerateClass, InvalidK, NeedTwoClasses, ProjectionKind, TooFewRows


def two_classes(rng, separation: float = 10.0, rows: int = 200):
    first = rng.normal(size=(rows, 3))
    second = rng.normal(size=(rows, 3)) + (separation, 0, 0)
    return np.vstack([first, second]), ["a"] * rows + ["b"] * rows


######################################################################
#  S T A N D A R D I Z E   T E S T   C A S E S
######################################################################
class TestStandardize(TestCase):
    """Column standardization"""

    def test_sample_deviation(self):
        """It should divide by the sample standard deviation"""
        std = projection.standardize(np.array([[1.0], [2.0], [3.0]]))
        np.testing.assert_allclose(std.values[:, 0], [-1.0, 0.0, 1.0])

    def test_constant_column(self):
        """It should zero and flag a constant column"""
        values = np.array([[1.0, 5.0], [2.0, 5.0], [4.0, 5.0]])
        std = projection.standardize(values, ["a", "b"])
        self.assertEqual(std.values[:, 1].tolist(), [0.0, 0.0, 0.0])
        self.assertEqual(std.constant_columns, ["b"])
        self.assertEqual(std.scales[1], 1.0)

    def test_no_scale(self):
        """It should only center the columns"""
        std = projection.standardize(np.array([[1.0, 10.0], [3.0, 30.0]]), no_scale=True)
        self.assertEqual(std.values.tolist(), [[-1.0, -10.0], [1.0, 10.0]])

    def test_too_few_rows(self):
        """It should refuse a single row"""
        self.assertRaises(TooFewRows, projection.standardize, np.ones((1, 4)))


######################################################################
#  P C A   T E S T   C A S E S
######################################################################
class TestPCA(TestCase):
    """Principal component analysis"""

    @classmethod
    def setUpClass(cls):
        """This runs once before the entire test suite"""
        app.logger.setLevel(logging.CRITICAL)

    def setUp(self):
        self.rng = np.random.default_rng(7)

    def test_isotropic(self):
        """It should split the variance evenly for an isotropic sample"""
        std = projection.standardize(self.rng.normal(size=(10000, 2)))
        model, _ = projection.pca_fit(std, 2)
        np.testing.assert_allclose(model.explained, [0.5, 0.5], atol=0.02)

    def test_known_covariance(self):
        """It should recover the 4:1 variance split of diag(4, 1)"""
        data = self.rng.normal(size=(10000, 2)) * (2.0, 1.0)
        model, _ = projection.pca_fit(projection.standardize(data, no_scale=True), 2)
        np.testing.assert_allclose(model.explained, [0.8, 0.2], atol=0.02)
        self.assertGreater(abs(model.axes[0, 0]), 0.99)

    def test_properties(self):
        """It should give orthonormal axes and sorted explained variance"""
        data = self.rng.normal(size=(60, 6)) @ self.rng.normal(size=(6, 6))
        std = projection.standardize(data)
        model, scores = projection.pca_fit(std, 6)
        np.testing.assert_allclose(model.axes.T @ model.axes, np.eye(6), atol=1e-8)
        self.assertTrue(np.all(np.diff(model.explained) <= 1e-12))
        self.assertLessEqual(model.cumulative[-1], 1 + 1e-8)
        np.testing.assert_allclose(scores @ model.axes.T, std.values, atol=1e-6)
        np.testing.assert_allclose(model.transform(data), scores, atol=1e-9)
        self.assertEqual(model.kind, ProjectionKind.PCA)

    def test_sign_rule(self):
        """It should make the largest loading of every axis positive"""
        model, _ = projection.pca_fit(projection.standardize(self.rng.normal(size=(30, 4))), 3)
        for column in model.axes.T:
            self.assertGreater(column[np.argmax(np.abs(column))], 0)

    def test_bad_k(self):
        """It should refuse k outside [1, min(rows - 1, columns)]"""
        std = projection.standardize(self.rng.normal(size=(5, 8)))
        self.assertRaises(InvalidK, projection.pca_fit, std, 0)
        self.assertRaises(InvalidK, projection.pca_fit, std, 5)
        model, scores = projection.pca_fit(std, 4)
        self.assertEqual(scores.shape, (5, 4))
        self.assertEqual(model.k, 4)


######################################################################
#  L D A   T E S T   C A S E S
######################################################################
class TestLDA(TestCase):
    """Fisher linear discriminant analysis"""

    @classmethod
    def setUpClass(cls):
        """This runs once before the entire test suite"""
        app.logger.setLevel(logging.CRITICAL)

    def setUp(self):
        self.rng = np.random.default_rng(12)

    def test_separated_classes(self):
        """It should pull well separated class means far apart on LD1"""
        data, labels = two_classes(self.rng)
        model, scores = projection.lda_fit(projection.standardize(data), labels)
        self.assertEqual(model.k, 1)
        self.assertEqual(model.classes, ["a", "b"])
        first, second = scores[:200, 0], scores[200:, 0]
        spread = np.sqrt((first.var(ddof=1) + second.var(ddof=1)) / 2)
        self.assertGreater(abs(first.mean() - second.mean()), 5 * spread)

    def test_two_class_direction(self):
        """It should point LD1 along S_W^-1 (mu1 - mu2)"""
        data, labels = two_classes(self.rng, separation=3.0)
        std = projection.standardize(data)
        model, _ = projection.lda_fit(std, labels)
        within, _, _ = projection.scatter_matrices(std.values, labels)
        difference = std.values[:200].mean(axis=0) - std.values[200:].mean(axis=0)
        expected = np.linalg.solve(within, difference)
        cosine = abs(expected @ model.axes[:, 0]) / np.linalg.norm(expected)
        self.assertGreater(cosine, np.cos(1e-4))

    def test_rank_bound(self):
        """It should give at most classes - 1 axes"""
        data = np.vstack([self.rng.normal(size=(10, 6)) + offset for offset in range(5)])
        labels = [name for name in "vwxyz" for _ in range(10)]
        model, scores = projection.lda_fit(projection.standardize(data), labels)
        self.assertEqual(model.k, 4)
        self.assertEqual(scores.shape, (50, 4))
        self.assertTrue(np.all(np.diff(model.eigenvalues) <= 1e-12))
        self.assertRaises(InvalidK, projection.lda_fit, projection.standardize(data), labels, 5)

    def test_rescaling(self):
        """It should keep the class separation when features are rescaled"""
        data, labels = two_classes(self.rng, separation=2.0, rows=40)
        base, _ = projection.lda_fit(projection.standardize(data), labels)
        scaled, _ = projection.lda_fit(projection.standardize(data * (1000.0, 0.01, 7.0)), labels)
        np.testing.assert_allclose(scaled.separation, base.separation, rtol=1e-6)

    def test_singular_scatter(self):
        """It should regularize a within-class scatter with more columns than rows"""
        data = self.rng.normal(size=(8, 12))
        data[4:] += 3.0
        labels = ["a"] * 4 + ["b"] * 4
        model, scores = projection.lda_fit(projection.standardize(data), labels)
        self.assertTrue(np.isfinite(scores).all())
        self.assertEqual(model.kind, ProjectionKind.LDA)

    def test_bad_classes(self):
        """It should refuse one class or a class with a single row"""
        std = projection.standardize(self.rng.normal(size=(6, 3)))
        self.assertRaises(NeedTwoClasses, projection.lda_fit, std, ["a"] * 6)
        self.assertRaises(DegenerateClass, projection.lda_fit, std, ["a"] * 5 + ["b"])
