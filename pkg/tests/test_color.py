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
Test cases for the color moments
"""
import math
from unittest import TestCase

import numpy as np

from leafscope.color import color_moments
from leafscope.models import ChannelOrder, ColorImage, DataValidationError, EmptyForeground
from tests.factories import disk_mask


def solid(r: int, g: int, b: int, size=(6, 4)) -> ColorImage:
    pixels = np.empty((size[1], size[0], 3), dtype=np.uint8)
    pixels[:] = (r, g, b)
    return ColorImage(pixels, ChannelOrder.RGB)


######################################################################
#  C O L O R   M O M E N T   T E S T   C A S E S
######################################################################
class TestColorMoments(TestCase):
    """Channel proportions and dispersion"""

    def test_pure_red(self):
        """It should give all of the intensity to red"""
        features = color_moments(solid(255, 0, 0))
        self.assertEqual((features.mean_r, features.mean_g, features.mean_b), (1.0, 0.0, 0.0))

    def test_gray(self):
        """It should split a gray region evenly"""
        features = color_moments(solid(100, 100, 100))
        for value in (features.mean_r, features.mean_g, features.mean_b):
            self.assertAlmostEqual(value, 1 / 3, places=12)

    def test_constant_color(self):
        """It should give zero dispersion for a constant color"""
        features = color_moments(solid(30, 160, 70))
        self.assertEqual((features.sd_r, features.sd_g, features.sd_b), (0.0, 0.0, 0.0))

    def test_proportion_reference(self):
        """It should measure the spread around M with the proportion reference"""
        img = solid(30, 160, 70)
        features = color_moments(img, sd_reference="proportion")
        share = 160 / 260
        self.assertAlmostEqual(features.sd_g, math.sqrt(24 * (160 - share) ** 2) / (24 * 260), places=12)

    def test_black(self):
        """It should give zeros when there is no intensity at all"""
        features = color_moments(solid(0, 0, 0))
        self.assertEqual(list(features.as_dict().values()), [0.0] * 6)

    def test_formula(self):
        """It should divide the root sum of squares by the total intensity"""
        pixels = np.array([[[10, 0, 0], [30, 0, 0]]], dtype=np.uint8)
        features = color_moments(ColorImage(pixels, ChannelOrder.RGB))
        self.assertEqual(features.mean_r, 1.0)
        self.assertAlmostEqual(features.sd_r, math.sqrt(200) / 40, places=12)

    def test_channel_swap(self):
        """It should swap red and blue statistics when the channels are swapped"""
        pixels = np.random.default_rng(6).integers(0, 256, (20, 30, 3), dtype=np.uint8)
        mask = disk_mask(8, (30, 20))
        straight = color_moments(ColorImage(pixels, ChannelOrder.RGB), mask)
        swapped = color_moments(ColorImage(np.ascontiguousarray(pixels[:, :, ::-1]), ChannelOrder.RGB), mask)
        self.assertEqual(straight.mean_r, swapped.mean_b)
        self.assertEqual(straight.sd_r, swapped.sd_b)
        self.assertEqual(straight.mean_g, swapped.mean_g)

    def test_bgr_order(self):
        """It should read channels by name whatever the storage order"""
        pixels = np.zeros((2, 2, 3), dtype=np.uint8)
        pixels[:, :, 0] = 90
        features = color_moments(ColorImage(pixels, ChannelOrder.BGR))
        self.assertEqual(features.mean_b, 1.0)

    def test_mask(self):
        """It should only use the masked pixels"""
        pixels = np.zeros((4, 4, 3), dtype=np.uint8)
        pixels[:2] = (0, 200, 0)
        pixels[2:] = (255, 255, 255)
        mask = np.zeros((4, 4), dtype=np.uint8)
        mask[:2] = 255
        features = color_moments(ColorImage(pixels, ChannelOrder.RGB), mask)
        self.assertEqual(features.mean_g, 1.0)
        unmasked = color_moments(ColorImage(pixels, ChannelOrder.RGB))
        self.assertLess(unmasked.mean_g, 1.0)

    def test_bad_masks(self):
        """It should refuse an empty or mismatched mask"""
        img = solid(1, 2, 3)
        self.assertRaises(EmptyForeground, color_moments, img, np.zeros((4, 6), dtype=np.uint8))
        self.assertRaises(DataValidationError, color_moments, img, np.zeros((3, 3), dtype=np.uint8))
