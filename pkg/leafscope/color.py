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
Color moment features

M is the share of the region's total intensity held by a channel.
SD is sqrt(sum((c - ref)^2)) / total intensity, where ref is either the
mean pixel value of the channel ("pixel") or M ("proportion").
"""
import logging
import math
from typing import Optional

import numpy as np

from leafscope.models import ColorFeatures, ColorImage, DataValidationError, EmptyForeground

logger = logging.getLogger(__name__)


def color_moments(
    img: ColorImage,
    mask: Optional[np.ndarray] = None,
    sd_reference: str = "pixel",
) -> ColorFeatures:
    """Computes the six color moments over the masked pixels, or all pixels when mask is None"""
    if mask is None:
        selected = np.ones((img.height, img.width), dtype=bool)
    else:
        if mask.shape != (img.height, img.width):
            raise DataValidationError(f"Mask shape {mask.shape} does not match image {img.height}x{img.width}")
        selected = mask > 0
    if not selected.any():
        raise EmptyForeground("Color mask has no foreground pixels")

    channels = {name: img.channel(name)[selected].astype(np.int64) for name in "rgb"}
    totals = {name: int(values.sum()) for name, values in channels.items()}
    total = sum(totals.values())

    means, sds = {}, {}
    for name, values in channels.items():
        means[name] = totals[name] / total if total else 0.0
        if sd_reference == "proportion":
            reference = means[name]
        else:
            reference = totals[name] / len(values)
        spread = math.sqrt(float(np.sum((values - reference) ** 2)))
        sds[name] = spread / total if total else 0.0

    logger.debug("Color over %d pixels, total intensity %d", int(selected.sum()), total)
    return ColorFeatures(
        mean_r=means["r"],
        mean_g=means["g"],
        mean_b=means["b"],
        sd_r=sds["r"],
        sd_g=sds["g"],
        sd_b=sds["b"],
    )
