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
Pipeline

Dataset ingestion, the per-image image -> features flow, batch
extraction over a worker pool, and the CSV / JSON / SVG outputs.

Files written
-------------
features.csv          id,label_shape,label_species + the 52 features
failures.json         one record per image that produced no row
run_config.json       the effective RunConfig
{kind}_scores.csv     id,label + one column per projection axis
{kind}_model.json     means, scales, axes, explained variance
{kind}_plot.svg       scatter matrix of the first five axes
"""
import csv
import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import cv2
import matplotlib
import numpy as np
import pandas as pd
from matplotlib.colors import hsv_to_rgb
from matplotlib.figure import Figure
from matplotlib.lines import Line2D

from leafscope import color, contour, imgproc, projection, scagnostics, shape, texture
from leafscope.config import RunConfig
from leafscope.models import (
    FEATURE_NAMES,
    LABEL_COLUMNS,
    BatchFailed,
    ChannelOrder,
    ColorImage,
    Contour,
    DataValidationError,
    DatasetManifest,
    EmptyDataset,
    FailureRecord,
    FeatureMatrix,
    FeatureVector,
    ManifestEntry,
    MissingLabel,
    ProjectionKind,
    UnreadableImage,
)

logger = logging.getLogger(__name__)

SUPPORTED_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp")
FLOAT_FORMAT = "%.10g"
MAX_PLOT_AXES = 5
UNLABELED = "unlabeled"

matplotlib.rcParams["svg.hashsalt"] = "leafscope"


######################################################################
#  I M A G E   I / O
######################################################################
def decode_image(data: bytes, source: str = "<bytes>") -> ColorImage:
    """Decodes PNG / JPEG / BMP bytes into a BGR ColorImage"""
    buffer = np.frombuffer(data, dtype=np.uint8)
    pixels = cv2.imdecode(buffer, cv2.IMREAD_COLOR) if buffer.size else None
    if pixels is None:
        raise UnreadableImage(source)
    return ColorImage(pixels, ChannelOrder.BGR)


def read_image(path: Union[str, Path]) -> ColorImage:
    """Reads an image file into a BGR ColorImage"""
    try:
        data = Path(path).read_bytes()
    except OSError as error:
        raise UnreadableImage(path) from error
    return decode_image(data, str(path))


def write_image(path: Path, img: Union[ColorImage, np.ndarray]) -> Path:
    """Writes a gray array or a ColorImage as PNG"""
    if isinstance(img, ColorImage):
        pixels = img.pixels if img.channel_order is ChannelOrder.BGR else img.pixels[:, :, ::-1]
    else:
        pixels = img
    ok, encoded = cv2.imencode(".png", np.ascontiguousarray(pixels))
    if not ok:
        raise DataValidationError(f"Cannot encode {path}")
    path.write_bytes(encoded.tobytes())
    return path


######################################################################
#  D A T A S E T   I N G E S T I O N
######################################################################
def read_labels(labels_file: Union[str, Path]) -> dict:
    """Reads a filename,shape[,species] CSV into {filename: (shape, species)}"""
    try:
        table = pd.read_csv(labels_file, dtype=str, keep_default_na=False)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as error:
        raise DataValidationError(f"Cannot read labels file {labels_file}: {error}") from error
    table.columns = [str(c).strip().lower() for c in table.columns]
    if "filename" not in table.columns or "shape" not in table.columns:
        raise DataValidationError("Labels file needs 'filename' and 'shape' columns")
    species = table["species"] if "species" in table.columns else [""] * len(table)
    return {
        name.strip(): (shape_label.strip(), species_label.strip())
        for name, shape_label, species_label in zip(table["filename"], table["shape"], species)
    }


def _lookup_label(labels: dict, path: Path, root: Path) -> Optional[Tuple[str, str]]:
    relative = path.relative_to(root)
    keys = [relative.as_posix(), path.name]
    keys += [parent.name for parent in relative.parents if parent.name]
    for key in keys:
        if key in labels:
            return labels[key]
    return None


def ingest_dataset(root: Union[str, Path], labels_file: Optional[Union[str, Path]] = None) -> DatasetManifest:
    """
    Lists the images under root, sorted by path, with their labels

    Labels are matched on relative path, then file name, then the name of
    any parent directory. Unsupported files are skipped with a note.
    """
    root = Path(root)
    if not root.is_dir():
        raise EmptyDataset(f"Dataset directory not found: {root}")
    labels = read_labels(labels_file) if labels_file else None

    entries, notes = [], []
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        if path.suffix.lower() not in SUPPORTED_EXTENSIONS:
            note = f"Skipped unsupported file: {path.relative_to(root).as_posix()}"
            logger.warning(note)
            notes.append(note)
            continue
        shape_label, species_label = "", ""
        if labels is not None:
            found = _lookup_label(labels, path, root)
            if found is None:
                raise MissingLabel(path)
            shape_label, species_label = found
        entries.append(ManifestEntry(path=path, id=path.relative_to(root).as_posix(),
                                     shape=shape_label, species=species_label))

    if not entries:
        raise EmptyDataset(f"No supported images under {root}")
    logger.info("Ingested %d images from %s", len(entries), root)
    return DatasetManifest(entries=entries, notes=notes)


######################################################################
#  P E R - I M A G E   F L O W
######################################################################
class StageFailed(DataValidationError):
    """Wraps an error with the pipeline stage it happened in"""

    def __init__(self, stage: str, error: Exception):
        super().__init__(f"{stage}: {error}")
        self.stage = stage
        self.error = error


@dataclass
class Stages:
    """Intermediate images of the preprocessing chain"""

    rgb: ColorImage
    gray: np.ndarray
    blurred: np.ndarray
    binary: np.ndarray
    stalk_removed: np.ndarray
    closed: np.ndarray
    mask: np.ndarray
    resized_rgb: ColorImage

    def debug_images(self) -> List[Tuple[str, Union[ColorImage, np.ndarray]]]:
        return [
            ("01_rgb.png", self.rgb),
            ("02_gray.png", self.gray),
            ("03_blur.png", self.blurred),
            ("04_binary.png", self.binary),
            ("05_stalk_removed.png", self.stalk_removed),
            ("06_closed.png", self.closed),
            ("07_resized.png", self.mask),
        ]


def preprocess(img: ColorImage, config: RunConfig) -> Stages:
    """Runs the imgproc chain on a BGR photo"""
    rgb = imgproc.bgr_to_rgb(img) if img.channel_order is ChannelOrder.BGR else img
    gray = imgproc.to_grayscale(rgb)
    blurred = imgproc.gaussian_blur(gray, config.blur_kernel, config.blur_sigma)
    _, binary = imgproc.otsu_threshold(blurred)
    stalk_removed = imgproc.remove_stalk(binary)
    closed = imgproc.morphology(stalk_removed, imgproc.Morphology.CLOSE, config.close_kernel)
    return Stages(
        rgb=rgb,
        gray=gray,
        blurred=blurred,
        binary=binary,
        stalk_removed=stalk_removed,
        closed=closed,
        mask=imgproc.resize(closed, config.resize_target, binary=True),
        resized_rgb=imgproc.resize(rgb, config.resize_target),
    )


def features_from_stages(stages: Stages, config: RunConfig) -> Tuple[FeatureVector, Contour]:
    """Computes the 52 features from preprocessed images"""
    stage = "contour"
    try:
        leaf = contour.best_contour(stages.mask)

        stage = "shape"
        shape_part, extras = shape.shape_features(stages.mask, leaf, config.rectangularity_as_printed)

        stage = "texture"
        gray = imgproc.to_grayscale(stages.resized_rgb)
        texture_part = texture.texture_features(gray, stages.mask, config.glcm_levels, config.idm_as_printed)

        stage = "color"
        color_mask = None if config.color_unmasked else stages.mask
        color_part = color.color_moments(stages.resized_rgb, color_mask, config.color_sd_reference)

        stage = "scagnostics"
        options = {"grid": config.hex_grid, "max_cells": config.max_cells, "alpha": config.alpha}
        contour_scag = scagnostics.scagnostics(leaf.points, **options)
        polar = contour.to_polar(leaf, (shape_part.center_x, shape_part.center_y))
        polar_scag = scagnostics.scagnostics(np.column_stack([polar.theta, polar.radius]), **options)
        extremes = scagnostics.polar_extreme_counts(polar)
        correlation = scagnostics.contour_correlation(leaf)

        stage = "validate"
        vector = FeatureVector.from_parts(
            shape_part, texture_part, color_part, contour_scag, polar_scag, extremes, correlation, extras
        )
        if not vector.is_finite():
            bad = [k for k, v in vector.values.items() if not math.isfinite(v)]
            raise DataValidationError(f"Non-finite features: {', '.join(bad)}")
    except StageFailed:
        raise
    except DataValidationError as error:
        raise StageFailed(stage, error) from error
    return vector, leaf


def extract_image_features(img: ColorImage, config: RunConfig) -> FeatureVector:
    """Image -> preprocessing -> contour -> every feature module"""
    try:
        stages = preprocess(img, config)
    except DataValidationError as error:
        raise StageFailed("preprocess", error) from error
    vector, _ = features_from_stages(stages, config)
    return vector


def inspect_image(path: Union[str, Path], config: RunConfig) -> FeatureVector:
    """Reads one image and returns its features"""
    try:
        img = read_image(path)
    except DataValidationError as error:
        raise StageFailed("read", error) from error
    return extract_image_features(img, config)


def process_image(path: Union[str, Path], outdir: Union[str, Path], config: RunConfig) -> List[Path]:
    """Writes the staged debug images of one photo to outdir"""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    stages = preprocess(read_image(path), config)
    written = [write_image(outdir / name, img) for name, img in stages.debug_images()]

    leaf = contour.best_contour(stages.mask)
    hull = contour.convex_hull(leaf)
    canvas = np.ascontiguousarray(stages.resized_rgb.pixels[:, :, ::-1])
    cv2.drawContours(canvas, [leaf.points.astype(np.int32).reshape(-1, 1, 2)], -1, (0, 200, 0), 2)
    cv2.polylines(canvas, [hull.vertices.astype(np.int32).reshape(-1, 1, 2)], True, (0, 0, 255), 1)
    written.append(write_image(outdir / "08_contour.png", canvas))
    logger.info("Wrote %d debug images to %s", len(written), outdir)
    return written


######################################################################
#  B A T C H   E X T R A C T I O N
######################################################################
def _extract_one(entry: ManifestEntry, config: RunConfig) -> Union[FeatureVector, FailureRecord]:
    """Worker body; never raises so one bad image cannot stop the batch"""
    try:
        return inspect_image(entry.path, config)
    except StageFailed as failure:
        return FailureRecord(entry.id, failure.stage, type(failure.error).__name__, str(failure.error))
    except Exception as error:  # pylint: disable=broad-except
        return FailureRecord(entry.id, "unknown", type(error).__name__, str(error))


def extract_features(manifest: DatasetManifest, config: RunConfig) -> Tuple[FeatureMatrix, List[FailureRecord]]:
    """
    Extracts the features of every image in the manifest

    Rows come out in manifest order whatever the worker count. Images that
    fail are left out and reported; more than half failing is fatal.
    """
    entries = manifest.entries
    configs = [config] * len(entries)
    logger.info("Extracting features of %d images with %d worker(s)", len(entries), config.workers)
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as executor:
            results = list(executor.map(_extract_one, entries, configs))
    else:
        results = [_extract_one(entry, config) for entry in entries]

    rows, failures = [], []
    for entry, result in zip(entries, results):
        if isinstance(result, FailureRecord):
            logger.warning("Image %s failed at %s: %s", result.id, result.stage, result.message)
            failures.append(result)
        else:
            rows.append((entry, result))

    if len(failures) * 2 > len(entries):
        logger.error("%d of %d images failed", len(failures), len(entries))
        raise BatchFailed(failures, len(entries))

    matrix = FeatureMatrix(
        ids=[entry.id for entry, _ in rows],
        values=np.array([[vector.values[name] for name in FEATURE_NAMES] for _, vector in rows]).reshape(
            len(rows), len(FEATURE_NAMES)
        ),
        labels={
            "shape": [entry.shape for entry, _ in rows],
            "species": [entry.species for entry, _ in rows],
        },
    )
    logger.info("Extracted %d rows, %d failures", matrix.rows, len(failures))
    return matrix, failures


######################################################################
#  P E R S I S T E N C E
######################################################################
def matrix_to_frame(matrix: FeatureMatrix) -> pd.DataFrame:
    """FeatureMatrix -> DataFrame with the fixed feature CSV columns"""
    frame = pd.DataFrame(matrix.values, columns=list(matrix.feature_names))
    frame.insert(0, "label_species", matrix.labels.get("species", [""] * matrix.rows))
    frame.insert(0, "label_shape", matrix.labels.get("shape", [""] * matrix.rows))
    frame.insert(0, "id", matrix.ids)
    return frame


def write_feature_csv(matrix: FeatureMatrix, path: Union[str, Path]) -> Path:
    """Writes features.csv; floats use %.10g"""
    path = Path(path)
    matrix_to_frame(matrix).to_csv(
        path, index=False, float_format=FLOAT_FORMAT, quoting=csv.QUOTE_MINIMAL, lineterminator="\n"
    )
    logger.info("Wrote %d rows to %s", matrix.rows, path)
    return path


def read_feature_csv(path: Union[str, Path]) -> FeatureMatrix:
    """Reads a features.csv written by write_feature_csv"""
    try:
        frame = pd.read_csv(path, dtype={name: str for name in LABEL_COLUMNS}, keep_default_na=False)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as error:
        raise DataValidationError(f"Cannot read feature table {path}: {error}") from error
    missing = [name for name in LABEL_COLUMNS + FEATURE_NAMES if name not in frame.columns]
    if missing:
        raise DataValidationError(f"Feature table is missing columns: {', '.join(missing)}")
    try:
        values = frame[list(FEATURE_NAMES)].to_numpy(dtype=np.float64)
    except ValueError as error:
        raise DataValidationError(f"Feature table holds non-numeric values: {error}") from error
    if not np.isfinite(values).all():
        raise DataValidationError("Feature table holds non-finite values")
    return FeatureMatrix(
        ids=frame["id"].tolist(),
        values=values,
        labels={"shape": frame["label_shape"].tolist(), "species": frame["label_species"].tolist()},
    )


def write_json(data, path: Union[str, Path]) -> Path:
    """Pretty-printed JSON with a trailing newline"""
    path = Path(path)
    path.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")
    return path


def write_failures(failures: Sequence[FailureRecord], path: Union[str, Path]) -> Path:
    return write_json([failure.serialize() for failure in failures], path)


def run_features(
    input_dir: Union[str, Path],
    labels_file: Optional[Union[str, Path]],
    config: RunConfig,
) -> dict:
    """ingest -> extract -> features.csv, failures.json, run_config.json"""
    outdir = Path(config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = ingest_dataset(input_dir, labels_file)
    try:
        matrix, failures = extract_features(manifest, config)
    except BatchFailed as error:
        write_failures(error.failures, outdir / "failures.json")
        raise
    return {
        "features": write_feature_csv(matrix, outdir / "features.csv"),
        "failures": write_failures(failures, outdir / "failures.json"),
        "config": write_json(config.to_dict(), outdir / "run_config.json"),
    }


######################################################################
#  P R O J E C T I O N   O U T P U T S
######################################################################
def label_color(label: str) -> tuple:
    """Stable RGB color for a label name"""
    digest = hashlib.md5(label.encode("utf-8")).digest()
    hue = int.from_bytes(digest[:2], "big") / 65536.0
    return tuple(float(c) for c in hsv_to_rgb((hue, 0.65, 0.85)))


def _axis_names(kind: ProjectionKind, k: int) -> List[str]:
    prefix = "PC" if kind is ProjectionKind.PCA else "LD"
    return [f"{prefix}{i + 1}" for i in range(k)]


def scatter_matrix_svg(scores: np.ndarray, labels: Sequence[str], axis_names: Sequence[str], path: Path) -> Path:
    """
    Scatter matrix of the score columns, one marker per row in every panel

    Each panel's markers for one label are grouped under the SVG id
    scatter-<row>-<col>-<label index>.
    """
    count = min(len(axis_names), MAX_PLOT_AXES)
    classes = sorted(set(labels))
    labels = np.asarray(labels)
    size = max(3.0, 2.2 * count)
    fig = Figure(figsize=(size + 1.5, size))

    if count == 1:
        panels = [(0, 0, np.arange(len(scores)), scores[:, 0], "row", axis_names[0])]
        grid = (1, 1)
    else:
        panels = [
            (i, j, scores[:, j], scores[:, i], axis_names[j], axis_names[i])
            for i in range(count) for j in range(count) if i != j
        ]
        grid = (count, count)

    for i, j, xs, ys, x_name, y_name in panels:
        ax = fig.add_subplot(grid[0], grid[1], i * grid[1] + j + 1)
        ax.set_gid(f"panel-{i}-{j}")
        for index, name in enumerate(classes):
            members = labels == name
            collection = ax.scatter(xs[members], ys[members], s=12, color=[label_color(name)], linewidths=0)
            collection.set_gid(f"scatter-{i}-{j}-{index}")
        ax.tick_params(labelsize=6)
        if i == grid[0] - 1 or count == 1:
            ax.set_xlabel(x_name, fontsize=7)
        if j == 0 or count == 1:
            ax.set_ylabel(y_name, fontsize=7)
    if count > 1:
        for d in range(count):
            ax = fig.add_subplot(count, count, d * count + d + 1)
            ax.set_axis_off()
            ax.text(0.5, 0.5, axis_names[d], ha="center", va="center", fontsize=10)

    handles = [
        Line2D([], [], linestyle="none", marker="o", color=label_color(name), label=name) for name in classes
    ]
    fig.legend(handles=handles, loc="center right", fontsize=7, frameon=False)
    fig.savefig(path, format="svg", metadata={"Date": None})
    return path


def project_and_plot(
    matrix: FeatureMatrix,
    kind: ProjectionKind,
    label: str = "shape",
    k: Optional[int] = None,
    outdir: Union[str, Path] = "run",
    no_scale: bool = False,
) -> dict:
    """
    Fits PCA or LDA and writes {kind}_scores.csv, {kind}_model.json and {kind}_plot.svg

    LDA ignores rows without a label; PCA plots them as 'unlabeled'.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    labels = matrix.label_column(label)
    if kind is ProjectionKind.LDA:
        labeled = np.array([bool(v) for v in labels])
        if not labeled.all():
            logger.warning("Dropping %d unlabeled rows from LDA", int((~labeled).sum()))
            matrix = matrix.select(labeled)
            labels = matrix.label_column(label)

    std = projection.standardize(matrix.values, matrix.feature_names, no_scale)
    if kind is ProjectionKind.PCA:
        if k is None:
            k = max(1, min(MAX_PLOT_AXES, matrix.rows - 1, len(matrix.feature_names)))
        model, scores = projection.pca_fit(std, k)
    else:
        model, scores = projection.lda_fit(std, labels, k)

    names = _axis_names(kind, model.k)
    plot_labels = [v or UNLABELED for v in labels]
    table = pd.DataFrame(scores, columns=names)
    table.insert(0, "label", plot_labels)
    table.insert(0, "id", matrix.ids)

    prefix = kind.value
    scores_path = outdir / f"{prefix}_scores.csv"
    table.to_csv(scores_path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    model_data = model.serialize()
    model_data["label"] = label
    written = {
        "scores": scores_path,
        "model": write_json(model_data, outdir / f"{prefix}_model.json"),
        "plot": scatter_matrix_svg(scores, plot_labels, names, outdir / f"{prefix}_plot.svg"),
    }
    logger.info("Wrote %s projection outputs to %s", kind.value.upper(), outdir)
    return written
