######################################################################
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
######################################################################

"""
Command Line Interface

Usage:
    leafscope process IMAGE --out DIR          staged debug images
    leafscope features --input DIR --labels CSV --out DIR
    leafscope project FEATURES_CSV --kind pca|lda --label shape|species
    leafscope inspect IMAGE                    feature JSON on stdout

The same group is available as `flask leaf ...`. Exit codes are 0 on
success, 1 on usage errors and 2 on data errors.
"""
import functools
import json
import logging
from pathlib import Path
from typing import List, Optional

import click

from leafscope import app, pipeline
from leafscope.config import SD_REFERENCES, load_run_config
from leafscope.models import DataValidationError, ProjectionKind
from leafscope.utils import log_handlers, status


class DataError(click.ClickException):
    """A data error surfaced on the command line"""

    exit_code = status.EXIT_DATA_ERROR


def handles_data_errors(func):
    """Turns DataValidationError and OSError into exit code 2"""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (DataValidationError, OSError) as error:
            app.logger.error("%s: %s", type(error).__name__, error)
            raise DataError(str(error)) from error

    return wrapper


def run_options(func):
    """Options mirroring the RunConfig fields"""
    options = [
        click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False),
                     help="KEY=value file with RunConfig settings"),
        click.option("--width", "resize_width", type=int, help="Resize width in pixels [1600]"),
        click.option("--height", "resize_height", type=int, help="Resize height in pixels [1200]"),
        click.option("--blur-kernel", type=int, help="Gaussian kernel size, odd [55]"),
        click.option("--blur-sigma", type=float, help="Gaussian sigma, 0 derives it from the kernel"),
        click.option("--close-kernel", type=int, help="Hole closing kernel size, odd [5]"),
        click.option("--glcm-levels", type=int, help="GLCM gray levels [8]"),
        click.option("--hex-grid", type=int, help="Starting hexagon grid width [40]"),
        click.option("--max-cells", type=int, help="Most non-empty hexagon cells [250]"),
        click.option("--alpha", type=float, help="Alpha hull radius, defaults to the outlier cutoff"),
        click.option("--rectangularity-as-printed", is_flag=True, help="Rectangularity = perimeter^2 / area"),
        click.option("--idm-as-printed", is_flag=True, help="IDM over off-diagonal cells, h / (a - b)^2"),
        click.option("--color-unmasked", is_flag=True, help="Color moments over every pixel"),
        click.option("--color-sd-reference", type=click.Choice(SD_REFERENCES), help="Reference of the color SD"),
        click.option("--workers", type=int, help="Worker processes (env LEAF_WORKERS)"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def build_config(config_file: Optional[str], output_dir: Optional[str] = None, **options):
    """Loads the RunConfig; flags only override when set"""
    overrides = {key: (value or None) if isinstance(value, bool) else value for key, value in options.items()}
    return load_run_config(config_file, output_dir=output_dir, **overrides)


######################################################################
# Command group
######################################################################
@click.group(name="leaf")
@click.option("-v", "--verbose", is_flag=True, help="Log per-image detail")
@click.option("-q", "--quiet", is_flag=True, help="Only log warnings and errors")
def cli(verbose: bool, quiet: bool):
    """Leaf image feature extraction and projection"""
    if verbose:
        log_handlers.set_level(app, logging.DEBUG)
    elif quiet:
        log_handlers.set_level(app, logging.WARNING)


######################################################################
# Staged debug images
# Usage: leafscope process leaf.png --out debug/
######################################################################
@cli.command("process")
@click.argument("image", type=click.Path(dir_okay=False))
@click.option("--out", "output_dir", type=click.Path(file_okay=False), help="Output directory [run]")
@run_options
@handles_data_errors
def process_command(image: str, output_dir: Optional[str], config_file: Optional[str], **options):
    """Writes the intermediate images of one leaf photo"""
    config = build_config(config_file, output_dir, **options)
    for path in pipeline.process_image(image, config.output_dir, config):
        click.echo(str(path))


######################################################################
# Dataset feature extraction
# Usage: leafscope features --input ./leaves --labels labels.csv --out run/
######################################################################
@cli.command("features")
@click.option("--input", "input_dir", required=True, type=click.Path(file_okay=False), help="Dataset directory")
@click.option("--labels", "labels_file", type=click.Path(dir_okay=False), help="filename,shape,species CSV")
@click.option("--out", "output_dir", type=click.Path(file_okay=False), help="Output directory [run]")
@run_options
@handles_data_errors
def features_command(input_dir: str, labels_file: Optional[str], output_dir: Optional[str],
                     config_file: Optional[str], **options):
    """Extracts features.csv and failures.json from a directory of leaf images"""
    config = build_config(config_file, output_dir, **options)
    written = pipeline.run_features(input_dir, labels_file, config)
    for path in written.values():
        click.echo(str(path))


######################################################################
# PCA / LDA projection
# Usage: leafscope project --kind lda --label shape run/features.csv
######################################################################
@cli.command("project")
@click.argument("features_csv", type=click.Path(dir_okay=False))
@click.option("--kind", type=click.Choice([k.value for k in ProjectionKind]), default="pca", show_default=True)
@click.option("--label", type=click.Choice(["shape", "species"]), default="shape", show_default=True)
@click.option("--k", "k", type=int, help="Number of axes [PCA 5, LDA classes - 1]")
@click.option("--out", "output_dir", type=click.Path(file_okay=False), help="Output directory [next to the CSV]")
@click.option("--no-scale", is_flag=True, help="Center the features without scaling them")
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False),
              help="KEY=value file with RunConfig settings (NO_SCALE)")
@handles_data_errors
def project_command(features_csv: str, kind: str, label: str, k: Optional[int],
                    output_dir: Optional[str], no_scale: bool, config_file: Optional[str]):
    """Projects a feature table with PCA or LDA and plots the scores"""
    config = build_config(config_file, no_scale=no_scale)
    matrix = pipeline.read_feature_csv(features_csv)
    outdir = Path(output_dir) if output_dir else Path(features_csv).parent
    written = pipeline.project_and_plot(matrix, ProjectionKind(kind), label, k, outdir, config.no_scale)
    for path in written.values():
        click.echo(str(path))


######################################################################
# Single image features
# Usage: leafscope inspect leaf.png
######################################################################
@cli.command("inspect")
@click.argument("image", type=click.Path(dir_okay=False))
@run_options
@handles_data_errors
def inspect_command(image: str, config_file: Optional[str], **options):
    """Prints the features of one leaf image as JSON"""
    config = build_config(config_file, **options)
    vector = pipeline.inspect_image(image, config)
    click.echo(json.dumps(vector.serialize(), indent=2))


app.cli.add_command(cli)


def main(argv: Optional[List[str]] = None) -> int:
    """Runs the command group and returns the exit code"""
    try:
        result = cli.main(args=argv, prog_name="leafscope", standalone_mode=False)
    except click.UsageError as error:
        error.show()
        return status.EXIT_USAGE_ERROR
    except click.ClickException as error:
        error.show()
        return error.exit_code
    except click.Abort:
        click.echo("Aborted!", err=True)
        return status.EXIT_USAGE_ERROR
    return result if isinstance(result, int) else status.EXIT_OK
