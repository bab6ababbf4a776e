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

# pylint: disable=cyclic-import
"""
Leaf Feature Service

Paths:
------
GET /health - Returns the health status
GET / - Returns the service name, version and feature count
GET /features/schema - Returns the 52 feature names in column order
POST /features - Returns the features of the posted leaf image
"""

from flask import request, abort
from leafscope.config import load_run_config
from leafscope.models import FEATURE_NAMES, DataValidationError
from leafscope.pipeline import decode_image, extract_image_features
from leafscope.utils import status  # HTTP Status Codes
from . import app, __version__  # Import Flask application

IMAGE_TYPES = ("image/png", "image/jpeg", "image/bmp")


############################################################
# Health Endpoint
############################################################
@app.route("/health")
def health():
    """Health Status"""
    return {"status": "OK"}, status.HTTP_200_OK


######################################################################
# GET INDEX
######################################################################
@app.route("/")
def index():
    """Root URL response"""
    app.logger.info("Request for Root URL")
    return (
        {
            "name": "Leaf Feature Service",
            "version": __version__,
            "features": len(FEATURE_NAMES),
            "paths": ["/health", "/features/schema", "/features"],
        },
        status.HTTP_200_OK,
    )


######################################################################
# FEATURE SCHEMA
######################################################################
@app.route("/features/schema", methods=["GET"])
def feature_schema():
    """Returns the feature names in the order they appear in features.csv"""
    app.logger.info("Request for the feature schema")
    return {"features": list(FEATURE_NAMES)}, status.HTTP_200_OK


######################################################################
# EXTRACT FEATURES
######################################################################
@app.route("/features", methods=["POST"])
def extract_features():
    """
    Extracts the features of one leaf image

    The body is either the raw image (image/png, image/jpeg, image/bmp)
    or a multipart form with the image in the 'image' field. The query
    parameters glcm_levels and alpha override the defaults.
    """
    app.logger.info("Request to extract features")
    data = read_image_body()
    config = load_run_config(
        glcm_levels=query_number("glcm_levels", int),
        alpha=query_number("alpha", float),
    )
    vector = extract_image_features(decode_image(data, "request body"), config)
    app.logger.info("Returning %d features", len(vector.values))
    return vector.serialize(), status.HTTP_200_OK


######################################################################
#  U T I L I T Y   F U N C T I O N S
######################################################################


def read_image_body() -> bytes:
    """Returns the posted image bytes after checking the media type"""
    content_type = request.headers.get("Content-Type")
    if not content_type:
        abort(status.HTTP_400_BAD_REQUEST, "No Content-Type set")

    media_type = content_type.split(";")[0].strip().lower()
    if media_type in IMAGE_TYPES:
        return request.get_data()
    if media_type == "multipart/form-data":
        upload = request.files.get("image")
        if upload is None:
            abort(status.HTTP_400_BAD_REQUEST, "Form field 'image' is missing")
        return upload.read()

    app.logger.error("Invalid Content-Type: %s", content_type)
    abort(
        status.HTTP_415_UNSUPPORTED_MEDIA_TYPE,
        f"Content-Type must be one of {', '.join(IMAGE_TYPES)} or multipart/form-data",
    )


def query_number(name: str, kind: type):
    """Reads an optional numeric query parameter"""
    raw = request.args.get(name)
    if raw is None:
        return None
    try:
        return kind(raw)
    except ValueError as error:
        raise DataValidationError(f"Query parameter {name} must be a number, got {raw!r}") from error
