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
Module: error_handlers

Every error leaves the service as {status, error, message} JSON
"""
from flask import jsonify
from leafscope import app
from leafscope.models import DataValidationError
from . import status


def _error_response(code: int, error: str, message: str):
    return jsonify(status=code, error=error, message=message), code


######################################################################
# Error Handlers
######################################################################
@app.errorhandler(DataValidationError)
def request_validation_error(error):
    """Handles images and parameters that cannot be turned into features"""
    return bad_request(error)


@app.errorhandler(status.HTTP_400_BAD_REQUEST)
def bad_request(error):
    """Handles bad requests with 400_BAD_REQUEST"""
    message = str(error)
    app.logger.warning(message)
    return _error_response(status.HTTP_400_BAD_REQUEST, "Bad Request", message)


@app.errorhandler(status.HTTP_404_NOT_FOUND)
def not_found(error):
    """Handles resources not found with 404_NOT_FOUND"""
    message = str(error)
    app.logger.warning(message)
    return _error_response(status.HTTP_404_NOT_FOUND, "Not Found", message)


@app.errorhandler(status.HTTP_405_METHOD_NOT_ALLOWED)
def method_not_supported(error):
    """Handles unsupported HTTP methods with 405_METHOD_NOT_SUPPORTED"""
    message = str(error)
    app.logger.warning(message)
    return _error_response(status.HTTP_405_METHOD_NOT_ALLOWED, "Method not Allowed", message)


@app.errorhandler(status.HTTP_413_REQUEST_ENTITY_TOO_LARGE)
def request_entity_too_large(error):
    """Handles uploads above MAX_CONTENT_LENGTH with 413_REQUEST_ENTITY_TOO_LARGE"""
    message = str(error)
    app.logger.warning(message)
    return _error_response(status.HTTP_413_REQUEST_ENTITY_TOO_LARGE, "Request Entity Too Large", message)


@app.errorhandler(status.HTTP_415_UNSUPPORTED_MEDIA_TYPE)
def mediatype_not_supported(error):
    """Handles unsupported media requests with 415_UNSUPPORTED_MEDIA_TYPE"""
    message = str(error)
    app.logger.warning(message)
    return _error_response(status.HTTP_415_UNSUPPORTED_MEDIA_TYPE, "Unsupported media type", message)


@app.errorhandler(status.HTTP_500_INTERNAL_SERVER_ERROR)
def internal_server_error(error):
    """Handles unexpected server error with 500_SERVER_ERROR"""
    message = str(error)
    app.logger.error(message)
    return _error_response(status.HTTP_500_INTERNAL_SERVER_ERROR, "Internal Server Error", message)
