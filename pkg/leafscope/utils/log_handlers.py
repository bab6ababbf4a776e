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
Log Handlers

This module contains utility functions to set up logging
consistently for the HTTP service and the command line
"""
import logging

LOG_FORMAT = "[%(asctime)s] [%(levelname)s] [%(module)s] %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S %z"


def init_logging(app, logger_name: str):
    """
    Set up logging for production

    The app logger is the package logger, so every leafscope.* module
    logs through these handlers. Under gunicorn its handlers are reused;
    otherwise records go to stderr.
    """
    app.logger.propagate = False
    server_logger = logging.getLogger(logger_name)
    if server_logger.handlers:
        app.logger.handlers = server_logger.handlers
        level = server_logger.level or app.config.get("LOGGING_LEVEL", logging.INFO)
    else:
        app.logger.handlers = [logging.StreamHandler()]
        level = app.config.get("LOGGING_LEVEL", logging.INFO)
    app.logger.setLevel(level)
    # Make all log formats consistent
    formatter = logging.Formatter(LOG_FORMAT, DATE_FORMAT)
    for handler in app.logger.handlers:
        handler.setFormatter(formatter)
    app.logger.info("Logging handler established")


def set_level(app, level: int) -> None:
    """Changes the level of the package logger"""
    app.logger.setLevel(level)
