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
Package: leafscope
Leaf image feature extraction and projection

This module creates and configures the Flask app that serves the feature
extractor over HTTP and hosts the command line interface, and sets up
logging for the whole package
"""
from flask import Flask
from leafscope import config
from leafscope.utils import log_handlers

__version__ = "1.0.0"

# Create Flask application
app = Flask(__name__)
app.config.from_object(config)

# Dependencies require we import the routes AFTER the Flask app is created
# pylint: disable=wrong-import-position, wrong-import-order, cyclic-import
from leafscope import routes, models        # noqa: F401, E402
from leafscope.utils import error_handlers, cli_commands  # noqa: F401, E402

# Set up logging for production
log_handlers.init_logging(app, "gunicorn.error")

app.logger.info(70 * "*")
app.logger.info("  L E A F S C O P E   F E A T U R E   S E R V I C E  ".center(70, "*"))
app.logger.info(70 * "*")

app.logger.info("Service initialized with %d features", len(models.FEATURE_NAMES))
