# cSpell: ignore dotenv glcm
"""
Global Configuration for Application
"""
import os
import logging
from dataclasses import asdict, dataclass, fields
from typing import Optional

from dotenv import dotenv_values

from leafscope.models import ConfigurationError

# Get configuration from environment
LOGGING_LEVEL = getattr(logging, os.getenv("LOGGING_LEVEL", "INFO").upper(), logging.INFO)

# Secret for session management
SECRET_KEY = os.getenv("SECRET_KEY", "sup3r-s3cr3t")

# Largest image accepted by POST /features
MAX_CONTENT_LENGTH = int(os.getenv("MAX_CONTENT_LENGTH", str(32 * 1024 * 1024)))

SD_REFERENCES = ("pixel", "proportion")


@dataclass(frozen=True)
class RunConfig:
    """Every knob of the image -> features -> projection pipeline"""

    resize_width: int = 1600
    resize_height: int = 1200
    blur_kernel: int = 55
    blur_sigma: float = 0.0
    close_kernel: int = 5
    glcm_levels: int = 8
    hex_grid: int = 40
    max_cells: int = 250
    alpha: Optional[float] = None
    rectangularity_as_printed: bool = False
    idm_as_printed: bool = False
    color_unmasked: bool = False
    color_sd_reference: str = "pixel"
    no_scale: bool = False
    workers: int = 1
    output_dir: str = "run"

    def __post_init__(self):
        for name in ("resize_width", "resize_height", "blur_kernel", "close_kernel",
                     "hex_grid", "max_cells", "workers"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("blur_kernel", "close_kernel"):
            if getattr(self, name) % 2 == 0:
                raise ConfigurationError(f"{name} must be odd, got {getattr(self, name)}")
        if self.blur_sigma < 0:
            raise ConfigurationError(f"blur_sigma must be >= 0, got {self.blur_sigma}")
        if not 2 <= self.glcm_levels <= 256:
            raise ConfigurationError(f"glcm_levels must be in [2, 256], got {self.glcm_levels}")
        if self.alpha is not None and self.alpha <= 0:
            raise ConfigurationError(f"alpha must be positive, got {self.alpha}")
        if self.color_sd_reference not in SD_REFERENCES:
            raise ConfigurationError(
                f"color_sd_reference must be one of {SD_REFERENCES}, got {self.color_sd_reference}"
            )

    @property
    def resize_target(self) -> tuple:
        return (self.resize_width, self.resize_height)

    def to_dict(self) -> dict:
        """Returns the effective configuration as a plain dictionary"""
        return asdict(self)


def _coerce(name: str, raw: str):
    """Converts a config file string to the type of the RunConfig field"""
    kind = {f.name: f.type for f in fields(RunConfig)}[name]
    text = raw.strip()
    try:
        if kind in (bool, "bool"):
            return text.lower() in ("yes", "y", "true", "t", "1")
        if kind in (int, "int"):
            return int(text)
        if kind in (float, "float"):
            return float(text)
        if name == "alpha":
            return None if text.lower() in ("", "none") else float(text)
    except ValueError as error:
        raise ConfigurationError(f"Bad value for {name.upper()}: {raw!r}") from error
    return text


def load_run_config(config_file: Optional[str] = None, **overrides) -> RunConfig:
    """
    Builds a RunConfig

    Precedence: defaults < config file (KEY=value) < LEAF_WORKERS < overrides
    """
    settings = {}
    if config_file:
        known = {f.name for f in fields(RunConfig)}
        for key, raw in dotenv_values(config_file).items():
            name = key.lower()
            if name not in known:
                raise ConfigurationError(f"Unknown config key {key} in {config_file}")
            settings[name] = _coerce(name, raw or "")
    if os.getenv("LEAF_WORKERS"):
        try:
            settings["workers"] = int(os.environ["LEAF_WORKERS"])
        except ValueError as error:
            raise ConfigurationError(f"LEAF_WORKERS must be an integer, got {os.environ['LEAF_WORKERS']!r}") from error
    settings.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig(**settings)
    except TypeError as error:
        raise ConfigurationError(str(error)) from error
