# mmlio/settings.py
"""
Algorithm parameters for one run.

Every concern keeps its own pydantic model next to the code that uses it;
`Settings` bundles them under dotted section names. Parameter files are
flat `section.key=value` lines read with the same parser as `.env` files.
"""

import logging
import os

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from mmlio.errors import ConfigError
from mmlio.features.classify import FeatureParams
from mmlio.imu.preintegration import ImuNoise
from mmlio.pipeline.params import PipelineParams
from mmlio.posegraph.graph import GraphParams
from mmlio.posegraph.loop import LoopParams
from mmlio.precal.calibration import PrecalParams
from mmlio.precal.gicp import GicpParams
from mmlio.swo.config import SwoConfig

logger = logging.getLogger(__name__)


class Settings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    imu: ImuNoise = Field(default_factory=ImuNoise)
    features: FeatureParams = Field(default_factory=FeatureParams)
    gicp: GicpParams = Field(default_factory=GicpParams)
    precal: PrecalParams = Field(default_factory=PrecalParams)
    swo: SwoConfig = Field(default_factory=SwoConfig)
    loop: LoopParams = Field(default_factory=LoopParams)
    graph: GraphParams = Field(default_factory=GraphParams)
    pipeline: PipelineParams = Field(default_factory=PipelineParams)

    def flat(self):
        """Dotted-key view of every value, for the run report."""
        out = {}
        for section, values in self.model_dump(mode="json").items():
            for key, value in values.items():
                out[f"{section}.{key}"] = value
        return out

    def updated(self, values):
        return build_settings(values, base=self)


def parse_assignments(items):
    """['swo.window_size=5', ...] -> {'swo.window_size': '5'}"""
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(item, "expected key=value")
        out[key.strip()] = value.strip()
    return out


def build_settings(values, base=None):
    """Apply dotted-key values on top of `base` (defaults when None)."""
    nested = (base or Settings()).model_dump()
    for key, value in values.items():
        section, _, name = key.partition(".")
        if section not in Settings.model_fields or not name:
            raise ConfigError(key, "unknown setting")
        model = Settings.model_fields[section].annotation
        if name not in model.model_fields:
            raise ConfigError(key, "unknown setting")
        nested[section][name] = None if value in ("", "none", "None") else value
    try:
        return Settings.model_validate(nested)
    except ValidationError as exc:
        err = exc.errors()[0]
        raise ConfigError(".".join(str(p) for p in err["loc"]), err["msg"]) from exc


def load_settings(path=None, overrides=None):
    """
    Defaults, then the parameter file at `path` (or $MMLIO_PARAMS_FILE), then
    `overrides` (a dict of dotted keys or a list of key=value strings).
    """
    path = path or os.environ.get("MMLIO_PARAMS_FILE")
    values = {}
    if path:
        if not os.path.exists(path):
            raise ConfigError("params_file", f"parameter file {path} does not exist")
        values.update({k: v for k, v in dotenv_values(path).items() if v is not None})
        logger.info(f"Loaded {len(values)} parameters from {path}")
    if isinstance(overrides, dict):
        values.update(overrides)
    else:
        values.update(parse_assignments(overrides))
    return build_settings(values)
