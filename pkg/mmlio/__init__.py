# mmlio/__init__.py
"""Multi-modal LiDAR-inertial odometry: simulator, calibration, odometry and mapping."""
import os
import sys
import logging

from config import config_by_name

__version__ = "0.3.0"


def configure(config_name=None):
    """Select the environment profile and set up logging; returns the profile instance."""
    if config_name is None:
        config_name = os.getenv('MMLIO_CONFIG', 'development')
    try:
        selected_config = config_by_name[config_name]()
    except KeyError:
        print(f" ! WARNING: Invalid MMLIO_CONFIG '{config_name}'. Falling back to development.")
        selected_config = config_by_name['development']()
        config_name = 'development'
    except RuntimeError as e:
        print(f"!!! FATAL CONFIGURATION ERROR: {e}")
        sys.exit(f"Configuration Error: {e}")

    log_level = getattr(logging, selected_config.LOGGING_LEVEL, logging.INFO)
    logging.basicConfig(
        level=log_level,
        format='%(asctime)s %(levelname)s %(name)s %(threadName)s : %(message)s'
    )
    logging.getLogger(__name__).debug(f"Configured profile '{config_name}'")
    return selected_config
