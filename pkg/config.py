# config.py
import os
import logging
from dotenv import load_dotenv

# Load environment variables from .env file if it exists
basedir = os.path.abspath(os.path.dirname(__file__))
dotenv_path = os.path.join(basedir, '.env')
if os.path.exists(dotenv_path):
    load_dotenv(dotenv_path)

# Module-level logger
logger = logging.getLogger(__name__)


def _flag(name, default):
    return os.environ.get(name, default).lower() in ('1', 'true', 'yes')


class Config:
    """Base configuration."""
    LOGGING_LEVEL = os.environ.get('LOGGING_LEVEL', 'INFO').upper()

    # tqdm bars for simulation and runs
    PROGRESS = _flag('MMLIO_PROGRESS', 'true')

    # Default algorithm parameter file (flat section.key=value lines)
    PARAMS_FILE = os.environ.get('MMLIO_PARAMS_FILE')

    # Front-end workers; 0 runs every stage on the calling thread
    WORKERS = int(os.environ.get('MMLIO_WORKERS', '1'))

    OUTPUT_DIR = os.environ.get('MMLIO_OUTPUT_DIR', os.path.join(basedir, 'runs'))

    @staticmethod
    def _assert(var_name: str):
        """Helper to ensure a required environment variable is set."""
        value = os.environ.get(var_name)
        if not value:
            raise RuntimeError(f"Required environment variable '{var_name}' is not set.")
        return value

    @property
    def SERIAL(self):
        return self.WORKERS == 0


class DevelopmentConfig(Config):
    """Development configuration."""
    DEBUG = True
    LOGGING_LEVEL = os.environ.get('LOGGING_LEVEL', 'DEBUG').upper()


class BatchConfig(Config):
    """Unattended runs: no progress bars, results under a required output directory."""
    DEBUG = False
    PROGRESS = False

    def __init__(self):
        super().__init__()
        logger.info("Applying batch config checks...")
        self.OUTPUT_DIR = self._assert('MMLIO_OUTPUT_DIR')
        if self.WORKERS < 0:
            raise RuntimeError("MMLIO_WORKERS must be 0 (serial) or positive")
        logger.info("Batch config checks passed.")


class TestingConfig(Config):
    """Testing configuration."""
    TESTING = True
    DEBUG = True
    PROGRESS = False
    # Parameter files from the developer's environment must not leak into tests
    PARAMS_FILE = None
    LOGGING_LEVEL = 'WARNING'


# Dictionary to easily retrieve config class by name
config_by_name = {
    'development': DevelopmentConfig,
    'batch': BatchConfig,
    'testing': TestingConfig
}
