# scamfqi/core/config.py
import os
from dotenv import load_dotenv

load_dotenv()

# Runtime configuration
OUTPUT_DIR = os.getenv("SCAMFQI_OUT")
LOG_LEVEL = os.getenv("SCAMFQI_LOG_LEVEL", "INFO")
N_JOBS = int(os.getenv("SCAMFQI_N_JOBS", "1"))
MAX_TABLE_ENTRIES = int(os.getenv("SCAMFQI_MAX_TABLE", "100000"))

# Experiment defaults
DEFAULT_GAMMA = 0.99
DEFAULT_EPSILON = 0.15
DEFAULT_HORIZON = 500
DEFAULT_BOOTSTRAP_RESAMPLES = 10000
DEFAULT_CI_LEVEL = 0.95

# Numerical tolerances
PROB_TOL = 1e-12
RANGE_TOL = 1e-9


def resolve_output_dir(configured: str | None) -> str:
    """SCAMFQI_OUT wins over whatever the config file says"""
    if OUTPUT_DIR:
        return OUTPUT_DIR
    return configured or "runs/default"
