import os
from pathlib import Path

# Configuration
OUTPUT_DIR_ENV = "RELNET_OUTPUT_DIR"
FALLBACK_OUTPUT_DIR = "runs"


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, FALLBACK_OUTPUT_DIR))


FLOAT_FORMAT = ".12g"
MANIFEST_NAME = "manifest.json"

DEFAULT_SEED = 20240101
DEFAULT_SAMPLES = 100_000
DEFAULT_SHARDS = 16
DEFAULT_THREADS = os.cpu_count() or 1

# Numerics
SURVIVAL_TAIL = 1e-12
MTTF_ABS_TOL = 1e-8
MTTF_HORIZON = 1e6
MAX_MULTIPLICITY = 10_000
MAX_COMPONENTS = 30
MAX_ENUMERATED_EDGES = 20
IPF_TOL = 1e-10
IPF_MAX_SWEEPS = 100_000
ANALYTIC_WINDOW = 3
