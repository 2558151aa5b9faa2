"""General constants"""

import os

__version__ = '0.0.0'

DEBUG_MODE = ((os.getenv('POLYFLOW_DEBUG') or '').upper() == 'TRUE')

# Worker pool size for domain scans and method comparisons.
DEFAULT_JOBS = int(os.getenv('POLYFLOW_JOBS', '1'))

DEFAULT_OUTPUT_DIR = os.getenv('POLYFLOW_OUTPUT_DIR', 'polyflow-out')

# Version of the JSON artifacts (models, configs, sidecars).
SCHEMA_VERSION = 1

# Central finite differences
DEFAULT_FD_STEP = 1e-5

# Singular values below RANK_TOL * sigma_max are dropped.
DEFAULT_RANK_TOL = float(os.getenv('POLYFLOW_RANK_TOL', '1e-10'))

# Stop test of the Riccati iteration, relative to max(1, |P|).
DARE_TOL = 1e-10
# Once below DARE_STALL_TOL, the iteration stops when the relative step has
# not reached a new minimum for DARE_STALL_WINDOW iterations.
DARE_STALL_TOL = 1e-6
DARE_STALL_WINDOW = 100
DARE_MAX_ITER = 10000

OBSERVABILITY_TOL = 1e-8

# Closed loops with spectral radius >= 1 - STABILITY_MARGIN are rejected.
STABILITY_MARGIN = 1e-8

# Gilbert-Tan redundancy slack and iteration cap.
INVARIANT_SET_SLACK = 1e-8
INVARIANT_SET_MAX_STEPS = 200

POLYTOPE_CONTAINS_TOL = 1e-9

# Quadratic regularization of the LP oracle.
LP_REGULARIZATION = 1e-9
LP_DUALITY_GAP_TOL = 1e-7

QP_EPS_PRIMAL = 1e-8
QP_EPS_DUAL = 1e-8
QP_EPS_INFEASIBLE = 1e-6
QP_RHO = 1.0
QP_SIGMA = 1e-6
QP_ALPHA = 1.6
QP_MAX_ITER = 20000
QP_ADAPT_INTERVAL = 25
QP_SCALING_ITER = 10

DEFAULT_GRID_RESOLUTION = 101
DEFAULT_RUN_STEPS = 100

# Significant digits in CSV output.
CSV_PRECISION = 12
