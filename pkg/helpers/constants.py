"""This module contains constants used throughout the application. """

from dotenv import load_dotenv
from helpers.errors import ValidationError
from helpers.utils import get_env_variable

# Values from a local .env file fill in anything the environment does not set
load_dotenv()


def _env_float(name, default):
    value = get_env_variable(name, default)
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{name} must be a number, got {value!r}")


def _env_int(name, default):
    value = get_env_variable(name, default)
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{name} must be an integer, got {value!r}")


APP_NAME = get_env_variable('APP_NAME', 'SIRf Analyzer')

# Logging
LOG_FILE = get_env_variable('LOG_FILE', 'sirf.log')
LOG_LEVEL = get_env_variable('LOG_LEVEL', 'INFO').upper()

# Expression checks
POSITIVITY_GRID = _env_int('POSITIVITY_GRID', 10001)
MONOTONE_GRID = _env_int('MONOTONE_GRID', 10001)

# Equilibrium search and classification
GRID_POINTS = _env_int('GRID_POINTS', 4096)
BISECTION_TOL = _env_float('BISECTION_TOL', 1e-12)
RESIDUAL_TOL = _env_float('RESIDUAL_TOL', 1e-10)
TANGENCY_TOL = _env_float('TANGENCY_TOL', 1e-8)
TIE_TOL = _env_float('TIE_TOL', 1e-8)
POLE_GUARD = 1e-14
RIGHT_END_EPS = 1e-9

# Integration
RK4_STEP = _env_float('RK4_STEP', 1e-3)
RKF45_ATOL = _env_float('RKF45_ATOL', 1e-9)
RKF45_RTOL = _env_float('RKF45_RTOL', 1e-9)
RKF45_MIN_STEP = _env_float('RKF45_MIN_STEP', 1e-12)
INVARIANCE_TOL = _env_float('INVARIANCE_TOL', 1e-9)

# Convergence and basin mapping
CONVERGENCE_RADIUS = _env_float('CONVERGENCE_RADIUS', 1e-6)
FIELD_NORM_TOL = _env_float('FIELD_NORM_TOL', 1e-8)
BASIN_STEP = _env_float('BASIN_STEP', 1e-2)
BASIN_T_END = _env_float('BASIN_T_END', 300.0)
WORKERS = _env_int('WORKERS', 4)

# Periodicity probe
RETURN_RADIUS = 1e-6
MIN_EXCURSION = 1e-3

# Identifiers used in reports and basin maps
DISEASE_FREE_ID = 'DF'
UNRESOLVED_ID = 'unresolved'
