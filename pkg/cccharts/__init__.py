"""
cccharts - Canonical Coordinate Charts for Vector Fields

Builds and validates coordinate charts adapted to finite families of C^1
vector fields: the Picard solver for the chart Jacobian, Carnot-Caratheodory
ball estimation, adapted Holder and Zygmund norms, density comparisons and
multi-parameter scaling maps for graded systems.
"""

from pathlib import Path

# Package version
__version__ = "1.0.0"

# Package metadata
__author__ = "cccharts developers"
__license__ = "MIT"

# Package-level constants
PACKAGE_DIR = Path(__file__).parent
PROJECT_ROOT = PACKAGE_DIR.parent
DEFAULT_OUTPUT_DIR = Path("./cccharts_out")

# Import main components for easier access
from .config import Config, SolverSettings, ensure_output_directory, load_config, load_settings
from .errors import CCChartsError, ConfigError
from .expr import Expr, parse
from .fields import Box, VectorField, VectorSystem, select_J0
from .flows import FlowOptions, flow, flow_trajectory
from .odecore import picard_solve
from .ccmetric import CCParams, ball_volume, cc_distance, doubling_estimate
from .funcspaces import holder_norm, zygmund_norm, adapted_holder_norm, adapted_zygmund_norm, inclusion_check
from .chart import Chart, ChartConfig, build_chart
from .density import Density, ball_measure_compare, weighted_ball_measure
from .scaling import GradedSystem, hormander_expand, lambda_, nsw_chart, volume_vs_lambda
from .systems import CATALOG, get_system

# Define what's available when using "from cccharts import *"
__all__ = [
    'Box',
    'CATALOG',
    'CCChartsError',
    'CCParams',
    'Chart',
    'ChartConfig',
    'Config',
    'ConfigError',
    'DEFAULT_OUTPUT_DIR',
    'Density',
    'Expr',
    'FlowOptions',
    'GradedSystem',
    'PACKAGE_DIR',
    'PROJECT_ROOT',
    'SolverSettings',
    'VectorField',
    'VectorSystem',
    'adapted_holder_norm',
    'adapted_zygmund_norm',
    'ball_measure_compare',
    'ball_volume',
    'build_chart',
    'cc_distance',
    'doubling_estimate',
    'ensure_output_directory',
    'flow',
    'flow_trajectory',
    'get_system',
    'holder_norm',
    'hormander_expand',
    'inclusion_check',
    'lambda_',
    'load_config',
    'load_settings',
    'nsw_chart',
    'parse',
    'picard_solve',
    'select_J0',
    'volume_vs_lambda',
    'weighted_ball_measure',
    'zygmund_norm',
    '__version__',
]
