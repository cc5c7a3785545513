"""Compressive-sensing direction-of-arrival estimation for colocated MIMO radar."""

from .baselines import apes_spectrum, capon_spectrum, glrt_statistic, matched_filter_virtual
from .estimator import (AngleGrid, DantzigError, SparseSpectrum, build_angle_grid, build_basis,
                        build_sensing_operator, draw_measurement, find_peaks, refine_grid,
                        select_threshold, solve_dantzig)
from .geometry import (ArrayGeometry, Jammer, NoiseModel, Target, generate_waveforms,
                       project_aperture, random_geometry, snr_to_sigma, steering_vector,
                       synthesize_received)
from .metrics import SjrReport, empirical_sjr, prr, theoretical_sjr
from .runner import run_scenario, run_sjr, sweep
from .scenario import Scenario, ScenarioError, load_scenario

__version__ = "0.1.0"
