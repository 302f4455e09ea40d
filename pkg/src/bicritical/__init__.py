"""Numerical toolkit for rigidity experiments on bicritical circle maps."""

from .errors import BicriticalError
from .numerics import ContinuedFraction, cf_digits, set_precision, working_precision
from .maps import (ArnoldMulticritical, BlaschkeBicritical, BlaschkeUnicritical, CircleMap, TrigBicritical,
                   map_from_dict, rotated_copy, rotation_number_digits, signature, tune_golden_trig,
                   tune_rotation)
from .partitions import real_bounds_report, return_interval, standard_partition
from .renorm import extract_pair, normalize, pair_distance, renormalize, validate_pair
from .finegrid import GridConfig, auxiliary_partition, chain_for, fine_grid, vertex_address
from .rigidity import ConjugacyOnOrbits, DecaySeries, rigidity_battery

__version__ = "0.1.0"
