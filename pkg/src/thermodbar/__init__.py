"""Thermodynamic formalism on finite truncations of the full shift and d-bar continuity checks."""

from .coupling_lab import (cesaro_joining, coupling_kernel, dbar_upper_bounds, floor_and_defect,
                           return_time_lower_bound, simulate_pair, z_chain)
from .dbar_oracle import block_distribution, dbar_sandwich, hamming_ot_lower, iid_dbar_exact
from .gmeasure_lab import CylinderMeasure, GFunction, g_measure, validate_g
from .potential_lab import Potential, holder_distance, variation
from .pressure_lab import gurevich_pressure, spr_classify
from .rpf_transfer import (CylinderFunction, apply_transfer, normalize_to_g,
                           normalized_potential_gap, rpf_eigendata)
from .shift_core import Alphabet, BoundViolation, CapacityError

__version__ = "0.1.0"
