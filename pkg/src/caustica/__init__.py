"""High-order persistence of resonant caustics in perturbed circular billiards."""

from .deformations import (BivariatePoly, DeformationSpec, SymmetryClass, chi_exponent,
                           degree_check, detect_symmetry, load_spec, support_from_cartesian)
from .expansions import ExpansionState, MultiIndex, enumerate_multi_indices
from .fourier import CausticaError, RotationNumber, TrigPoly, apply_operator, invert_delta
from .persistence import (PersistenceReport, Tolerances, compute_correction, correct_deformation,
                          melnikov_potential, nu_factor, persistence_step, run_analysis,
                          theta1_closed_form, zeta3_reference, zeta_extract)

__version__ = "0.1.0"
