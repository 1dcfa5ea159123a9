"""Numerical laboratory for energy-conservation criteria of inhomogeneous and
compressible Euler flows: increment seminorms, mollifier commutators, boundary
layers and energy budgets."""

from .commutators import (ScalingFit, fit_power_law, grad_scaling, onsager_alpha, power_commutator_scaling,
                          product_commutator, taylor_defect_check)
from .errors import LabError
from .fields import Field, TimeSeriesField, load_field, lp_norm, save_field, shift
from .geometry import Bounded2D, LayerSpec, Torus, coarea_check, disk, layer_average, make_domain, rounded_square
from .mollify import MollifierKernel, grad_mollified, mollify, mollify_power
from .roughgen import RoughSpec, bounded_density, lacunary_scalar, lacunary_vector, leray_project, white_noise
from .seminorms import ShiftSet, dyadic_shifts, full_shifts, seminorm, time_seminorm, vanishing_probe

__version__ = "0.1.0"
