from .logging_config import setup_logging
from .config import settings

setup_logging()

from .scalars import QuadExact, scalar_eq
from .isometry import Isometry, PointH3, apply, classify, conjugate_to_normal_form, delta
from .transforms import ClosedFormPair, PointPairFunction, closed_form_pair, fourier_g, shc_transform
from .groupdata import GroupSlice, bundled_path, enumerate_order, load_order_config, load_slice
from .correspondence import UnitaryRep, check_assumptions, decompose, hecke_apply_to_kernel, load_rep
from .conjugacy import centralizer_data, is_primitive, reduce_classes
from .trace import SpectralData, elliptic_number, geometric_side, heat_trace_geometric, spectral_side
from .huber import SpectrumPackage, compare_spectra, corollary_check, resolvent_identity_residual


__all__ = [
    "settings",
    "QuadExact",
    "scalar_eq",
    "Isometry",
    "PointH3",
    "apply",
    "classify",
    "conjugate_to_normal_form",
    "delta",
    "ClosedFormPair",
    "PointPairFunction",
    "closed_form_pair",
    "fourier_g",
    "shc_transform",
    "GroupSlice",
    "bundled_path",
    "enumerate_order",
    "load_order_config",
    "load_slice",
    "UnitaryRep",
    "check_assumptions",
    "decompose",
    "hecke_apply_to_kernel",
    "load_rep",
    "centralizer_data",
    "is_primitive",
    "reduce_classes",
    "SpectralData",
    "elliptic_number",
    "geometric_side",
    "heat_trace_geometric",
    "spectral_side",
    "SpectrumPackage",
    "compare_spectra",
    "corollary_check",
    "resolvent_identity_residual",
]
