"""Global geometric entanglement of translation-invariant infinite matrix product states."""

from .errors import GeoEntError
from .geoent import geoent_asymptotic, geoent_finite, single_copy, transfer_block, weyl_bounds
from .imps import InfiniteMPS, canonicalize, load_imps, random_imps, save_imps
from .models import ITEBDOptions, itebd_ground_state, tfim, tfim_exact

__version__ = "0.1.0"

__all__ = [
    "GeoEntError",
    "ITEBDOptions",
    "InfiniteMPS",
    "canonicalize",
    "geoent_asymptotic",
    "geoent_finite",
    "itebd_ground_state",
    "load_imps",
    "random_imps",
    "save_imps",
    "single_copy",
    "tfim",
    "tfim_exact",
    "transfer_block",
    "weyl_bounds",
]
