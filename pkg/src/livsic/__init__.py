"""Numerical lab for Livšic-type cocycle problems over hyperbolic toral automorphisms."""

from .errors import LivsicError
from .torus import TorusPoint, ToralAutomorphism, build_toral, build_perturbed
from .periodic import enumerate_periodic, closing_point, count_periodic
from .lie_groups import AdditiveGroup, MatrixGroup, GroupElement, parse_group
from .cocycles import Generator, TrigTerm, cocycle_eval, coboundary_from, flow_cocycle, holder_constant
from .solver import check_obstruction, solve_transfer, uniqueness_gap, solve_transfer_flow
from .circle import CircleDiffeo, DiffGroup, compose, invert, dr_distance, path_length
from .conformal import distortion, pushforward_form, spd_distance, build_conformal_structure

__version__ = "0.1.0"

__all__ = [
    "LivsicError",
    "TorusPoint",
    "ToralAutomorphism",
    "build_toral",
    "build_perturbed",
    "enumerate_periodic",
    "closing_point",
    "count_periodic",
    "AdditiveGroup",
    "MatrixGroup",
    "GroupElement",
    "parse_group",
    "Generator",
    "TrigTerm",
    "cocycle_eval",
    "coboundary_from",
    "flow_cocycle",
    "holder_constant",
    "check_obstruction",
    "solve_transfer",
    "uniqueness_gap",
    "solve_transfer_flow",
    "CircleDiffeo",
    "DiffGroup",
    "compose",
    "invert",
    "dr_distance",
    "path_length",
    "distortion",
    "pushforward_form",
    "spd_distance",
    "build_conformal_structure",
]
