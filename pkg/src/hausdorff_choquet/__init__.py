"""Certified Hausdorff-content brackets, Choquet integrals and capacitary Sobolev checks."""

__version__ = "0.1.0"

from .choquet import ChoquetBracket, ThresholdLadder, choquet_integral, make_ladder
from .content import Ball, ContentBracket, ContentOptions, Cover, content_bracket, exact_small, greedy_upper
from .errors import BracketInversionError, CapacityError, ValidationError
from .grid import DiscreteSet, Grid, ScalarField, closed_superlevel, make_grid, superlevel

__all__ = [
    "Ball",
    "BracketInversionError",
    "CapacityError",
    "ChoquetBracket",
    "ContentBracket",
    "ContentOptions",
    "Cover",
    "DiscreteSet",
    "Grid",
    "ScalarField",
    "ThresholdLadder",
    "ValidationError",
    "choquet_integral",
    "closed_superlevel",
    "content_bracket",
    "exact_small",
    "greedy_upper",
    "make_grid",
    "make_ladder",
    "superlevel",
]
