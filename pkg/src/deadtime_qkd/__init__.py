"""Dead-time limited BB84: sifted-bit-rate model, exact oracles and Monte-Carlo simulator."""

from .errors import BoundaryMaximumError, ConvergenceError, ParameterError, SizeCapError
from .model import (
    LinkParams,
    RateModelPoint,
    SeqLenDist,
    find_optimum,
    p00,
    p00_noisy,
    sbr_norm,
    seq_len_dist,
    sift_prob,
)

__version__ = "0.1.0"

__all__ = [
    "BoundaryMaximumError",
    "ConvergenceError",
    "LinkParams",
    "ParameterError",
    "RateModelPoint",
    "SeqLenDist",
    "SizeCapError",
    "find_optimum",
    "p00",
    "p00_noisy",
    "sbr_norm",
    "seq_len_dist",
    "sift_prob",
]
