"""Estimators and exact asymptotics for sifted-bit correlations and optimum fits."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import ParameterError

__all__ = [
    "transition_probability",
    "ptrans_from_counts",
    "DetectorOrder",
    "all_orders",
    "asymptotic_ptrans",
    "asymptotic_ptrans_avg",
    "firing_order_mc",
    "FitResult",
    "fit_constants",
    "REFERENCE_C_SBR",
    "REFERENCE_C_RHO",
]

REFERENCE_C_SBR = 1.433
REFERENCE_C_RHO = 5.92

# detectors 1 and 3 carry '1', detectors 2 and 4 carry '0'
DETECTOR_BIT = {1: 1, 2: 0, 3: 1, 4: 0}


def transition_probability(bits) -> float:
    """Fraction of adjacent pairs in a bit string whose values differ.

    Accepts a ``str`` of '0'/'1' characters or any sequence of 0/1 integers.
    """
    if isinstance(bits, str):
        arr = np.frombuffer(bits.encode("ascii"), dtype=np.uint8) - ord("0")
    else:
        arr = np.asarray(bits, dtype=np.uint8)
    if arr.ndim != 1 or arr.size < 2:
        raise ParameterError("transition probability needs at least two bits")
    if arr.max(initial=0) > 1:
        raise ParameterError("bit string may only contain 0 and 1")
    flips = np.count_nonzero(arr[1:] != arr[:-1])
    return flips / (arr.size - 1)


def ptrans_from_counts(transitions: int, n_bits: int) -> float:
    """Streaming form of :func:`transition_probability`; NaN below two bits."""
    if n_bits < 2:
        return float("nan")
    return transitions / (n_bits - 1)


@dataclass(frozen=True)
class DetectorOrder:
    """Cyclic firing order of the four detectors, starting at detector 1."""

    cycle: tuple[int, int, int, int]

    def __post_init__(self):
        cycle = tuple(int(d) for d in self.cycle)
        if sorted(cycle) != [1, 2, 3, 4]:
            raise ParameterError(f"detector order {self.cycle!r} is not a permutation of 1..4")
        if cycle[0] != 1:
            raise ParameterError(f"detector order must start with detector 1, got {self.cycle!r}")
        object.__setattr__(self, "cycle", cycle)

    @classmethod
    def parse(cls, text: str) -> "DetectorOrder":
        try:
            cycle = tuple(int(part) for part in text.strip().split("-"))
        except ValueError:
            raise ParameterError(f"malformed detector order {text!r}; expected e.g. 1-3-4-2") from None
        if len(cycle) != 4:
            raise ParameterError(f"detector order {text!r} must name four detectors")
        return cls(cycle)

    def bit(self, detector: int) -> int:
        return DETECTOR_BIT[detector]

    def __str__(self) -> str:
        return "-".join(str(d) for d in self.cycle)


def all_orders() -> list[DetectorOrder]:
    return [DetectorOrder((1,) + rest) for rest in itertools.permutations((2, 3, 4))]


def asymptotic_ptrans(order: DetectorOrder) -> Fraction:
    """Probability that the next sifted bit differs, under strictly cyclic firing.

    Every detection is sifted independently with probability 1/2, so the
    next sifted bit comes from cyclic offset ``j`` with probability
    ``2**-j``.  Summing the offsets whose bit differs from detector 1 over
    all cycles gives the offset-1..4 sum times ``1/(1 - 2**-4) = 16/15``.
    """
    first = order.bit(order.cycle[0])
    partial = sum(
        (Fraction(1, 2**j) for j in range(1, 5) if order.bit(order.cycle[j % 4]) != first),
        Fraction(0),
    )
    return Fraction(16, 15) * partial


def asymptotic_ptrans_avg() -> Fraction:
    """Mean of :func:`asymptotic_ptrans` over the six equally likely orders."""
    values = [asymptotic_ptrans(o) for o in all_orders()]
    return sum(values, Fraction(0)) / len(values)


def firing_order_mc(n_events: int = 1_000_000, seed: int = 0) -> float:
    """Brute-force check of the asymptotic transition probability.

    Each of the six orders fires its detectors cyclically for
    ``n_events / 6`` detections; a fair coin decides whether a detection is
    sifted.  Returns the mean transition probability over the orders.
    """
    rng = np.random.default_rng(seed)
    orders = all_orders()
    per_order = n_events // len(orders)
    if per_order < 8:
        raise ParameterError("need at least 8 events per order")
    results = []
    for order in orders:
        bits = np.array([order.bit(d) for d in order.cycle], dtype=np.uint8)
        stream = np.resize(bits, per_order)
        kept = stream[rng.random(per_order) < 0.5]
        results.append(transition_probability(kept))
    return float(np.mean(results))


@dataclass(frozen=True)
class FitResult:
    """Refit of the optimum-rate constants in dead-time-normalized form.

    ``c_sbr`` fits ``2 * k_opt * sbr_norm_opt`` (twice the sifted bits per
    dead time at the optimum) and ``c_rho`` fits ``8p * k_opt``.
    """

    c_sbr: float
    c_rho: float
    residual_norm: float
    sbr_deviations: tuple[float, ...] = field(default=())
    rho_deviations: tuple[float, ...] = field(default=())


def _lstsq_constant(y: np.ndarray) -> tuple[float, np.ndarray]:
    design = np.ones((y.size, 1))
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return float(coef[0]), y - coef[0]


def fit_constants(sweep: Iterable[Sequence[float]], *, min_points: int = 3, min_span: float = 10.0) -> FitResult:
    """Least-squares refit of the maximum-rate and optimum-rate constants.

    ``sweep`` holds ``(p, k_opt, sbr_norm_opt)`` triples, e.g. from
    :func:`deadtime_qkd.model.find_optimum`.  Both relations are fit in
    relative form, ``2 k sbr ~ c_sbr`` and ``8 p k ~ c_rho``, so every loss
    weighs equally.  Deviations are reported per point, relative to the fit.
    """
    pts = np.asarray([tuple(map(float, row)) for row in sweep], dtype=float)
    if pts.size == 0 or pts.ndim != 2 or pts.shape[1] != 3:
        raise ParameterError("fit needs (p, k_opt, sbr_norm_opt) triples")
    p, k, s = pts.T
    distinct = np.unique(p)
    if distinct.size < min_points:
        raise ParameterError(f"fit needs at least {min_points} distinct loss values, got {distinct.size}")
    if distinct.max() / distinct.min() < min_span:
        raise ParameterError(f"fit points must span a factor {min_span:g} in p")
    c_sbr, r1 = _lstsq_constant(2.0 * k * s)
    c_rho, r2 = _lstsq_constant(8.0 * p * k)
    return FitResult(
        c_sbr=c_sbr,
        c_rho=c_rho,
        residual_norm=float(np.sqrt(np.sum((r1 / c_sbr) ** 2) + np.sum((r2 / c_rho) ** 2))),
        sbr_deviations=tuple(float(x) for x in r1 / c_sbr),
        rho_deviations=tuple(float(x) for x in r2 / c_rho),
    )
