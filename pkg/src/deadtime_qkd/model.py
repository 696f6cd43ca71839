"""Analytic sifted-bit-rate model for a four-detector BB84 receiver.

Everything here works in normalized units: ``p`` is the per-detector,
per-slot probability of producing a sifted bit (``p = L/8``), ``k`` is the
detector dead time counted in transmission slots and ``eps`` the per-detector
per-slot noise probability.  Physical units only appear at the CLI boundary.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import BoundaryMaximumError, ParameterError

__all__ = [
    "LinkParams",
    "SeqLenDist",
    "RateModelPoint",
    "DEFAULT_NMAX",
    "loss_db_to_linear",
    "linear_to_loss_db",
    "p00",
    "p00_noisy",
    "noise_rates",
    "seq_len_dist",
    "sift_prob",
    "sbr_norm",
    "rate_point",
    "sifted_per_dead_time",
    "find_optimum",
]

DEFAULT_NMAX = 6
CONVENTIONS = ("additive", "exact")


def loss_db_to_linear(loss_db: float) -> float:
    """Convert a (negative) link loss in dB to a detection probability."""
    return 10.0 ** (loss_db / 10.0)


def linear_to_loss_db(loss: float) -> float:
    return 10.0 * math.log10(loss)


def _check_k(k) -> int:
    if isinstance(k, bool) or not isinstance(k, numbers.Integral):
        raise ParameterError(f"dead time k must be a non-negative integer, got {k!r}")
    if k < 0:
        raise ParameterError(f"dead time k must be >= 0, got {k}")
    return int(k)


def _check_p(p) -> float:
    p = float(p)
    if not (0.0 <= p <= 0.125):
        raise ParameterError(f"sift probability p must lie in [0, 1/8], got {p!r}")
    return p


@dataclass(frozen=True)
class LinkParams:
    """Normalized description of one link operating point."""

    p: float
    k: int
    eps: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "p", _check_p(self.p))
        object.__setattr__(self, "k", _check_k(self.k))
        eps = float(self.eps)
        if not (0.0 <= eps < 1.0):
            raise ParameterError(f"noise probability eps must lie in [0, 1), got {eps!r}")
        if not 2.0 * self.p + eps < 0.5:
            raise ParameterError(f"2p + eps must stay below 1/2, got p={self.p!r}, eps={eps!r}")
        object.__setattr__(self, "eps", eps)

    @classmethod
    def from_loss(cls, loss: float, k: int, eps: float = 0.0) -> "LinkParams":
        if not (0.0 <= loss <= 1.0):
            raise ParameterError(f"link loss must be a probability in [0, 1], got {loss!r}")
        return cls(p=loss / 8.0, k=k, eps=eps)

    @property
    def loss(self) -> float:
        return 8.0 * self.p


@dataclass(frozen=True)
class SeqLenDist:
    """Probabilities T_1..T_nmax of a detection sequence holding N clicks."""

    t: tuple[float, ...]
    residual: float

    @property
    def nmax(self) -> int:
        return len(self.t)

    def __getitem__(self, n: int) -> float:
        """1-based access, ``dist[1]`` is T_1."""
        if not 1 <= n <= len(self.t):
            raise IndexError(n)
        return self.t[n - 1]


@dataclass(frozen=True)
class RateModelPoint:
    k: int
    p: float
    p00: float
    s: float
    sbr_norm: float


def _p00_general(k: int, fire_alone: float, leave_single: float, both: float) -> float:
    # fire_alone: firing probability of the one live detector on an axis state.
    # leave_single: probability (0,0) -> (k,0); both: probability (0,0) -> (k,k).
    # Axis states share P1 = leave_single/(1 - fire_alone) * P00, interior
    # off-diagonal states fire_alone*P1, the k diagonal states both*P00.
    axis = leave_single / (1.0 - fire_alone)
    interior = (fire_alone * leave_single) / (1.0 - fire_alone)
    return 1.0 / (1.0 + k * both + (2 * k) * axis + (k * k - k) * interior)


def p00(p: float, k: int) -> float:
    """Steady-state probability that both detectors of a basis are alive (noiseless)."""
    p = _check_p(p)
    k = _check_k(k)
    two_p = 2.0 * p
    return _p00_general(k, two_p, two_p, 0.0)


def noise_rates(p: float, eps: float, convention: str = "additive") -> tuple[float, float, float]:
    """Per-slot transition rates of one basis under noise.

    Returns ``(fire_alone, leave_single, both)``: the firing probability of a
    live detector whose partner is dead, the probability that exactly one
    named detector fires out of (0,0), and the probability that both fire in
    the same slot.

    ``"additive"`` keeps the stay probability of (0,0) at ``1 - 2(2p + eps)``
    and the simultaneous rate at ``2p*eps + eps**2``; ``"exact"`` uses the
    joint probabilities realized by independent signal and noise draws.
    """
    two_p = 2.0 * p
    if convention == "additive":
        fire = two_p + eps
        both = two_p * eps + eps * eps
        return fire, fire - 0.5 * both, both
    if convention == "exact":
        fire = two_p + eps - two_p * eps
        quiet = 1.0 - 2.0 * two_p
        both = 2.0 * two_p * eps + quiet * eps * eps
        single = two_p * (1.0 - eps) + quiet * eps * (1.0 - eps)
        return fire, single, both
    raise ParameterError(f"unknown noise convention {convention!r}; expected one of {CONVENTIONS}")


def p00_noisy(params: LinkParams, convention: str = "additive") -> float:
    """Both-alive steady-state probability including noise and simultaneous clicks.

    Simultaneous clicks put the basis in (k, k), from which it walks the
    diagonal back to (0, 0) in k slots.
    """
    if params.eps == 0.0:
        two_p = 2.0 * params.p
        return _p00_general(params.k, two_p, two_p, 0.0)
    fire, single, both = noise_rates(params.p, params.eps, convention)
    return _p00_general(params.k, fire, single, both)


def seq_len_dist(p: float, k: int, nmax: int = DEFAULT_NMAX) -> SeqLenDist:
    """Distribution of the number of clicks in a detection sequence.

    A sequence starts with a click while both detectors are alive and ends
    when the basis is back in (0, 0).  After each click the basis sits in a
    state where the detector that just fired has ``k`` slots to go and its
    partner ``d`` slots (``0 <= d < k``).  From ``d`` the partner fires again
    after ``sigma`` quiet slots, leading to ``d' = k - d - 1 - sigma``, with
    probability ``2p (1-2p)**sigma``; the sequence closes with probability
    ``(1-2p)**(k-d)``.  The nested sums over ``d`` are truncated geometric
    convolutions, each evaluated as a first-order recursion in O(k).
    """
    p = _check_p(p)
    k = _check_k(k)
    if isinstance(nmax, bool) or not isinstance(nmax, numbers.Integral) or nmax < 1:
        raise ParameterError(f"nmax must be a positive integer, got {nmax!r}")
    if k == 0 or p == 0.0:
        t = (1.0,) + (0.0,) * (nmax - 1)
        return SeqLenDist(t=t, residual=0.0)

    two_p = 2.0 * p
    q = 1.0 - two_p
    log_q = math.log1p(-two_p)
    # closing probability from partner state d: q**(k - d)
    close = np.exp(np.arange(k, 0, -1, dtype=float) * log_q)
    w = np.zeros(k)
    w[0] = 1.0
    t = []
    for n in range(nmax):
        t.append(float(np.dot(w, close)))
        if n + 1 == nmax:
            break
        y = lfilter([1.0], [1.0, -q], w)
        w = two_p * y[::-1]
    residual = max(0.0, 1.0 - math.fsum(t))
    return SeqLenDist(t=tuple(t), residual=residual)


def sift_prob(p: float, k: int, nmax: int = DEFAULT_NMAX) -> float:
    """Probability that a detection sequence yields one sifted bit.

    A sequence of N clicks sifts with probability ``1 - 2**-N``.  Mass beyond
    ``nmax`` is counted with weight 1, an over-count of at most
    ``residual * 2**-(nmax+1)``.
    """
    dist = seq_len_dist(p, k, nmax)
    terms = [(1.0 - 0.5**n) * tn for n, tn in enumerate(dist.t, start=1)]
    return math.fsum(terms) + dist.residual


def sbr_norm(p: float, k: int, nmax: int = DEFAULT_NMAX) -> float:
    """Sifted bits per transmission slot, ``8p * P00 * S``."""
    return 8.0 * p * p00(p, k) * sift_prob(p, k, nmax)


def rate_point(p: float, k: int, nmax: int = DEFAULT_NMAX) -> RateModelPoint:
    a = p00(p, k)
    s = sift_prob(p, k, nmax)
    return RateModelPoint(k=_check_k(k), p=float(p), p00=a, s=s, sbr_norm=8.0 * p * a * s)


def sifted_per_dead_time(p: float, k: int) -> float:
    """``k * sbr_norm``: sifted bits per dead time, the quantity maximized over rate."""
    return k * sbr_norm(p, k)


def find_optimum(p: float, kmax: int | None = None) -> tuple[int, float]:
    """Integer dead-time-in-slots that maximizes sifted bits per dead time.

    At fixed dead time ``tau`` the physical rate is ``SBR = (k/tau) * sbr_norm``,
    so the optimum transmission rate is the argmax over k of ``k * sbr_norm``.
    The objective is unimodal in k: a geometric grid brackets the peak, integer
    ternary search narrows it, and a final exhaustive window picks the exact
    argmax (ties go to the smaller k).

    Returns ``(k_opt, sbr_norm(p, k_opt))``.
    """
    p = _check_p(p)
    if p == 0.0:
        raise ParameterError("find_optimum needs p > 0")
    if kmax is None:
        kmax = max(64, math.ceil(40.0 / (8.0 * p)))
    kmax = _check_k(kmax)
    if kmax < 2:
        raise ParameterError(f"kmax must be at least 2, got {kmax}")

    cache: dict[int, float] = {}

    def g(k: int) -> float:
        if k not in cache:
            cache[k] = sifted_per_dead_time(p, k)
        return cache[k]

    grid = np.unique(np.rint(np.geomspace(1, kmax, 256)).astype(np.int64))
    values = [g(int(k)) for k in grid]
    i = int(np.argmax(values))
    lo = int(grid[i - 1]) if i > 0 else 1
    hi = int(grid[i + 1]) if i + 1 < len(grid) else kmax
    while hi - lo > 6:
        m1 = lo + (hi - lo) // 3
        m2 = hi - (hi - lo) // 3
        if g(m1) < g(m2):
            lo = m1 + 1
        else:
            hi = m2
    window = range(max(1, lo - 2), min(kmax, hi + 2) + 1)
    best = max(window, key=lambda k: (g(k), -k))
    if best >= kmax:
        raise BoundaryMaximumError(
            f"maximum of k*sbr_norm sits at the scan boundary kmax={kmax}; increase kmax"
        )
    return best, sbr_norm(p, best)
