"""Independent validators for the analytic model.

These routines build the per-basis Markov chain state by state and solve it
numerically.  They share no formulas with :mod:`deadtime_qkd.model` and are
meant for cross-checking at small and moderate ``k``, not for production use.

A basis state ``(a, b)`` counts the slots each detector still needs before it
is alive again; ``a == 0`` means detector A is alive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .errors import ConvergenceError, ParameterError, SizeCapError
from .model import LinkParams, SeqLenDist

__all__ = [
    "StateDist",
    "transition_matrix",
    "steady_state",
    "seq_dp",
    "enumerate_paths",
    "LINEAR_SOLVE_MAX_STATES",
]

LINEAR_SOLVE_MAX_STATES = 10_000
DEFAULT_MAX_STATES = 250_000


@dataclass(frozen=True)
class StateDist:
    """Probability table over basis states, ``probs[a, b]``."""

    probs: np.ndarray

    @property
    def k(self) -> int:
        return self.probs.shape[0] - 1

    def __getitem__(self, state: tuple[int, int]) -> float:
        a, b = state
        return float(self.probs[a, b])

    def total(self) -> float:
        return float(self.probs.sum())

    def as_dict(self) -> dict[tuple[int, int], float]:
        n = self.probs.shape[0]
        return {(a, b): float(self.probs[a, b]) for a in range(n) for b in range(n)}


def _slot_outcomes(p, eps, alive_a, alive_b, convention):
    """List of ``(fire_a, fire_b, prob)`` for one slot of one basis."""
    if convention == "additive" and eps > 0.0:
        fire = 2 * p + eps
        if alive_a and alive_b:
            both = 2 * p * eps + eps * eps
            stay = 1 - 2 * fire
            single = (1 - stay - both) / 2
            return [(False, False, stay), (True, False, single), (False, True, single), (True, True, both)]
        if alive_a:
            return [(False, False, 1 - fire), (True, False, fire)]
        if alive_b:
            return [(False, False, 1 - fire), (False, True, fire)]
        return [(False, False, 1.0)]
    if convention not in ("additive", "exact"):
        raise ParameterError(f"unknown noise convention {convention!r}")

    # Physical enumeration: the photon lands on A, on B or nowhere; each
    # detector also draws its own noise click.
    acc: dict[tuple[bool, bool], float] = {}
    for hit, p_hit in (("a", 2 * p), ("b", 2 * p), (None, 1 - 4 * p)):
        for na, p_na in ((True, eps), (False, 1 - eps)):
            for nb, p_nb in ((True, eps), (False, 1 - eps)):
                w = p_hit * p_na * p_nb
                if w == 0.0:
                    continue
                fa = alive_a and (hit == "a" or na)
                fb = alive_b and (hit == "b" or nb)
                acc[(fa, fb)] = acc.get((fa, fb), 0.0) + w
    return [(fa, fb, w) for (fa, fb), w in acc.items()]


def transition_matrix(params: LinkParams, convention: str = "exact") -> sp.csr_matrix:
    """Row-stochastic sparse transition matrix over the ``(k+1)**2`` basis states.

    State ``(a, b)`` has flat index ``a*(k+1) + b``.
    """
    k, p, eps = params.k, params.p, params.eps
    n = k + 1
    rows, cols, vals = [], [], []
    for a in range(n):
        for b in range(n):
            src = a * n + b
            for fa, fb, w in _slot_outcomes(p, eps, a == 0, b == 0, convention):
                if w == 0.0:
                    continue
                na = k if fa else max(a - 1, 0)
                nb = k if fb else max(b - 1, 0)
                rows.append(src)
                cols.append(na * n + nb)
                vals.append(w)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n * n, n * n))


def steady_state(
    params: LinkParams,
    convention: str = "exact",
    *,
    max_states: int = DEFAULT_MAX_STATES,
    tol: float = 1e-13,
    max_iter: int = 200_000,
) -> StateDist:
    """Stationary distribution of the per-basis chain.

    Below :data:`LINEAR_SOLVE_MAX_STATES` states the balance equations are
    solved directly (one equation replaced by normalization); above it the
    chain is power-iterated until the L1 change per step is below ``tol``.
    """
    n = params.k + 1
    size = n * n
    if size > max_states:
        raise SizeCapError(f"{size} states exceed the cap of {max_states}")
    if size == 1:
        return StateDist(np.ones((1, 1)))
    P = transition_matrix(params, convention)
    if size <= LINEAR_SOLVE_MAX_STATES:
        A = (P.T - sp.identity(size, format="csr")).tolil()
        A[0, :] = np.ones(size)
        rhs = np.zeros(size)
        rhs[0] = 1.0
        pi = spsolve(A.tocsc(), rhs)
    else:
        PT = P.T.tocsr()
        pi = np.zeros(size)
        pi[0] = 1.0
        for _ in range(max_iter):
            nxt = PT @ pi
            if np.abs(nxt - pi).sum() < tol:
                pi = nxt
                break
            pi = nxt
        else:
            raise ConvergenceError(f"power iteration did not reach {tol:g} in {max_iter} steps")
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    return StateDist(pi.reshape(n, n))


def seq_dp(p: float, k: int, nmax: int = 6, *, first: str = "b", max_states: int = DEFAULT_MAX_STATES) -> SeqLenDist:
    """Exact click-count distribution of one detection sequence.

    Absorbing-chain dynamic programming: mass starts in the state right after
    the opening click (``(0, k)`` when B fired first, ``(k, 0)`` for A) and is
    pushed slot by slot, tracking the click count, until it reaches (0, 0) or
    exceeds ``nmax`` clicks.  Each slot costs O(nmax * k**2) and at most about
    ``(nmax + 1) * (k + 1)`` slots carry mass.
    """
    params = LinkParams(p=p, k=k)
    k, p = params.k, params.p
    if nmax < 1:
        raise ParameterError(f"nmax must be >= 1, got {nmax}")
    n = k + 1
    if n * n * nmax > max_states * 8:
        raise SizeCapError(f"DP table {nmax}x{n}x{n} exceeds the cap")
    if k == 0:
        return SeqLenDist(t=(1.0,) + (0.0,) * (nmax - 1), residual=0.0)

    fire = 2.0 * p
    quiet = 1.0 - fire
    # m[c] holds mass with c + 1 clicks so far
    m = np.zeros((nmax, n, n))
    if first == "b":
        m[0, 0, k] = 1.0
    elif first == "a":
        m[0, k, 0] = 1.0
    else:
        raise ParameterError(f"first must be 'a' or 'b', got {first!r}")
    t = np.zeros(nmax)
    overflow = 0.0
    while m.any():
        new = np.zeros_like(m)
        # both dead: deterministic step toward recovery
        new[:, :-1, :-1] += m[:, 1:, 1:]
        # A alive, B recovering
        new[:, 0, :-1] += quiet * m[:, 0, 1:]
        new[1:, k, :-1] += fire * m[:-1, 0, 1:]
        overflow += fire * m[-1, 0, 1:].sum()
        # B alive, A recovering
        new[:, :-1, 0] += quiet * m[:, 1:, 0]
        new[1:, :-1, k] += fire * m[:-1, 1:, 0]
        overflow += fire * m[-1, 1:, 0].sum()
        t += new[:, 0, 0]
        new[:, 0, 0] = 0.0
        m = new
    return SeqLenDist(t=tuple(float(x) for x in t), residual=max(0.0, 1.0 - float(t.sum())))


def enumerate_paths(p: float, k: int, horizon: int, *, max_k: int = 4, max_horizon: int = 100_000) -> StateDist:
    """Exact state occupancy after ``horizon`` slots starting from (0, 0).

    Sums the probabilities of every noiseless transition path, merging paths
    that meet in the same state.  Only meant for tiny ``k``.
    """
    params = LinkParams(p=p, k=k)
    if params.k > max_k:
        raise SizeCapError(f"k={params.k} exceeds enumeration cap {max_k}")
    if horizon < 0 or horizon > max_horizon:
        raise SizeCapError(f"horizon {horizon} outside [0, {max_horizon}]")
    k, two_p = params.k, 2.0 * params.p

    def tick(x):
        return x - 1 if x > 0 else 0

    paths = {(0, 0): 1.0}
    for _ in range(horizon):
        nxt: dict[tuple[int, int], float] = {}
        for (a, b), w in paths.items():
            branches = []
            quiet = 1.0
            if a == 0:
                branches.append(((k, tick(b)), two_p))
                quiet -= two_p
            if b == 0:
                branches.append(((tick(a), k), two_p))
                quiet -= two_p
            branches.append(((tick(a), tick(b)), quiet))
            for state, q in branches:
                if q:
                    nxt[state] = nxt.get(state, 0.0) + w * q
        paths = nxt
    probs = np.zeros((k + 1, k + 1))
    for (a, b), w in paths.items():
        probs[a, b] += w
    return StateDist(probs)
