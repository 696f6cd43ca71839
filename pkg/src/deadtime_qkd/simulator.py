"""Slot-based Monte-Carlo BB84 receiver with dead-time limited detectors.

Every transmission slot Alice picks a basis and bit; with probability ``L``
the photon is detected.  The receiver basis is uniform and the struck
detector carries Alice's bit when the bases agree, a random bit otherwise,
so each of the four detectors fires on signal with probability ``2p`` per
slot.  Live detectors also fire on noise with probability ``eps``.  A click
makes its detector dead for the next ``k`` slots; photons reaching a dead
detector are lost.

Sifting modes:

``naive``
    every basis-matched click gives a key bit; multi-click slots are dropped.
``secure``
    clicks in one basis are grouped into detection sequences that start in
    the both-alive state and end when it is reached again; only the first
    matched single click of a sequence gives a key bit.
``self_disabling``
    one time-multiplexed detector per basis, so the whole basis is dead
    after a click; every matched click gives a key bit.

The slot loop lives in a compiled extension (``_kernel``) with a
draw-identical pure-Python fallback (``_pykernel``) picked at import time.
Set ``DEADTIME_QKD_PURE=1`` to force the fallback.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from . import _pykernel
from ._rng import GENERATOR_ID, derive_seed, probability_threshold
from .analysis import ptrans_from_counts
from .errors import ParameterError
from .model import LinkParams

try:
    from . import _kernel as _compiled
except ImportError:  # extension not built
    _compiled = None

__all__ = [
    "Mode",
    "SimConfig",
    "ClickEvent",
    "SimResult",
    "SweepCellError",
    "BACKEND",
    "available_backends",
    "run",
    "run_events",
    "run_sweep",
    "derive_seed",
]

BACKEND = "compiled" if _compiled is not None and not os.environ.get("DEADTIME_QKD_PURE") else "python"
MAX_SLOTS = 1 << 62
HIST_LEN = _pykernel.HIST_LEN


class Mode(str, Enum):
    NAIVE = "naive"
    SECURE = "secure"
    SELF_DISABLING = "self_disabling"

    @property
    def code(self) -> int:
        return {"naive": _pykernel.NAIVE, "secure": _pykernel.SECURE, "self_disabling": _pykernel.SELF_DISABLING}[
            self.value
        ]


def available_backends() -> list[str]:
    return ["compiled", "python"] if _compiled is not None else ["python"]


@dataclass(frozen=True)
class SimConfig:
    params: LinkParams
    n_slots: int
    seed: int = 0
    mode: Mode = Mode.SECURE
    record_bits: bool = False
    n_batches: int = 32

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        n = int(self.n_slots)
        if n != self.n_slots or n < 1:
            raise ParameterError(f"n_slots must be a positive integer, got {self.n_slots!r}")
        if n >= MAX_SLOTS:
            raise ParameterError(f"n_slots={n} would overflow the 64-bit counters")
        object.__setattr__(self, "n_slots", n)
        if not 0 <= int(self.seed) < 2**64:
            raise ParameterError(f"seed must fit in 64 unsigned bits, got {self.seed!r}")
        object.__setattr__(self, "seed", int(self.seed))
        if self.n_batches < 1:
            raise ParameterError("n_batches must be >= 1")

    @classmethod
    def from_loss(cls, loss: float, k: int, eps: float = 0.0, **kw) -> "SimConfig":
        return cls(params=LinkParams.from_loss(loss, k, eps), **kw)

    @property
    def L(self) -> float:
        return 8.0 * self.params.p


@dataclass(frozen=True)
class ClickEvent:
    slot: int
    basis: str  # "Z" or "X"
    detector_bit: int
    matched: bool
    origin: str  # "signal" or "noise"


@dataclass(frozen=True)
class SimResult:
    config: SimConfig
    clicks: int
    noise_clicks: int
    sequences: int
    sifted: int
    transitions: int
    bit_errors: int
    discarded_double: int
    signal_arrivals: int
    arrivals_idle: int
    seq_hist: tuple[int, ...]
    batch_sifted: tuple[int, ...]
    sifted_bits: np.ndarray | None = field(default=None, compare=False, repr=False)
    backend: str = "python"
    generator: str = GENERATOR_ID

    @property
    def n_slots(self) -> int:
        return self.config.n_slots

    @property
    def sifted_per_slot(self) -> float:
        return self.sifted / self.config.n_slots

    @property
    def p_trans(self) -> float:
        return ptrans_from_counts(self.transitions, self.sifted)

    @property
    def sifted_per_slot_stderr(self) -> float:
        """Batch-means standard error of :attr:`sifted_per_slot`."""
        n = self.config.n_slots
        b = len(self.batch_sifted)
        if b < 2:
            return float("nan")
        ends = [(i + 1) * n // b for i in range(b)]
        lengths = np.diff([0] + ends)
        counts = np.diff((0,) + self.batch_sifted)
        rates = counts / lengths
        return float(np.std(rates, ddof=1) / math.sqrt(b))

    @property
    def idle_fraction(self) -> float:
        """Fraction of signal arrivals that found their basis in the both-alive state."""
        return self.arrivals_idle / self.signal_arrivals if self.signal_arrivals else float("nan")

    @property
    def completed_sequences(self) -> int:
        return sum(self.seq_hist)

    def seq_fraction(self, n: int) -> float:
        """Share of completed detection sequences holding exactly ``n`` clicks."""
        total = self.completed_sequences
        return self.seq_hist[n] / total if total else float("nan")

    def signature(self) -> tuple:
        """Everything except backend and key material, for equality checks."""
        return (
            self.clicks,
            self.noise_clicks,
            self.sequences,
            self.sifted,
            self.transitions,
            self.bit_errors,
            self.discarded_double,
            self.signal_arrivals,
            self.arrivals_idle,
            self.seq_hist,
            self.batch_sifted,
        )


def _kernel_for(backend: str | None):
    backend = backend or BACKEND
    if backend == "compiled":
        if _compiled is None:
            raise ParameterError("compiled kernel is not available in this installation")
        return backend, _compiled.simulate_slots
    if backend == "python":
        return backend, _pykernel.simulate_slots
    raise ParameterError(f"unknown backend {backend!r}")


def _execute(config: SimConfig, backend: str | None, events=None) -> SimResult:
    name, kernel = _kernel_for(backend)
    hist = np.zeros(HIST_LEN, dtype=np.int64)
    batch = np.zeros(min(config.n_batches, config.n_slots), dtype=np.int64)
    counts, bits = kernel(
        config.n_slots,
        config.seed,
        probability_threshold(config.L),
        probability_threshold(config.params.eps),
        config.params.k,
        config.mode.code,
        config.record_bits,
        hist,
        batch,
        events,
    )
    clicks, noise, sequences, sifted, transitions, errors, discarded, arrivals, idle = (int(c) for c in counts)
    if sifted > clicks:
        raise RuntimeError("kernel invariant violated: more sifted bits than clicks")
    return SimResult(
        config=config,
        clicks=clicks,
        noise_clicks=noise,
        sequences=sequences,
        sifted=sifted,
        transitions=transitions,
        bit_errors=errors,
        discarded_double=discarded,
        signal_arrivals=arrivals,
        arrivals_idle=idle,
        seq_hist=tuple(int(x) for x in hist),
        batch_sifted=tuple(int(x) for x in batch),
        sifted_bits=np.frombuffer(bits, dtype=np.uint8).copy() if bits is not None else None,
        backend=name,
    )


def run(config: SimConfig, backend: str | None = None) -> SimResult:
    """Simulate ``config.n_slots`` slots.  Identical configs give identical results."""
    return _execute(config, backend)


def run_events(config: SimConfig) -> tuple[SimResult, list[ClickEvent]]:
    """Pure-Python run that also returns every click.  Meant for short runs."""
    raw: list = []
    result = _execute(config, "python", raw)
    events = [
        ClickEvent(
            slot=t,
            basis="ZX"[basis],
            detector_bit=bit,
            matched=bool(matched),
            origin="signal" if origin == _pykernel.ORIGIN_SIGNAL else "noise",
        )
        for t, basis, bit, matched, origin in raw
    ]
    return result, events


class SweepCellError(RuntimeError):
    def __init__(self, index: int, cause: BaseException):
        super().__init__(f"sweep cell {index}: {cause}")
        self.index = index
        self.cause = cause


def _run_cell(args):
    index, config, backend = args
    try:
        return _execute(config, backend)
    except Exception as exc:  # annotate and hand back to the parent
        return SweepCellError(index, exc)


def run_sweep(spec, jobs: int | None = 1, backend: str | None = None, *, raise_errors: bool = True) -> list:
    """Run every cell of a sweep; results come back in cell order.

    ``spec`` is either a sequence of :class:`SimConfig` or an object with a
    ``configs()`` method (see :class:`deadtime_qkd.sweep.SweepSpec`).  With
    ``raise_errors=False`` failed cells yield a :class:`SweepCellError` in
    their slot instead of aborting the sweep.
    """
    configs: Sequence[SimConfig] = list(spec.configs() if hasattr(spec, "configs") else spec)
    if not configs:
        raise ParameterError("sweep grid is empty")
    work = [(i, c, backend) for i, c in enumerate(configs)]
    if jobs is None:
        jobs = os.cpu_count() or 1
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(work))) as pool:
            results = list(pool.map(_run_cell, work))
    else:
        results = [_run_cell(w) for w in work]
    if raise_errors:
        for r in results:
            if isinstance(r, SweepCellError):
                raise r
    return results


def seeded_configs(base: Iterable[SimConfig], master_seed: int) -> list[SimConfig]:
    """Reseed configs with ``derive_seed(master_seed, index)``."""
    out = []
    for i, c in enumerate(base):
        out.append(SimConfig(c.params, c.n_slots, derive_seed(master_seed, i), c.mode, c.record_bits, c.n_batches))
    return out
