"""Sweep grids, figure presets, ``key = value`` config files and CSV rows."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ._rng import derive_seed
from .errors import ParameterError
from .model import (
    DEFAULT_NMAX,
    LinkParams,
    linear_to_loss_db,
    loss_db_to_linear,
    p00_noisy,
    rate_point,
    sbr_norm,
    seq_len_dist,
)
from .simulator import Mode, SimConfig, SimResult, SweepCellError

__all__ = [
    "Cell",
    "SweepSpec",
    "SweepRow",
    "PRESETS",
    "CSV_COLUMNS",
    "parse_float_list",
    "parse_k_list",
    "read_config_file",
    "round_dead_time",
    "model_row",
    "result_row",
    "write_rows",
    "format_value",
]

CSV_COLUMNS = (
    "L_linear",
    "loss_db",
    "k",
    "p",
    "eps",
    "mode",
    "p00_model",
    "s_model",
    "sbr_norm_model",
    "sbr_norm_mc",
    "mc_stderr",
    "ptrans_mc",
    "sifted_count",
    "n_slots",
    "seed",
    "t1",
    "t2",
    "t3",
    "t4",
    "t5",
    "t6",
    "residual_model",
    "error",
)


def _range_values(text: str) -> list[float]:
    parts = [float(x) for x in text.split(":")]
    if len(parts) != 3 or parts[2] == 0:
        raise ParameterError(f"range {text!r} must read start:stop:step with a non-zero step")
    start, stop, step = parts
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    if n < 1:
        raise ParameterError(f"range {text!r} is empty")
    return [round(start + i * step, 12) for i in range(n)]


def parse_float_list(text) -> list[float]:
    """``"a,b,c"`` or ``"start:stop:step"`` (stop included)."""
    if isinstance(text, (int, float)):
        return [float(text)]
    if isinstance(text, (list, tuple)):
        return [v for item in text for v in parse_float_list(item)]
    text = str(text).strip()
    if not text:
        return []
    out: list[float] = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if ":" in chunk:
            out.extend(_range_values(chunk))
        elif chunk:
            out.append(float(chunk))
    return out


def parse_k_list(text) -> list[int]:
    """Integer k values: a list, a ``start:stop:step`` range or ``geom:lo:hi:n``.

    Geometric grids are rounded to integers and de-duplicated.
    """
    if isinstance(text, (list, tuple)):
        vals = [v for item in text for v in parse_k_list(item)]
        return sorted(set(vals), key=vals.index)
    text = str(text).strip()
    out: list[int] = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if chunk.startswith("geom:"):
            _, lo, hi, n = chunk.split(":")
            grid = np.geomspace(float(lo), float(hi), int(n))
            out.extend(int(x) for x in np.unique(np.rint(grid).astype(np.int64)))
        else:
            for v in (_range_values(chunk) if ":" in chunk else [float(chunk)]):
                if v != int(v):
                    raise ParameterError(f"k must be an integer, got {v!r}")
                out.append(int(v))
    if any(v < 0 for v in out):
        raise ParameterError("k values must be non-negative")
    return list(dict.fromkeys(out))


def round_dead_time(dead_time_ns: float, rate_hz: float) -> tuple[int, float]:
    """``k = round(tau * rho)``; returns ``(k, tau * rho)``."""
    if dead_time_ns <= 0 or rate_hz <= 0:
        raise ParameterError("dead time and rate must be positive")
    raw = dead_time_ns * 1e-9 * rate_hz
    return int(round(raw)), raw


def read_config_file(path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment.  Keys use underscores."""
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParameterError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


@dataclass(frozen=True)
class Cell:
    loss: float
    k: int
    eps: float
    mode: Mode
    n_slots: int
    k_raw: float | None = None

    @property
    def loss_db(self) -> float:
        return linear_to_loss_db(self.loss) if self.loss > 0 else float("-inf")

    @property
    def params(self) -> LinkParams:
        return LinkParams.from_loss(self.loss, self.k, self.eps)


@dataclass(frozen=True)
class SweepSpec:
    """Grid over loss x noise x mode x dead time.

    Loss is given either in dB (``loss_db``) or linearly (``loss``).  Dead
    time is given either directly as slot counts ``k`` or as one dead time
    ``dead_time_ns`` with a list of ``rate_hz`` values.
    """

    loss_db: tuple[float, ...] = ()
    loss: tuple[float, ...] = ()
    k: tuple[int, ...] = ()
    dead_time_ns: float | None = None
    rate_hz: tuple[float, ...] = ()
    eps: tuple[float, ...] = (0.0,)
    modes: tuple[Mode, ...] = (Mode.SECURE,)
    n_slots: int = 10_000_000
    min_sifted: int = 0
    seed: int = 0
    mc: bool = False
    n_batches: int = 32

    def __post_init__(self):
        if self.loss_db and self.loss:
            raise ParameterError("give loss in dB or linear, not both")
        if self.k and self.rate_hz:
            raise ParameterError("give k directly or dead time x rate pairs, not both")
        if self.rate_hz and self.dead_time_ns is None:
            raise ParameterError("rate_hz needs dead_time_ns")
        object.__setattr__(self, "modes", tuple(Mode(m) for m in self.modes))
        if self.n_slots < 1:
            raise ParameterError("n_slots must be positive")

    def losses(self) -> list[float]:
        if self.loss_db:
            return [loss_db_to_linear(x) for x in self.loss_db]
        return [float(x) for x in self.loss]

    def k_values(self) -> list[tuple[int, float | None]]:
        if self.rate_hz:
            return [(k, raw) for k, raw in (round_dead_time(self.dead_time_ns, r) for r in self.rate_hz)]
        return [(int(k), None) for k in self.k]

    def cells(self) -> list[Cell]:
        losses, ks = self.losses(), self.k_values()
        if not losses or not ks or not self.eps or not self.modes:
            raise ParameterError("sweep grid is empty")
        out = []
        for loss in losses:
            for eps in self.eps:
                for mode in self.modes:
                    for k, raw in ks:
                        n = self.n_slots
                        if self.min_sifted and self.mc:
                            n = max(n, _slots_for(loss, k, mode, self.min_sifted))
                        out.append(Cell(loss=loss, k=k, eps=float(eps), mode=mode, n_slots=n, k_raw=raw))
        return out

    def configs(self) -> list[SimConfig]:
        return [
            SimConfig(c.params, c.n_slots, derive_seed(self.seed, i), c.mode, n_batches=self.n_batches)
            for i, c in enumerate(self.cells())
        ]


def _slots_for(loss: float, k: int, mode: Mode, min_sifted: int) -> int:
    """Slots needed for about ``min_sifted`` key bits, from the analytic rates."""
    p = loss / 8.0
    if p == 0.0:
        return 1
    if mode is Mode.SELF_DISABLING:
        rate = loss / 2.0 / (1.0 + k * loss / 2.0)
    elif mode is Mode.NAIVE:
        rate = loss / 2.0 / (1.0 + k * loss / 4.0)
    else:
        rate = sbr_norm(p, k)
    return int(math.ceil(min_sifted / rate))


PRESETS: dict[str, SweepSpec] = {
    "fig1": SweepSpec(
        loss_db=(-10.0, -20.0),
        k=tuple(parse_k_list("geom:0.1:1000:25")),
        modes=(Mode.NAIVE,),
        mc=True,
        min_sifted=1_000_000,
    ),
    "fig3": SweepSpec(loss_db=(-10.0, -13.0, -20.0), k=(0,) + tuple(parse_k_list("geom:1:100000:61"))),
    "fig4": SweepSpec(loss_db=(-20.0,), k=tuple(parse_k_list("geom:1:100000:61"))),
    "fig5": SweepSpec(
        loss_db=(-10.0, -13.0, -20.0),
        k=tuple(parse_k_list("geom:1:1000:12")),
        modes=(Mode.SECURE,),
        mc=True,
        min_sifted=200_000,
    ),
}


@dataclass
class SweepRow:
    L_linear: float
    loss_db: float
    k: int
    p: float
    eps: float
    mode: str
    p00_model: float
    s_model: float
    sbr_norm_model: float
    t: tuple[float, ...]
    residual_model: float
    sbr_norm_mc: float | None = None
    mc_stderr: float | None = None
    ptrans_mc: float | None = None
    sifted_count: int | None = None
    n_slots: int | None = None
    seed: int | None = None
    error: str = ""

    def values(self) -> dict[str, object]:
        d = {
            "L_linear": self.L_linear,
            "loss_db": self.loss_db,
            "k": self.k,
            "p": self.p,
            "eps": self.eps,
            "mode": self.mode,
            "p00_model": self.p00_model,
            "s_model": self.s_model,
            "sbr_norm_model": self.sbr_norm_model,
            "sbr_norm_mc": self.sbr_norm_mc,
            "mc_stderr": self.mc_stderr,
            "ptrans_mc": self.ptrans_mc,
            "sifted_count": self.sifted_count,
            "n_slots": self.n_slots,
            "seed": self.seed,
            "residual_model": self.residual_model,
            "error": self.error,
        }
        for i, tn in enumerate(self.t, start=1):
            d[f"t{i}"] = tn
        return d


def model_row(cell: Cell) -> SweepRow:
    """Analytic columns for one cell (secure-sifting model; p00 includes noise)."""
    params = cell.params
    dist = seq_len_dist(params.p, params.k, DEFAULT_NMAX)
    point = rate_point(params.p, params.k, DEFAULT_NMAX)
    return SweepRow(
        L_linear=cell.loss,
        loss_db=cell.loss_db,
        k=params.k,
        p=params.p,
        eps=params.eps,
        mode=cell.mode.value,
        p00_model=p00_noisy(params, "exact"),
        s_model=point.s,
        sbr_norm_model=point.sbr_norm,
        t=dist.t,
        residual_model=dist.residual,
    )


def result_row(cell: Cell, result: SimResult | SweepCellError | None) -> SweepRow:
    row = model_row(cell)
    if isinstance(result, SweepCellError):
        row.error = str(result)
    elif result is not None:
        row.sbr_norm_mc = result.sifted_per_slot
        row.mc_stderr = result.sifted_per_slot_stderr
        row.ptrans_mc = result.p_trans
        row.sifted_count = result.sifted
        row.n_slots = result.n_slots
        row.seed = result.config.seed
    return row


def format_value(v) -> str:
    """Round-trip safe text: ``repr`` for floats, empty for missing values."""
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_rows(rows: Iterable[SweepRow], fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        vals = row.values()
        writer.writerow([format_value(vals.get(col)) for col in CSV_COLUMNS])
        fh.flush()


def rows_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    write_rows(rows, buf)
    return buf.getvalue()
