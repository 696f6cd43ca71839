"""Command-line interface.

Subcommands: ``model``, ``simulate``, ``sweep``, ``optimum``, ``ptrans``.
Normalized quantities are used internally; losses in dB, dead times in ns and
rates in Hz are converted here (``k = round(tau * rho)``, effective rate
``k / tau``).

Exit codes: 0 success, 1 usage error, 2 runtime or convergence error.
"""

from __future__ import annotations

import argparse
import os
import re
import sys

from . import analysis, model
from .errors import BoundaryMaximumError, ConvergenceError, ParameterError, SizeCapError
from .keyfile import write_bits
from .simulator import BACKEND, Mode, SimConfig, available_backends, run, run_sweep
from .sweep import (
    PRESETS,
    Cell,
    SweepSpec,
    format_value,
    parse_float_list,
    parse_k_list,
    read_config_file,
    result_row,
    round_dead_time,
    write_rows,
)

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _count(text: str, minimum: int = 1) -> int:
    """Integer count that may be written in float notation such as ``2e8``."""
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value.is_integer() or value < minimum:
        raise argparse.ArgumentTypeError(f"expected an integer >= {minimum}, got {text!r}")
    return int(value)


def _slots(text: str) -> int:
    return _count(text, 1)


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def _note(msg: str) -> None:
    print(msg, file=sys.stderr)


def _add_loss(p, *, many: bool = False) -> None:
    g = p.add_mutually_exclusive_group(required=not many)
    if many:
        g.add_argument("--loss-db", help="link loss in dB: list a,b,c or range start:stop:step")
        g.add_argument("--loss", help="linear detection probability in (0, 1]: list or range")
    else:
        g.add_argument("--loss-db", type=float, help="link loss in dB (negative), L = 10**(dB/10)")
        g.add_argument("--loss", type=float, help="linear end-to-end detection probability in (0, 1]")


def _add_dead_time(p) -> None:
    p.add_argument("--k", type=int, help="dead time in transmission slots")
    p.add_argument("--dead-time-ns", type=float, help="detector dead time tau in ns")
    p.add_argument("--rate-hz", type=float, help="transmission rate in Hz; k = round(tau * rate)")


def _loss_of(args) -> float:
    loss = model.loss_db_to_linear(args.loss_db) if args.loss_db is not None else args.loss
    if not 0.0 < loss <= 1.0:
        raise UsageError(f"loss must lie in (0, 1], got {loss!r}")
    return loss


def _k_of(args) -> int:
    if args.k is not None:
        if args.rate_hz is not None:
            raise UsageError("give either --k or --dead-time-ns with --rate-hz, not both")
        return args.k
    if args.rate_hz is None or args.dead_time_ns is None:
        raise UsageError("need --k, or --dead-time-ns together with --rate-hz")
    k, raw = round_dead_time(args.dead_time_ns, args.rate_hz)
    _note(f"k rounded from tau*rate = {raw!r} to {k}")
    return k


def _print_pairs(pairs) -> None:
    for name, value in pairs:
        print(f"{name} = {format_value(value)}")


def cmd_model(args) -> int:
    loss = _loss_of(args)
    k = _k_of(args)
    params = model.LinkParams.from_loss(loss, k, args.noise)
    dist = model.seq_len_dist(params.p, k, args.nmax)
    point = model.rate_point(params.p, k, args.nmax)
    pairs = [("L", loss), ("p", params.p), ("k", k), ("eps", params.eps), ("p00", point.p00)]
    if params.eps > 0:
        pairs.append(("p00_noisy_additive", model.p00_noisy(params, "additive")))
        pairs.append(("p00_noisy_exact", model.p00_noisy(params, "exact")))
    pairs += [(f"T{n}", tn) for n, tn in enumerate(dist.t, start=1)]
    pairs += [("residual", dist.residual), ("S", point.s), ("sbr_norm", point.sbr_norm)]
    if args.dead_time_ns is not None:
        tau = args.dead_time_ns * 1e-9
        rate = k / tau
        pairs += [("rate_hz_effective", rate), ("sbr_hz", point.sbr_norm * rate)]
    _print_pairs(pairs)
    return EXIT_OK


def cmd_simulate(args) -> int:
    loss = _loss_of(args)
    k = _k_of(args)
    config = SimConfig(
        params=model.LinkParams.from_loss(loss, k, args.noise),
        n_slots=args.slots,
        seed=args.seed,
        mode=Mode(args.mode),
        record_bits=args.emit_bits is not None,
        n_batches=args.batches,
    )
    result = run(config, backend=args.backend)
    cell = Cell(loss=loss, k=k, eps=config.params.eps, mode=config.mode, n_slots=config.n_slots)
    row = result_row(cell, result)
    if args.emit_bits is not None:
        n = write_bits(args.emit_bits, result.sifted_bits)
        _note(f"wrote {n} sifted bits to {args.emit_bits}")
    _emit_rows([row], args.output)
    return EXIT_OK


def _emit_rows(rows, output) -> None:
    if output:
        with open(output, "w", encoding="utf-8", newline="") as fh:
            write_rows(rows, fh)
    else:
        write_rows(rows, sys.stdout)


_SWEEP_KEYS = (
    "preset",
    "loss_db",
    "loss",
    "k",
    "dead_time_ns",
    "rate_hz",
    "noise",
    "mode",
    "slots",
    "min_sifted",
    "seed",
    "mc",
    "jobs",
    "output",
    "batches",
    "backend",
)


def _truthy(text) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def _build_sweep(args) -> tuple[SweepSpec, dict]:
    settings: dict = {}
    if args.config:
        file_values = read_config_file(args.config)
        unknown = set(file_values) - set(_SWEEP_KEYS)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        settings.update(file_values)
    exclusive = {"loss": "loss_db", "loss_db": "loss", "k": "rate_hz", "rate_hz": "k"}
    for key in _SWEEP_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
            other = exclusive.get(key)
            if other and getattr(args, other, None) is None:
                settings.pop(other, None)

    preset_name = settings.get("preset")
    if preset_name is not None and preset_name not in PRESETS:
        raise UsageError(f"unknown preset {preset_name!r}; choose from {', '.join(PRESETS)}")
    base = PRESETS[preset_name] if preset_name else SweepSpec()
    fields = {
        "loss_db": base.loss_db,
        "loss": base.loss,
        "k": base.k,
        "dead_time_ns": base.dead_time_ns,
        "rate_hz": base.rate_hz,
        "eps": base.eps,
        "modes": base.modes,
        "n_slots": base.n_slots,
        "min_sifted": base.min_sifted,
        "seed": base.seed,
        "mc": base.mc,
        "n_batches": base.n_batches,
    }
    if "loss_db" in settings:
        fields["loss_db"], fields["loss"] = tuple(parse_float_list(settings["loss_db"])), ()
    if "loss" in settings:
        fields["loss"], fields["loss_db"] = tuple(parse_float_list(settings["loss"])), ()
        if "loss_db" in settings:
            raise UsageError("give loss in dB or linear, not both")
    if "k" in settings:
        fields["k"], fields["rate_hz"] = tuple(parse_k_list(settings["k"])), ()
    if "rate_hz" in settings:
        if "k" in settings:
            raise UsageError("give k directly or dead time x rate pairs, not both")
        fields["rate_hz"], fields["k"] = tuple(parse_float_list(settings["rate_hz"])), ()
    if "dead_time_ns" in settings:
        fields["dead_time_ns"] = float(settings["dead_time_ns"])
    if "noise" in settings:
        fields["eps"] = tuple(parse_float_list(settings["noise"]))
    if "mode" in settings:
        fields["modes"] = tuple(Mode(m.strip()) for m in str(settings["mode"]).split(",") if m.strip())
    if "slots" in settings:
        fields["n_slots"] = _slots(str(settings["slots"]))
    if "min_sifted" in settings:
        fields["min_sifted"] = _count(str(settings["min_sifted"]), 0)
    if "seed" in settings:
        fields["seed"] = _seed(str(settings["seed"]))
    if "mc" in settings:
        fields["mc"] = _truthy(settings["mc"])
    if "batches" in settings:
        fields["n_batches"] = int(settings["batches"])
    spec = SweepSpec(**fields)
    run_opts = {
        "jobs": int(settings["jobs"]) if "jobs" in settings else None,
        "output": settings.get("output"),
        "backend": settings.get("backend"),
    }
    return spec, run_opts


def cmd_sweep(args) -> int:
    try:
        spec, opts = _build_sweep(args)
        cells = spec.cells()
    except (ValueError, TypeError, argparse.ArgumentTypeError) as exc:
        raise UsageError(str(exc)) from exc
    for cell in cells:
        if cell.k_raw is not None and cell.k_raw != cell.k:
            _note(f"k rounded from tau*rate = {cell.k_raw!r} to {cell.k}")
    if spec.mc:
        jobs = opts["jobs"] if opts["jobs"] is not None else _default_jobs()
        results = run_sweep(spec.configs(), jobs=jobs, backend=opts["backend"], raise_errors=False)
    else:
        results = [None] * len(cells)
    rows = [result_row(c, r) for c, r in zip(cells, results)]
    _emit_rows(rows, opts["output"])
    failed = [row for row in rows if row.error]
    for row in failed:
        _note(row.error)
    return EXIT_RUNTIME if failed else EXIT_OK


def _default_jobs() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def cmd_optimum(args) -> int:
    if args.loss_db is not None:
        losses = [(model.loss_db_to_linear(x), x) for x in parse_float_list(args.loss_db)]
    else:
        losses = [(x, model.linear_to_loss_db(x)) for x in parse_float_list(args.loss)]
    if not losses:
        raise UsageError("no loss values given")
    cols = ["loss_db", "L_linear", "p", "k_opt", "k_opt_8p", "sbr_norm_opt", "sbr_per_dead_time"]
    if args.dead_time_ns is not None:
        cols += ["rate_max_hz", "sbr_max_hz"]
    print(",".join(cols))
    points = []
    for loss, loss_db in losses:
        if not 0.0 < loss <= 1.0:
            raise UsageError(f"loss must lie in (0, 1], got {loss!r}")
        p = loss / 8.0
        try:
            k_opt, s_opt = model.find_optimum(p, args.kmax)
        except BoundaryMaximumError as exc:
            if args.kmax is None:
                raise
            _note(f"warning: {exc}")
            k_opt, s_opt = args.kmax, model.sbr_norm(p, args.kmax)
        points.append((p, k_opt, s_opt))
        row = [loss_db, loss, p, k_opt, 8.0 * p * k_opt, s_opt, k_opt * s_opt]
        if args.dead_time_ns is not None:
            tau = args.dead_time_ns * 1e-9
            row += [k_opt / tau, s_opt * k_opt / tau]
        print(",".join(format_value(v) for v in row))
    if args.fit:
        fit = analysis.fit_constants(points)
        print()
        print(f"c_sbr = {fit.c_sbr!r} (reference {analysis.REFERENCE_C_SBR}, "
              f"deviation {100 * (fit.c_sbr / analysis.REFERENCE_C_SBR - 1):+.3f}%)")
        print(f"c_rho = {fit.c_rho!r} (reference {analysis.REFERENCE_C_RHO}, "
              f"deviation {100 * (fit.c_rho / analysis.REFERENCE_C_RHO - 1):+.3f}%)")
        print(f"max |relative deviation| c_sbr = {max(map(abs, fit.sbr_deviations)):.4%}, "
              f"c_rho = {max(map(abs, fit.rho_deviations)):.4%}")
    return EXIT_OK


def _decimal(x) -> str:
    return f"{float(x):.4f}".rstrip("0").rstrip(".")


def cmd_ptrans(args) -> int:
    if args.order:
        order = analysis.DetectorOrder.parse(args.order)
        value = analysis.asymptotic_ptrans(order)
        print(f"{value} ({_decimal(value)})")
        return EXIT_OK
    for order in analysis.all_orders():
        value = analysis.asymptotic_ptrans(order)
        print(f"{order}  {value} ({_decimal(value)})")
    avg = analysis.asymptotic_ptrans_avg()
    print(f"average  {avg} ({_decimal(avg)})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="deadtime-qkd", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("model", help="analytic P00, T_N, S and sifted-bit rate at one operating point")
    _add_loss(p)
    _add_dead_time(p)
    p.add_argument("--noise", type=float, default=0.0, help="per-detector per-slot noise probability eps")
    p.add_argument("--nmax", type=int, default=model.DEFAULT_NMAX, help="longest sequence length summed exactly")
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("simulate", help="Monte-Carlo run at one operating point; prints one CSV row")
    _add_loss(p)
    _add_dead_time(p)
    p.add_argument("--noise", type=float, default=0.0, help="per-detector per-slot noise probability eps")
    p.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.SECURE.value, help="sifting mode")
    p.add_argument("--slots", type=_slots, default=10_000_000, help="number of transmission slots (e.g. 2e8)")
    p.add_argument("--seed", type=_seed, default=0, help="64-bit generator seed")
    p.add_argument("--batches", type=int, default=32, help="batches for the batch-means standard error")
    p.add_argument("--emit-bits", metavar="PATH", help="write the sifted key as a packed bit file")
    p.add_argument("--output", metavar="PATH", help="CSV output file (default stdout)")
    p.add_argument("--backend", choices=available_backends(), default=None,
                   help=f"slot kernel (default {BACKEND})")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="grid of model rows, optionally with Monte-Carlo columns")
    p.add_argument("--preset", help=f"named grid: {', '.join(PRESETS)}")
    p.add_argument("--config", metavar="FILE", help="'key = value' file; flags override it")
    p.add_argument("--loss-db", help="link losses in dB: list a,b,c or range start:stop:step")
    p.add_argument("--loss", help="linear link losses: list or range")
    p.add_argument("--k", help="dead times in slots: list, range or geom:lo:hi:n")
    p.add_argument("--dead-time-ns", type=float, help="dead time in ns, used with --rate-hz")
    p.add_argument("--rate-hz", help="transmission rates in Hz: list or range")
    p.add_argument("--noise", help="noise probabilities: list or range")
    p.add_argument("--mode", help="comma-separated modes: naive, secure, self_disabling")
    p.add_argument("--slots", help="minimum slots per Monte-Carlo cell")
    p.add_argument("--min-sifted", help="grow each cell's slot count to expect this many sifted bits")
    p.add_argument("--seed", help="master seed; cell seeds are derived from it and the cell index")
    mc = p.add_mutually_exclusive_group()
    mc.add_argument("--mc", action="store_const", const=True, default=None, help="run Monte-Carlo cells")
    mc.add_argument("--no-mc", dest="mc", action="store_const", const=False, help="model columns only")
    p.add_argument("--jobs", type=int, help="parallel worker processes (default: available CPUs)")
    p.add_argument("--batches", type=int, help="batches for the batch-means standard error")
    p.add_argument("--output", metavar="PATH", help="CSV output file (default stdout)")
    p.add_argument("--backend", choices=available_backends(), help=f"slot kernel (default {BACKEND})")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("optimum", help="rate-optimal k per loss, optional refit of the optimum constants")
    _add_loss(p, many=True)
    p.add_argument("--kmax", type=int, help="scan bound; a maximum on it is then a warning, not an error")
    p.add_argument("--dead-time-ns", type=float, help="dead time in ns for physical-unit columns")
    p.add_argument("--fit", action="store_true", help="least-squares refit of the two optimum constants")
    p.set_defaults(func=cmd_optimum)

    p = sub.add_parser("ptrans", help="exact asymptotic transition probabilities per detector firing order")
    p.add_argument("--order", help="detector cycle such as 1-3-4-2 (default: all six and their mean)")
    p.set_defaults(func=cmd_ptrans)
    return parser


_NEGATIVE_VALUE = re.compile(r"^-\d")


def _join_negative_values(argv: list[str]) -> list[str]:
    # "--loss-db -30:-10:2" would otherwise be read as an unknown option
    out: list[str] = []
    for token in argv:
        if out and out[-1].startswith("--") and "=" not in out[-1] and _NEGATIVE_VALUE.match(token):
            out[-1] = f"{out[-1]}={token}"
        else:
            out.append(token)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(_join_negative_values(list(sys.argv[1:] if argv is None else argv)))
    try:
        return args.func(args)
    except (UsageError, ParameterError) as exc:
        print(f"deadtime-qkd {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BoundaryMaximumError, ConvergenceError, SizeCapError, RuntimeError) as exc:
        print(f"deadtime-qkd {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
