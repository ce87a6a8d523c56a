"""Command-line front end.

Subcommands
-----------
measure   draw one state for a scenario and print rho and its measures (JSON)
sweep     average the measures over a range of mode counts (CSV + JSON sidecar)
fit       fit an exponential or algebraic decay law to a sweep table (JSON)
constants compute the two optimal-fluctuation decay constants (JSON)
reference tabulate the analytic predictions for overplotting (CSV)

Exit codes: 0 success, 1 numerical/runtime failure, 2 configuration error.
Every command taking ``--seed`` is bit-reproducible across reruns and across
``--workers`` values.  CSV output uses dot decimals and shortest round-trip
float formatting regardless of locale.
"""

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__, asymptotics, montecarlo, qstate
from .ensembles import RngStream, gram, sample_amplitudes
from .errors import ConfigError, EntScatterError
from .montecarlo import BOTH, CONSERVING, MIXING, SINGLE, MCEstimate, Scenario, SweepRow

SWEEP_HEADER = "N,mean_C,stderr_C,mean_Cp,stderr_Cp,n_samples,n_discarded"
REFERENCE_HEADER = (
    "N,conserving_both_C,conserving_single_C,"
    "mixing_single_C_scale,mixing_single_Cp_scale,mixing_both_C_scale"
)
WORKERS_ENV = "ENTSCATTER_WORKERS"


def _fmt(x):
    """Shortest round-trip decimal representation, locale independent."""
    return repr(float(x))


def _default_workers():
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        return 1
    return value if value >= 1 else 1


def _add_scenario_flags(p, *, with_beams=True):
    kind = p.add_mutually_exclusive_group(required=True)
    kind.add_argument("--mixing", dest="mixing", action="store_const", const=MIXING,
                      help="polarization-mixing disorder")
    kind.add_argument("--conserving", dest="mixing", action="store_const", const=CONSERVING,
                      help="polarization-conserving disorder")
    if with_beams:
        p.add_argument("--beams", choices=[BOTH, SINGLE], default=BOTH,
                       help="scatter both beams or only one (default: both)")


def _add_n_flags(p, ranged):
    if ranged:
        p.add_argument("--n-range", metavar="A..B", default=None,
                       help="inclusive range of detected mode counts, e.g. 1..8")
        p.add_argument("--n-values", metavar="N1,N2,...", default=None,
                       help="explicit comma-separated list of mode counts")
    else:
        p.add_argument("--n", type=int, default=None, help="detected modes per beam (N1 = N2 = N)")
        p.add_argument("--n1", type=int, default=None, help="detected modes of beam 1")
        p.add_argument("--n2", type=int, default=None, help="detected modes of beam 2")


def build_parser():
    p = argparse.ArgumentParser(
        prog="entscatter",
        description="Entanglement of a Bell pair after random multi-mode scattering.",
    )
    p.add_argument("--version", action="version", version=f"entscatter {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("measure", help="sample one state and print rho, C, E, C'")
    _add_scenario_flags(m)
    _add_n_flags(m, ranged=False)
    m.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("sweep", help="average the measures over a range of N")
    _add_scenario_flags(s)
    _add_n_flags(s, ranged=True)
    s.add_argument("--samples", type=int, default=10**6, help="samples per N (default 1e6)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=None,
                   help=f"worker threads (default: ${WORKERS_ENV} or 1); never changes results")
    s.add_argument("--out", required=True, help="CSV output path (sidecar: <out>.json)")

    f = sub.add_parser("fit", help="fit a decay law to a sweep CSV")
    f.add_argument("--table", required=True, help="CSV produced by the sweep command")
    f.add_argument("--model", choices=["exponential", "algebraic"], required=True)
    f.add_argument("--measure", choices=["concurrence", "pseudo"], default="concurrence")

    sub.add_parser("constants", help="optimal-fluctuation decay constants A and B")

    r = sub.add_parser("reference", help="analytic predictions per N for overplotting")
    _add_n_flags(r, ranged=True)
    r.add_argument("--out", default=None, help="CSV output path (default: stdout)")

    return p


def _parse_n_list(args):
    if args.n_range is not None and args.n_values is not None:
        raise ConfigError("give either n-range or n-values, not both")
    if args.n_range is not None:
        parts = args.n_range.split("..")
        if len(parts) != 2:
            raise ConfigError(f"n-range must look like A..B, got {args.n_range!r}")
        try:
            lo, hi = int(parts[0]), int(parts[1])
        except ValueError:
            raise ConfigError(f"n-range bounds must be integers, got {args.n_range!r}") from None
        if lo < 1:
            raise ConfigError(f"n-range lower bound must be >= 1, got {lo}")
        if hi < lo:
            raise ConfigError(f"n-range upper bound must be >= lower bound, got {args.n_range!r}")
        return list(range(lo, hi + 1))
    if args.n_values is not None:
        try:
            values = [int(tok) for tok in args.n_values.split(",") if tok.strip()]
        except ValueError:
            raise ConfigError(f"n-values must be comma-separated integers, got {args.n_values!r}") from None
        if not values:
            raise ConfigError("n-values must contain at least one integer")
        if any(v < 1 for v in values):
            raise ConfigError(f"every entry of n-values must be >= 1, got {values}")
        return values
    raise ConfigError("one of n-range or n-values is required")


def _scenario_from(args):
    if args.n is not None and (args.n1 is not None or args.n2 is not None):
        raise ConfigError("give either n or n1/n2, not both")
    if args.n is not None:
        if args.n < 1:
            raise ConfigError(f"n must be >= 1, got {args.n}")
        n1 = n2 = args.n
    elif args.n1 is not None:
        if args.n1 < 1:
            raise ConfigError(f"n1 must be >= 1, got {args.n1}")
        n1 = args.n1
        n2 = args.n2 if args.n2 is not None else args.n1
        if n2 < 1:
            raise ConfigError(f"n2 must be >= 1, got {n2}")
    else:
        raise ConfigError("n (or n1/n2) is required")
    if args.beams == SINGLE and args.n2 is not None:
        raise ConfigError("n2 does not apply when beams=single")
    try:
        return Scenario(args.mixing, args.beams, n1, n2 if args.beams == BOTH else None)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _print_json(obj, stream):
    stream.write(json.dumps(obj, indent=2, sort_keys=True))
    stream.write("\n")


def cmd_measure(args, stdout):
    scenario = _scenario_from(args)
    rng = RngStream(args.seed, 0)
    if scenario.mixing == MIXING:
        a = gram(sample_amplitudes(4, scenario.n1, rng))
        if scenario.beams == BOTH:
            b = gram(sample_amplitudes(4, scenario.n2, rng))
            rho = qstate.rho_two_beam(a, b)
        else:
            rho = qstate.rho_single_beam(a)
    else:
        A = gram(sample_amplitudes(2, scenario.n1, rng))
        if scenario.beams == BOTH:
            B = gram(sample_amplitudes(2, scenario.n2, rng))
        else:
            B = np.ones((2, 2), dtype=complex)
        rho = qstate.rho_pol_conserving(A, B)
    m = qstate.measures(rho)
    payload = {
        "scenario": {
            "mixing": scenario.mixing,
            "beams": scenario.beams,
            "n1": scenario.n1,
            "n2": scenario.n2,
        },
        "seed": args.seed,
        "rho": {
            "re": [[float(x) for x in row] for row in rho.real],
            "im": [[float(x) for x in row] for row in rho.imag],
        },
        "concurrence": m.concurrence,
        "chsh_max": m.chsh_max,
        "pseudo_concurrence": m.pseudo_concurrence,
    }
    _print_json(payload, stdout)
    return 0


def _sweep_csv_lines(rows):
    lines = [SWEEP_HEADER]
    for r in rows:
        lines.append(
            f"{r.n},{_fmt(r.c.mean)},{_fmt(r.c.stderr)},{_fmt(r.cp.mean)},"
            f"{_fmt(r.cp.stderr)},{r.c.n_samples},{r.c.n_discarded}"
        )
    return "\n".join(lines) + "\n"


def cmd_sweep(args, stdout):
    scenario = _scenario_from_sweep(args)
    n_values = _parse_n_list(args)
    if args.samples < 1:
        raise ConfigError(f"samples must be >= 1, got {args.samples}")
    workers = args.workers if args.workers is not None else _default_workers()
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")
    rows = montecarlo.sweep(scenario, n_values, args.samples, args.seed, workers)
    with open(args.out, "w", newline="") as fh:
        fh.write(_sweep_csv_lines(rows))
    sidecar = {
        "command": "sweep",
        "version": __version__,
        "mixing": scenario.mixing,
        "beams": scenario.beams,
        "n_values": n_values,
        "samples": args.samples,
        "seed": args.seed,
        "workers": workers,
        "out": args.out,
        "format": "csv",
        "csv_header": SWEEP_HEADER,
    }
    with open(args.out + ".json", "w", newline="") as fh:
        _print_json(sidecar, fh)
    stdout.write(f"wrote {args.out} ({len(rows)} rows) and {args.out}.json\n")
    return 0


def _scenario_from_sweep(args):
    # sweeps force N1 = N2 = N per row; a template scenario carries the rest
    try:
        return Scenario(args.mixing, args.beams, 1, None)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def read_sweep_csv(path):
    """Parse a sweep CSV back into SweepRow records (lossless round trip)."""
    with open(path, newline="") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != SWEEP_HEADER:
        raise ConfigError(f"table {path!r} does not carry the sweep header {SWEEP_HEADER!r}")
    rows = []
    for ln in lines[1:]:
        tok = ln.split(",")
        if len(tok) != 7:
            raise ConfigError(f"malformed sweep row: {ln!r}")
        n = int(tok[0])
        n_samples = int(tok[5])
        n_disc = int(tok[6])
        rows.append(
            SweepRow(
                n=n,
                c=MCEstimate(float(tok[1]), float(tok[2]), n_samples, n_disc),
                cp=MCEstimate(float(tok[3]), float(tok[4]), n_samples, n_disc),
            )
        )
    return rows


def cmd_fit(args, stdout):
    rows = read_sweep_csv(args.table)
    fit = montecarlo.fit_decay(rows, args.model, measure=args.measure)
    payload = {
        "model": fit.model,
        "measure": args.measure,
        "rate_or_power": fit.rate_or_power,
        "amplitude": fit.amplitude,
        "covariance": [[float(x) for x in row] for row in fit.covariance],
        "n_range": list(fit.n_range),
        "chi2_dof": None if np.isnan(fit.chi2_dof) else fit.chi2_dof,
        "rows_used": fit.n_used,
        "rows_excluded": fit.n_excluded,
        "excluded_n": list(fit.excluded_n),
    }
    _print_json(payload, stdout)
    return 0


def cmd_constants(args, stdout):
    t0 = time.perf_counter()
    opt_a = asymptotics.decay_constant_A()
    opt_b = asymptotics.decay_constant_B()
    payload = {
        "A": opt_a.rate,
        "alpha_opt_A": [float(x) for x in opt_a.alpha_opt],
        "B": opt_b.rate,
        "alpha_opt_B": [float(x) for x in opt_b.alpha_opt],
        "runtime_seconds": time.perf_counter() - t0,
    }
    _print_json(payload, stdout)
    return 0


def cmd_reference(args, stdout):
    n_values = _parse_n_list(args)
    lines = [REFERENCE_HEADER]
    for n in n_values:
        cons_both = asymptotics.asymptote(Scenario(CONSERVING, BOTH, n), n).value
        cons_single = asymptotics.asymptote(Scenario(CONSERVING, SINGLE, n), n).value
        mix_single_c = asymptotics.asymptote(Scenario(MIXING, SINGLE, n), n).value
        mix_single_cp = asymptotics.asymptote(Scenario(MIXING, SINGLE, n), n, measure="pseudo").value
        mix_both_c = asymptotics.asymptote(Scenario(MIXING, BOTH, n), n).value
        lines.append(
            f"{n},{_fmt(cons_both)},{_fmt(cons_single)},{_fmt(mix_single_c)},"
            f"{_fmt(mix_single_cp)},{_fmt(mix_both_c)}"
        )
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
        stdout.write(f"wrote {args.out} ({len(n_values)} rows)\n")
    else:
        stdout.write(text)
    return 0


_COMMANDS = {
    "measure": cmd_measure,
    "sweep": cmd_sweep,
    "fit": cmd_fit,
    "constants": cmd_constants,
    "reference": cmd_reference,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the message
        return int(exc.code) if exc.code else 0
    try:
        return _COMMANDS[args.command](args, sys.stdout)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EntScatterError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
