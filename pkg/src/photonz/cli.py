"""``photonz`` command line.

Subcommands simulate sources, calibrate and ingest quadrature captures, run
EM reconstructions and moment estimates, and emit the threshold-detector
curve and loss-model equivalence report as plot-ready files.

Exit codes: 0 success, 2 argument error, 3 data/parse error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from photonz import __version__
from photonz import io
from photonz.errors import (
    CalibrationError,
    IllConditionedError,
    InvalidArgumentError,
    NumericalFailure,
    ParseError,
    TruncationError,
)
from photonz.estimation import EMConfig, default_nmax, em_reconstruct, moment_estimates
from photonz.measurement import (
    DetectorModel,
    GaussianSourceSpec,
    QuadratureBatch,
    calibrate,
    loss_equivalence_report,
    sample_quadratures,
    sample_z,
    to_z,
)
from photonz.spd import spd_curve
from photonz.states import bernoulli_transform, inverse_bernoulli, make_fock, moments

EXIT_OK = 0
EXIT_ARGUMENT = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

SEED_ENV = "PHOTONZ_SEED"
# EM output carries sampling noise that the alternating inverse amplifies
CLI_NEG_TOL = 1e-2


class UsageError(InvalidArgumentError):
    pass


def _resolve_seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        raise UsageError(f"a seed is required: pass --seed or set {SEED_ENV}")
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None


def _phase(text):
    if text is None or text == "random":
        return None
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'random', got {text!r}") from None


def _out_dir(path):
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _as_z(records):
    return to_z(records) if isinstance(records, QuadratureBatch) else records


def cmd_simulate(args):
    seed = _resolve_seed(args)
    det = DetectorModel(args.eta, args.sigma2_x, args.sigma2_p)
    out = _out_dir(args.out)
    files = {}
    if args.source == "fock":
        if args.fock_n is None:
            raise UsageError("--fock-n is required for --source fock")
        if det.sigma2_x or det.sigma2_p:
            raise UsageError("detector noise needs a Gaussian source; Fock sources give z only")
        dist = make_fock(args.fock_n, args.nmax if args.nmax is not None else args.fock_n)
        dist = bernoulli_transform(dist, det.eta)
        z = sample_z(dist, args.count, seed)
        effective_mean = moments(dist)[0]
    else:
        if args.mean_photons is None:
            raise UsageError(f"--mean-photons is required for --source {args.source}")
        spec = GaussianSourceSpec(args.source, args.mean_photons, args.phase)
        batch = sample_quadratures(spec, det, args.count, seed)
        io.write_quadratures(out / "quadratures.csv", batch)
        files["quadratures"] = "quadratures.csv"
        z = to_z(batch)
        effective_mean = det.eta * args.mean_photons
    io.write_z(out / "z.csv", z)
    files["z"] = "z.csv"
    params = {
        "version": __version__,
        "source": args.source,
        "mean_photons": args.mean_photons,
        "fock_n": args.fock_n,
        "phase": args.phase,
        "phase_mode": "random_uniform" if args.phase is None else "fixed",
        "eta": det.eta,
        "effective_mean_photons": effective_mean,
        "sigma2_x": det.sigma2_x,
        "sigma2_p": det.sigma2_p,
        "count": args.count,
        "seed": seed,
        "files": files,
    }
    io.write_json(out / "params.json", params)
    return EXIT_OK


def cmd_ingest(args):
    if args.calib is None:
        raise UsageError("--calib (vacuum record CSV) is required")
    raw = io.read_quadratures(args.input)
    vacuum = io.read_quadratures(args.calib)
    batch, params = calibrate(raw, vacuum)
    out = _out_dir(args.out)
    io.write_quadratures(out / "quadratures.csv", batch)
    io.write_z(out / "z.csv", to_z(batch))
    io.write_json(
        out / "calibration.json",
        {"input": str(args.input), "vacuum": str(args.calib), "calibrated": True, **params},
    )
    return EXIT_OK


def cmd_reconstruct(args):
    if args.eta is not None and not 0.0 < args.eta <= 1.0:
        raise UsageError(f"--eta must lie in (0, 1], got {args.eta}")
    z = _as_z(io.read_records(args.input))
    n_max = args.nmax if args.nmax is not None else default_nmax(z.values)
    config = EMConfig(n_max=n_max, max_iterations=args.max_iters, convergence_tol=args.tol)
    result = em_reconstruct(z, config)
    out = _out_dir(args.out)
    io.write_json(out / "em_result.json", result.to_dict())
    columns = {"reconstructed": result.distribution.probs}
    summary = {
        "n_max": n_max,
        "iterations": result.iterations,
        "converged": result.converged,
        "final_loglik": result.loglik_trace[-1],
        "mean_n": moments(result.distribution)[0],
    }
    if args.eta is not None:
        corrected, report = inverse_bernoulli(result.distribution, args.eta, neg_tol=args.neg_tol)
        io.write_json(
            out / "corrected.json",
            {
                "eta": args.eta,
                "distribution": corrected.to_dict(),
                "conditioning": report.to_dict(),
            },
        )
        columns["corrected"] = corrected.probs
        summary["corrected_mean_n"] = moments(corrected)[0]
    io.write_histogram(out / "histogram.csv", columns)
    print(json.dumps(summary))
    return EXIT_OK


def cmd_moments(args):
    summary = moment_estimates(_as_z(io.read_records(args.input)))
    if args.format == "csv":
        data = summary.to_dict()
        io.emit(args.out, ",".join(data) + "\n" + ",".join(_csv_cell(v) for v in data.values()) + "\n")
    else:
        io.write_json(args.out, summary.to_dict())
    return EXIT_OK


def _csv_cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def cmd_spd_curve(args):
    points = spd_curve(args.threshold_min, args.threshold_max, args.threshold_points)
    if args.format == "json":
        io.write_json(args.out, [p.to_dict() for p in points])
    else:
        io.write_curve(args.out, points)
    return EXIT_OK


def cmd_equivalence(args):
    seed = _resolve_seed(args)
    if args.mean_photons is None:
        raise UsageError("--mean-photons is required")
    spec = GaussianSourceSpec(args.source, args.mean_photons, args.phase)
    report = loss_equivalence_report(spec, args.eta, args.count, seed)
    io.write_json(args.out, report.to_dict())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="photonz",
        description="Photon-number statistics from conjugate homodyne detection.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate quadrature and z records")
    sim.add_argument("--source", choices=("fock", "coherent", "thermal"), required=True)
    sim.add_argument("--mean-photons", type=float)
    sim.add_argument("--fock-n", type=int)
    sim.add_argument("--phase", type=_phase, default=None,
                     help="signal phase relative to the LO in radians, or 'random' (default)")
    sim.add_argument("--eta", type=float, default=1.0)
    sim.add_argument("--sigma2-x", type=float, default=0.0)
    sim.add_argument("--sigma2-p", type=float, default=0.0)
    sim.add_argument("--count", type=int, required=True)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--nmax", type=int, help="truncation for Fock sources")
    sim.add_argument("--out", required=True, help="output directory")
    sim.set_defaults(func=cmd_simulate)

    ing = sub.add_parser("ingest", help="calibrate a quadrature capture against a vacuum record")
    ing.add_argument("--in", dest="input", required=True)
    ing.add_argument("--calib", required=True)
    ing.add_argument("--out", required=True, help="output directory")
    ing.set_defaults(func=cmd_ingest)

    rec = sub.add_parser("reconstruct", help="EM reconstruction of p(n)")
    rec.add_argument("--in", dest="input", required=True, help="z or quadrature CSV")
    rec.add_argument("--nmax", type=int)
    rec.add_argument("--max-iters", type=int, default=EMConfig.max_iterations)
    rec.add_argument("--tol", type=float, default=EMConfig.convergence_tol)
    rec.add_argument("--eta", type=float, help="also undo this detector efficiency")
    rec.add_argument("--neg-tol", type=float, default=CLI_NEG_TOL,
                     help="largest negative entry clipped after the inverse Bernoulli map")
    rec.add_argument("--out", required=True, help="output directory")
    rec.set_defaults(func=cmd_reconstruct)

    mom = sub.add_parser("moments", help="moment estimates and g2(0)")
    mom.add_argument("--in", dest="input", required=True, help="z or quadrature CSV")
    mom.add_argument("--out", default=None, help="output file (default stdout)")
    mom.add_argument("--format", choices=("json", "csv"), default="json")
    mom.set_defaults(func=cmd_moments)

    spd = sub.add_parser("spd-curve", help="threshold-detector efficiency and dark counts")
    spd.add_argument("--threshold-min", type=float, default=0.0)
    spd.add_argument("--threshold-max", type=float, default=10.0)
    spd.add_argument("--threshold-points", type=int, default=200)
    spd.add_argument("--out", default=None, help="output file (default stdout)")
    spd.add_argument("--format", choices=("csv", "json"), default="csv")
    spd.set_defaults(func=cmd_spd_curve)

    eq = sub.add_parser("equivalence", help="compare per-detector and input-port loss models")
    eq.add_argument("--source", choices=("coherent", "thermal"), required=True)
    eq.add_argument("--mean-photons", type=float)
    eq.add_argument("--phase", type=_phase, default=None)
    eq.add_argument("--eta", type=float, required=True)
    eq.add_argument("--count", type=int, default=100_000)
    eq.add_argument("--seed", type=int)
    eq.add_argument("--out", default=None, help="output file (default stdout)")
    eq.set_defaults(func=cmd_equivalence)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (InvalidArgumentError, TruncationError) as exc:
        print(f"photonz: error: {exc}", file=sys.stderr)
        return EXIT_ARGUMENT
    except (ParseError, CalibrationError) as exc:
        print(f"photonz: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"photonz: I/O error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (IllConditionedError, NumericalFailure) as exc:
        print(f"photonz: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
