"""Command line entry point ``tmsqkd``.

Exit codes: 0 success (a negative key rate is a valid result), 2 invalid
usage or input files, 3 unphysical input, 4 numerical failure or a replay
that does not reproduce its artifacts.
"""

import argparse
import json
import logging
import sys
import tempfile
from dataclasses import asdict, replace
from pathlib import Path

from . import __version__
from .errors import NoThresholdError, SolverError, UnphysicalStateError
from .io import (
    FileFormatError,
    RunManifest,
    dumps_report,
    load_covariance,
    manifest_path,
    save_covariance,
    sha256_file,
    write_table,
)
from .montecarlo import (
    FRAME_MAGIC,
    RunConfig,
    estimate_covariance,
    read_samples_binary,
    read_samples_csv,
    simulate_run,
    write_samples_binary,
    write_samples_csv,
)
from .optimize import (
    SWEEP_COLUMNS,
    SWEEP_VARIABLES,
    SweepSpec,
    max_tolerable_loss,
    optimize_bob_noise_for_matrix,
    optimize_parameters,
    sweep,
    tolerable_excess_noise,
)
from .protocol import DB_PER_KM, ChannelParams, DetectorParams, ProtocolParams
from .purification import MeasuredTwoModeMatrix, solve_purification, theoretical_purification
from .security import key_rate, key_rate_from_matrix
from .states import EprSpec, SqueezedSourceSpec
from .symplectic import submatrix

log = logging.getLogger("tmsqkd")

EXIT_USAGE = 2
EXIT_UNPHYSICAL = 3
EXIT_NUMERICAL = 4


class UsageError(Exception):
    pass


def _add_source(p):
    src = p.add_argument_group("source")
    sq = src.add_mutually_exclusive_group()
    sq.add_argument("--tms-db", "--v0-db", dest="tms_db", type=float,
                    help="EPR joint-quadrature squeezing (dB), equal to the squeezing of each of "
                         "two identical squeezers")
    sq.add_argument("--v0", type=float, help="squeezed-quadrature variance of each squeezer (SNU)")
    src.add_argument("--anti-db", type=float, help="EPR antisqueezing (dB); requires --tms-db")
    src.add_argument("--dv0", type=float, help="excess antisqueezing noise (SNU); requires --v0")
    src.add_argument("--modulation", type=float, default=0.0, help="modulation variance (SNU)")
    src.add_argument("--modulation-mode", choices=("added", "total"), default="added",
                     help="whether --modulation is the added classical variance or Bob's total "
                          "variance above shot noise")
    gain = src.add_mutually_exclusive_group()
    gain.add_argument("--gain", type=float, default=None, help="weight g of Alice's homodyne data")
    gain.add_argument("--optimize-gain", action="store_true")
    src.add_argument("--g-max", type=float, default=1.5)


def _add_channel(p, eta_required=False):
    ch = p.add_argument_group("channel")
    loss = ch.add_mutually_exclusive_group(required=eta_required)
    loss.add_argument("--eta", type=float, help="channel transmittance")
    loss.add_argument("--distance-km", type=float, help="fiber length (km)")
    loss.add_argument("--loss-db", type=float, help="channel loss (dB)")
    ch.add_argument("--db-per-km", type=float, default=DB_PER_KM)


def _add_epsilon(p):
    p.add_argument("--epsilon", type=float, default=0.0, help="channel excess noise (SNU)")


def _add_detector(p, optimizable=True):
    det = p.add_argument_group("detector")
    det.add_argument("--bob-eff", type=float, default=1.0, help="Bob's detection efficiency")
    det.add_argument("--electronic-noise", type=float, default=0.0, help="SNU")
    noise = det.add_mutually_exclusive_group()
    noise.add_argument("--bob-noise", type=float, default=0.0, help="trusted noise added to Bob's data (SNU)")
    if optimizable:
        noise.add_argument("--optimize-bob-noise", action="store_true")


def _add_out(p, required=False, help="output file"):
    p.add_argument("--out", type=str, required=required, help=help)


def build_parser():
    parser = argparse.ArgumentParser(prog="tmsqkd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keyrate", help="key rate of one operating point")
    _add_source(p)
    _add_channel(p)
    _add_epsilon(p)
    _add_detector(p)
    p.add_argument("--covariance", help="pre-channel two-mode covariance file (replaces source flags)")
    p.add_argument("--basis", choices=("x", "p"), default="x")
    p.add_argument("--purification", choices=("theoretical", "four_mode"), default="theoretical")
    _add_out(p, help="JSON report file (default: stdout)")

    p = sub.add_parser("sweep", help="optimized key rate along one parameter")
    _add_source(p)
    _add_channel(p)
    _add_epsilon(p)
    _add_detector(p)
    p.add_argument("--variable", choices=SWEEP_VARIABLES, required=True)
    p.add_argument("--start", type=float, required=True)
    p.add_argument("--stop", type=float, required=True)
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--scale", choices=("linear", "log"), default="linear")
    p.add_argument("--threads", type=int, default=None)
    _add_out(p, required=True, help="CSV table")

    p = sub.add_parser("threshold-noise", help="largest tolerable channel excess noise")
    _add_source(p)
    _add_channel(p, eta_required=True)
    _add_detector(p)
    _add_out(p, help="JSON result file (default: stdout)")

    p = sub.add_parser("threshold-loss", help="largest tolerable channel loss")
    _add_source(p)
    _add_epsilon(p)
    _add_detector(p)
    p.add_argument("--db-per-km", type=float, default=DB_PER_KM)
    _add_out(p, help="JSON result file (default: stdout)")

    p = sub.add_parser("purify", help="four-mode purification of a two-mode state")
    _add_source(p)
    _add_detector(p, optimizable=False)
    p.add_argument("--covariance", help="two-mode covariance file to purify")
    _add_out(p, help="JSON result file (default: stdout)")

    p = sub.add_parser("simulate", help="Monte-Carlo samples of the protocol")
    _add_source(p)
    _add_channel(p)
    _add_epsilon(p)
    _add_detector(p, optimizable=False)
    p.add_argument("--samples", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--schedule", choices=("blocks", "interleaved"), default="blocks")
    p.add_argument("--format", choices=("csv", "binary"), default="csv")
    _add_out(p, required=True, help="sample file")

    p = sub.add_parser("estimate", help="covariance estimate from a sample file")
    p.add_argument("--samples-file", required=True)
    p.add_argument("--gain", type=float, default=0.0)
    _add_out(p, help="covariance JSON file (default: stdout)")

    p = sub.add_parser("replay", help="re-run a manifest and compare digests")
    p.add_argument("manifest")
    p.add_argument("--output-dir", help="write regenerated artifacts here (default: temporary)")
    return parser


def protocol_from_args(a):
    if a.anti_db is not None and a.tms_db is None:
        raise UsageError("--anti-db requires --tms-db")
    if a.dv0 is not None and a.v0 is None:
        raise UsageError("--dv0 requires --v0")
    g = a.gain if a.gain is not None else 0.0
    if a.tms_db is not None:
        anti = a.anti_db if a.anti_db is not None else a.tms_db
        src = EprSpec(a.tms_db, anti).source_spec()
    elif a.v0 is not None:
        src = SqueezedSourceSpec(a.v0, a.dv0 or 0.0)
    else:
        src = SqueezedSourceSpec(1.0)
    p = ProtocolParams.from_source(src, a.modulation, g, g_max=a.g_max)
    if a.modulation_mode == "total":
        p = p.with_total_modulation(a.modulation)
    return p


def channel_from_args(a):
    eps = getattr(a, "epsilon", 0.0)
    if getattr(a, "distance_km", None) is not None:
        return ChannelParams.from_distance(a.distance_km, eps, a.db_per_km)
    if getattr(a, "loss_db", None) is not None:
        return ChannelParams.from_loss_db(a.loss_db, eps)
    eta = getattr(a, "eta", None)
    return ChannelParams(1.0 if eta is None else eta, eps)


def detector_from_args(a):
    return DetectorParams(a.bob_eff, a.electronic_noise, a.bob_noise)


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _reject_source_flags(a):
    given = [a.tms_db, a.v0, a.anti_db, a.dv0, a.gain]
    if any(v is not None for v in given) or a.modulation or a.optimize_gain:
        raise UsageError("--covariance cannot be combined with source or gain flags")


def cmd_keyrate(a):
    c, d = channel_from_args(a), detector_from_args(a)
    if a.covariance:
        _reject_source_flags(a)
        cov = load_covariance(a.covariance)
        if cov.n_modes != 2:
            raise UsageError("--covariance must hold a two-mode matrix")
        if a.optimize_bob_noise:
            n, _ = optimize_bob_noise_for_matrix(cov.matrix, c, d, a.basis)
            d = replace(d, trusted_added_noise=n)
        rep = key_rate_from_matrix(cov.matrix, c, d, a.basis)
        result = {"report": rep.as_dict(), "g": None, "bob_noise": d.trusted_added_noise}
    else:
        p = protocol_from_args(a)
        if a.optimize_gain or a.optimize_bob_noise:
            best = optimize_parameters(p, c, d, a.optimize_gain, a.optimize_bob_noise)
            p, d = best.protocol, best.detector
        rep = key_rate(p, c, d, a.basis, purification=a.purification)
        result = {"report": rep.as_dict(), "g": p.g, "bob_noise": d.trusted_added_noise,
                  "total_modulation": p.total_modulation}
    _emit(dumps_report(result), a.out)


def cmd_sweep(a):
    p = protocol_from_args(a)
    # SweepSpec re-applies the modulation mode at every point
    if a.modulation_mode == "total":
        p = replace(p, delta_V=a.modulation)
    spec = SweepSpec(
        variable=a.variable, start=a.start, stop=a.stop, points=a.points,
        protocol=p, channel=channel_from_args(a), detector=detector_from_args(a),
        scale=a.scale, optimize_g=a.optimize_gain, optimize_bob_noise=a.optimize_bob_noise,
        modulation_mode=a.modulation_mode, db_per_km=a.db_per_km,
    )
    rows = sweep(spec, a.threads)
    write_table(a.out, SWEEP_COLUMNS, [
        (r.x, r.key_rate, r.g_opt, r.noise_opt, r.i_ab, r.chi_be, r.error) for r in rows
    ])


def cmd_threshold_noise(a):
    p = protocol_from_args(a)
    c = channel_from_args(a)
    res = tolerable_excess_noise(p, detector_from_args(a), c.eta, a.optimize_gain, a.optimize_bob_noise)
    _emit(dumps_report({"epsilon_threshold": res.as_dict(), "eta": c.eta}), a.out)


def cmd_threshold_loss(a):
    p = protocol_from_args(a)
    res = max_tolerable_loss(p, detector_from_args(a), a.epsilon, a.optimize_gain,
                             a.optimize_bob_noise, db_per_km=a.db_per_km)
    _emit(dumps_report({"loss_threshold": res.as_dict(), "epsilon": a.epsilon}), a.out)


def cmd_purify(a):
    if a.covariance:
        _reject_source_flags(a)
        cov = load_covariance(a.covariance)
        if cov.n_modes != 2:
            raise UsageError("--covariance must hold a two-mode matrix")
        m = MeasuredTwoModeMatrix.from_covariance(cov.matrix)
    else:
        p = protocol_from_args(a)
        state = theoretical_purification(p, detector_from_args(a))
        m = MeasuredTwoModeMatrix.from_covariance(submatrix(state.covariance, [0, 1]))
    res = solve_purification(m)
    _emit(dumps_report({
        "params": asdict(res.params),
        "residual": res.residual,
        "purity_residual": res.purity_residual,
        "start_index": res.start_index,
        "covariance": res.covariance,
    }), a.out)


def cmd_simulate(a):
    cfg = RunConfig(protocol_from_args(a), channel_from_args(a), detector_from_args(a),
                    a.samples, a.seed, a.schedule)
    block = simulate_run(cfg)
    if a.format == "csv":
        write_samples_csv(block, a.out)
    else:
        write_samples_binary(block, a.out)


def _read_samples(path):
    with open(path, "rb") as fh:
        head = fh.read(len(FRAME_MAGIC))
    if head == FRAME_MAGIC:
        return read_samples_binary(path)
    return read_samples_csv(path)


def cmd_estimate(a):
    est = estimate_covariance(_read_samples(a.samples_file), a.gain)
    meta = {"gain": a.gain, "n_x": est.n_x, "n_p": est.n_p, "stderr": asdict(est.stderr)}
    if a.out is None:
        sys.stdout.write(dumps_report({"matrix": asdict(est.matrix), **meta}))
    else:
        save_covariance(a.out, est.matrix.to_covariance(), metadata=meta)


COMMANDS = {
    "keyrate": cmd_keyrate,
    "sweep": cmd_sweep,
    "threshold-noise": cmd_threshold_noise,
    "threshold-loss": cmd_threshold_loss,
    "purify": cmd_purify,
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
}
INPUT_FLAGS = ("covariance", "samples_file")


def _parameters(a):
    return {k: v for k, v in sorted(vars(a).items()) if k not in ("command", "verbose")}


def _write_manifest(a, argv):
    inputs = {getattr(a, f): sha256_file(getattr(a, f)) for f in INPUT_FLAGS
              if getattr(a, f, None)}
    manifest = RunManifest(
        subcommand=a.command,
        argv=list(argv),
        parameters=_parameters(a),
        version=__version__,
        seed=getattr(a, "seed", None),
        inputs=inputs,
        outputs={a.out: sha256_file(a.out)},
    )
    manifest.write(manifest_path(a.out))


def _redirect(argv, out_dir):
    argv = list(argv)
    for i, tok in enumerate(argv):
        if tok == "--out" and i + 1 < len(argv):
            argv[i + 1] = str(Path(out_dir) / Path(argv[i + 1]).name)
        elif tok.startswith("--out="):
            argv[i] = "--out=" + str(Path(out_dir) / Path(tok[6:]).name)
    return argv


def cmd_replay(a):
    manifest = RunManifest.read(a.manifest)
    for path, digest in manifest.inputs.items():
        if not Path(path).exists() or sha256_file(path) != digest:
            raise FileFormatError(f"input {path} is missing or differs from the manifest")
    with tempfile.TemporaryDirectory() as tmp:
        out_dir = a.output_dir or tmp
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        code = main(_redirect(manifest.argv, out_dir))
        if code != 0:
            return code
        report = {}
        for path, digest in manifest.outputs.items():
            fresh = Path(out_dir) / Path(path).name
            report[path] = fresh.exists() and sha256_file(fresh) == digest
    sys.stdout.write(json.dumps({"reproduced": report}, indent=2, sort_keys=True) + "\n")
    return 0 if all(report.values()) else EXIT_NUMERICAL


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    a = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if a.command == "replay":
            return cmd_replay(a)
        COMMANDS[a.command](a)
        if getattr(a, "out", None):
            _write_manifest(a, argv)
        return 0
    except UnphysicalStateError as exc:
        print(f"tmsqkd: unphysical input: {exc}", file=sys.stderr)
        return EXIT_UNPHYSICAL
    except (SolverError, NoThresholdError, ArithmeticError) as exc:
        print(f"tmsqkd: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (UsageError, FileFormatError, ValueError, OSError) as exc:
        print(f"tmsqkd: {exc}", file=sys.stderr)
        return EXIT_USAGE

