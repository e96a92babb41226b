"""``hpsim`` command line.

Exit codes: 0 success, 2 bad input (usage errors or invalid files),
3 map not Hermitian-preserving, 4 solver failure or infeasible recovery.
Output files are written to a temporary name and renamed on success.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys

import numpy as np

from hpsim import __version__
from hpsim.cost import cost_report, gamma_qpd, gamma_tc
from hpsim.decompose import qpd_from_certificate, twisted_from_certificate, TwistedChannel
from hpsim.errors import (HpsimError, InfeasibleRecovery, NotHermitianPreserving, SolverFailure)
from hpsim.maps import ExtractionSpec, entry_extraction
from hpsim.recovery import FAMILIES, rows_to_csv, sweep_recovery
from hpsim import serialize as ser
from hpsim.settings import DEFAULT
from hpsim.simulate import plan_shots, run_mcpp, run_qpd

EXIT_INPUT, EXIT_NOT_HP, EXIT_SOLVER = 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _Exit(EXIT_INPUT, f"{self.prog}: error: {message}")


class _Exit(Exception):
    def __init__(self, code, message=""):
        super().__init__(message)
        self.code = code


def _settings(args):
    over = {}
    if args.tol is not None:
        over["tol"] = args.tol
    if args.gap_tol is not None:
        over["gap_tol"] = args.gap_tol
    return DEFAULT.with_overrides(**over) if over else DEFAULT


def _sdp_logger(args):
    """JSON-lines per-iteration log when ``--sdp-log`` is given."""
    if not args.sdp_log:
        return None, None
    fh = open(args.sdp_log, "w")

    def log(rec):
        fh.write(json.dumps(rec, sort_keys=True) + "\n")

    return log, fh


def _emit(args, text: str):
    if args.output in (None, "-"):
        sys.stdout.write(text)
    else:
        ser.atomic_write(args.output, text)


def _fmt(x):
    return float(f"{x:.12g}")


def _round_floats(obj):
    if isinstance(obj, float):
        return _fmt(obj)
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


# --- subcommands -------------------------------------------------------------


def cmd_cost(args):
    e = ser.map_from_json(ser.load_json(args.map))
    models = {"both": ("tc", "qpd")}.get(args.model, (args.model,))
    log, fh = _sdp_logger(args)
    try:
        rep = cost_report(e, models, _settings(args), restarts=args.restarts, seed=args.seed,
                          trace=log)
    finally:
        if fh:
            fh.close()
    _emit(args, ser.dumps(_round_floats(rep.as_dict())))


def _decompose(e, form, settings, trace=None):
    if form == "twisted":
        r = gamma_tc(e, settings, trace)
        return twisted_from_certificate(e, r.m_plus, r.m_minus, r.value, settings)
    r = gamma_qpd(e, settings, trace)
    return qpd_from_certificate(e, r.m_plus, r.m_minus, r.a, r.b, settings)


def cmd_decompose(args):
    settings = _settings(args)
    e = ser.map_from_json(ser.load_json(args.map))
    log, fh = _sdp_logger(args)
    try:
        d = _decompose(e, args.form, settings, log)
    finally:
        if fh:
            fh.close()
    obj = ser.twisted_to_json(d) if args.form == "twisted" else ser.qpd_to_json(d)
    if args.verify:
        back = ser.decomposition_from_json(json.loads(json.dumps(obj)))
        # stored numbers carry 12 significant digits
        problems = back.check(e, settings.with_overrides(tol=max(settings.tol, 1e-9 * 100)))
        if problems:
            raise _Exit(EXIT_INPUT, "verification failed: " + "; ".join(problems))
    _emit(args, ser.dumps(obj))


def cmd_simulate(args):
    settings = _settings(args)
    d = ser.decomposition_from_json(ser.load_json(args.decomposition))
    rho = ser.state_from_json(ser.load_json(args.state))
    try:
        obs = ser.observable(args.obs)
    except ser.FormatError:
        obs = ser.observable(ser.load_json(args.obs))
    twisted = isinstance(d, TwistedChannel)
    overhead = d.scale if twisted else d.gamma
    plan = None
    if args.plan:
        try:
            delta, eps = (float(x) for x in args.plan.split(","))
        except ValueError as exc:
            raise _Exit(EXIT_INPUT, f"--plan expects 'delta,eps', got {args.plan!r}") from exc
        plan = plan_shots(delta, eps, obs, overhead)
    shots = args.shots if args.shots is not None else (plan.shots if plan else 1000)
    run = run_mcpp if twisted else run_qpd
    res = run(d, rho, obs, shots, args.seed, settings=settings, trace_path=args.trace)
    out = res.as_dict()
    if plan is not None:
        out["plan"] = {"delta": plan.delta, "eps": plan.eps, "K": plan.K, "shots": plan.shots,
                       "overhead": plan.overhead, "within_eps": bool(res.error <= plan.eps)}
    _emit(args, ser.dumps(_round_floats(out)))


def _parse_grid(text):
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError as exc:
        raise _Exit(EXIT_INPUT, f"--eps expects start:stop:step, got {text!r}") from exc
    if step <= 0 and stop != start:
        raise _Exit(EXIT_INPUT, "--eps step must be positive")
    if stop < start:
        raise _Exit(EXIT_INPUT, "--eps stop is below start")
    n = 0 if stop == start else int(math.floor((stop - start) / step + 1e-9))
    return [round(start + k * step, 10) for k in range(n + 1)]


def cmd_figure2(args):
    families = [f.strip() for f in args.families.split(",") if f.strip()]
    unknown = [f for f in families if f not in FAMILIES]
    if unknown:
        raise _Exit(EXIT_INPUT, f"unknown noise family {unknown[0]!r}; known: {sorted(FAMILIES)}")
    grid = _parse_grid(args.eps)
    obs = ser.observable(args.obs)
    rows = []
    for fam in families:
        rows.extend(sweep_recovery(fam, grid, obs, _settings(args)))
    _emit(args, rows_to_csv(rows))


def random_spec(d: int, rng) -> ExtractionSpec:
    """d' uniform on [1, d]; kept indices without replacement; each pair j <= k kept with prob 1/2."""
    dp = int(rng.integers(1, d + 1))
    idx = tuple(sorted(int(i) for i in rng.choice(d, size=dp, replace=False)))
    while True:
        pairs = tuple((j, k) for j in range(dp) for k in range(j, dp) if rng.random() < 0.5)
        if pairs:
            return ExtractionSpec(d, idx, pairs)


def spec_hash(spec: ExtractionSpec) -> str:
    return hashlib.sha256(json.dumps(ser.spec_to_json(spec), sort_keys=True).encode()).hexdigest()[:12]


FIG3_COLUMNS = ("spec_hash", "d_prime", "gamma_tc", "gamma_qpd")


def figure3_rows(d: int, trials: int, seed: int, settings=DEFAULT):
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(trials):
        spec = random_spec(d, rng)
        e = entry_extraction(spec)
        rows.append({"spec_hash": spec_hash(spec), "d_prime": spec.d_out,
                     "gamma_tc": gamma_tc(e, settings).value,
                     "gamma_qpd": gamma_qpd(e, settings).value, "spec": spec})
    return rows


def cmd_figure3(args):
    if args.d < 2:
        raise _Exit(EXIT_INPUT, "--d must be at least 2")
    if args.trials < 1:
        raise _Exit(EXIT_INPUT, "--trials must be positive")
    rows = figure3_rows(args.d, args.trials, args.seed, _settings(args))
    _emit(args, rows_to_csv(rows, FIG3_COLUMNS))


def cmd_extract_map(args):
    spec = ser.spec_from_json(ser.load_json(args.spec))
    _emit(args, ser.dumps(ser.map_to_json(entry_extraction(spec))))


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-o", "--output", help="output file (default: stdout)")
    common.add_argument("--tol", type=float, help="general numeric tolerance")
    common.add_argument("--gap-tol", type=float, help="SDP relative duality-gap tolerance")
    common.add_argument("--sdp-log", help="write per-iteration SDP records as JSON lines")

    p = _Parser(prog="hpsim", description="Simulation costs and shot-level simulation of "
                                           "Hermitian-preserving maps.")
    p.add_argument("--version", action="version", version=f"hpsim {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("cost", parents=[common], help="cost report for a map")
    c.add_argument("map")
    c.add_argument("--model", choices=["tc", "qpd", "both", "diamond", "robustness"], default="both")
    c.add_argument("--restarts", type=int, default=200, help="variational diamond-norm restarts")
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_cost)

    c = sub.add_parser("decompose", parents=[common], help="optimal executable decomposition")
    c.add_argument("map")
    c.add_argument("--form", choices=["twisted", "qpd"], default="twisted")
    c.add_argument("--verify", action="store_true", help="reload the output and check it")
    c.set_defaults(func=cmd_decompose)

    c = sub.add_parser("simulate", parents=[common], help="run a decomposition shot by shot")
    c.add_argument("decomposition")
    c.add_argument("state")
    c.add_argument("obs", help="x, y, z, i, xyzi or an observable JSON file")
    c.add_argument("--shots", type=int)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--plan", help="'delta,eps': report the Hoeffding shot plan (and use it "
                                  "when --shots is absent)")
    c.add_argument("--trace", help="per-shot CSV trace")
    c.set_defaults(func=cmd_simulate)

    c = sub.add_parser("figure2", parents=[common], help="recovery-cost sweep (CSV)")
    c.add_argument("--families", default="ad,deph,depo")
    c.add_argument("--eps", default="0:0.9:0.1", help="start:stop:step, stop inclusive")
    c.add_argument("--obs", default="xyzi")
    c.set_defaults(func=cmd_figure2)

    c = sub.add_parser("figure3", parents=[common], help="entry-extraction cost comparison (CSV)")
    c.add_argument("--d", type=int, default=6)
    c.add_argument("--trials", type=int, default=30)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_figure3)

    c = sub.add_parser("extract-map", parents=[common], help="entry-extraction spec to map JSON")
    c.add_argument("spec")
    c.set_defaults(func=cmd_extract_map)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
    except _Exit as exc:
        if str(exc):
            print(str(exc), file=sys.stderr)
        return exc.code
    except NotHermitianPreserving as exc:
        print(f"hpsim: {exc}", file=sys.stderr)
        return EXIT_NOT_HP
    except (SolverFailure, InfeasibleRecovery) as exc:
        print(f"hpsim: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (HpsimError, ValueError, KeyError, TypeError, OSError) as exc:
        print(f"hpsim: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return 0


if __name__ == "__main__":
    sys.exit(main())
