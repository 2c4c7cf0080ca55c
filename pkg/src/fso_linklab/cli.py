"""fso-linklab command line: run / compare / reproduce / presets.

Exit codes: 0 ok, 2 config unreadable, 3 validation, 4 numerical, 5 target unreachable.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import BerCurve, ber_curve, crossing_snr, snr_gain_at_target
from .errors import (ComplexityLimitError, IntegrationError, InvalidMatrixError, ScenarioError,
                     TargetUnreachableError)
from .scenario import FIGURE_COMPARISONS, FIGURES, PRESETS, LinkScenario, figure_presets, preset
from .simulation import SimulationParams, simulate_multihop

EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_UNREACHABLE = 0, 2, 3, 4, 5

CSV_HEADER = "snr_db,ber_analytic,ber_upper_bound,ber_mc,ci_low,ci_high"


class ConfigError(Exception):
    pass


def fmt(x) -> str:
    """6 significant digits; scientific below 1e-3; empty for missing."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    x = float(x)
    if x != 0 and abs(x) < 1e-3:
        return f"{x:.5e}"
    return f"{x:.6g}"


def csv_text(curve: BerCurve) -> str:
    lines = [f"# {k}={v}" for k, v in curve.metadata.items()]
    lines.append("# snr_db is the average electrical SNR per hop-normalized direct link, in dB")
    lines.append(CSV_HEADER)
    mc = curve.mc or [None] * len(curve.snr_grid_db)
    for db, a, ub, est in zip(curve.snr_grid_db, curve.analytic, curve.upper_bound, mc):
        cells = [fmt(db), fmt(a), fmt(ub)]
        cells += ["", "", ""] if est is None else [fmt(est.estimate), fmt(est.ci_low), fmt(est.ci_high)]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_atomic(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_scenario(args) -> LinkScenario:
    if getattr(args, "config", None):
        try:
            text = Path(args.config).read_text()
            data = json.loads(text)
        except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        return LinkScenario.from_dict(data)
    name = getattr(args, "preset", None) or "clear_8qam_multihop_miso"
    try:
        return preset(name)
    except KeyError as exc:
        raise ScenarioError("preset", str(exc.args[0])) from None


def apply_overrides(sc: LinkScenario, args) -> LinkScenario:
    over = dict(snr_start=args.snr_start, snr_stop=args.snr_stop, snr_step=args.snr_step,
                target_ber=args.target_ber, quadrature_order=args.quadrature_order,
                sigma_mode=args.sigma_mode)
    mc_over = {k: v for k, v in dict(trials=args.mc_trials, seed=args.seed,
                                      partitions=args.partitions).items() if v is not None}
    if mc_over:
        try:
            base = sc.mc or SimulationParams()
            over["mc"] = dataclasses.replace(base, **mc_over)
        except ValueError as exc:
            raise ScenarioError("mc", str(exc)) from exc
    return sc.with_overrides(**over)


def run_curve(sc: LinkScenario) -> BerCurve:
    curve = ber_curve(sc)
    if sc.mc is not None:
        est = []
        for db, a in zip(curve.snr_grid_db, curve.analytic):
            if a < sc.mc.ber_floor:
                est.append(None)    # beyond desk-scale MC reach
                continue
            est.append(simulate_multihop(sc, 10.0 ** (db / 10.0), sc.mc, target_ber=a))
        curve.mc = est
    return curve


def _add_overrides(p):
    p.add_argument("--snr-start", type=float)
    p.add_argument("--snr-stop", type=float)
    p.add_argument("--snr-step", type=float)
    p.add_argument("--target-ber", type=float)
    p.add_argument("--mc-trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--partitions", type=int)
    p.add_argument("--quadrature-order", type=int)
    p.add_argument("--sigma-mode", choices=("from_si", "from_cn2"))


def build_parser():
    ap = argparse.ArgumentParser(prog="fso-linklab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="sweep one scenario and write a CSV")
    src = run.add_mutually_exclusive_group()
    src.add_argument("--config")
    src.add_argument("--preset")
    run.add_argument("--output", required=True)
    _add_overrides(run)

    cmp_ = sub.add_parser("compare", help="SNR gain of scenario A over B at the target BER")
    cmp_.add_argument("a", help="config path or preset name")
    cmp_.add_argument("b", help="config path or preset name")
    _add_overrides(cmp_)

    rep = sub.add_parser("reproduce", help="six curves and a gains summary for one weather figure")
    rep.add_argument("which", choices=sorted(FIGURES))
    rep.add_argument("--output-dir", required=True)
    _add_overrides(rep)

    sub.add_parser("presets", help="list preset names")
    return ap


def _scenario_from_ref(ref, args):
    ns = argparse.Namespace(config=None, preset=None)
    if ref in PRESETS:
        ns.preset = ref
    else:
        ns.config = ref
    return apply_overrides(load_scenario(ns), args)


def _crossing_line(curve, target):
    return f"crossing_snr_db={crossing_snr(curve, target):.4f}"


def cmd_run(args):
    sc = apply_overrides(load_scenario(args), args)
    curve = run_curve(sc)
    write_atomic(args.output, csv_text(curve))
    print(f"wrote {len(curve.snr_grid_db)} rows to {args.output}")
    print(_crossing_line(curve, sc.target_ber))


def cmd_compare(args):
    a, b = _scenario_from_ref(args.a, args), _scenario_from_ref(args.b, args)
    target = a.target_ber
    ca, cb = ber_curve(a), ber_curve(b)
    sa, sb = crossing_snr(ca, target), crossing_snr(cb, target)
    print(f"{a.name}: crossing_snr_db={sa:.4f}")
    print(f"{b.name}: crossing_snr_db={sb:.4f}")
    print(f"gain_db={sb - sa:.4f}")


def reproduce(which, output_dir, args=None):
    """Write the six figure curves and ``summary.csv``; returns (curves, gains)."""
    out = Path(output_dir)
    scen = figure_presets(which)
    if args is not None:
        scen = {k: apply_overrides(v, args) for k, v in scen.items()}
    curves = {k: run_curve(v) for k, v in scen.items()}
    target = next(iter(scen.values())).target_ber
    for k, c in curves.items():
        write_atomic(out / f"{which}_{k}.csv", csv_text(c))
    cross = {k: crossing_snr(c, target) for k, c in curves.items()}
    gains = {name: cross[ref] - cross[better] for name, better, ref in FIGURE_COMPARISONS}
    lines = [f"# target_ber={target:g}", "comparison,better,reference,gain_db"]
    lines += [f"{n},{b},{r},{gains[n]:.4f}" for n, b, r in FIGURE_COMPARISONS]
    lines += ["", "curve,crossing_snr_db"] + [f"{k},{v:.4f}" for k, v in cross.items()]
    write_atomic(out / f"{which}_summary.csv", "\n".join(lines) + "\n")
    return curves, gains


def cmd_reproduce(args):
    _, gains = reproduce(args.which, args.output_dir, args)
    for name, g in gains.items():
        print(f"{name}: gain_db={g:.4f}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "presets":
            print("\n".join(PRESETS))
        elif args.command == "run":
            cmd_run(args)
        elif args.command == "compare":
            cmd_compare(args)
        else:
            cmd_reproduce(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ScenarioError as exc:
        print(f"error: invalid field {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except TargetUnreachableError as exc:
        print(f"error: curve '{exc.curve}' never reaches BER {exc.target:g}", file=sys.stderr)
        return EXIT_UNREACHABLE
    except (IntegrationError, InvalidMatrixError, ComplexityLimitError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
