"""Command-line front end.

Subcommands: ``check``, ``enumerate``, ``bcheck``, ``benumerate``,
``regress``, ``demo``.  Problems travel as JSON, results as JSON plus CSV;
every output embeds the tolerance set that produced it, numbers carry 17
significant digits, and identical inputs with the same seed give
byte-identical files.  Exit codes: 0 success, 1 bad input, 2 numerical
failure (partial outputs are flagged).
"""

import argparse
import json
import os
import sys
import numpy as np

from . import core, bstat, problems
from .core import load_program, program_from_dict, save_program
from .stationarity import check_d_stationary, TOL_STAT
from .core import TOL_ACT
from .enumeration import enumerate_two_piece_diff_max
from .bstat import check_b_stationary, enumerate_b_values, LAMBDA_CAP
from .regression import (Dataset, run_multistart, cluster_values)
from ._multistart import multistart_stationary_values


class InputError(Exception):
    pass


class NumericalError(Exception):
    pass


def _fmt(v):
    return format(float(v), ".17g")


def _load_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise InputError(f"{path}: no such file")
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}")


def _load_point(path):
    obj = _load_json(path)
    if isinstance(obj, dict):
        obj = obj.get("x")
    try:
        return np.asarray(obj, dtype=float).ravel()
    except (TypeError, ValueError):
        raise InputError(f"{path}: expected a numeric vector or {{\"x\": [...]}}")


def _load_diffmax(path):
    obj = _load_json(path)
    try:
        return program_from_dict(obj)
    except (KeyError, ValueError) as exc:
        raise InputError(f"{path}: malformed problem file: {exc}")


def _load_dqc(path):
    obj = _load_json(path)
    try:
        return bstat.dqc_from_dict(obj)
    except (KeyError, ValueError) as exc:
        raise InputError(f"{path}: malformed DQC file: {exc}")


def _tol_header(config):
    return [f"# {key}={_fmt(val) if isinstance(val, float) else val}"
            for key, val in sorted(config.items())]


def _write_lines(path, lines):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _seed_override(seed):
    env = os.environ.get("PWQ_SEED")
    return int(env) if env is not None else seed


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_check(args):
    f = _load_diffmax(args.problem)
    x = _load_point(args.point)
    try:
        cert = check_d_stationary(f, x, tol_act=args.tol_act, tol_stat=args.tol_stat)
    except ValueError as exc:
        raise InputError(str(exc))
    out = {
        "config": {"tol_act": args.tol_act, "tol_stat": args.tol_stat},
        "point": x.tolist(),
        "verdict": cert.verdict,
        "residual": cert.residual,
        "witness_direction": None if cert.witness_direction is None
        else cert.witness_direction.tolist(),
        "directional_value": cert.directional_value,
        "multipliers": {str(k): {"lambda": {str(i): v for i, v in m["lambda"].items()},
                                 "mu": {str(j): v for j, v in m["mu"].items()}}
                        for k, m in cert.multipliers.items()},
    }
    text = json.dumps(out, indent=1)
    print(text)
    if args.out:
        _write_lines(args.out, [text])
    return 0


def _cmd_bcheck(args):
    prog = _load_dqc(args.problem)
    x = _load_point(args.point)
    try:
        cert = check_b_stationary(prog, x, tol_act=args.tol_act, tol_stat=args.tol_stat)
    except ValueError as exc:
        raise InputError(str(exc))
    out = {
        "config": {"tol_act": args.tol_act, "tol_stat": args.tol_stat},
        "point": x.tolist(),
        "verdict": cert.verdict,
        "residual": cert.residual,
        "complementarity": cert.complementarity,
        "abadie_assumed": cert.abadie_assumed,
        "licq": cert.licq,
        "multipliers": {str(k): {"lambda1": m["lambda1"], "lambda2": m["lambda2"],
                                 "mu": {str(j): v for j, v in m["mu"].items()}}
                        for k, m in cert.multipliers.items()},
    }
    text = json.dumps(out, indent=1)
    print(text)
    if args.out:
        _write_lines(args.out, [text])
    return 0


def _value_set_outputs(vs, config, out_dir, stem):
    os.makedirs(out_dir, exist_ok=True)
    lines = _tol_header(config)
    lines.append("value,branch," + ",".join(
        f"w{i+1}" for i in range(len(vs.witnesses[0]) if len(vs) else 0)))
    for v, w, tag in zip(vs.values, vs.witnesses, vs.tags):
        lines.append(",".join([_fmt(v), tag] + [_fmt(c) for c in w]))
    csv_path = os.path.join(out_dir, stem + ".csv")
    _write_lines(csv_path, lines)
    meta = dict(vs.meta)
    meta.pop("det_roots", None)
    obj = {"config": config, "values": vs.values,
           "witnesses": [w.tolist() for w in vs.witnesses],
           "branches": vs.tags, "meta": meta}
    json_path = os.path.join(out_dir, stem + ".json")
    _write_lines(json_path, [json.dumps(obj, indent=1)])
    return csv_path, json_path


def _cmd_enumerate(args):
    f = _load_diffmax(args.problem)
    config = {"tol_act": args.tol_act, "tol_stat": args.tol_stat,
              "seed": _seed_override(args.seed)}
    try:
        vs = enumerate_two_piece_diff_max(f, allow_large=args.allow_large)
    except ValueError as exc:
        raise InputError(str(exc))
    csv_path, json_path = _value_set_outputs(vs, config, args.out_dir, "values")
    print(f"{len(vs)} stationary values -> {csv_path}")
    rc = 0
    if args.oracle:
        oracle_vals = multistart_stationary_values(
            f, n_starts=args.oracle_starts, seed=config["seed"])
        missing = [v for v in oracle_vals
                   if not any(abs(v - u) <= 1e-5 for u in vs.values)]
        diff_lines = _tol_header(config) + ["oracle_value,matched"]
        for v in oracle_vals:
            matched = not any(abs(v - u) <= 1e-5 for u in missing)
            diff_lines.append(f"{_fmt(v)},{int(v not in missing)}")
        _write_lines(os.path.join(args.out_dir, "oracle_diff.csv"), diff_lines)
        if missing:
            print(f"oracle found {len(missing)} unmatched value(s)", file=sys.stderr)
            rc = 2
        else:
            print("oracle diff empty")
    return rc


def _cmd_benumerate(args):
    prog = _load_dqc(args.problem)
    config = {"tol_act": args.tol_act, "tol_stat": args.tol_stat,
              "lambda_cap": args.lambda_cap}
    try:
        vs = enumerate_b_values(prog, lam_cap=args.lambda_cap,
                                allow_large=args.allow_large)
    except ValueError as exc:
        raise InputError(str(exc))
    csv_path, _ = _value_set_outputs(vs, config, args.out_dir, "bvalues")
    print(f"{len(vs)} B-stationary values -> {csv_path}")
    return 0 if not vs.meta.get("lambda_cap_hit") else 2


def _cmd_regress(args):
    data_path, cfg_path = args.data, args.config
    try:
        data = Dataset.from_csv(data_path)
    except (FileNotFoundError, ValueError) as exc:
        raise InputError(f"{data_path}: {exc}")
    cfg = _load_json(cfg_path)
    k1 = int(cfg.get("k1", 2))
    k2 = int(cfg.get("k2", 1))
    starts = int(cfg.get("starts", 20))
    seed = _seed_override(int(cfg.get("seed", 0)))
    tol_step = float(cfg.get("tolStep", 1e-8))
    max_iter = int(cfg.get("maxIter", 500))
    grid = float(cfg.get("grid", 1e-5))
    config = {"k1": k1, "k2": k2, "starts": starts, "seed": seed,
              "tolStep": tol_step, "maxIter": max_iter, "grid": grid}

    results = run_multistart(data, k1, k2, starts, seed=seed,
                             max_iter=max_iter, tol_step=tol_step,
                             jobs=args.jobs)
    os.makedirs(args.out_dir, exist_ok=True)
    lines = _tol_header(config) + ["start,iterations,final_value,stationary"]
    for rec in results:
        lines.append(f"{rec['start']},{rec['iterations']},"
                     f"{_fmt(rec['final_value'])},{rec['verdict']}")
    _write_lines(os.path.join(args.out_dir, "starts.csv"), lines)

    clusters = cluster_values([rec["final_value"] for rec in results], grid)
    lines = _tol_header(config) + ["representative,count"]
    for rep, count in clusters:
        lines.append(f"{_fmt(rep)},{count}")
    _write_lines(os.path.join(args.out_dir, "clusters.csv"), lines)

    lines = _tol_header(config) + ["start,iteration,objective"]
    for rec in results:
        for it, val in enumerate(rec["trace"].objective_values):
            lines.append(f"{rec['start']},{it},{_fmt(val)}")
    _write_lines(os.path.join(args.out_dir, "iterations.csv"), lines)

    print(f"{len(clusters)} clusters from {starts} starts "
          f"-> {os.path.join(args.out_dir, 'clusters.csv')}")
    return 0


def _cmd_demo(args):
    os.makedirs(args.out_dir, exist_ok=True)
    name = args.instance
    if name == "remark3":
        pair = problems.make_remark3(10)
        save_program(pair.psi_program(), os.path.join(args.out_dir, "remark3_psi.json"))
        meta = {"n_max": pair.n_max,
                "subdiff_psi1": {str(n): pair.subdiff_psi1(n) for n in range(11)},
                "subdiff_psi2": {str(n): pair.subdiff_psi2(n) for n in range(11)}}
        _write_lines(os.path.join(args.out_dir, "remark3_meta.json"),
                     [json.dumps(meta, indent=1)])
    elif name == "remark12":
        fn = problems.make_remark12(-10.0, 10.0)
        ts = np.linspace(-10.0, 10.0, 2001)
        lines = ["t,phi,dphi,phi1,phi2"]
        for t in ts:
            lines.append(",".join(_fmt(v) for v in
                                  (t, fn.phi(t), fn.dphi(t), fn.phi1(t), fn.phi2(t))))
        _write_lines(os.path.join(args.out_dir, "remark12_samples.csv"), lines)
    elif name == "mpcc":
        n = m = 1
        f = core.QuadraticFn(np.eye(n + m), np.array([-1.0, -1.0]), 0.0)
        q = np.array([0.5])
        N = np.array([[1.0]])
        M = np.array([[1.0]])
        Z = core.Polyhedron.box([-2.0, -2.0], [2.0, 2.0])
        pen = problems.make_mpcc_penalty(f, q, N, M, Z, gamma=2.0, form="min-penalty")
        save_program(pen, os.path.join(args.out_dir, "mpcc_min_penalty.json"))
        qp = problems.make_mpcc_penalty(f, q, N, M, Z, gamma=2.0,
                                        form="quadratic-penalty")
        save_program(qp, os.path.join(args.out_dir, "mpcc_quadratic_penalty.json"))
        reg = problems.make_mpcc_penalty(f, q, N, M, Z, form="regularized",
                                         epsilon=1e-2)
        _write_lines(os.path.join(args.out_dir, "mpcc_regularized.json"),
                     [json.dumps(bstat.dqc_to_dict(reg), indent=1)])
    elif name == "trustregion":
        tr = bstat.DQCProgram(
            q1=core.QuadraticFn([[-1.0]], [0.0], 0.0), minus_pieces=(),
            Qc=np.array([[1.0]]), c=np.array([0.0]), beta1=None, beta2=0.5,
            linear=core.Polyhedron.whole_space(1))
        _write_lines(os.path.join(args.out_dir, "trust_region.json"),
                     [json.dumps(bstat.dqc_to_dict(tr), indent=1)])
        sphere = bstat.DQCProgram(
            q1=core.QuadraticFn(np.diag([2.0, 4.0]), np.zeros(2), 0.0),
            minus_pieces=(), Qc=2.0 * np.eye(2), c=np.zeros(2),
            beta1=1.0, beta2=1.0, linear=core.Polyhedron.whole_space(2))
        _write_lines(os.path.join(args.out_dir, "sphere_rayleigh.json"),
                     [json.dumps(bstat.dqc_to_dict(sphere), indent=1)])
    else:
        raise InputError(f"unknown demo instance: {name}")
    print(f"wrote {name} files to {args.out_dir}")
    return 0


# ---------------------------------------------------------------------------


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="pwq",
        description="piecewise (difference-max) quadratic program toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--tol-act", type=float, default=TOL_ACT, dest="tol_act")
        p.add_argument("--tol-stat", type=float, default=TOL_STAT, dest="tol_stat")
        p.add_argument("--out-dir", default="pwq_out", dest="out_dir")

    p = sub.add_parser("check", help="d-stationarity certificate at a point")
    p.add_argument("--problem", required=True)
    p.add_argument("--point", required=True)
    p.add_argument("--out")
    common(p)
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("enumerate", help="enumerate d-stationary values")
    p.add_argument("--problem", required=True)
    p.add_argument("--oracle", action="store_true")
    p.add_argument("--oracle-starts", type=int, default=2000)
    p.add_argument("--allow-large", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(func=_cmd_enumerate)

    p = sub.add_parser("bcheck", help="B-stationarity certificate at a point")
    p.add_argument("--problem", required=True)
    p.add_argument("--point", required=True)
    p.add_argument("--out")
    common(p)
    p.set_defaults(func=_cmd_bcheck)

    p = sub.add_parser("benumerate", help="enumerate B-stationary values")
    p.add_argument("--problem", required=True)
    p.add_argument("--lambda-cap", type=float, default=LAMBDA_CAP,
                   dest="lambda_cap")
    p.add_argument("--allow-large", action="store_true")
    common(p)
    p.set_defaults(func=_cmd_benumerate)

    p = sub.add_parser("regress", help="multistart MM regression")
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out-dir", default="pwq_out", dest="out_dir")
    p.set_defaults(func=_cmd_regress)

    p = sub.add_parser("demo", help="materialize a named instance")
    p.add_argument("instance",
                   choices=["remark3", "remark12", "mpcc", "trustregion"])
    p.add_argument("--out-dir", default="pwq_out", dest="out_dir")
    p.set_defaults(func=_cmd_demo)
    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
