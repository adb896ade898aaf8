"""Command-line front end.

Subcommands wire the pipeline end to end: generate -> erase -> evaluate,
plus funnel/mec/pic utilities. Every run writes a resolved-config JSON
next to its outputs so any result directory can be regenerated from its
flags alone.

Exit codes: 0 ok, 2 config error, 3 data-constraint violation,
4 misaligned inputs, 5 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import evaluate as ev
from . import pef, synth
from .coupling import CouplingError, greedy_mec, mec_oracle, coupling_entropy
from .dist import (
    Categorical,
    DataConstraintError,
    DistError,
    GroupedData,
    erasure_feasible,
    funnel_bounds,
    load_grouped_json,
    pic_spectrum,
)
from .qopt import BoConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_ALIGN = 4
EXIT_IO = 5


def _write_config_sidecar(out_dir: str, subcommand: str, cfg: dict) -> None:
    path = os.path.join(out_dir, "run_config.json")
    with open(path, "w") as fh:
        json.dump({"subcommand": subcommand, "config": cfg}, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _save_grouped(g: GroupedData, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(g.to_json(), fh, sort_keys=True, indent=2)
        fh.write("\n")


def cmd_generate(args) -> int:
    cfg = synth.SynthConfig(
        n_groups=args.groups,
        support_per_group=args.support,
        n_samples_per_group=args.samples,
        setting=args.setting,
        seed=args.seed,
        dirichlet_alpha=args.dirichlet_alpha,
    )
    os.makedirs(args.out_dir, exist_ok=True)
    g, samples = synth.generate(cfg)
    pef.write_samples_csv(samples, os.path.join(args.out_dir, "samples.csv"))
    _save_grouped(g, os.path.join(args.out_dir, "true_dists.json"))
    _write_config_sidecar(args.out_dir, "generate", cfg.to_json())
    print(f"wrote {len(samples)} samples for {cfg.n_groups} groups to {args.out_dir}")
    return EXIT_OK


def _bo_config(args) -> BoConfig:
    return BoConfig(
        budget=args.bo_budget,
        kappa=args.bo_kappa,
        n_acq_candidates=args.bo_acq_candidates,
        seed=args.bo_seed,
    )


def cmd_erase(args) -> int:
    samples = pef.read_samples_csv(args.samples)
    bo_cfg = _bo_config(args)
    if args.dists:
        g = load_grouped_json(args.dists)
        tol = args.tol if args.tol is not None else 1e-9
        f, report = pef.build_pef(g, tol, bo_cfg, args.use_bo)
    else:
        f, report = pef.run_algorithm1(samples, args.tol, bo_cfg, args.use_bo)
    erased = pef.apply(f, samples, args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    pef.write_erased_csv(erased, os.path.join(args.out_dir, "erased.csv"))
    pef.save_function_json(f, os.path.join(args.out_dir, "function.json"))
    with open(os.path.join(args.out_dir, "report.json"), "w") as fh:
        json.dump(report.to_json(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    _write_config_sidecar(
        args.out_dir,
        "erase",
        {
            "samples": args.samples,
            "dists": args.dists,
            "tol": args.tol,
            "use_bo": args.use_bo,
            "seed": args.seed,
            "bo": bo_cfg.to_json(),
        },
    )
    print(
        f"branch={report.branch} I(Z;A)={report.i_za_analytic:.6g} "
        f"I(Z;X)={report.i_zx_analytic:.6g} bits"
    )
    return EXIT_OK


def cmd_evaluate(args) -> int:
    g = load_grouped_json(args.dists)
    f = pef.load_function_json(args.function)
    erased = pef.read_erased_csv(args.erased)
    original = pef.read_samples_csv(args.samples)
    points, tvs, report = ev.evaluate_run(g, f, erased, original)
    curve = funnel_bounds(g, args.funnel_points)
    os.makedirs(args.out_dir, exist_ok=True)
    ev.emit_tradeoff_csv(points, curve, args.out_dir)
    ev.write_report_json(points=points, tvs=tvs, report=report,
                         path=os.path.join(args.out_dir, "report.json"))
    _write_config_sidecar(
        args.out_dir,
        "evaluate",
        {
            "dists": args.dists,
            "function": args.function,
            "erased": args.erased,
            "samples": args.samples,
            "funnel_points": args.funnel_points,
        },
    )
    for p in points:
        print(
            f"{p.method}/{p.mode}: utility={p.utility_bits:.4f} "
            f"privacy={p.privacy_bits:.4f} bits"
        )
    return EXIT_OK


def cmd_funnel(args) -> int:
    g = load_grouped_json(args.dists)
    curve = funnel_bounds(g, args.points)
    os.makedirs(args.out_dir, exist_ok=True)
    curve.write_csv(os.path.join(args.out_dir, "funnel.csv"))
    _write_config_sidecar(
        args.out_dir, "funnel", {"dists": args.dists, "points": args.points}
    )
    print(
        f"H(X)={curve.h_x:.4f} H(X|A)={curve.h_x_given_a:.4f} "
        f"I(A;X)={curve.i_ax:.4f} bits"
    )
    return EXIT_OK


def _load_categorical(path: str) -> Categorical:
    with open(path) as fh:
        return Categorical.from_json(json.load(fh))


def cmd_mec(args) -> int:
    p = _load_categorical(args.p)
    q = _load_categorical(args.q)
    c = mec_oracle(p, q, args.max_cells) if args.oracle else greedy_mec(p, q)
    os.makedirs(args.out_dir, exist_ok=True)
    c.write_csv(os.path.join(args.out_dir, "coupling.csv"))
    _write_config_sidecar(
        args.out_dir,
        "mec",
        {"p": args.p, "q": args.q, "oracle": args.oracle, "max_cells": args.max_cells},
    )
    print(f"coupling entropy {coupling_entropy(c):.5f} bits")
    return EXIT_OK


def cmd_pic(args) -> int:
    g = load_grouped_json(args.dists)
    spec = pic_spectrum(g)
    verdict = erasure_feasible(g)
    os.makedirs(args.out_dir, exist_ok=True)
    obj = {
        "singular_values": [float(v) for v in spec.singular_values],
        "pics": [float(v) for v in spec.pics],
        "lambda_d": spec.lambda_d,
        "shared_support": spec.shared_support,
        "feasible": verdict.feasible,
        "reason": verdict.reason,
    }
    with open(os.path.join(args.out_dir, "pic.json"), "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")
    _write_config_sidecar(args.out_dir, "pic", {"dists": args.dists})
    print(f"pics={np.round(spec.pics, 6).tolist()} feasible={verdict.feasible} ({verdict.reason})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pefkit",
        description="Perfect erasure functions over finite categorical distributions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="generate synthetic grouped data")
    p_gen.add_argument("--setting", required=True, choices=synth.SETTINGS)
    p_gen.add_argument("--groups", type=int, default=2)
    p_gen.add_argument("--support", type=int, default=100)
    p_gen.add_argument("--samples", type=int, default=10000)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--dirichlet-alpha", type=float, default=1.0)
    p_gen.add_argument("--out-dir", default=".")
    p_gen.set_defaults(func=cmd_generate)

    p_erase = sub.add_parser("erase", help="build and apply an erasure function")
    p_erase.add_argument("--samples", required=True)
    p_erase.add_argument(
        "--dists",
        default=None,
        help="optional ground-truth distribution JSON; bypasses estimation",
    )
    p_erase.add_argument(
        "--tol",
        type=float,
        default=None,
        help="empirical permutation tolerance (default: concentration bound)",
    )
    p_erase.add_argument("--use-bo", action="store_true")
    p_erase.add_argument("--bo-budget", type=int, default=100)
    p_erase.add_argument("--bo-kappa", type=float, default=2.5)
    p_erase.add_argument("--bo-acq-candidates", type=int, default=1024)
    p_erase.add_argument("--bo-seed", type=int, default=0)
    p_erase.add_argument("--seed", type=int, default=0)
    p_erase.add_argument("--out-dir", default=".")
    p_erase.set_defaults(func=cmd_erase)

    p_eval = sub.add_parser("evaluate", help="measure an erasure run")
    p_eval.add_argument("--dists", required=True)
    p_eval.add_argument("--function", required=True)
    p_eval.add_argument("--erased", required=True)
    p_eval.add_argument("--samples", required=True)
    p_eval.add_argument("--funnel-points", type=int, default=101)
    p_eval.add_argument("--out-dir", default=".")
    p_eval.set_defaults(func=cmd_evaluate)

    p_funnel = sub.add_parser("funnel", help="emit the funnel envelope")
    p_funnel.add_argument("--dists", required=True)
    p_funnel.add_argument("--points", type=int, default=101)
    p_funnel.add_argument("--out-dir", default=".")
    p_funnel.set_defaults(func=cmd_funnel)

    p_mec = sub.add_parser("mec", help="couple two distributions")
    p_mec.add_argument("--p", required=True, help="distribution JSON")
    p_mec.add_argument("--q", required=True, help="distribution JSON")
    p_mec.add_argument("--oracle", action="store_true")
    p_mec.add_argument("--max-cells", type=int, default=20)
    p_mec.add_argument("--out-dir", default=".")
    p_mec.set_defaults(func=cmd_mec)

    p_pic = sub.add_parser("pic", help="principal inertia component diagnostics")
    p_pic.add_argument("--dists", required=True)
    p_pic.add_argument("--out-dir", default=".")
    p_pic.set_defaults(func=cmd_pic)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataConstraintError as exc:
        print(f"data constraint violated: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ev.AlignmentError as exc:
        print(f"misaligned inputs: {exc}", file=sys.stderr)
        return EXIT_ALIGN
    except (DistError, CouplingError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
