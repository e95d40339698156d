"""``sparsedemix`` command-line entry point.

Exit codes: 0 ok, 2 invalid configuration or input, 3 solver diverged, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

from ..certificate import BudgetQuery, certificate_params, measurement_budget
from ..errors import ConvergenceError, InvalidInputError
from ..instances import load_instance, relative_error
from ..oracle import mc_gauss_moments
from ..solvers import METHODS, solve
from .config import ExperimentConfig
from .experiments import deconv_demo, generate_instances, run_phase, write_phase_csv

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO = 0, 2, 3, 4

logger = logging.getLogger("sparsedemix")


def _clean(obj):
    """Replace non-finite floats by ``None`` so the output is strict JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _write_json(path: Path, data) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(data), indent=1, sort_keys=True, allow_nan=False))
    return path


_SOLVER_FLAGS = (("--max-iters", "max_iters", int), ("--abs-tol", "abs_tol", float),
                 ("--rel-tol", "rel_tol", float), ("--penalty", "penalty", float),
                 ("--over-relaxation", "over_relaxation", float))


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    overrides = {name: getattr(args, name) for _, name, _ in _SOLVER_FLAGS
                 if getattr(args, name, None) is not None}
    if overrides:
        cfg.solver = replace(cfg.solver, **overrides)
    return cfg


def _solver_flags(parser: argparse.ArgumentParser):
    for flag, name, typ in _SOLVER_FLAGS:
        parser.add_argument(flag, dest=name, type=typ, help=f"solver option {name}")


def _out(args, name: str) -> Path:
    return Path(args.out) / name


def cmd_gen(args) -> int:
    cfg = _config(args)
    paths = generate_instances(cfg, args.out, embed=args.embed)
    print(f"wrote {len(paths)} instance files to {args.out}")
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    sigma = args.sigma if args.sigma is not None else inst.spec.sigma
    opts = _config(args).solver
    rep = solve(inst.ensemble, inst.y, args.method, sigma, opts)
    data = rep.to_json()
    data["relative_error"] = relative_error(rep.solution, inst.Z0)
    data["instance"] = str(args.instance)
    path = _write_json(_out(args, f"solve_{args.method}.json"), data)
    print(f"{args.method}: rel_err={data['relative_error']:.3e} iters={rep.iterations} "
          f"converged={rep.converged} -> {path}")
    return EXIT_OK if rep.converged else EXIT_DIVERGED


def cmd_certify(args) -> int:
    inst = load_instance(args.instance)
    rep = certificate_params(inst.ensemble, inst.support, inst.Z0)
    frames = inst.ensemble.frames
    bq = BudgetQuery([(k, n, s) for (k, n), s in zip(inst.ensemble.profile, inst.support.sizes)],
                     mu_minus=frames.mu_minus, mu_plus=frames.mu_plus)
    data = rep.to_json()
    data["measurement_budget"] = measurement_budget(bq)
    data["q"] = inst.ensemble.q
    path = _write_json(_out(args, "certificate.json"), data)
    print(f"delta={rep.delta:.4f} beta={rep.beta:.4f} theta={rep.theta:.4f} rho={rep.rho:.4f} "
          f"guarantee={rep.guarantee_holds} -> {path}")
    return EXIT_OK


def cmd_phase(args) -> int:
    cfg = _config(args)
    path = _out(args, "phase.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        try:
            cells = write_phase_csv(run_phase(cfg, args.threads), fh)
        except KeyboardInterrupt:
            fh.flush()
            print(f"interrupted; partial results in {path}", file=sys.stderr)
            return 130
    for c in cells:
        print(f"q={c.q:5d} {c.method:8s} {c.successes}/{c.trials}")
    print(f"-> {path}")
    return EXIT_OK


def cmd_moments(args) -> int:
    cfg = _config(args)
    sparsities = args.sparsity or list(cfg.sparsity)
    convention = args.convention or cfg.convention
    N = args.samples or cfg.moment_samples
    rep = mc_gauss_moments(sparsities, convention, N, cfg.seed)
    path = _write_json(_out(args, f"moments_{convention}.json"), rep.to_json())
    print(f"max |dev|={rep.max_abs_dev:.4f} max z={rep.max_z:.2f} -> {path}")
    return EXIT_OK


def cmd_deconv_demo(args) -> int:
    cfg = _config(args)
    ks = [k for k, _ in cfg.profile]
    ns = [n for _, n in cfg.profile]
    res = deconv_demo(cfg.q_grid[0], ks, ns, list(cfg.sparsity), seed=cfg.seed,
                      frame_kind=cfg.frame_kind, impulse=cfg.impulse, solver_opts=cfg.solver)
    path = _write_json(_out(args, "deconv_demo.json"), res)
    print(f"rel_err_v={res['rel_err_v']:.3e} rank_one_ok={res['rank_one_ok']} -> {path}")
    return EXIT_OK if res["solver_converged"] else EXIT_DIVERGED


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--config", type=Path, default=d(None), help="JSON experiment configuration")
    g.add_argument("--seed", type=int, default=d(None), help="master seed (unsigned 64-bit)")
    g.add_argument("--out", type=Path, default=d(Path("results")), help="output directory")
    g.add_argument("--threads", type=int, default=d(1), help="worker processes for sweeps")
    g.add_argument("-v", "--verbose", action="store_true", default=d(False))
    return g


def build_parser() -> argparse.ArgumentParser:
    # Global flags are accepted before or after the subcommand; the subcommand
    # copies suppress their defaults so they never clobber earlier values.
    top, common = _global_flags(False), _global_flags(True)
    p = argparse.ArgumentParser(prog="sparsedemix", parents=[top],
                                description="Sparse blind deconvolution and demixing experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="write seeded instance files")
    g.add_argument("--embed", action="store_true", help="embed arrays in the files")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", parents=[common], help="solve one instance")
    s.add_argument("instance", type=Path)
    s.add_argument("--method", choices=METHODS, default="l12")
    s.add_argument("--sigma", type=float)
    _solver_flags(s)
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("certify", parents=[common], help="measure the recovery condition")
    c.add_argument("instance", type=Path)
    c.set_defaults(func=cmd_certify)

    ph = sub.add_parser("phase", parents=[common], help="phase-transition sweep to CSV")
    _solver_flags(ph)
    ph.set_defaults(func=cmd_phase)

    m = sub.add_parser("moments", parents=[common], help="Monte-Carlo Gaussian moment check")
    m.add_argument("--sparsity", type=int, nargs="+")
    m.add_argument("--convention", choices=("real", "complex"))
    m.add_argument("--samples", type=int)
    m.set_defaults(func=cmd_moments)

    d = sub.add_parser("deconv-demo", parents=[common], help="blind deconvolution demo")
    _solver_flags(d)
    d.set_defaults(func=cmd_deconv_demo)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except InvalidInputError as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
