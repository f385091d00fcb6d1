"""Command-line front end.

Subcommands:

``validate``
    Parse a config file, apply overrides, run the full schema check.
``run``
    Execute all replications of an experiment config; write the results
    CSV and a JSON manifest.
``decide``
    Compute a single sampling decision from a (possibly fresh) belief
    state and print it as JSON with per-alternative diagnostics.
``oc``
    Evaluate the opportunity cost of a serialized belief state with
    fresh covariate draws.
``selftest``
    Run the fast invariant suite and print one pass/fail line per check.

Exit codes are a stable contract: 0 success, 1 validation failure
(bad flags, bad config, bad input files), 2 runtime failure. All
randomness descends from the config seed (or ``--seed`` override); there
are no hidden entropy sources.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .acquisition import BeliefState
from .config import apply_overrides, load_config, normalize_config
from .exceptions import ConfigError, DegenerateStateError, NumericalError
from .policies import PolicyContext
from .selftest import run_selftest

__all__ = ["main", "EXIT_OK", "EXIT_INVALID", "EXIT_RUNTIME"]

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ikg",
        description="Sequential sampling policies for selecting the best "
        "alternative as a function of covariates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required,
                       help="path to a JSON config file")
        p.add_argument("--override", action="append", default=[],
                       metavar="KEY=VALUE",
                       help="dotted-path config override, repeatable")
        p.add_argument("--seed", type=int, default=None,
                       help="replaces the config seed")

    run_p = sub.add_parser("run", help="run an experiment config")
    common(run_p)
    run_p.add_argument("--output", default=None,
                       help="output directory (default: config output.dir "
                            "or the working directory)")
    run_p.add_argument("--workers", type=int, default=None,
                       help="replication worker processes "
                            "(default: available cores)")

    val_p = sub.add_parser("validate", help="check a config file")
    common(val_p)

    dec_p = sub.add_parser("decide", help="compute one sampling decision")
    common(dec_p)
    dec_p.add_argument("--state", default=None,
                       help="serialized belief state JSON "
                            "(default: fresh prior state)")

    oc_p = sub.add_parser("oc", help="opportunity cost of a belief state")
    common(oc_p)
    oc_p.add_argument("--state", required=True,
                      help="serialized belief state JSON")
    oc_p.add_argument("--draws", type=int, default=None,
                      help="covariate draws (default: config eval.draws)")

    sub.add_parser("selftest", help="run the fast invariant suite")
    return parser


def _load_normalized(args) -> dict:
    raw = load_config(args.config)
    raw = apply_overrides(raw, args.override)
    if args.seed is not None:
        raw["seed"] = args.seed
    return normalize_config(raw)


def _load_state(path, problem) -> BeliefState:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            record = json.load(handle)
    except FileNotFoundError:
        raise ConfigError(f"state file not found: {path}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"state file is not valid JSON: {err}") from None
    state = BeliefState.from_record(record)
    if state.num_alternatives != problem.M or state.dim != problem.d:
        raise ConfigError(
            f"state file has M={state.num_alternatives}, d={state.dim}; "
            f"config problem has M={problem.M}, d={problem.d}"
        )
    return state


def _decision_context(cfg, problem) -> PolicyContext:
    dec_ss, aux_ss = np.random.SeedSequence(cfg["seed"]).spawn(2)
    dec_rng = np.random.Generator(np.random.PCG64(dec_ss))
    aux_rng = np.random.Generator(np.random.PCG64(aux_ss))
    noise_view, noise_grad_view, _ = experiments._noise_views(cfg, problem,
                                                              aux_rng)
    cost_view, cost_grad_view = experiments._cost_views(cfg, problem)
    return PolicyContext(
        domain=problem.domain,
        density=problem.density,
        noise_fns=noise_view or problem.noise_fns(),
        cost_fns=cost_view or problem.cost_fns(),
        rng=dec_rng,
        saa_batch=cfg["policy"]["saa"]["J"],
        noise_grad_fns=noise_grad_view or problem.noise_grad_fns(),
        cost_grad_fns=cost_grad_view or problem.cost_grad_fns(),
    )


def cmd_validate(args) -> int:
    cfg = _load_normalized(args)
    print(
        "config ok: problem={name} d={d} policy={policy} budget={total} "
        "replications={reps}".format(
            name=cfg["problem"]["name"],
            d=cfg["problem"]["d"],
            policy=cfg["policy"]["name"],
            total=cfg["budget"]["total"],
            reps=cfg["replications"],
        )
    )
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load_normalized(args)
    workers = args.workers if args.workers is not None else (os.cpu_count() or 1)
    if workers < 1:
        raise ConfigError("--workers must be at least 1")
    result = experiments.run_experiment(cfg, workers=workers)
    out_dir = Path(args.output or cfg["output"]["dir"] or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "results.csv"
    manifest_path = out_dir / "manifest.json"
    experiments.write_csv(result.rows, csv_path)
    experiments.write_manifest(result.manifest, manifest_path)
    print(f"wrote {len(result.rows)} rows to {csv_path}")
    print(f"wrote manifest to {manifest_path}")
    if result.failures:
        for failure in result.failures:
            print(
                f"replication {failure['replication']} failed: "
                f"{failure['error']}",
                file=sys.stderr,
            )
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_decide(args) -> int:
    cfg = _load_normalized(args)
    problem = experiments.build_problem(cfg)
    policy = experiments.build_policy(cfg, problem)
    state = (_load_state(args.state, problem) if args.state
             else problem.fresh_state())
    ctx = _decision_context(cfg, problem)
    decision, diagnostics = policy.decide(state, ctx)
    payload = {
        "alternative": decision.alternative + 1,
        "location": decision.location.tolist(),
        "policy": policy.name,
    }
    if diagnostics is not None:
        payload["log_ikg"] = [float(v) for v in diagnostics["log_ikg"]]
        payload["candidates"] = [c.tolist() for c in diagnostics["candidates"]]
        payload["init_points"] = [p.tolist() for p in diagnostics["init_points"]]
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_oc(args) -> int:
    cfg = _load_normalized(args)
    problem = experiments.build_problem(cfg)
    state = _load_state(args.state, problem)
    draws = args.draws if args.draws is not None else cfg["eval"]["draws"]
    if draws < 1:
        raise ConfigError("--draws must be at least 1")
    rng = np.random.default_rng(cfg["seed"])
    points = experiments.sample_covariates(problem.density, problem.domain,
                                           draws, rng)
    oc = experiments.estimate_oc(state, problem, points)
    print(json.dumps({"oc": oc, "draws": int(draws)}, sort_keys=True))
    return EXIT_OK


def cmd_selftest(args) -> int:
    results = run_selftest()
    failed = 0
    for result in results:
        if result.passed:
            print(f"ok   {result.name}")
        else:
            failed += 1
            print(f"FAIL {result.name}: {result.detail}")
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_RUNTIME


_HANDLERS = {
    "run": cmd_run,
    "validate": cmd_validate,
    "decide": cmd_decide,
    "oc": cmd_oc,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return EXIT_OK if err.code in (0, None) else EXIT_INVALID
    handler = _HANDLERS[args.command]
    try:
        return handler(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID
    except (FileNotFoundError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalError, DegenerateStateError) as err:
        print(f"runtime error: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as err:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
