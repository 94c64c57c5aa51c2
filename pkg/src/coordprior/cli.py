"""Command-line entry point: ``coordprior <subcommand> [flags]``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import env
from .describe import describe_all
from .env import SCENARIOS, make_spec
from .errors import ConfigError, UsageError
from .harness import ExperimentConfig, load_config, parse_method, run_experiment
from .learn import (
    PriorSource,
    TrainConfig,
    evaluate,
    load_checkpoint,
    run_training,
)
from .prior import (
    PROVIDER_KINDS,
    ParseFailure,
    ProviderConfig,
    ProviderFailure,
    build_prompt,
    make_provider,
    parse_adjacency,
    prior_for_episode,
)

URL_ENV = "PRIOR_PROVIDER_URL"
PROBE_SCENARIO, PROBE_SEED = "cooperative_push", 0


def _emit(obj, as_json: bool, text: str) -> None:
    print(json.dumps(obj, indent=2) if as_json else text)


def _matrix_text(m) -> str:
    return "\n".join("  " + " ".join(f"{v:8.4f}" for v in row) for row in np.asarray(m))


def provider_config(args) -> ProviderConfig:
    """Provider settings from flags; ``PRIOR_PROVIDER_URL`` fills in only a missing base URL."""
    url = args.base_url or os.environ.get(URL_ENV, "")
    kind = args.provider or ("http_chat" if url else "mock_uniform")
    return ProviderConfig(kind=kind, base_url=url, model=args.model, temperature=args.temperature,
                          max_tokens=args.max_tokens, timeout=args.timeout,
                          retry_count=args.retries, cache_dir=args.cache_dir)


# -- subcommands -----------------------------------------------------------------


def cmd_describe(args) -> int:
    spec = make_spec(args.scenario)
    _, obs = env.reset(spec, args.seed)
    summaries = describe_all(obs, spec)
    _emit([{"agent": s.agent_index, "text": s.text} for s in summaries], args.json,
          "\n".join(f"agent {s.agent_index}: {s.text}" for s in summaries))
    return 0


def cmd_gen_prior(args) -> int:
    spec = make_spec(args.scenario)
    cfg = provider_config(args)
    _, obs = env.reset(spec, args.seed)
    bundle = build_prompt(describe_all(obs, spec), spec)
    out = {"scenario": spec.scenario, "seed": args.seed,
           "prompt": {"system": bundle.system, "user": bundle.user},
           "prompt_hash": bundle.prompt_hash}
    if args.dry_run:
        _emit(out, args.json, f"{bundle.system}\n\n{bundle.user}")
        return 0
    prior = prior_for_episode(obs, spec, cfg, make_provider(cfg))
    out.update({"matrix": prior.matrix.tolist(), "raw_response": prior.raw_text,
                "fallback": prior.fallback, "provenance": prior.provenance()})
    note = "  (uniform fallback)" if prior.fallback else ""
    _emit(out, args.json, f"prior for {spec.scenario} seed {args.seed}{note}:\n"
          f"{_matrix_text(prior.matrix)}\nraw response:\n{prior.raw_text}")
    return 0


def _train_config(args) -> tuple[TrainConfig, ProviderConfig]:
    if args.config:
        exp = load_config(args.config)
        base, pcfg = exp.train, exp.provider
    else:
        base, pcfg = TrainConfig(), provider_config(args)
    method, mode = parse_method(args.method)
    over = {"method": method, "prior_mode": mode, "seeds": (args.seed,)}
    if args.steps is not None:
        over["total_steps"] = args.steps
    if args.eval_interval is not None:
        over["eval_interval"] = args.eval_interval
    if args.eval_episodes is not None:
        over["eval_episodes"] = args.eval_episodes
    return dataclasses.replace(base, **over), pcfg


def cmd_train(args) -> int:
    cfg, pcfg = _train_config(args)
    spec = make_spec(args.scenario)
    out = Path(args.output)
    tlog = run_training(spec, cfg, pcfg, seed=args.seed, checkpoint=out / "checkpoint.npz")
    tlog.write_csv(out / "log.csv")
    res = {"scenario": spec.scenario, "method": args.method, "seed": args.seed,
           "final_return": tlog.final_return, "rows": len(tlog.rows),
           "provider_calls": tlog.provider_calls, "log": str(out / "log.csv"),
           "checkpoint": str(out / "checkpoint.npz")}
    _emit(res, args.json, f"final greedy return {tlog.final_return:.3f} "
          f"({len(tlog.rows)} eval rows) -> {out}")
    return 0


def cmd_eval(args) -> int:
    path = Path(args.checkpoint)
    if not path.is_file():
        print(f"error: checkpoint not found: {path}", file=sys.stderr)
        return 2
    learner, spec, cfg = load_checkpoint(path)
    priors = PriorSource(spec, cfg.prior_mode, provider_config(args))
    rng = np.random.default_rng(args.seed)
    returns = evaluate(spec, learner, priors, rng.integers(0, 2**31 - 1, size=args.episodes))
    mean = float(np.mean(returns))
    half = 1.96 * float(np.std(returns, ddof=1)) / math.sqrt(len(returns)) if len(returns) > 1 else math.nan
    res = {"scenario": spec.scenario, "method": cfg.method, "episodes": len(returns),
           "mean_return": mean, "ci95": [mean - half, mean + half], "returns": returns}
    _emit(res, args.json, f"{spec.scenario} {cfg.method}: mean greedy return {mean:.3f} "
          f"+/- {half:.3f} over {len(returns)} episodes")
    return 0


def cmd_experiment(args) -> int:
    cfg: ExperimentConfig = load_config(args.config)
    if args.output:
        cfg = dataclasses.replace(cfg, output_dir=args.output)
    table = run_experiment(cfg, jobs=args.jobs)
    if args.json:
        print(json.dumps([dataclasses.asdict(r) for r in table.rows], indent=2))
    else:
        print(table.to_text(), end="")
    for r in table.failures:
        print(f"warning: {r.scenario}/{r.method} seed {r.seed} failed: {r.error}", file=sys.stderr)
    return 0


def cmd_validate_provider(args) -> int:
    cfg = dataclasses.replace(provider_config(args), cache_dir="")
    spec = make_spec(PROBE_SCENARIO)
    _, obs = env.reset(spec, PROBE_SEED)
    bundle = build_prompt(describe_all(obs, spec), spec)
    provider = make_provider(cfg)
    report = {"provider": cfg.kind, "model": cfg.model_id, "n_agents": bundle.n,
              "ok": False, "latency_s": None, "symmetry_error": None, "warnings": [], "error": None}
    t0 = time.perf_counter()
    try:
        text = provider.complete(bundle)
        report["latency_s"] = time.perf_counter() - t0
        raw = parse_adjacency(text, bundle.n)
    except ProviderFailure as exc:
        report["error"] = f"ProviderFailure: {exc}"
    except ParseFailure as exc:
        report["error"] = f"ParseFailure: {exc}"
    else:
        sym = float(np.max(np.abs(raw.matrix - raw.matrix.T)))
        report["symmetry_error"] = sym
        if sym > 0:
            report["warnings"].append(f"response is not symmetric (max |A - A^T| = {sym:.6g})")
        report["ok"] = True
    if args.json:
        print(json.dumps(report, indent=2))
    else:
        print(f"provider {cfg.kind} ({cfg.model_id}): {'PASS' if report['ok'] else 'FAIL'}")
        if report["latency_s"] is not None:
            print(f"  latency: {report['latency_s']:.3f} s")
        if report["symmetry_error"] is not None:
            print(f"  symmetry error: {report['symmetry_error']:.6g}")
        for w in report["warnings"]:
            print(f"  warning: {w}")
        if report["error"]:
            print(f"  {report['error']}")
    return 0 if report["ok"] else 1


# -- parser ------------------------------------------------------------------------


def _add_provider_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("provider")
    g.add_argument("--provider", choices=PROVIDER_KINDS, default=None,
                   help=f"default: http_chat when a base URL is known (flag or ${URL_ENV}), else mock_uniform")
    g.add_argument("--base-url", default=None, help=f"overrides ${URL_ENV}")
    g.add_argument("--model", default="local-model")
    g.add_argument("--temperature", type=float, default=0.0)
    g.add_argument("--max-tokens", type=int, default=512)
    g.add_argument("--timeout", type=float, default=30.0)
    g.add_argument("--retries", type=int, default=2)
    g.add_argument("--cache-dir", default="", help="response cache directory (off when empty)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coordprior",
                                     description="Coordination-graph priors for cooperative MARL.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.set_defaults(func=func)
        p.add_argument("--json", action="store_true", help="machine-readable output")
        return p

    p = add("describe", cmd_describe, "print the text summary of each agent's first observation")
    p.add_argument("--scenario", choices=SCENARIOS, required=True)
    p.add_argument("--seed", type=int, default=0)

    p = add("gen-prior", cmd_gen_prior, "build the prompt, query a provider and print the prior")
    p.add_argument("--scenario", choices=SCENARIOS, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dry-run", action="store_true", help="print the prompt only")
    _add_provider_flags(p)
    p.set_defaults(json=True)
    p.add_argument("--text", dest="json", action="store_false", help="human-readable output")

    p = add("train", cmd_train, "train one (scenario, method, seed) run")
    p.add_argument("--scenario", choices=SCENARIOS, required=True)
    p.add_argument("--method", default="qmix", help="iql, vdn, qmix, ours or ours:<prior mode>")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--eval-interval", type=int, default=None)
    p.add_argument("--eval-episodes", type=int, default=None)
    p.add_argument("--config", default=None, help="experiment config whose [train] and [provider] apply")
    p.add_argument("--output", "-o", default="run")
    _add_provider_flags(p)

    p = add("eval", cmd_eval, "greedy evaluation of a saved checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    _add_provider_flags(p)

    p = add("experiment", cmd_experiment, "run every (scenario, method, seed) in a config")
    p.add_argument("--config", required=True)
    p.add_argument("--output", "-o", default=None, help="overrides output_dir")
    p.add_argument("--jobs", type=int, default=1, help="parallel seed workers")

    p = add("validate-provider", cmd_validate_provider, "send a fixed 3-agent probe and check the answer")
    _add_provider_flags(p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "config", None) and args.command == "train" and args.provider:
        parser.error("--config and provider flags are mutually exclusive")
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
