"""``phytosub`` command line entry point.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 endpoint error.
Every subcommand writes a JSON report (``--report``, default
``<out-dir>/<command>.report.json``) carrying the config digest.
"""

from __future__ import annotations

import argparse
import glob
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .categorize import categorize_all
from .config import GlobalConfig, load_config
from .corpus import (
    RecipeFormat,
    Split,
    compute_split_stats,
    load_corpus,
    load_recipes,
    load_substitutions,
    split_records,
    write_dataset,
)
from .enrich import (
    BaselineSubstituter,
    GatewaySubstituter,
    ScriptedSubstituter,
    enrich_corpus,
    filter_salads,
    load_phyto_table,
    parse_networks,
    rank_recipes,
)
from .errors import ConfigError, EndpointUnreachable, PhytosubError
from .evaluation import (
    baseline_predictions,
    evaluate_runs,
    parse_predictions,
    train_frequency_baseline,
    write_predictions,
)
from .filtration import run_filtration, select_run, summarize_runs
from .finetune import emit_manifest, export_chat, export_prompt_completion
from .gateway import Gateway, GenerationParams, HttpBackend, MockBackend, VirtualClock
from .normalize import cluster_ingredients

logger = logging.getLogger("phytosub")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ENDPOINT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def make_gateway(backend: str, config: GlobalConfig) -> Gateway:
    """``mock:script.json`` for a scripted offline backend, ``http`` for the configured endpoint."""
    if backend.startswith("mock:"):
        # no remote quota to protect, so throttling runs on a virtual clock
        return Gateway(MockBackend.from_file(backend[5:]), config.gateway, VirtualClock())
    if backend == "http":
        return Gateway(HttpBackend(config.gateway), config.gateway)
    raise UsageError(f"unknown backend {backend!r}; use mock:PATH or http")


def _params(base: GenerationParams, args) -> GenerationParams:
    return GenerationParams(
        model_id=args.model_id or base.model_id,
        temperature=base.temperature if args.temperature is None else args.temperature,
        max_output_tokens=args.max_tokens or base.max_output_tokens,
    )


def _add_param_flags(p: argparse.ArgumentParser, temperature: bool = True) -> None:
    p.add_argument("--model-id", help="model identifier sent to the endpoint")
    if temperature:
        p.add_argument("--temperature", type=float, help="sampling temperature")
    p.add_argument("--max-tokens", type=int, help="output token limit")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="phytosub", description="Ingredient-substitution data pipeline.")
    parser.add_argument("--version", action="version", version=f"phytosub {__version__}")
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--out-dir", default=".", help="directory for outputs and reports (default: .)")
    parser.add_argument("--report", help="report path (default: <out-dir>/<command>.report.json)")
    parser.add_argument("-q", "--quiet", action="store_true", help="only log warnings")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    p = sub.add_parser("stats", help="split counts of a substitution dataset")
    p.add_argument("dataset", help="substitution JSONL")
    p.add_argument("--recipes", help="recipe JSONL to check references against")

    p = sub.add_parser("filter", help="label substitutions Correct/Potential/Incorrect")
    p.add_argument("dataset", help="substitution JSONL")
    p.add_argument("--recipes", required=True, help="recipe JSONL")
    p.add_argument("--recipe-format", choices=[f.value for f in RecipeFormat], default="jsonl")
    p.add_argument("--runs", type=int, default=5, help="independent labelling runs (default 5)")
    p.add_argument("--backend", default="http", help="mock:SCRIPT.json or http (default)")
    p.add_argument("--base-seed", type=int, default=0, help="run k uses seed base+k")
    sel = p.add_mutually_exclusive_group()
    sel.add_argument("--run", type=int, help="copy run K's kept set to filtered.jsonl")
    sel.add_argument("--select-seed", type=int, help="pick the downstream run uniformly with this seed")
    _add_param_flags(p)

    p = sub.add_parser("categorize", help="append a FooDB category column to an ingredient CSV")
    p.add_argument("input", help="input CSV")
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--column", help="ingredient-name column (default: ingredient/name)")
    p.add_argument("--cache", help="category cache JSON, read and updated")
    p.add_argument("--backend", default="http", help="mock:SCRIPT.json or http (default)")
    _add_param_flags(p, temperature=False)

    p = sub.add_parser("export", help="write fine-tuning JSONL")
    p.add_argument("dataset", help="substitution JSONL (e.g. a kept set)")
    p.add_argument("--recipes", required=True, help="recipe JSONL")
    p.add_argument("--format", choices=["prompt", "chat"], required=True)
    p.add_argument("--split", choices=[s.value for s in Split], help="only export this split")
    p.add_argument("--out", required=True, help="output JSONL")

    p = sub.add_parser("manifest", help="write a training manifest")
    p.add_argument("--model", required=True, choices=["davinci", "gpt35", "tinyllama"])
    p.add_argument("--variant", required=True, choices=["unfiltered", "filtered"])

    p = sub.add_parser("predict-baseline", help="frequency-baseline predictions")
    p.add_argument("dataset", help="substitution JSONL with train and evaluation splits")
    p.add_argument("--split", choices=[s.value for s in Split], default="test")
    p.add_argument("--out", required=True, help="prediction JSONL")

    p = sub.add_parser("eval", help="Hit@1 over one or more prediction files")
    p.add_argument("--preds", nargs="+", required=True, help="prediction files (globs allowed), one per run")
    p.add_argument("--clusters", help="curated group CSV (group_id,member)")
    p.add_argument("--format", choices=["jsonl", "tsv"], help="default: from file suffix")
    p.add_argument("--coarse", action="store_true", help="also merge names sharing a head noun")
    p.add_argument("--dataset-label", default="", help="label for the summary row")
    p.add_argument("--model-label", default="", help="label for the summary row")

    p = sub.add_parser("enrich", help="phytochemically enrich recipes")
    p.add_argument("recipes", help="recipe JSONL")
    p.add_argument("--phyto", help="phyto table CSV (ingredient,network,score)")
    p.add_argument("--networks", help="comma list of Cancer,Alzheimers,Covid19 (default all)")
    p.add_argument("--salad-only", action="store_true")
    p.add_argument("--substituter", required=True,
                   help="table:MAP.json, baseline:SUBS.jsonl, mock:SCRIPT.json or http")
    p.add_argument("--out", required=True, help="enriched recipe JSONL")
    _add_param_flags(p)

    p = sub.add_parser("rank", help="rank recipes by cumulative phytochemical score")
    p.add_argument("recipes", help="recipe JSONL")
    p.add_argument("--phyto", help="phyto table CSV")
    p.add_argument("--networks", help="comma list of networks (default all)")
    p.add_argument("--salad-only", action="store_true")
    p.add_argument("--top", type=int, help="show only the first N")
    return parser


# -- subcommands ----------------------------------------------------------


def cmd_stats(args, config):
    records = load_substitutions(args.dataset)
    stats = compute_split_stats(records)
    print(f"train {stats.train}  validation {stats.validation}  test {stats.test}  total {stats.total}")
    report = {"stats": stats.to_dict()}
    if args.recipes:
        corpus = load_corpus(args.recipes)
        missing = [r.id for r in records if r.recipe_id not in corpus]
        report["unresolved"] = missing
        if missing:
            logger.warning("%d records reference unknown recipes", len(missing))
    return report


def cmd_filter(args, config):
    records = load_substitutions(args.dataset)
    corpus = load_corpus(args.recipes, args.recipe_format)
    gateway = make_gateway(args.backend, config)
    params = _params(config.filter, args)
    runs = run_filtration(records, corpus, gateway, params, runs=args.runs,
                          base_seed=args.base_seed, out_dir=args.out_dir)
    summary = summarize_runs(runs)
    for r in runs:
        c = r.counts
        print(f"run {r.run_index}: train {c.train}  validation {c.validation}  test {c.test}  total {c.total}")
    print(f"kept: {summary.format()}")
    report = {"runs": [{"run": r.run_index, "kept": r.counts.to_dict()} for r in runs],
              "summary": summary.to_dict(), "params": vars(params)}
    if args.run is not None or args.select_seed is not None:
        chosen = select_run(runs, run=args.run, seed=args.select_seed)
        path = Path(args.out_dir) / "filtered.jsonl"
        write_dataset(chosen.kept_records, path)
        report["selected_run"] = chosen.run_index
        print(f"selected run {chosen.run_index} -> {path}")
    return report


def cmd_categorize(args, config):
    gateway = make_gateway(args.backend, config)
    result = categorize_all(
        args.input, args.out, gateway,
        column=args.column,
        cache_path=args.cache or config.paths.cache,
        model_id=args.model_id or config.categorize.model_id,
        max_output_tokens=args.max_tokens or config.categorize.max_output_tokens,
    )
    print(f"{result.rows} rows, {result.queried} queries, {len(result.flagged)} flagged -> {args.out}")
    return result.to_dict()


def cmd_export(args, config):
    records = load_substitutions(args.dataset)
    if args.split:
        records = split_records(records, args.split)
    corpus = load_corpus(args.recipes)
    export = export_prompt_completion if args.format == "prompt" else export_chat
    report = export(records, corpus, args.out)
    if report.over_length:
        logger.warning("%d records exceed %d estimated tokens", len(report.over_length), 512)
    print(f"wrote {report.n_records} {args.format} records -> {args.out}")
    return report.to_dict()


def cmd_manifest(args, config):
    manifest = emit_manifest(args.model, args.variant, args.out_dir)
    path = Path(args.out_dir) / manifest.filename
    print(f"{manifest.model_kind.value} {manifest.dataset_variant.value}: epochs {manifest.epochs}, "
          f"steps {manifest.steps}, batch {manifest.batch_size} -> {path}")
    return manifest.to_dict()


def cmd_predict_baseline(args, config):
    records = load_substitutions(args.dataset)
    model = train_frequency_baseline(split_records(records, Split.TRAIN))
    preds = baseline_predictions(model, split_records(records, args.split))
    write_predictions(preds, args.out)
    abstained = sum(p.predicted is None for p in preds)
    print(f"{len(preds)} predictions ({abstained} abstentions) -> {args.out}")
    return {"n_sources": len(model.table), "n_predictions": len(preds), "abstained": abstained}


def _expand(patterns):
    paths = []
    for pat in patterns:
        hits = sorted(glob.glob(pat))
        paths.extend(hits or [pat])
    return paths


def cmd_eval(args, config):
    paths = _expand(args.preds)
    clusters = args.clusters or config.paths.clusters
    runs = [parse_predictions(p, args.format) for p in paths]
    names = {n for run in runs for r in run for n in (r.truth, r.predicted) if n}
    clustering = cluster_ingredients(names, clusters, coarse=args.coarse)
    report = evaluate_runs(runs, clustering, labels=[Path(p).name for p in paths])
    print(report.format_table(args.dataset_label, args.model_label))
    out = report.to_dict()
    out["files"] = paths
    out["coarse"] = args.coarse
    return out


def _substituter(backend: str, args, config):
    if backend.startswith("table:"):
        return ScriptedSubstituter.from_file(backend[6:])
    if backend.startswith("baseline:"):
        return BaselineSubstituter(train_frequency_baseline(split_records(load_substitutions(backend[9:]), Split.TRAIN)))
    return GatewaySubstituter(make_gateway(backend, config), _params(config.enrich, args))


def _phyto(args, config):
    path = args.phyto or config.paths.phyto_table
    if not path:
        raise UsageError("no phyto table: pass --phyto or set paths.phyto_table")
    return load_phyto_table(path)


def cmd_enrich(args, config):
    recipes = load_recipes(args.recipes)
    table = _phyto(args, config)
    networks = parse_networks(args.networks)
    report, enriched = enrich_corpus(recipes, _substituter(args.substituter, args, config), table, networks,
                                     salad_only=args.salad_only, out_path=args.out)
    print(f"{report.n_pairs} enriched substitutions across {report.n_unique_recipes} recipes -> {args.out}")
    return report.to_dict()


def cmd_rank(args, config):
    recipes = load_recipes(args.recipes)
    if args.salad_only:
        recipes = filter_salads(recipes)
    networks = parse_networks(args.networks)
    ranked = rank_recipes(recipes, _phyto(args, config), networks)
    if args.top:
        ranked = ranked[: args.top]
    for pos, (r, score) in enumerate(ranked, start=1):
        print(f"{pos:>3}  {score:>8.2f}  {r.id}  {r.title}")
    return {"networks": sorted(n.value for n in networks),
            "ranking": [{"id": r.id, "title": r.title, "score": s} for r, s in ranked]}


COMMANDS = {
    "stats": cmd_stats,
    "filter": cmd_filter,
    "categorize": cmd_categorize,
    "export": cmd_export,
    "manifest": cmd_manifest,
    "predict-baseline": cmd_predict_baseline,
    "eval": cmd_eval,
    "enrich": cmd_enrich,
    "rank": cmd_rank,
}


def dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                            format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
        config = load_config(args.config)
        digest = config.digest()
        logger.info("config %s", digest)
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
        result = COMMANDS[args.command](args, config)
        report = {"command": args.command, "config_hash": digest, **result}
        report_path = Path(args.report) if args.report else Path(args.out_dir) / f"{args.command}.report.json"
        report_path.write_text(json.dumps(report, indent=2, ensure_ascii=False, default=str) + "\n", encoding="utf-8")
        return EXIT_OK
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EndpointUnreachable as exc:
        print(f"endpoint error: {exc}", file=sys.stderr)
        return EXIT_ENDPOINT
    except (PhytosubError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(dispatch())
