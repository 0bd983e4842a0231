"""Single entry point exposing every pipeline stage as a subcommand.

Stages communicate through plain files in the output directory, so any stage
can be rerun or inspected in isolation and the embedding cache can be produced
out-of-process. All writes are atomic; identical config and inputs produce
byte-identical outputs.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import re
import sys
from dataclasses import dataclass
from pathlib import Path

from . import analytics, evaluation
from .corpus import (
    LoadReport,
    convert_s2orc_stream,
    corpus_text,
    read_corpus,
    sample_per_discipline,
    save_corpus,
)
from .embedding import (
    CachedVectorProvider,
    EmbeddingCache,
    HashProvider,
    build_input_text,
    corpus_manifest,
    embed,
    write_manifest,
)
from .fileio import atomic_write_text, read_json, write_json
from .retrofit import fit, load_labels, load_model, retrofit_corpus, save_labels, save_model
from .vocabulary import (
    SectionType,
    StructuralVocabulary,
    count_headings,
    derive_vocabulary,
    load_vocabulary,
    save_vocabulary,
    seed_instances,
    singleton_fraction,
)

OUT_ENV_VAR = "SECTYPES_OUT"

ARTIFACTS = {
    "corpus": "corpus.jsonl",
    "sampled": "sampled.jsonl",
    "sample_report": "sample_report.json",
    "stats": "heading_stats.json",
    "vocabulary": "vocabulary.json",
    "vocab_report": "vocab_report.json",
    "manifest": "manifest.jsonl",
    "model": "model.json",
    "fit_report": "fit_report.json",
    "labels": "labels.jsonl",
    "counts": "retrofit_counts.json",
    "positions_csv": "positions.csv",
    "positions_json": "positions.json",
    "transitions_csv": "transitions.csv",
    "transitions_json": "transitions.json",
    "metrics_json": "metrics.json",
    "metrics_txt": "metrics.txt",
    "annotation": "gold_manifest.csv",
    "config_echo": "effective_config.json",
}


class CliError(RuntimeError):
    """User-facing failure; message printed to stderr, nonzero exit."""

    def __init__(self, message: str, exit_code: int = 1):
        super().__init__(message)
        self.exit_code = exit_code


@dataclass
class PipelineConfig:
    corpus: str | None = None
    out_dir: str = ""
    strict: bool = False
    sample_n: int = 1000
    seed: int = 0
    top_k: int = 20
    min_disciplines: int | None = None
    aliases: str | None = None
    provider: str = "hash"
    hash_dim: int = 64
    hash_seed: int = 0
    cache: str | None = None
    weight: float = 0.5
    norm: str = "l2"
    min_members: int = 2
    max_tokens: int = 25
    bins: int = 20
    policy: str = "drop"
    per_type: int = 30
    jobs: int = 1
    svg: bool = False

    def validate(self) -> None:
        if self.provider not in ("hash", "cache"):
            raise CliError(f"provider must be 'hash' or 'cache', got {self.provider!r}", 2)
        if self.norm not in ("l2", "l1"):
            raise CliError(f"norm must be 'l2' or 'l1', got {self.norm!r}", 2)
        if self.policy not in analytics.POLICIES:
            raise CliError(f"policy must be one of {analytics.POLICIES}", 2)
        if self.bins < 2:
            raise CliError("bins must be >= 2", 2)
        if self.jobs < 1:
            raise CliError("jobs must be >= 1", 2)
        if self.sample_n < 1:
            raise CliError("sample-n must be >= 1", 2)
        if self.weight <= 0:
            raise CliError("weight must be > 0", 2)
        if self.max_tokens < 1:
            raise CliError("max-tokens must be >= 1", 2)

    def path(self, artifact: str) -> Path:
        return Path(self.out_dir) / ARTIFACTS[artifact]


def load_config_file(path: str) -> dict:
    raw = Path(path).read_bytes()
    if path.endswith(".toml"):
        try:
            import tomllib  # type: ignore[import-not-found]
        except ModuleNotFoundError:
            import tomli as tomllib  # type: ignore[no-redef]
        data = tomllib.loads(raw.decode("utf-8"))
    else:
        data = json.loads(raw.decode("utf-8"))
    if not isinstance(data, dict):
        raise CliError(f"{path}: config must be a table/object", 2)
    known = {f.name for f in dataclasses.fields(PipelineConfig)}
    unknown = set(data) - known
    if unknown:
        raise CliError(f"{path}: unknown config keys: {', '.join(sorted(unknown))}", 2)
    return data


def build_config(args: argparse.Namespace) -> PipelineConfig:
    values: dict = {}
    if args.config:
        values.update(load_config_file(args.config))
    for f in dataclasses.fields(PipelineConfig):
        cli_value = getattr(args, f.name, None)
        if cli_value is not None:
            values[f.name] = cli_value
    if not values.get("out_dir"):
        values["out_dir"] = os.environ.get(OUT_ENV_VAR, "sectypes_out")
    cfg = PipelineConfig(**values)
    cfg.validate()
    return cfg


def echo_config(cfg: PipelineConfig) -> None:
    write_json(cfg.path("config_echo"), dataclasses.asdict(cfg))


def require(path: Path, stage: str) -> Path:
    if not path.exists():
        raise CliError(f"missing {path}; run `{stage}` first", 2)
    return path


def _resolve_corpus(cfg: PipelineConfig) -> Path:
    if not cfg.corpus:
        raise CliError("no corpus given; pass --corpus or set it in the config", 2)
    path = Path(cfg.corpus)
    if not path.exists():
        raise CliError(f"corpus file not found: {path}", 2)
    return path


def _load_cache(cfg: PipelineConfig, expect=None) -> EmbeddingCache | None:
    if not cfg.cache:
        return None
    path = Path(cfg.cache)
    if path.exists():
        return EmbeddingCache.load(path, expect=expect)
    return None


def _build_provider(cfg: PipelineConfig):
    """Returns (provider, cache, cache_path). Cache may be None."""
    if cfg.provider == "hash":
        provider = HashProvider(dim=cfg.hash_dim, seed=cfg.hash_seed)
        cache = _load_cache(cfg, expect=provider.descriptor)
        if cache is None and cfg.cache:
            cache = EmbeddingCache(provider.descriptor)
        return provider, cache, Path(cfg.cache) if cfg.cache else None
    if not cfg.cache:
        raise CliError(
            "provider 'cache' needs --cache pointing at an embedding cache file "
            "(generate one from the manifest with an external embedder)",
            2,
        )
    path = Path(cfg.cache)
    if not path.exists():
        raise CliError(f"embedding cache not found: {path}; run `manifest` and embed it first", 2)
    cache = EmbeddingCache.load(path)
    return CachedVectorProvider(cache), cache, None


def _save_cache(cache: EmbeddingCache | None, cache_path: Path | None) -> None:
    if cache is not None and cache_path is not None:
        cache.save(cache_path)


def _alias_overrides(cfg: PipelineConfig) -> dict[SectionType, list[str]] | None:
    if not cfg.aliases:
        return None
    mapping = read_json(cfg.aliases)
    out: dict[SectionType, list[str]] = {}
    for name, aliases in mapping.items():
        out[SectionType(name)] = list(aliases)
    return out


def _slug(name: str) -> str:
    return re.sub(r"\W+", "_", name).strip("_").lower() or "unnamed"


# ---------------------------------------------------------------------------
# Subcommands

def cmd_convert(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    src = Path(args.input)
    if not src.exists():
        raise CliError(f"input file not found: {src}", 2)
    report = LoadReport()
    with open(src, encoding="utf-8") as fh:
        docs = list(convert_s2orc_stream(fh, report=report))
    save_corpus(docs, cfg.path("corpus"))
    echo_config(cfg)
    print(f"converted {report.loaded} documents ({report.skipped} skipped) -> {cfg.path('corpus')}")
    return 0


def cmd_sample(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    docs, _ = read_corpus(_resolve_corpus(cfg), strict=cfg.strict)
    picked, report = sample_per_discipline(docs, n=cfg.sample_n, seed=cfg.seed)
    save_corpus(picked, cfg.path("sampled"))
    write_json(cfg.path("sample_report"), report.to_mapping())
    echo_config(cfg)
    print(f"sampled {len(picked)} documents -> {cfg.path('sampled')}")
    return 0


def cmd_stats(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    docs, load_report = read_corpus(_resolve_corpus(cfg), strict=cfg.strict)
    table = count_headings(docs)
    ranked = sorted(table.entries, key=lambda h: (-table.heading_total(h), h))
    payload = {
        "documents": len(docs),
        "skipped_records": load_report.skipped,
        "total_headings": table.total,
        "distinct_headings": len(table.entries),
        "singleton_fraction": singleton_fraction(table) if not table.is_empty else None,
        "disciplines": sorted(table.disciplines()),
        "top": [
            {
                "heading": h,
                "count": table.heading_total(h),
                "disciplines": table.discipline_count(h),
            }
            for h in ranked[:50]
        ],
    }
    write_json(cfg.path("stats"), payload)
    echo_config(cfg)
    print(f"heading stats for {len(docs)} documents -> {cfg.path('stats')}")
    return 0


def cmd_vocab(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    docs, _ = read_corpus(_resolve_corpus(cfg), strict=cfg.strict)
    table = count_headings(docs)
    vocab, report = derive_vocabulary(
        table,
        alias_overrides=_alias_overrides(cfg),
        top_k=cfg.top_k,
        min_disciplines=cfg.min_disciplines,
    )
    save_vocabulary(vocab, cfg.path("vocabulary"))
    write_json(cfg.path("vocab_report"), report.to_mapping())
    echo_config(cfg)
    if report.used_default:
        print("warning: no top heading matched an alias; wrote the default vocabulary", file=sys.stderr)
    print(f"vocabulary -> {cfg.path('vocabulary')}")
    return 0


def cmd_manifest(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    docs, _ = read_corpus(_resolve_corpus(cfg), strict=cfg.strict)
    entries = corpus_manifest(docs, max_tokens=cfg.max_tokens)
    write_manifest(cfg.path("manifest"), entries)
    echo_config(cfg)
    print(f"{len(entries)} unique input texts -> {cfg.path('manifest')}")
    return 0


def cmd_fit(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    docs, _ = read_corpus(_resolve_corpus(cfg), strict=cfg.strict)
    vocab_path = require(cfg.path("vocabulary"), "vocab")
    vocab = load_vocabulary(vocab_path)
    provider, cache, cache_path = _build_provider(cfg)
    seeds = seed_instances(docs, vocab)
    if not seeds:
        raise CliError("no seed instances found; check the vocabulary and corpus", 1)
    labeled_vectors = [
        (embed(provider, build_input_text(s.section, max_tokens=cfg.max_tokens), cache), s.section_type)
        for s in seeds
    ]
    model = fit(
        labeled_vectors,
        provider=provider.descriptor,
        weight=cfg.weight,
        min_members=cfg.min_members,
        norm=cfg.norm,
    )
    save_model(model, cfg.path("model"))
    write_json(
        cfg.path("fit_report"),
        {
            "seed_counts": {t.value: n for t, n in model.seed_counts.items()},
            "excluded": {t.value: n for t, n in model.excluded.items()},
            "provider": model.provider.to_mapping(),
            "weight": model.weight,
            "norm": model.norm,
        },
    )
    _save_cache(cache, cache_path)
    echo_config(cfg)
    print(f"fitted {len(model.centroids)} centroids from {len(seeds)} seeds -> {cfg.path('model')}")
    return 0


def cmd_retrofit(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    docs, _ = read_corpus(_resolve_corpus(cfg), strict=cfg.strict)
    model = load_model(require(cfg.path("model"), "fit"))
    vocab = load_vocabulary(require(cfg.path("vocabulary"), "vocab"))
    provider, cache, cache_path = _build_provider(cfg)
    labeled, counts = retrofit_corpus(
        docs,
        model,
        provider,
        vocab,
        cache=cache,
        max_tokens=cfg.max_tokens,
        jobs=cfg.jobs,
    )
    save_labels(labeled, cfg.path("labels"))
    write_json(cfg.path("counts"), counts.to_mapping())
    _save_cache(cache, cache_path)
    echo_config(cfg)
    n_sections = sum(len(ld.labels) for ld in labeled)
    n_unclassified = sum(counts.unclassified.values())
    print(
        f"labeled {n_sections} sections in {len(labeled)} documents "
        f"({n_unclassified} unclassified) -> {cfg.path('labels')}"
    )
    return 0


def _load_labeled(cfg: PipelineConfig):
    docs, _ = read_corpus(_resolve_corpus(cfg), strict=cfg.strict)
    labels_path = require(cfg.path("labels"), "retrofit")
    return load_labels(labels_path, docs)


def cmd_positions(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    labeled = _load_labeled(cfg)
    disciplines = sorted({ld.document.discipline for ld in labeled})
    hists = {
        d: analytics.position_histograms(labeled, d, bins=cfg.bins) for d in disciplines
    }
    analytics.write_text(cfg.path("positions_csv"), analytics.positions_csv(hists))
    write_json(cfg.path("positions_json"), analytics.positions_mapping(hists))
    echo_config(cfg)
    print(f"position histograms for {len(disciplines)} disciplines -> {cfg.path('positions_csv')}")
    return 0


def cmd_transitions(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    labeled = _load_labeled(cfg)
    disciplines = sorted({ld.document.discipline for ld in labeled})
    matrices = {
        d: analytics.transition_matrix(labeled, d, unclassified_policy=cfg.policy)
        for d in disciplines
    }
    analytics.write_text(cfg.path("transitions_csv"), analytics.transitions_csv(matrices))
    write_json(cfg.path("transitions_json"), analytics.transitions_mapping(matrices))
    echo_config(cfg)
    print(f"transition matrices for {len(disciplines)} disciplines -> {cfg.path('transitions_csv')}")
    return 0


def cmd_compare(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    mapping = read_json(require(cfg.path("positions_json"), "positions"))
    try:
        hists_a = analytics.histograms_from_mapping(mapping, args.a)
        hists_b = analytics.histograms_from_mapping(mapping, args.b)
    except KeyError as exc:
        raise CliError(str(exc.args[0]), 2) from exc
    cmp = analytics.compare_disciplines(hists_a, hists_b)
    stem = f"compare_{_slug(args.a)}_vs_{_slug(args.b)}"
    csv_path = Path(cfg.out_dir) / f"{stem}.csv"
    json_path = Path(cfg.out_dir) / f"{stem}.json"
    analytics.write_text(csv_path, analytics.comparison_csv(cmp))
    write_json(json_path, analytics.comparison_mapping(cmp))
    echo_config(cfg)
    top_type, top_diff = cmp.ranking[0]
    print(f"largest positional difference: {top_type.value} ({top_diff:.4f}) -> {csv_path}")
    return 0


def cmd_evaluate(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    labeled = _load_labeled(cfg)
    if args.annotate:
        rows, shortfalls = evaluation.stratified_gold_sampler(
            labeled, per_type=cfg.per_type, seed=cfg.seed
        )
        evaluation.write_annotation_manifest(cfg.path("annotation"), rows)
        echo_config(cfg)
        for t, n in shortfalls.items():
            print(f"note: only {cfg.per_type - n} predicted {t.value} sections available", file=sys.stderr)
        print(f"{len(rows)} sections to annotate -> {cfg.path('annotation')}")
        return 0
    if not args.gold:
        raise CliError("evaluate needs --gold GOLD.csv (or --annotate to create a manifest)", 2)
    gold = evaluation.GoldLabelSet.load(args.gold)
    result = evaluation.evaluate(labeled, gold)
    write_json(cfg.path("metrics_json"), result.to_mapping())
    atomic_write_text(cfg.path("metrics_txt"), result.to_table())
    echo_config(cfg)
    print(result.to_table(), end="")
    return 0


def cmd_report(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    report_dir = Path(cfg.out_dir) / "report"
    bundled: list[str] = []
    for artifact in (
        "stats",
        "vocab_report",
        "counts",
        "positions_csv",
        "positions_json",
        "transitions_csv",
        "transitions_json",
        "metrics_json",
        "metrics_txt",
    ):
        src = cfg.path(artifact)
        if src.exists():
            atomic_write_text(report_dir / src.name, src.read_text(encoding="utf-8"))
            bundled.append(src.name)
    for extra in sorted(Path(cfg.out_dir).glob("compare_*.csv")) + sorted(
        Path(cfg.out_dir).glob("compare_*.json")
    ):
        atomic_write_text(report_dir / extra.name, extra.read_text(encoding="utf-8"))
        bundled.append(extra.name)
    if not bundled:
        raise CliError("nothing to report; run the analysis stages first", 2)

    charts: list[str] = []
    if cfg.svg and cfg.path("positions_json").exists():
        mapping = read_json(cfg.path("positions_json"))
        for discipline in sorted(mapping["disciplines"]):
            hists = analytics.histograms_from_mapping(mapping, discipline)
            name = f"positions_{_slug(discipline)}.svg"
            analytics.write_text(report_dir / name, analytics.histogram_svg(hists))
            charts.append(name)
    if cfg.svg and cfg.path("transitions_json").exists():
        tmap = read_json(cfg.path("transitions_json"))
        docs_labeled = None
        for discipline in sorted(tmap["disciplines"]):
            import numpy as np

            entry = tmap["disciplines"][discipline]
            matrix = analytics.TransitionMatrix(
                discipline=discipline,
                probs=np.asarray(entry["probs"], dtype=np.float64),
                support=np.asarray(entry["support"], dtype=np.int64),
            )
            name = f"transitions_{_slug(discipline)}.svg"
            analytics.write_text(report_dir / name, analytics.transition_svg(matrix))
            charts.append(name)
    write_json(
        report_dir / "report.json",
        {"bundled": sorted(bundled), "charts": sorted(charts)},
    )
    echo_config(cfg)
    print(f"report with {len(bundled)} artifacts and {len(charts)} charts -> {report_dir}")
    return 0


COMMANDS = {
    "convert": cmd_convert,
    "sample": cmd_sample,
    "stats": cmd_stats,
    "vocab": cmd_vocab,
    "manifest": cmd_manifest,
    "fit": cmd_fit,
    "retrofit": cmd_retrofit,
    "positions": cmd_positions,
    "transitions": cmd_transitions,
    "compare": cmd_compare,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML or JSON config file")
    common.add_argument("--out", dest="out_dir", help=f"output directory (default ${OUT_ENV_VAR} or ./sectypes_out)")
    common.add_argument("--corpus", help="corpus JSONL file")
    common.add_argument("--strict", action="store_const", const=True, default=None, help="error on the first malformed corpus record")
    common.add_argument("--seed", type=int, help="seed for sampling and annotation manifests")
    common.add_argument("--sample-n", dest="sample_n", type=int, help="documents per discipline for `sample`")
    common.add_argument("--top-k", dest="top_k", type=int, help="headings considered by `vocab`")
    common.add_argument("--min-disciplines", dest="min_disciplines", type=int, help="discipline spread required by `vocab`")
    common.add_argument("--aliases", help="JSON alias-override file for `vocab`")
    common.add_argument("--provider", choices=["hash", "cache"], help="embedding provider")
    common.add_argument("--hash-dim", dest="hash_dim", type=int, help="hash provider dimensionality")
    common.add_argument("--hash-seed", dest="hash_seed", type=int, help="hash provider seed")
    common.add_argument("--cache", help="embedding cache file (read and updated)")
    common.add_argument("--weight", type=float, help="rejection threshold weight")
    common.add_argument("--norm", choices=["l2", "l1"], help="distance norm")
    common.add_argument("--min-members", dest="min_members", type=int, help="minimum seeds per type for `fit`")
    common.add_argument("--max-tokens", dest="max_tokens", type=int, help="token budget for classifier input text")
    common.add_argument("--bins", type=int, help="position histogram bins")
    common.add_argument("--policy", choices=list(analytics.POLICIES), help="unclassified-section policy")
    common.add_argument("--per-type", dest="per_type", type=int, help="annotation sample size per type")
    common.add_argument("--jobs", type=int, help="worker cap for embedding")
    common.add_argument("--svg", action="store_const", const=True, default=None, help="render SVG charts in `report`")

    parser = argparse.ArgumentParser(
        prog="sectypes",
        description="Retrofit scholarly-document sections onto a fixed structural vocabulary "
        "and compute per-discipline structural archetypes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("convert", parents=[common], help="convert S2ORC-style JSONL to the minimal corpus format").add_argument(
        "--input", required=True, help="raw S2ORC-style JSONL file"
    )
    sub.add_parser("sample", parents=[common], help="sample n documents per discipline")
    sub.add_parser("stats", parents=[common], help="heading frequency statistics")
    sub.add_parser("vocab", parents=[common], help="derive the structural vocabulary")
    sub.add_parser("manifest", parents=[common], help="emit unique embedding input texts")
    sub.add_parser("fit", parents=[common], help="fit per-type centroids and thresholds")
    sub.add_parser("retrofit", parents=[common], help="label every section of the corpus")
    sub.add_parser("positions", parents=[common], help="positional frequency histograms")
    sub.add_parser("transitions", parents=[common], help="section-type transition matrices")
    compare = sub.add_parser("compare", parents=[common], help="compare two disciplines' position histograms")
    compare.add_argument("--a", required=True, help="first discipline")
    compare.add_argument("--b", required=True, help="second discipline")
    ev = sub.add_parser("evaluate", parents=[common], help="score labels against gold annotations")
    ev.add_argument("--gold", help="gold CSV (doc_id,section_index,gold_type)")
    ev.add_argument("--annotate", action="store_true", help="emit an annotation manifest instead of scoring")
    sub.add_parser("report", parents=[common], help="bundle analysis artifacts (+ optional SVG charts)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
        Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001 - single reporting point for stage failures
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
