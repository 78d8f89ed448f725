"""Command surface: analyze, train, retrieve, probe, simulate.

Each command resolves its configuration, writes every artifact into a
directory named after the command and the configuration digest, and
stamps the resolved configuration plus a format version into each JSON
output. Repeating a command with the same resolved configuration
reproduces the artifacts byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import io as hio
from .bank import MemoryBank, push_batch
from .config import (
    FORMAT_VERSION,
    config_digest,
    load_config_file,
    resolve_config,
    train_config_from,
)
from .core import MODALITY_GALLERY, EmbeddingSet, cosine_similarity_matrix
from .errors import ConfigError, HubLabError
from .eval import retrieval_eval, infer_simi_cent
from .hubness import RelevanceLabels, hubness_report, pseudo_positive_probe, worker_count
from .trainer import CURVE_COLUMNS, PairedData, synth_generate, train


def _write_json(path: Path, command: str, resolved: dict, payload: dict) -> None:
    doc = {"format_version": FORMAT_VERSION, "command": command,
           "config": resolved}
    doc.update(payload)
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def _artifact_dir(out_root, command: str, resolved: dict) -> Path:
    digest = config_digest(command, resolved)
    directory = Path(out_root) / f"{command}-{digest}"
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def _resolved(args, **overrides) -> dict:
    file_config = load_config_file(args.config) if args.config else None
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    return resolve_config(file_config, overrides)


def _load_labels(path, shape) -> RelevanceLabels:
    doc = json.loads(Path(path).read_text())
    pairs = doc.get("pairs") if isinstance(doc, dict) else doc
    if pairs is None:
        raise ConfigError(f"{path}: expected a 'pairs' list")
    source = doc.get("source", "ground-truth") if isinstance(doc, dict) else "ground-truth"
    return RelevanceLabels.from_pairs(pairs, shape, source)


def cmd_analyze(args) -> Path:
    overrides = {"queries": args.queries, "galleries": args.galleries}
    if args.k is not None:
        overrides["k"] = args.k
    resolved = _resolved(args, **overrides)
    if not resolved["queries"] or not resolved["galleries"]:
        raise ConfigError("analyze needs --queries and --galleries")
    queries = hio.read_embedding_set(resolved["queries"])
    galleries = hio.read_embedding_set(resolved["galleries"])
    s = cosine_similarity_matrix(queries, galleries)
    report = hubness_report(s, resolved["k"], resolved["hub_size_factor"],
                            resolved["atkinson_epsilon"], workers=worker_count())
    out = _artifact_dir(args.out, "analyze", resolved)
    _write_json(out / "report.json", "analyze", resolved,
                {"report": report.to_dict()})
    with open(out / "histogram.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n_k", "count"])
        writer.writerows(report.histogram)
    return out


def cmd_train(args) -> Path:
    resolved = _resolved(args, queries=args.queries, galleries=args.galleries)
    config = train_config_from(resolved)
    if resolved["queries"] and resolved["galleries"]:
        data_q = hio.read_embedding_set(resolved["queries"])
        data_g = hio.read_embedding_set(resolved["galleries"])
        if data_q.n != data_g.n:
            raise ConfigError("query and gallery files must pair row for row")
        data = PairedData(data_q, data_g, RelevanceLabels.diagonal(data_q.n))
    else:
        data = synth_generate(resolved["n_pairs"], resolved["dim"],
                              resolved["hub_fraction"], resolved["contraction"],
                              resolved["noise"], resolved["seed"])
    result = train(config, data)
    out = _artifact_dir(args.out, "train", resolved)
    _write_json(out / "resolved_config.json", "train", resolved, {})
    _write_json(out / "report_before.json", "train", resolved,
                {"report": result.report_before.to_dict()})
    _write_json(out / "report_after.json", "train", resolved,
                {"report": result.report_after.to_dict()})
    with open(out / "loss_curve.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CURVE_COLUMNS)
        for row in result.loss_curve:
            writer.writerow([row[c] for c in CURVE_COLUMNS])
    hio.write_embedding_set(out / "trained_queries.emb", result.queries)
    hio.write_embedding_set(out / "trained_galleries.emb", result.galleries)
    return out


def cmd_retrieve(args) -> Path:
    overrides = {"queries": args.queries, "galleries": args.galleries,
                 "labels": args.labels, "bank": args.bank}
    if args.mode is not None:
        overrides["mode"] = args.mode
    resolved = _resolved(args, **overrides)
    if not resolved["queries"] or not resolved["galleries"]:
        raise ConfigError("retrieve needs --queries and --galleries")
    if resolved["mode"] not in ("simi", "simi-cent"):
        raise ConfigError(f"mode must be 'simi' or 'simi-cent', got {resolved['mode']!r}")
    queries = hio.read_embedding_set(resolved["queries"])
    galleries = hio.read_embedding_set(resolved["galleries"])
    s = cosine_similarity_matrix(queries, galleries)
    if resolved["mode"] == "simi-cent":
        bank_path = resolved["bank"] or resolved["galleries"]
        bank_data, bank_modality, _ = hio.read_embeddings(bank_path)
        if bank_modality != MODALITY_GALLERY:
            raise ConfigError("simi-cent bank must hold gallery-side embeddings")
        bank = MemoryBank(max(bank_data.shape[0], 1), galleries.dim)
        if bank_data.shape[0]:
            push_batch(bank, EmbeddingSet(bank_data, MODALITY_GALLERY))
        s = infer_simi_cent(s, galleries, bank)
    if resolved["labels"]:
        labels = _load_labels(resolved["labels"], s.scores.shape)
    else:
        if s.n != s.m:
            raise ConfigError("without --labels, query and gallery counts must match")
        labels = RelevanceLabels.diagonal(s.n)
    scores = retrieval_eval(s, labels)
    out = _artifact_dir(args.out, "retrieve", resolved)
    _write_json(out / "retrieval.json", "retrieve", resolved,
                {"mode": resolved["mode"], "scores": scores.to_dict()})
    gallery_ids = galleries.ids or [f"g{j:05d}" for j in range(s.m)]
    query_ids = queries.ids or [f"q{i:05d}" for i in range(s.n)]
    top = np.argsort(-s.scores, axis=1, kind="stable")[:, :10]
    with open(out / "ranked.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["query_id", "rank", "gallery_id", "score"])
        for i in range(s.n):
            for r, j in enumerate(top[i], start=1):
                writer.writerow([query_ids[i], r, gallery_ids[j],
                                 repr(float(s.scores[i, j]))])
    return out


def cmd_probe(args) -> Path:
    overrides = {"texts": args.texts}
    if args.threshold is not None:
        overrides["probe_threshold"] = args.threshold
    resolved = _resolved(args, **overrides)
    if not resolved["texts"]:
        raise ConfigError("probe needs --texts")
    texts = hio.read_embedding_set(resolved["texts"])
    labels = pseudo_positive_probe(texts, resolved["probe_threshold"])
    out = _artifact_dir(args.out, "probe", resolved)
    _write_json(out / "labels.json", "probe", resolved,
                {"source": labels.source,
                 "n": int(labels.matrix.shape[0]),
                 "m": int(labels.matrix.shape[1]),
                 "pairs": labels.to_pairs()})
    return out


def cmd_simulate(args) -> Path:
    resolved = _resolved(args)
    data = synth_generate(resolved["n_pairs"], resolved["dim"],
                          resolved["hub_fraction"], resolved["contraction"],
                          resolved["noise"], resolved["seed"])
    out = _artifact_dir(args.out, "simulate", resolved)
    hio.write_embedding_set(out / "queries.emb", data.queries)
    hio.write_embedding_set(out / "galleries.emb", data.galleries)
    _write_json(out / "simulate.json", "simulate", resolved,
                {"n_pairs": data.n,
                 "planted": [int(i) for i in np.flatnonzero(data.planted)]})
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hublab",
        description="Hubness diagnostics and hubness-aware embedding training.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="PATH", help="JSON config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", metavar="DIR", default="runs",
                       help="artifacts root (default: runs)")

    p = sub.add_parser("analyze", help="hubness report for an embedding pair")
    common(p)
    p.add_argument("--queries", metavar="PATH")
    p.add_argument("--galleries", metavar="PATH")
    p.add_argument("--k", type=int, help="neighborhood size for k-occurrence")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("train", help="train a model on paired embeddings")
    common(p)
    p.add_argument("--queries", metavar="PATH", help="optional imported queries")
    p.add_argument("--galleries", metavar="PATH", help="optional imported galleries")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("retrieve", help="rank galleries and score retrieval")
    common(p)
    p.add_argument("--queries", metavar="PATH")
    p.add_argument("--galleries", metavar="PATH")
    p.add_argument("--labels", metavar="PATH", help="relevance pairs JSON")
    p.add_argument("--bank", metavar="PATH", help="bank source for simi-cent")
    p.add_argument("--mode", choices=["simi", "simi-cent"])
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("probe", help="pseudo-positive labels from text similarity")
    common(p)
    p.add_argument("--texts", metavar="PATH")
    p.add_argument("--threshold", type=float)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("simulate", help="write a synthetic planted-hub dataset")
    common(p)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        out = args.func(args)
    except HubLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
