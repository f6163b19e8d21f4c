"""End-to-end stages: build network, extract features, train, CV, score.

Every artifact is stamped with the config checksum (inside the file, so
identical runs are byte-identical) and accompanied by a ``*.manifest.json``
side file carrying the timestamp. Timestamps never go into the artifact
itself.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .config import PipelineConfig
from .errors import ConfigurationError, InputDataError
from .features import (
    DIST_TARGETS,
    FeatureBuilder,
    Lexicon,
    PositionWeights,
    RecallRecord,
    build_lexicon,
    dump_features_csv,
    get_mask,
    normalize_records,
    compute_position_weights,
    read_ert_csv,
    read_lemma_map,
)
from .mlp import MlpModel, cross_validate, init_model, predict, train
from .parser import ResourceBundle, load_resources, map_document
from .semnet import (
    SemanticNetwork,
    build_network,
    largest_component,
    load_network,
    read_edge_list,
    save_network,
)
from .stats import read_vad_tsv, validate_corpus

CONSTRUCTS = ("depression", "anxiety", "stress")

_BUNDLE_FORMAT = "emodas.bundle"
_BUNDLE_VERSION = 1

CV_CSV_COLUMNS = [
    "construct",
    "mask",
    "folds",
    "repeats",
    "mse_mean",
    "mse_std",
    "r2_mean",
    "r2_std",
    "pearson_mean",
    "pearson_std",
    "n_evaluations",
    "n_r2_defined",
    "n_pearson_defined",
]


def write_manifest(artifact: str | Path, config: PipelineConfig) -> Path:
    """Side file with provenance; the only place timestamps appear."""
    artifact = Path(artifact)
    manifest = artifact.with_name(artifact.name + ".manifest.json")
    payload = {
        "artifact": artifact.name,
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config_checksum": config.checksum(),
        "tool": f"emodas {__version__}",
    }
    manifest.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return manifest


def load_network_file(path: str | Path, config: PipelineConfig) -> SemanticNetwork:
    """A ``.json`` network cache loads directly; anything else is read as a
    cue/response/count edge list and thresholded by ``min_count``."""
    path = Path(path)
    if path.suffix == ".json":
        return load_network(str(path))
    triples = read_edge_list(str(path))
    return build_network(triples, min_count=config.min_count)


def load_corpus(
    recalls_path: str | Path, lemma_map_path: str | Path | None = None
) -> tuple[list[RecallRecord], Lexicon]:
    """Read recalls, build the corpus lexicon, lemma-normalize the records."""
    lemma_map = read_lemma_map(str(lemma_map_path)) if lemma_map_path else {}
    records = read_ert_csv(str(recalls_path))
    lexicon = build_lexicon(records, lemma_map)
    return normalize_records(records, lexicon), lexicon


def make_builder(
    net: SemanticNetwork,
    records: Sequence[RecallRecord],
    lexicon: Lexicon,
    config: PipelineConfig,
) -> tuple[FeatureBuilder, PositionWeights]:
    weights = compute_position_weights(records, net, median_mode=config.median_mode)
    builder = FeatureBuilder(net, lexicon, weights, entropy_mode=config.entropy_pairs)
    return builder, weights


def run_build_network(
    edges_path: str, out_path: str | None, config: PipelineConfig
) -> dict:
    triples = read_edge_list(edges_path)
    net = build_network(triples, min_count=config.min_count)
    largest = largest_component(net)
    info = {
        "nodes": len(net),
        "edges": net.edge_count,
        "largest_component_nodes": len(largest),
        "largest_component_edges": largest.edge_count,
    }
    if out_path:
        save_network(net, out_path)
        write_manifest(out_path, config)
        info["out_path"] = out_path
    return info


def run_features(
    network_path: str,
    recalls_path: str,
    lemma_map_path: str | None,
    out_path: str | None,
    config: PipelineConfig,
) -> dict:
    net = load_network_file(network_path, config)
    records, lexicon = load_corpus(recalls_path, lemma_map_path)
    builder, _ = make_builder(net, records, lexicon, config)
    mask = get_mask(config.feature_mask)
    fvs = [builder.feature_vector(rec, mask) for rec in records]
    info = {
        "n_records": len(records),
        "lexicon_size": lexicon.size,
        "vector_dim": int(fvs[0].vector.shape[0]) if fvs else 0,
        "n_all_zero": sum(1 for fv in fvs if fv.all_zero),
        "mask": mask.name,
    }
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# config_checksum={config.checksum()}\n")
            dump_features_csv(fh, [r.id for r in records], fvs, lexicon)
        write_manifest(out_path, config)
        info["out_path"] = out_path
    return info


@dataclass
class ModelBundle:
    """Trained per-construct regressors plus everything scoring needs."""

    models: dict[str, MlpModel]
    lexicon: Lexicon
    weights: PositionWeights
    mask_name: str
    entropy_pairs: str
    config_checksum: str
    master_seed: int
    network_nodes: int
    network_edges: int


def train_bundle(
    net: SemanticNetwork,
    records: Sequence[RecallRecord],
    lexicon: Lexicon,
    config: PipelineConfig,
) -> tuple[ModelBundle, dict]:
    """Train one regressor per construct on the full corpus."""
    builder, weights = make_builder(net, records, lexicon, config)
    mask = get_mask(config.feature_mask)
    x = builder.matrix(records, mask)
    models: dict[str, MlpModel] = {}
    final_losses: dict[str, float] = {}
    for construct in CONSTRUCTS:
        y = np.array([rec.score(construct) for rec in records])
        model = init_model(
            x.shape[1],
            hidden=tuple(config.hidden_layers),
            seed=config.seed_for(f"train-{construct}-init"),
            dropout_rate=config.dropout_rate,
        )
        result = train(
            model, x, y, config.train_config(config.seed_for(f"train-{construct}-opt"))
        )
        models[construct] = model
        final_losses[construct] = result.final_loss
    bundle = ModelBundle(
        models=models,
        lexicon=lexicon,
        weights=weights,
        mask_name=mask.name,
        entropy_pairs=config.entropy_pairs,
        config_checksum=config.checksum(),
        master_seed=config.master_seed,
        network_nodes=len(net),
        network_edges=net.edge_count,
    )
    return bundle, {"final_train_mse": final_losses, "n_records": len(records)}


def save_bundle(bundle: ModelBundle, path: str) -> None:
    """Single .npz artifact; loads back bit-exactly."""
    arrays: dict[str, np.ndarray] = {}
    n_layers = None
    for construct, model in bundle.models.items():
        params = model.parameter_arrays()
        if n_layers is None:
            n_layers = len(model.weights)
        elif n_layers != len(model.weights):
            raise ConfigurationError("bundle models must share one architecture")
        for key, arr in params.items():
            arrays[f"{construct}__{key}"] = arr
    meta = {
        "format": _BUNDLE_FORMAT,
        "version": _BUNDLE_VERSION,
        "constructs": list(bundle.models),
        "n_layers": n_layers,
        "dropout_rate": next(iter(bundle.models.values())).dropout_rate,
        "mask": bundle.mask_name,
        "entropy_pairs": bundle.entropy_pairs,
        "config_checksum": bundle.config_checksum,
        "master_seed": bundle.master_seed,
        "network_nodes": bundle.network_nodes,
        "network_edges": bundle.network_edges,
        "lemma_map": bundle.lexicon.lemma_map,
    }
    arrays["lexicon"] = np.array(bundle.lexicon.lemmas)
    arrays["position_weights"] = np.array(bundle.weights.w, dtype=np.float64)
    arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))
    np.savez(path, **arrays)


def load_bundle(path: str) -> ModelBundle:
    if not Path(path).is_file():
        raise InputDataError(f"{path}: no such file")
    with np.load(path, allow_pickle=False) as data:
        try:
            meta = json.loads(str(data["meta"]))
        except KeyError:
            raise InputDataError(f"{path}: not a model bundle (no meta entry)") from None
        if meta.get("format") != _BUNDLE_FORMAT:
            raise InputDataError(f"{path}: not a model bundle")
        if meta.get("version") != _BUNDLE_VERSION:
            raise InputDataError(
                f"{path}: unsupported bundle version {meta.get('version')!r}"
            )
        lexicon = Lexicon.from_lemmas(
            [str(w) for w in data["lexicon"]], meta["lemma_map"]
        )
        weights = PositionWeights(tuple(float(v) for v in data["position_weights"]))
        models = {}
        for construct in meta["constructs"]:
            ws = [data[f"{construct}__W{i}"] for i in range(meta["n_layers"])]
            bs = [data[f"{construct}__b{i}"] for i in range(meta["n_layers"])]
            models[construct] = MlpModel(ws, bs, float(meta["dropout_rate"]))
        return ModelBundle(
            models=models,
            lexicon=lexicon,
            weights=weights,
            mask_name=meta["mask"],
            entropy_pairs=meta["entropy_pairs"],
            config_checksum=meta["config_checksum"],
            master_seed=meta["master_seed"],
            network_nodes=meta["network_nodes"],
            network_edges=meta["network_edges"],
        )


def run_train(
    network_path: str,
    recalls_path: str,
    lemma_map_path: str | None,
    out_path: str,
    config: PipelineConfig,
) -> dict:
    net = load_network_file(network_path, config)
    records, lexicon = load_corpus(recalls_path, lemma_map_path)
    bundle, info = train_bundle(net, records, lexicon, config)
    save_bundle(bundle, out_path)
    write_manifest(out_path, config)
    info["out_path"] = out_path
    info["mask"] = bundle.mask_name
    return info


def run_cv(
    network_path: str,
    recalls_path: str,
    lemma_map_path: str | None,
    mask_name: str | None,
    out_path: str | None,
    config: PipelineConfig,
) -> list[dict]:
    """Repeated k-fold CV for each construct; returns one row per construct."""
    net = load_network_file(network_path, config)
    records, lexicon = load_corpus(recalls_path, lemma_map_path)
    builder, _ = make_builder(net, records, lexicon, config)
    mask = get_mask(mask_name or config.feature_mask)
    x = builder.matrix(records, mask)
    rows = []
    for construct in CONSTRUCTS:
        y = np.array([rec.score(construct) for rec in records])
        result = cross_validate(
            x,
            y,
            folds=config.folds,
            repeats=config.repeats,
            seed=config.seed_for(f"cv-{construct}"),
            hidden=tuple(config.hidden_layers),
            dropout_rate=config.dropout_rate,
            train_config=config.train_config(),
        )
        rows.append(
            {
                "construct": construct,
                "mask": mask.name,
                "folds": result.folds,
                "repeats": result.repeats,
                "mse_mean": result.mse_mean,
                "mse_std": result.mse_std,
                "r2_mean": result.r2_mean,
                "r2_std": result.r2_std,
                "pearson_mean": result.pearson_mean,
                "pearson_std": result.pearson_std,
                "n_evaluations": result.n_evaluations,
                "n_r2_defined": result.n_r2_defined,
                "n_pearson_defined": result.n_pearson_defined,
            }
        )
    if out_path:
        write_cv_csv(out_path, rows, config)
        write_manifest(out_path, config)
    return rows


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def write_cv_csv(path: str, rows: list[dict], config: PipelineConfig) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# config_checksum={config.checksum()}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CV_CSV_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in CV_CSV_COLUMNS])


def score_texts(
    bundle: ModelBundle,
    net: SemanticNetwork,
    res: ResourceBundle,
    documents: Sequence[tuple[str, str]],
    config: PipelineConfig,
    max_workers: int = 4,
) -> list[dict]:
    """Score raw documents with a trained bundle.

    The network must be the one the bundle was trained against (checked via
    node/edge counts) and the resource lexicon must match the bundle's.
    Documents are independent, so parsing and feature extraction fan out
    over a thread pool; results keep input order.
    """
    if (len(net), net.edge_count) != (bundle.network_nodes, bundle.network_edges):
        raise ConfigurationError(
            f"network has {len(net)} nodes / {net.edge_count} edges but the "
            f"bundle was trained against {bundle.network_nodes} / "
            f"{bundle.network_edges}"
        )
    if res.lexicon.lemmas != bundle.lexicon.lemmas:
        raise ConfigurationError(
            "resource lexicon does not match the bundle's training lexicon"
        )
    builder = FeatureBuilder(
        net, bundle.lexicon, bundle.weights, entropy_mode=bundle.entropy_pairs
    )
    builder.warm()
    mask = get_mask(bundle.mask_name)
    checksum = config.checksum()

    def score_one(doc: tuple[str, str]) -> dict:
        doc_id, text = doc
        parse = map_document(text, res, config.similarity_threshold)
        fv = builder.feature_vector(parse.sequence(), mask)
        scores = {
            construct: float(predict(model, fv.vector[None, :])[0])
            for construct, model in bundle.models.items()
        }
        return {
            "id": doc_id,
            "scores": scores,
            "n_sentences": parse.n_sentences,
            "n_mapped": len(parse.mapped),
            "n_skipped": len(parse.skipped),
            "mapped": [
                {
                    "token": m.token,
                    "lemma": m.lemma,
                    "similarity": m.similarity,
                    "negated": m.negated,
                    "sentence": m.sentence,
                    "position": m.position,
                }
                for m in parse.mapped
            ],
            "skipped": [
                {
                    "token": s.token,
                    "reason": s.reason,
                    "sentence": s.sentence,
                    "position": s.position,
                }
                for s in parse.skipped
            ],
            "all_zero": fv.all_zero,
            "config_checksum": checksum,
        }

    if not documents:
        return []
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(score_one, documents))


def run_score(
    model_path: str,
    network_path: str,
    documents: Sequence[tuple[str, str]],
    config: PipelineConfig,
    resource_dir: str | None = None,
) -> list[dict]:
    bundle = load_bundle(model_path)
    net = load_network_file(network_path, config)
    res = load_resources(resource_dir or config.resolve_resource_dir())
    return score_texts(bundle, net, res, documents, config)


def run_validate(
    recalls_path: str,
    vad_path: str | None,
    out_path: str | None,
    config: PipelineConfig,
) -> dict:
    records, _ = load_corpus(recalls_path, None)
    if vad_path is None:
        vad_path = str(config.resolve_resource_dir() / "vad.tsv")
    vad = read_vad_tsv(vad_path)
    report = validate_corpus(records, vad, config.tipping_points)
    report["config_checksum"] = config.checksum()
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
        write_manifest(out_path, config)
        report["out_path"] = out_path
    return report
