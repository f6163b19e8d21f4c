import json

import numpy as np
import pytest

from emodas.config import PipelineConfig, load_config
from emodas.errors import ConfigurationError, InputDataError
from emodas.parser import load_resources
from emodas.pipeline import (
    CONSTRUCTS,
    load_bundle,
    load_network_file,
    run_build_network,
    run_cv,
    run_features,
    run_score,
    run_train,
    run_validate,
    save_bundle,
    score_texts,
    train_bundle,
    write_manifest,
)
from emodas.seeding import derive_seed


@pytest.fixture(scope="module")
def fast_config(toy_dir):
    # small epochs keep pipeline round-trips quick; toy resources bundled
    return PipelineConfig(epochs=8, repeats=1, folds=3, resource_dir=str(toy_dir))


@pytest.fixture(scope="module")
def toy_paths(toy_dir):
    return {
        "edges": str(toy_dir / "edges.tsv"),
        "recalls": str(toy_dir / "recalls.csv"),
        "lemma_map": str(toy_dir / "lemma_map.tsv"),
        "vad": str(toy_dir / "vad.tsv"),
    }


class TestConfig:
    def test_defaults_validate(self):
        cfg = PipelineConfig().validate()
        assert cfg.min_count == 2
        assert cfg.similarity_threshold == 0.5
        assert cfg.feature_mask == "ALL_EXCEPT_FEAR"
        assert cfg.hidden_layers == [25, 25]

    def test_checksum_independent_of_tipping_order(self):
        a = PipelineConfig(tipping_points={"depression": 6, "anxiety": 2, "stress": 4})
        b = PipelineConfig(tipping_points={"stress": 4, "anxiety": 2, "depression": 6})
        assert a.checksum() == b.checksum()

    def test_checksum_sensitive_to_values(self):
        assert PipelineConfig().checksum() != PipelineConfig(min_count=3).checksum()

    def test_seed_for_is_stable_derivation(self):
        cfg = PipelineConfig(master_seed=42)
        assert cfg.seed_for("cv-depression") == derive_seed(42, "cv-depression")
        assert cfg.seed_for("a") != cfg.seed_for("b")

    def test_rejects_bad_values(self):
        with pytest.raises(ConfigurationError):
            PipelineConfig(min_count=0).validate()
        with pytest.raises(ConfigurationError):
            PipelineConfig(similarity_threshold=1.5).validate()
        with pytest.raises(ConfigurationError):
            PipelineConfig(feature_mask="NOPE").validate()
        with pytest.raises(ConfigurationError):
            PipelineConfig(entropy_pairs="some").validate()

    def test_load_config_round_trip(self, tmp_path):
        p = tmp_path / "config.json"
        p.write_text(json.dumps({"min_count": 3, "master_seed": 7}))
        cfg = load_config(str(p))
        assert cfg.min_count == 3
        assert cfg.master_seed == 7
        # unspecified keys keep their defaults
        assert cfg.folds == 4

    def test_load_config_rejects_unknown_keys(self, tmp_path):
        p = tmp_path / "config.json"
        p.write_text(json.dumps({"min_cout": 3}))
        with pytest.raises(ConfigurationError) as exc:
            load_config(str(p))
        assert "min_cout" in str(exc.value)

    def test_env_var_resource_dir(self, monkeypatch, tmp_path, toy_dir):
        monkeypatch.setenv("EMODAS_RESOURCE_DIR", str(tmp_path))
        assert PipelineConfig().resolve_resource_dir() == tmp_path
        # explicit config wins over the env var
        cfg = PipelineConfig(resource_dir=str(toy_dir))
        assert cfg.resolve_resource_dir() == toy_dir


class TestBuildNetwork:
    def test_reports_counts(self, toy_paths, fast_config, tmp_path):
        out = str(tmp_path / "net.json")
        info = run_build_network(toy_paths["edges"], out, fast_config)
        assert info["nodes"] == 17
        assert info["edges"] == 20
        assert info["largest_component_nodes"] == 17

    def test_artifact_reloads_identically(self, toy_paths, fast_config, tmp_path):
        out = str(tmp_path / "net.json")
        run_build_network(toy_paths["edges"], out, fast_config)
        net = load_network_file(out, fast_config)
        assert len(net) == 17
        assert net.edge_count == 20

    def test_manifest_written_next_to_artifact(self, toy_paths, fast_config, tmp_path):
        out = tmp_path / "net.json"
        run_build_network(toy_paths["edges"], str(out), fast_config)
        manifest = json.loads((tmp_path / "net.json.manifest.json").read_text())
        assert manifest["config_checksum"] == fast_config.checksum()
        assert "created_utc" in manifest

    def test_loads_raw_edge_list_too(self, toy_paths, fast_config):
        net = load_network_file(toy_paths["edges"], fast_config)
        assert len(net) == 17


class TestFeatures:
    def test_writes_checksummed_csv(self, toy_paths, fast_config, tmp_path):
        out = tmp_path / "features.csv"
        info = run_features(
            toy_paths["edges"],
            toy_paths["recalls"],
            toy_paths["lemma_map"],
            str(out),
            fast_config,
        )
        assert info["n_records"] == 12
        assert info["lexicon_size"] == 17
        assert info["vector_dim"] == 17 + 2 + 5
        lines = out.read_text().splitlines()
        assert lines[0] == f"# config_checksum={fast_config.checksum()}"
        assert lines[1].startswith("id,bow_")
        assert len(lines) == 2 + 12


@pytest.fixture(scope="module")
def bundle_path(toy_paths, fast_config, tmp_path_factory):
    out = tmp_path_factory.mktemp("bundle") / "model.npz"
    run_train(
        toy_paths["edges"],
        toy_paths["recalls"],
        toy_paths["lemma_map"],
        str(out),
        fast_config,
    )
    return str(out)


class TestBundle:
    def test_round_trip_predictions_identical(
        self, bundle_path, toy_paths, fast_config
    ):
        from emodas.features import (
            FeatureBuilder,
            build_lexicon,
            normalize_records,
            read_ert_csv,
            read_lemma_map,
        )
        from emodas.mlp import predict

        bundle = load_bundle(bundle_path)
        assert set(bundle.models) == set(CONSTRUCTS)
        assert bundle.mask_name == "ALL_EXCEPT_FEAR"
        assert bundle.config_checksum == fast_config.checksum()

        net = load_network_file(toy_paths["edges"], fast_config)
        lemma_map = read_lemma_map(toy_paths["lemma_map"])
        records = read_ert_csv(toy_paths["recalls"])
        lexicon = build_lexicon(records, lemma_map)
        records = normalize_records(records, lexicon)
        builder = FeatureBuilder(net, bundle.lexicon, bundle.weights)
        x = builder.matrix(records, bundle.mask_name)

        net2 = load_network_file(toy_paths["edges"], fast_config)
        bundle2, _ = train_bundle(net2, records, lexicon, fast_config)
        for construct in CONSTRUCTS:
            a = predict(bundle.models[construct], x)
            b = predict(bundle2.models[construct], x)
            assert np.array_equal(a, b), construct

    def test_bundle_file_format(self, bundle_path):
        with np.load(bundle_path, allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
        assert meta["format"] == "emodas.bundle"
        assert meta["version"] == 1
        assert meta["mask"] == "ALL_EXCEPT_FEAR"

    def test_load_rejects_wrong_format(self, tmp_path):
        p = tmp_path / "bad.npz"
        np.savez(p, meta=np.asarray(json.dumps({"format": "other", "version": 1})))
        with pytest.raises(InputDataError):
            load_bundle(str(p))

    def test_scores_documents_in_order(self, bundle_path, toy_paths, fast_config):
        bundle = load_bundle(bundle_path)
        net = load_network_file(toy_paths["edges"], fast_config)
        res = load_resources(fast_config.resolve_resource_dir())
        docs = [
            ("d1", "I am not happy. Everything is gloomy."),
            ("d2", "Joy and love, a cheerful calm day."),
            ("d3", ""),
        ]
        rows = score_texts(bundle, net, res, docs, fast_config)
        assert [r["id"] for r in rows] == ["d1", "d2", "d3"]
        for row in rows[:2]:
            assert set(row["scores"]) == set(CONSTRUCTS)
            assert row["config_checksum"] == fast_config.checksum()
        assert rows[2]["all_zero"] is True
        assert rows[0]["mapped"][0]["lemma"] == "sad"
        assert rows[0]["mapped"][0]["negated"] is True

    def test_score_rejects_mismatched_network(
        self, bundle_path, toy_paths, fast_config
    ):
        bundle = load_bundle(bundle_path)
        res = load_resources(fast_config.resolve_resource_dir())
        from emodas.semnet import SemanticNetwork

        tiny = SemanticNetwork(["a", "b"], [("a", "b")])
        with pytest.raises(ConfigurationError):
            score_texts(bundle, tiny, res, [("d", "happy")], fast_config)

    def test_run_score_end_to_end(self, bundle_path, toy_paths, fast_config):
        rows = run_score(
            bundle_path,
            toy_paths["edges"],
            [("doc", "I felt miserable and tired.")],
            fast_config,
        )
        assert len(rows) == 1
        assert rows[0]["n_skipped"] >= 1  # "felt" is filtered


class TestCv:
    def test_rows_per_construct_and_determinism(
        self, toy_paths, fast_config, tmp_path
    ):
        out_a = tmp_path / "cv_a.csv"
        out_b = tmp_path / "cv_b.csv"
        rows = run_cv(
            toy_paths["edges"],
            toy_paths["recalls"],
            toy_paths["lemma_map"],
            None,
            str(out_a),
            fast_config,
        )
        run_cv(
            toy_paths["edges"],
            toy_paths["recalls"],
            toy_paths["lemma_map"],
            None,
            str(out_b),
            fast_config,
        )
        assert [r["construct"] for r in rows] == list(CONSTRUCTS)
        assert out_a.read_bytes() == out_b.read_bytes()
        first, header = out_a.read_text().splitlines()[:2]
        assert first == f"# config_checksum={fast_config.checksum()}"
        assert header.split(",")[:4] == ["construct", "mask", "folds", "repeats"]

    def test_mask_override(self, toy_paths, fast_config):
        rows = run_cv(
            toy_paths["edges"],
            toy_paths["recalls"],
            toy_paths["lemma_map"],
            "BINARY_BOW",
            None,
            fast_config,
        )
        assert all(r["mask"] == "BINARY_BOW" for r in rows)


class TestValidate:
    def test_report_written_with_checksum(self, toy_paths, fast_config, tmp_path):
        out = tmp_path / "report.json"
        report = run_validate(
            toy_paths["recalls"], toy_paths["vad"], str(out), fast_config
        )
        on_disk = json.loads(out.read_text())
        assert on_disk == {k: v for k, v in report.items() if k != "out_path"}
        assert report["config_checksum"] == fast_config.checksum()
        assert report["n_records"] == 12
        assert set(report["histograms"]) == set(CONSTRUCTS)


def test_write_manifest_contains_only_provenance(tmp_path, fast_config):
    artifact = tmp_path / "thing.csv"
    artifact.write_text("x\n")
    write_manifest(artifact, fast_config)
    manifest = json.loads((tmp_path / "thing.csv.manifest.json").read_text())
    assert set(manifest) >= {"artifact", "created_utc", "config_checksum"}
