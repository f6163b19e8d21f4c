import json

import pytest
from fastapi.testclient import TestClient

from emodas import cli
from emodas.config import PipelineConfig
from emodas.service import create_app


@pytest.fixture(scope="module")
def config(toy_dir):
    return PipelineConfig(epochs=6, repeats=1, folds=3, resource_dir=str(toy_dir))


@pytest.fixture(scope="module")
def client(config):
    with TestClient(create_app(config=config), raise_server_exceptions=False) as c:
        yield c


@pytest.fixture(scope="module")
def paths(toy_dir):
    return {
        "edges": str(toy_dir / "edges.tsv"),
        "recalls": str(toy_dir / "recalls.csv"),
        "lemma_map": str(toy_dir / "lemma_map.tsv"),
    }


@pytest.fixture(scope="module")
def trained_bundle(client, paths, tmp_path_factory):
    out = str(tmp_path_factory.mktemp("svc") / "model.npz")
    r = client.post(
        "/train",
        json={
            "network_path": paths["edges"],
            "recalls_path": paths["recalls"],
            "lemma_map_path": paths["lemma_map"],
            "out_path": out,
        },
    )
    assert r.status_code == 200, r.text
    return out


class TestEndpoints:
    def test_health(self, client):
        r = client.get("/health")
        assert r.status_code == 200
        body = r.json()
        assert body["status"] == "ok"
        assert body["version"]

    def test_build_network(self, client, paths):
        r = client.post("/network/build", json={"edges_path": paths["edges"]})
        assert r.status_code == 200
        body = r.json()
        assert body["nodes"] == 17
        assert body["edges"] == 20

    def test_features(self, client, paths):
        r = client.post(
            "/features",
            json={
                "network_path": paths["edges"],
                "recalls_path": paths["recalls"],
                "lemma_map_path": paths["lemma_map"],
            },
        )
        assert r.status_code == 200
        body = r.json()
        assert body["n_records"] == 12
        assert body["mask"] == "ALL_EXCEPT_FEAR"

    def test_features_mask_override(self, client, paths):
        r = client.post(
            "/features",
            json={
                "network_path": paths["edges"],
                "recalls_path": paths["recalls"],
                "lemma_map_path": paths["lemma_map"],
                "mask": "BINARY_BOW",
            },
        )
        assert r.status_code == 200
        assert r.json()["vector_dim"] == 17

    def test_cv(self, client, paths):
        r = client.post(
            "/cv",
            json={
                "network_path": paths["edges"],
                "recalls_path": paths["recalls"],
                "lemma_map_path": paths["lemma_map"],
            },
        )
        assert r.status_code == 200
        rows = r.json()["rows"]
        assert [row["construct"] for row in rows] == [
            "depression",
            "anxiety",
            "stress",
        ]

    def test_score(self, client, paths, trained_bundle):
        r = client.post(
            "/score",
            json={
                "bundle_path": trained_bundle,
                "network_path": paths["edges"],
                "documents": [
                    {"id": "d1", "text": "I am not happy, just gloomy."},
                    {"id": "d2", "text": "Nothing mappable here whatsoever."},
                ],
            },
        )
        assert r.status_code == 200
        docs = r.json()["documents"]
        assert [d["id"] for d in docs] == ["d1", "d2"]
        assert docs[0]["mapped"][0]["lemma"] == "sad"
        assert docs[0]["mapped"][0]["negated"] is True
        assert set(docs[0]["scores"]) == {"depression", "anxiety", "stress"}

    def test_score_threshold_override(self, client, paths, trained_bundle):
        def mapped_count(threshold):
            r = client.post(
                "/score",
                json={
                    "bundle_path": trained_bundle,
                    "network_path": paths["edges"],
                    "threshold": threshold,
                    "documents": [{"id": "d", "text": "I feel gleeful."}],
                },
            )
            assert r.status_code == 200
            return r.json()["documents"][0]["n_mapped"]

        # "gleeful" sits between the two thresholds in similarity to "happy"
        assert mapped_count(0.5) > mapped_count(0.95)

    def test_validate(self, client, paths):
        r = client.post("/validate", json={"recalls_path": paths["recalls"]})
        assert r.status_code == 200
        assert r.json()["report"]["n_records"] == 12

    def test_selftest(self, client):
        r = client.post("/selftest")
        assert r.status_code == 200
        body = r.json()
        assert body["passed"] is True
        assert len(body["checks"]) >= 5

    def test_domain_errors_are_400(self, client):
        r = client.post("/network/build", json={"edges_path": "/nonexistent.tsv"})
        assert r.status_code == 400
        body = r.json()
        assert "error" in body and "detail" in body

    def test_schema_errors_are_422(self, client):
        r = client.post("/network/build", json={})
        assert r.status_code == 422


class TestCli:
    def run(self, capsys, *argv):
        code = cli.main(list(argv))
        captured = capsys.readouterr()
        return code, captured.out, captured.err

    def test_build_network(self, capsys, paths, tmp_path):
        out = str(tmp_path / "net.json")
        code, stdout, _ = self.run(
            capsys, "build-network", "--edges", paths["edges"], "--out", out
        )
        assert code == 0
        assert "17" in stdout and "20" in stdout

    def test_features_summary(self, capsys, paths, config_file):
        code, stdout, _ = self.run(
            capsys,
            "features",
            "--config",
            config_file,
            "--network",
            paths["edges"],
            "--recalls",
            paths["recalls"],
            "--lemma-map",
            paths["lemma_map"],
        )
        assert code == 0
        assert "12" in stdout

    def test_score_stdin_stdout(
        self, capsys, monkeypatch, paths, cli_bundle, config_file
    ):
        import io

        docs = (
            json.dumps({"id": "a", "text": "I am not happy."})
            + "\n"
            + json.dumps({"id": "b", "text": "so much joy"})
            + "\n"
        )
        monkeypatch.setattr("sys.stdin", io.StringIO(docs))
        code, stdout, _ = self.run(
            capsys,
            "score",
            "--config",
            config_file,
            "--model",
            cli_bundle,
            "--network",
            paths["edges"],
            "--input",
            "-",
            "--out",
            "-",
        )
        assert code == 0
        rows = [json.loads(line) for line in stdout.strip().splitlines()]
        assert [r["id"] for r in rows] == ["a", "b"]
        assert rows[0]["mapped"][0]["lemma"] == "sad"

    def test_score_empty_input_succeeds(self, capsys, monkeypatch, paths, cli_bundle, config_file):
        import io

        monkeypatch.setattr("sys.stdin", io.StringIO(""))
        code, stdout, _ = self.run(
            capsys,
            "score",
            "--config",
            config_file,
            "--model",
            cli_bundle,
            "--network",
            paths["edges"],
            "--input",
            "-",
            "--out",
            "-",
        )
        assert code == 0
        assert stdout.strip() == ""

    def test_score_bad_jsonl_exits_1(self, capsys, monkeypatch, paths, cli_bundle, config_file, tmp_path):
        bad = tmp_path / "docs.jsonl"
        bad.write_text('{"id": "a"}\n')  # missing text field
        code, _, stderr = self.run(
            capsys,
            "score",
            "--config",
            config_file,
            "--model",
            cli_bundle,
            "--network",
            paths["edges"],
            "--input",
            str(bad),
        )
        assert code == 1
        assert "text" in stderr

    def test_missing_file_exits_1(self, capsys):
        code, _, stderr = self.run(capsys, "build-network", "--edges", "/nope.tsv")
        assert code == 1
        assert stderr.strip()

    def test_selftest_passes(self, capsys):
        code, stdout, _ = self.run(capsys, "selftest")
        assert code == 0
        assert "PASS" in stdout
        assert "FAIL" not in stdout

    def test_cv_writes_metrics(self, capsys, paths, config_file, tmp_path):
        out = str(tmp_path / "cv.csv")
        code, stdout, _ = self.run(
            capsys,
            "cv",
            "--config",
            config_file,
            "--network",
            paths["edges"],
            "--recalls",
            paths["recalls"],
            "--lemma-map",
            paths["lemma_map"],
            "--out",
            out,
        )
        assert code == 0
        text = open(out).read()
        assert "depression" in text


@pytest.fixture(scope="module")
def config_file(toy_dir, tmp_path_factory):
    p = tmp_path_factory.mktemp("cfg") / "config.json"
    p.write_text(
        json.dumps(
            {
                "epochs": 6,
                "repeats": 1,
                "folds": 3,
                "resource_dir": str(toy_dir),
            }
        )
    )
    return str(p)


@pytest.fixture(scope="module")
def cli_bundle(paths, config_file, tmp_path_factory):
    out = str(tmp_path_factory.mktemp("clibundle") / "model.npz")
    code = cli.main(
        [
            "train",
            "--config",
            config_file,
            "--network",
            paths["edges"],
            "--recalls",
            paths["recalls"],
            "--lemma-map",
            paths["lemma_map"],
            "--out",
            out,
        ]
    )
    assert code == 0
    return out
