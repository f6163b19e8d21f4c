"""FastAPI application wrapping the pipeline.

The app is built by ``create_app`` around one pipeline config. Heavy
resources touched by scoring (networks, model bundles, parser resources)
are cached on ``app.state`` keyed by absolute path, so repeated /score
calls pay the load cost once. Handlers are synchronous on purpose: the
work is CPU-bound and runs in the framework's thread pool.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..config import PipelineConfig, load_config
from ..errors import EmodasError
from ..parser import load_resources
from ..pipeline import (
    load_bundle,
    load_network_file,
    run_build_network,
    run_cv,
    run_features,
    run_train,
    run_validate,
    score_texts,
)
from ..selftest import run_selftest
from . import schemas


def _cache_get(cache: dict, key: str, loader):
    key = str(Path(key).resolve())
    if key not in cache:
        cache[key] = loader()
    return cache[key]


def create_app(
    config: PipelineConfig | None = None, config_path: str | None = None
) -> FastAPI:
    if config is None:
        config = load_config(config_path)
    app = FastAPI(title="emodas", version=__version__)
    app.state.config = config
    app.state.networks = {}
    app.state.bundles = {}
    app.state.resources = {}

    @app.exception_handler(EmodasError)
    def emodas_error_handler(request: Request, exc: EmodasError) -> JSONResponse:
        return JSONResponse(
            status_code=400,
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.get("/health", response_model=schemas.HealthResponse)
    def health() -> schemas.HealthResponse:
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/network/build", response_model=schemas.BuildNetworkResponse)
    def build_network_endpoint(
        req: schemas.BuildNetworkRequest,
    ) -> schemas.BuildNetworkResponse:
        info = run_build_network(req.edges_path, req.out_path, app.state.config)
        return schemas.BuildNetworkResponse(**info)

    @app.post("/features", response_model=schemas.FeaturesResponse)
    def features_endpoint(req: schemas.FeaturesRequest) -> schemas.FeaturesResponse:
        cfg = app.state.config
        if req.mask:
            cfg = replace(cfg, feature_mask=req.mask).validate()
        info = run_features(
            req.network_path, req.recalls_path, req.lemma_map_path, req.out_path, cfg
        )
        return schemas.FeaturesResponse(**info)

    @app.post("/train", response_model=schemas.TrainResponse)
    def train_endpoint(req: schemas.TrainRequest) -> schemas.TrainResponse:
        info = run_train(
            req.network_path,
            req.recalls_path,
            req.lemma_map_path,
            req.out_path,
            app.state.config,
        )
        return schemas.TrainResponse(**info)

    @app.post("/cv", response_model=schemas.CvResponse)
    def cv_endpoint(req: schemas.CvRequest) -> schemas.CvResponse:
        rows = run_cv(
            req.network_path,
            req.recalls_path,
            req.lemma_map_path,
            req.mask,
            req.out_path,
            app.state.config,
        )
        return schemas.CvResponse(
            rows=[schemas.CvRow(**row) for row in rows], out_path=req.out_path
        )

    @app.post("/score", response_model=schemas.ScoreResponse)
    def score_endpoint(req: schemas.ScoreRequest) -> schemas.ScoreResponse:
        cfg = app.state.config
        if req.threshold is not None:
            cfg = replace(cfg, similarity_threshold=req.threshold)
        bundle = _cache_get(
            app.state.bundles, req.bundle_path, lambda: load_bundle(req.bundle_path)
        )
        net = _cache_get(
            app.state.networks,
            req.network_path,
            lambda: load_network_file(req.network_path, cfg),
        )
        resource_dir = req.resource_dir or str(cfg.resolve_resource_dir())
        res = _cache_get(
            app.state.resources, resource_dir, lambda: load_resources(resource_dir)
        )
        rows = score_texts(
            bundle, net, res, [(d.id, d.text) for d in req.documents], cfg
        )
        return schemas.ScoreResponse(
            documents=[schemas.DocumentScoreOut(**row) for row in rows]
        )

    @app.post("/validate", response_model=schemas.ValidateResponse)
    def validate_endpoint(req: schemas.ValidateRequest) -> schemas.ValidateResponse:
        report = run_validate(
            req.recalls_path, req.vad_path, req.out_path, app.state.config
        )
        return schemas.ValidateResponse(report=report)

    @app.post("/selftest", response_model=schemas.SelftestResponse)
    def selftest_endpoint() -> schemas.SelftestResponse:
        results = run_selftest()
        return schemas.SelftestResponse(
            passed=all(r.passed for r in results),
            checks=[
                schemas.CheckOut(name=r.name, passed=r.passed, detail=r.detail)
                for r in results
            ],
        )

    return app
