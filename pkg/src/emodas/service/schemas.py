"""Request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class BuildNetworkRequest(BaseModel):
    edges_path: str
    out_path: str | None = None


class BuildNetworkResponse(BaseModel):
    nodes: int
    edges: int
    largest_component_nodes: int
    largest_component_edges: int
    out_path: str | None = None


class FeaturesRequest(BaseModel):
    network_path: str
    recalls_path: str
    lemma_map_path: str | None = None
    mask: str | None = None
    out_path: str | None = None


class FeaturesResponse(BaseModel):
    n_records: int
    lexicon_size: int
    vector_dim: int
    n_all_zero: int
    mask: str
    out_path: str | None = None


class TrainRequest(BaseModel):
    network_path: str
    recalls_path: str
    lemma_map_path: str | None = None
    out_path: str


class TrainResponse(BaseModel):
    final_train_mse: dict[str, float]
    n_records: int
    mask: str
    out_path: str


class CvRequest(BaseModel):
    network_path: str
    recalls_path: str
    lemma_map_path: str | None = None
    mask: str | None = None
    out_path: str | None = None


class CvRow(BaseModel):
    # "construct" shadows a deprecated BaseModel classmethod, hence the alias
    model_config = ConfigDict(populate_by_name=True)

    construct_name: str = Field(alias="construct")
    mask: str
    folds: int
    repeats: int
    mse_mean: float
    mse_std: float
    r2_mean: float | None
    r2_std: float | None
    pearson_mean: float | None
    pearson_std: float | None
    n_evaluations: int
    n_r2_defined: int
    n_pearson_defined: int


class CvResponse(BaseModel):
    rows: list[CvRow]
    out_path: str | None = None


class DocumentIn(BaseModel):
    id: str
    text: str


class ScoreRequest(BaseModel):
    bundle_path: str
    network_path: str
    resource_dir: str | None = None
    threshold: float | None = Field(default=None, gt=0.0, le=1.0)
    documents: list[DocumentIn]


class MappedTokenOut(BaseModel):
    token: str
    lemma: str
    similarity: float
    negated: bool
    sentence: int
    position: int


class SkippedTokenOut(BaseModel):
    token: str
    reason: str
    sentence: int
    position: int


class DocumentScoreOut(BaseModel):
    id: str
    scores: dict[str, float]
    n_sentences: int
    n_mapped: int
    n_skipped: int
    mapped: list[MappedTokenOut]
    skipped: list[SkippedTokenOut]
    all_zero: bool
    config_checksum: str


class ScoreResponse(BaseModel):
    documents: list[DocumentScoreOut]


class ValidateRequest(BaseModel):
    recalls_path: str
    vad_path: str | None = None
    out_path: str | None = None


class ValidateResponse(BaseModel):
    report: dict


class CheckOut(BaseModel):
    name: str
    passed: bool
    detail: str


class SelftestResponse(BaseModel):
    passed: bool
    checks: list[CheckOut]


class ErrorResponse(BaseModel):
    error: str
    detail: str
