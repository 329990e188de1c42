"""Request/response models for the experiment service.

Requests carry flat dotted-key config dicts (same syntax as config files
and --set overrides); the server merges profile < file < overrides and
validates strictly, so an unknown key is rejected with its name.
"""

from __future__ import annotations

from typing import Any

from pydantic import BaseModel, ConfigDict


class ServiceModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ErrorInfo(ServiceModel):
    type: str
    category: str           # config | data | diverged | internal
    message: str


class ErrorResponse(ServiceModel):
    error: ErrorInfo


class HealthResponse(ServiceModel):
    status: str
    version: str


class SyntheticRequest(ServiceModel):
    out_dir: str
    glitch: bool = False
    config: dict[str, Any] = {}


class SyntheticResponse(ServiceModel):
    index_path: str
    failures_path: str | None = None
    num_clips: int
    num_train: int
    num_test: int


class PretrainRequest(ServiceModel):
    index_path: str
    run_dir: str | None = None
    profile: str | None = None
    config: dict[str, Any] = {}
    resume_from: str | None = None


class PretrainResponse(ServiceModel):
    run_dir: str
    steps: int
    final_train_loss: float
    min_train_loss: float
    best_val_loss: float | None
    chance_loss: float
    best_checkpoint: str | None
    last_checkpoint: str
    metrics_path: str


class ProbeRequest(ServiceModel):
    index_path: str
    checkpoint_path: str | None = None     # None: randomly initialized network
    run_dir: str | None = None
    profile: str | None = None
    config: dict[str, Any] = {}            # ProbeConfig keys (mode, fraction, ...)
    train_config: dict[str, Any] = {}      # architecture when no checkpoint


class ProbeResponse(ServiceModel):
    run_dir: str
    mode: str
    label_fraction: float
    test_accuracy: float
    report_path: str


class SweepRequest(ServiceModel):
    index_path: str
    checkpoint_path: str
    fractions: list[float] = [0.1, 0.2, 0.5, 1.0]
    seeds: list[int] = [0, 1, 2]
    run_dir: str | None = None
    profile: str | None = None
    config: dict[str, Any] = {}


class SweepRow(ServiceModel):
    fraction: float
    init: str
    seed: int
    accuracy: float


class SweepResponse(ServiceModel):
    run_dir: str
    rows: list[SweepRow]
    report_path: str


class RetrieveRequest(ServiceModel):
    # either a checkpoint plus an index (queries = test split, gallery =
    # train split), or two precomputed embedding CSVs
    index_path: str | None = None
    checkpoint_path: str | None = None
    query_embeddings: str | None = None
    gallery_embeddings: str | None = None
    ks: list[int] = [1, 5, 10, 20]
    run_dir: str | None = None


class RetrieveResponse(ServiceModel):
    run_dir: str
    recalls: dict[int, float]
    report_path: str
    query_embeddings: str | None = None
    gallery_embeddings: str | None = None


class UnintentionalRequest(ServiceModel):
    index_path: str
    failures_path: str
    checkpoint_path: str | None = None
    mode: str = "freeze"                    # freeze | finetune
    run_dir: str | None = None
    profile: str | None = None
    config: dict[str, Any] = {}             # ProbeConfig keys
    train_config: dict[str, Any] = {}       # architecture when no checkpoint


class UnintentionalResponse(ServiceModel):
    run_dir: str
    mode: str
    accuracy: float
    report_path: str


class ExportMemoryRequest(ServiceModel):
    checkpoint_path: str
    index_path: str
    run_dir: str | None = None


class ExportMemoryResponse(ServiceModel):
    run_dir: str
    magnitude_path: str
    neighbours_path: str
    addressing_path: str
