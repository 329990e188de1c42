"""FastAPI service wrapping the core package.

Each endpoint resolves its config (profile < request config), snapshots it
into a locked run directory, runs the underlying operation synchronously,
and returns a typed response. Domain errors come back as structured
{"error": {"type", "message"}} payloads the CLI maps to exit codes.
"""

from __future__ import annotations

import json
import os

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..configs import (
    GlitchSpec,
    ProbeConfig,
    SyntheticSpec,
    TrainConfig,
    profile_layer,
    resolve_config,
)
from ..data.index import load_index
from ..data.synthetic import gen_glitch, gen_synthetic, load_failures
from ..errors import ConfigError, DataError, VidbankError
from ..evaluation.embeddings import (
    extract_embeddings,
    load_embeddings_csv,
    save_embeddings_csv,
)
from ..evaluation.memory_export import export_memory_views
from ..evaluation.probes import data_efficiency_sweep, finetune_classifier, train_probe
from ..evaluation.retrieval import retrieve, save_retrieval_csv
from ..evaluation.unintentional import unintentional_train_eval
from ..models.network import build_model
from ..runs import RunDirectory, default_run_dir
from ..training.checkpoint import load_checkpoint, load_model_params
from ..training.pretrain import architecture_signature, pretrain
from . import schemas


def _model_from_checkpoint(path: str):
    """Rebuild the pretrained network and its train config from an archive."""
    params, _optim, manifest = load_checkpoint(path)
    config = TrainConfig.model_validate(manifest["config"])
    model = build_model(config.backbone, config.memory, config.bidirectional)
    load_model_params(model, params, manifest,
                      expected_arch=architecture_signature(config))
    return model, config, params


def _random_model(train_cfg: TrainConfig):
    return build_model(train_cfg.backbone, train_cfg.memory,
                       train_cfg.bidirectional, seed=train_cfg.seed)


def create_app() -> FastAPI:
    app = FastAPI(title="vidbank", version=__version__)

    @app.exception_handler(VidbankError)
    async def _vidbank_error(_request: Request, exc: VidbankError):
        from ..errors import DivergedTraining
        if isinstance(exc, ConfigError):
            category, status = "config", 422
        elif isinstance(exc, DivergedTraining):
            category, status = "diverged", 400
        elif isinstance(exc, DataError):
            category, status = "data", 400
        else:
            category, status = "internal", 400
        body = schemas.ErrorResponse(error=schemas.ErrorInfo(
            type=type(exc).__name__, category=category, message=str(exc)))
        return JSONResponse(status_code=status, content=body.model_dump())

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/synthetic", response_model=schemas.SyntheticResponse)
    def synthetic(req: schemas.SyntheticRequest):
        if req.glitch:
            flat = {}
            for key, value in req.config.items():
                if key.split(".")[0] in GlitchSpec.model_fields:
                    flat[key] = value
                else:
                    flat[f"base.{key}"] = value
            spec = resolve_config(GlitchSpec, flat)
            snapshot = spec.model_dump(mode="json")
            index_path, failures_path = gen_glitch(spec, req.out_dir)
        else:
            spec = resolve_config(SyntheticSpec, req.config)
            snapshot = spec.model_dump(mode="json")
            index_path = gen_synthetic(spec, req.out_dir)
            failures_path = None
        with open(os.path.join(req.out_dir, "spec.json"), "w") as fh:
            json.dump(snapshot, fh, indent=2, sort_keys=True)
        index = load_index(index_path)
        return schemas.SyntheticResponse(
            index_path=index_path,
            failures_path=failures_path,
            num_clips=len(index.entries),
            num_train=len(index.subset(split="train").entries),
            num_test=len(index.subset(split="test").entries),
        )

    @app.post("/pretrain", response_model=schemas.PretrainResponse)
    def pretrain_cmd(req: schemas.PretrainRequest):
        config = resolve_config(TrainConfig,
                                profile_layer(req.profile, "pretrain"),
                                req.config)
        index = load_index(req.index_path)
        run_dir = req.run_dir or default_run_dir("pretrain")
        payload = {"index_path": req.index_path,
                   "train": config.model_dump(mode="json")}
        with RunDirectory(run_dir, "pretrain", payload):
            result = pretrain(config, index, run_dir,
                              resume_from=req.resume_from)
        return schemas.PretrainResponse(
            run_dir=run_dir,
            steps=result.steps,
            final_train_loss=result.final_train_loss,
            min_train_loss=result.min_train_loss,
            best_val_loss=result.best_val_loss,
            chance_loss=result.chance_loss,
            best_checkpoint=result.best_checkpoint,
            last_checkpoint=result.last_checkpoint,
            metrics_path=result.metrics_path,
        )

    @app.post("/probe", response_model=schemas.ProbeResponse)
    def probe_cmd(req: schemas.ProbeRequest):
        probe = resolve_config(ProbeConfig, profile_layer(req.profile, "probe"),
                               req.config)
        index = load_index(req.index_path)
        if req.checkpoint_path is not None:
            model, train_cfg, params = _model_from_checkpoint(req.checkpoint_path)
        else:
            train_cfg = resolve_config(
                TrainConfig, profile_layer(req.profile, "pretrain"),
                req.train_config)
            model, params = _random_model(train_cfg), None
        run_dir = req.run_dir or default_run_dir("probe")
        payload = {"index_path": req.index_path,
                   "checkpoint_path": req.checkpoint_path,
                   "probe": probe.model_dump(mode="json"),
                   "train": train_cfg.model_dump(mode="json")}
        with RunDirectory(run_dir, "probe", payload):
            if probe.mode == "finetune":
                _, accuracy = finetune_classifier(
                    index, train_cfg, probe, index.num_classes,
                    init_params=params)
            else:
                train_emb = extract_embeddings(index, model, train_cfg,
                                               split="train")
                test_emb = extract_embeddings(index, model, train_cfg,
                                              split="test")
                save_embeddings_csv(train_emb,
                                    os.path.join(run_dir, "train_embeddings.csv"))
                save_embeddings_csv(test_emb,
                                    os.path.join(run_dir, "test_embeddings.csv"))
                _, accuracy = train_probe(train_emb, test_emb, probe,
                                          index.num_classes)
            report_path = os.path.join(run_dir, "probe_report.json")
            with open(report_path, "w") as fh:
                json.dump({"mode": probe.mode,
                           "label_fraction": probe.label_fraction,
                           "test_accuracy": accuracy}, fh, indent=2)
        return schemas.ProbeResponse(
            run_dir=run_dir, mode=probe.mode,
            label_fraction=probe.label_fraction,
            test_accuracy=accuracy, report_path=report_path)

    @app.post("/data-efficiency", response_model=schemas.SweepResponse)
    def sweep_cmd(req: schemas.SweepRequest):
        probe = resolve_config(ProbeConfig, profile_layer(req.profile, "probe"),
                               req.config)
        for fraction in req.fractions:
            if not 0.0 < fraction <= 1.0:
                raise ConfigError(f"label fraction {fraction} outside (0, 1]")
        index = load_index(req.index_path)
        _model, train_cfg, params = _model_from_checkpoint(req.checkpoint_path)
        run_dir = req.run_dir or default_run_dir("data-efficiency")
        payload = {"index_path": req.index_path,
                   "checkpoint_path": req.checkpoint_path,
                   "fractions": req.fractions, "seeds": req.seeds,
                   "probe": probe.model_dump(mode="json")}
        with RunDirectory(run_dir, "data-efficiency", payload):
            rows = data_efficiency_sweep(req.fractions, probe, index,
                                         train_cfg, params, req.seeds)
            report_path = os.path.join(run_dir, "data_efficiency.csv")
            with open(report_path, "w") as fh:
                fh.write("fraction,init,seed,accuracy\n")
                for fraction, init, seed, acc in rows:
                    fh.write(f"{fraction},{init},{seed},{acc:.6f}\n")
        return schemas.SweepResponse(
            run_dir=run_dir,
            rows=[schemas.SweepRow(fraction=f, init=i, seed=s, accuracy=a)
                  for f, i, s, a in rows],
            report_path=report_path)

    @app.post("/retrieve", response_model=schemas.RetrieveResponse)
    def retrieve_cmd(req: schemas.RetrieveRequest):
        if list(req.ks) != sorted(req.ks):
            raise ConfigError(f"ks must be sorted ascending, got {req.ks}")
        run_dir = req.run_dir or default_run_dir("retrieve")
        payload = {"ks": req.ks, "index_path": req.index_path,
                   "checkpoint_path": req.checkpoint_path,
                   "query_embeddings": req.query_embeddings,
                   "gallery_embeddings": req.gallery_embeddings}
        with RunDirectory(run_dir, "retrieve", payload):
            if req.query_embeddings and req.gallery_embeddings:
                queries = load_embeddings_csv(req.query_embeddings)
                gallery = load_embeddings_csv(req.gallery_embeddings)
                query_path, gallery_path = (req.query_embeddings,
                                            req.gallery_embeddings)
            elif req.index_path and req.checkpoint_path:
                model, train_cfg, _ = _model_from_checkpoint(req.checkpoint_path)
                index = load_index(req.index_path)
                queries = extract_embeddings(index, model, train_cfg, split="test")
                gallery = extract_embeddings(index, model, train_cfg, split="train")
                query_path = os.path.join(run_dir, "query_embeddings.csv")
                gallery_path = os.path.join(run_dir, "gallery_embeddings.csv")
                save_embeddings_csv(queries, query_path)
                save_embeddings_csv(gallery, gallery_path)
            else:
                raise ConfigError(
                    "retrieve needs either (index_path and checkpoint_path) "
                    "or (query_embeddings and gallery_embeddings)")
            recalls = retrieve(queries, gallery, list(req.ks))
            report_path = os.path.join(run_dir, "retrieval_report.csv")
            save_retrieval_csv(recalls, report_path)
        return schemas.RetrieveResponse(
            run_dir=run_dir, recalls=recalls, report_path=report_path,
            query_embeddings=query_path, gallery_embeddings=gallery_path)

    @app.post("/unintentional", response_model=schemas.UnintentionalResponse)
    def unintentional_cmd(req: schemas.UnintentionalRequest):
        if req.mode not in ("freeze", "finetune"):
            raise ConfigError(f"mode must be freeze or finetune, got {req.mode!r}")
        probe = resolve_config(ProbeConfig, profile_layer(req.profile, "probe"),
                               req.config)
        index = load_index(req.index_path)
        failures = load_failures(req.failures_path)
        if req.checkpoint_path is not None:
            _model, train_cfg, params = _model_from_checkpoint(req.checkpoint_path)
        else:
            train_cfg = resolve_config(
                TrainConfig, profile_layer(req.profile, "pretrain"), {})
            params = None
        run_dir = req.run_dir or default_run_dir("unintentional")
        payload = {"index_path": req.index_path,
                   "failures_path": req.failures_path,
                   "checkpoint_path": req.checkpoint_path, "mode": req.mode,
                   "probe": probe.model_dump(mode="json")}
        with RunDirectory(run_dir, "unintentional", payload):
            accuracy = unintentional_train_eval(
                index, failures, train_cfg, probe, mode=req.mode,
                init_params=params)
            report_path = os.path.join(run_dir, "unintentional_report.json")
            with open(report_path, "w") as fh:
                json.dump({"mode": req.mode, "accuracy": accuracy}, fh, indent=2)
        return schemas.UnintentionalResponse(
            run_dir=run_dir, mode=req.mode, accuracy=accuracy,
            report_path=report_path)

    @app.post("/memory/export", response_model=schemas.ExportMemoryResponse)
    def export_cmd(req: schemas.ExportMemoryRequest):
        model, train_cfg, _ = _model_from_checkpoint(req.checkpoint_path)
        index = load_index(req.index_path)
        run_dir = req.run_dir or default_run_dir("export-memory")
        payload = {"index_path": req.index_path,
                   "checkpoint_path": req.checkpoint_path}
        with RunDirectory(run_dir, "export-memory", payload):
            paths = export_memory_views(model, index, train_cfg, run_dir)
        return schemas.ExportMemoryResponse(
            run_dir=run_dir,
            magnitude_path=paths["magnitude"],
            neighbours_path=paths["neighbours"],
            addressing_path=paths["addressing"])

    return app
