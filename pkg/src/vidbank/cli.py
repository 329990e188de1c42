"""Command-line client for the experiment service.

Each subcommand marshals its flags into a request, sends it to the service
(a remote server via --server, otherwise an in-process instance), prints
the JSON response, and maps structured errors to exit codes:
2 config, 3 data, 4 diverged training, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import sys

from .configs import load_config_file, parse_overrides
from .errors import ConfigError

EXIT_BY_CATEGORY = {"config": 2, "data": 3, "diverged": 4, "internal": 1}
DEFAULT_TIMEOUT = 24 * 3600.0    # pretraining runs are long


def _client(server: str | None):
    if server:
        import httpx
        return httpx.Client(base_url=server, timeout=DEFAULT_TIMEOUT)
    from fastapi.testclient import TestClient

    from .service.app import create_app
    return TestClient(create_app(), raise_server_exceptions=False)


def _emit(resp) -> int:
    try:
        payload = resp.json()
    except ValueError:
        payload = None
    if resp.status_code == 200:
        print(json.dumps(payload, indent=2, sort_keys=True))
        return 0
    if isinstance(payload, dict) and "error" in payload:
        err = payload["error"]
    elif isinstance(payload, dict) and "detail" in payload:
        err = {"type": "RequestValidationError", "category": "config",
               "message": json.dumps(payload["detail"])}
    else:
        err = {"type": "InternalError", "category": "internal",
               "message": resp.text}
    print(json.dumps(err, sort_keys=True), file=sys.stderr)
    return EXIT_BY_CATEGORY.get(err.get("category"), 1)


def _flat_config(args) -> dict:
    layers = {}
    if getattr(args, "config", None):
        layers.update(load_config_file(args.config))
    if getattr(args, "set", None):
        layers.update(parse_overrides(args.set))
    return layers


def _add_common(parser, run_dir=True):
    parser.add_argument("--server", default=None,
                        help="base URL of a running service; default runs in-process")
    parser.add_argument("--config", default=None,
                        help="flat JSON config file with dotted keys")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="config override, repeatable")
    parser.add_argument("--profile", default=None,
                        help="shipped config profile (paper_ucf_r18, desk_tiny)")
    if run_dir:
        parser.add_argument("--run-dir", default=None)


def _parse_list(raw: str, cast):
    try:
        return [cast(part) for part in raw.split(",") if part]
    except ValueError as exc:
        raise ConfigError(f"cannot parse list {raw!r}: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vidbank")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synthetic", help="generate a synthetic video dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--glitch", action="store_true",
                   help="failure-moment variant with labeled corruption times")
    _add_common(p, run_dir=False)

    p = sub.add_parser("pretrain", help="self-supervised pretraining")
    p.add_argument("--index", required=True)
    p.add_argument("--resume", default=None, help="checkpoint to resume from")
    _add_common(p)

    p = sub.add_parser("probe", help="classification probe or finetuning")
    p.add_argument("--index", required=True)
    p.add_argument("--checkpoint", default=None,
                   help="pretrained checkpoint; omit for a random baseline")
    p.add_argument("--mode", choices=["linear", "nonlinear", "finetune"],
                   default=None)
    p.add_argument("--fraction", type=float, default=None,
                   help="stratified fraction of training labels")
    p.add_argument("--train-set", action="append", default=[], metavar="KEY=VALUE",
                   help="architecture overrides when no checkpoint is given")
    _add_common(p)

    p = sub.add_parser("data-efficiency",
                       help="finetune from pretrained vs random at several label fractions")
    p.add_argument("--index", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--fractions", default="0.1,0.2,0.5,1.0")
    p.add_argument("--seeds", default="0,1,2")
    _add_common(p)

    p = sub.add_parser("retrieve", help="nearest-neighbour retrieval report")
    p.add_argument("--index", default=None)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--query-embeddings", default=None)
    p.add_argument("--gallery-embeddings", default=None)
    p.add_argument("--ks", default="1,5,10,20")
    _add_common(p)

    p = sub.add_parser("unintentional", help="failure-moment classification")
    p.add_argument("--index", required=True)
    p.add_argument("--failures", required=True)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--mode", choices=["freeze", "finetune"], default="freeze")
    _add_common(p)

    p = sub.add_parser("export-memory", help="export memory bank views")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--index", required=True)
    _add_common(p)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "serve":
        import uvicorn

        from .service.app import create_app
        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0

    try:
        body = _build_request(args)
    except ConfigError as exc:
        print(json.dumps({"type": "ConfigError", "category": "config",
                          "message": str(exc)}, sort_keys=True), file=sys.stderr)
        return 2

    route = {
        "gen-synthetic": "/synthetic",
        "pretrain": "/pretrain",
        "probe": "/probe",
        "data-efficiency": "/data-efficiency",
        "retrieve": "/retrieve",
        "unintentional": "/unintentional",
        "export-memory": "/memory/export",
    }[args.command]

    with _client(getattr(args, "server", None)) as client:
        resp = client.post(route, json=body)
        return _emit(resp)


def _build_request(args) -> dict:
    flat = _flat_config(args)
    if args.command == "gen-synthetic":
        return {"out_dir": args.out, "glitch": args.glitch, "config": flat}
    if args.command == "pretrain":
        return {"index_path": args.index, "run_dir": args.run_dir,
                "profile": args.profile, "config": flat,
                "resume_from": args.resume}
    if args.command == "probe":
        if args.mode is not None:
            flat["mode"] = args.mode
        if args.fraction is not None:
            flat["label_fraction"] = args.fraction
        return {"index_path": args.index, "checkpoint_path": args.checkpoint,
                "run_dir": args.run_dir, "profile": args.profile,
                "config": flat, "train_config": parse_overrides(args.train_set)}
    if args.command == "data-efficiency":
        return {"index_path": args.index, "checkpoint_path": args.checkpoint,
                "fractions": _parse_list(args.fractions, float),
                "seeds": _parse_list(args.seeds, int),
                "run_dir": args.run_dir, "profile": args.profile,
                "config": flat}
    if args.command == "retrieve":
        return {"index_path": args.index, "checkpoint_path": args.checkpoint,
                "query_embeddings": args.query_embeddings,
                "gallery_embeddings": args.gallery_embeddings,
                "ks": _parse_list(args.ks, int), "run_dir": args.run_dir}
    if args.command == "unintentional":
        return {"index_path": args.index, "failures_path": args.failures,
                "checkpoint_path": args.checkpoint, "mode": args.mode,
                "run_dir": args.run_dir, "profile": args.profile,
                "config": flat}
    if args.command == "export-memory":
        return {"checkpoint_path": args.checkpoint, "index_path": args.index,
                "run_dir": args.run_dir}
    raise ConfigError(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
