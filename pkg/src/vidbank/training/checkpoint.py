"""Checkpoint archives: a zip of named parameter arrays plus a JSON manifest.

Layout inside the archive:
    manifest.json          {format, config, step, best_val_loss, rng_state, metadata}
    params/<name>.npy      model parameters and buffers
    optim/<name>.npy       optimizer moments (present in resumable checkpoints)

Zip entries carry a fixed timestamp and are written in sorted order, so
save -> load -> save reproduces the archive byte for byte. Loading a model
checks the parameter name set exactly: a missing name and an unexpected
name are both hard errors, as is a manifest whose architecture section
disagrees with the model being loaded.
"""

from __future__ import annotations

import base64
import io
import json
import zipfile

import numpy as np
import torch

from ..errors import CorruptArchive, MissingParameter, UnexpectedParameter

FORMAT_TAG = "vidbank-checkpoint-v1"
_EPOCH = (1980, 1, 1, 0, 0, 0)


def save_checkpoint(path: str, params: dict[str, np.ndarray], manifest: dict,
                    optim: dict[str, np.ndarray] | None = None) -> str:
    manifest = dict(manifest)
    manifest["format"] = FORMAT_TAG
    payload = json.dumps(manifest, sort_keys=True, separators=(",", ":"))
    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
        _writestr(zf, "manifest.json", payload.encode())
        for name in sorted(params):
            _writestr(zf, f"params/{name}.npy", _encode_array(params[name]))
        for name in sorted(optim or {}):
            _writestr(zf, f"optim/{name}.npy", _encode_array(optim[name]))
    return path


def load_checkpoint(path: str):
    """Returns (params, optim, manifest)."""
    try:
        with zipfile.ZipFile(path) as zf:
            names = zf.namelist()
            if "manifest.json" not in names:
                raise CorruptArchive(f"{path} has no manifest.json")
            manifest = json.loads(zf.read("manifest.json"))
            if manifest.get("format") != FORMAT_TAG:
                raise CorruptArchive(
                    f"{path} has format {manifest.get('format')!r}, "
                    f"expected {FORMAT_TAG!r}")
            params, optim = {}, {}
            for entry in names:
                if entry.startswith("params/") and entry.endswith(".npy"):
                    params[entry[len("params/"):-4]] = _read_array(zf, entry)
                elif entry.startswith("optim/") and entry.endswith(".npy"):
                    optim[entry[len("optim/"):-4]] = _read_array(zf, entry)
    except zipfile.BadZipFile as exc:
        raise CorruptArchive(f"{path} is not a valid archive: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CorruptArchive(f"{path} manifest is not valid JSON: {exc}") from exc
    return params, optim, manifest


def model_param_arrays(model: torch.nn.Module) -> dict[str, np.ndarray]:
    arrays = {}
    for name, tensor in model.state_dict().items():
        arrays[name] = tensor.detach().cpu().numpy().copy()
    return arrays


def load_model_params(model: torch.nn.Module, params: dict[str, np.ndarray],
                      manifest: dict | None = None,
                      expected_arch: dict | None = None):
    """Copy arrays into the model after strict name and config checks."""
    if manifest is not None and expected_arch is not None:
        stored = {key: manifest.get("config", {}).get(key)
                  for key in expected_arch}
        if stored != expected_arch:
            raise CorruptArchive(
                f"checkpoint architecture {stored} does not match the "
                f"requested architecture {expected_arch}")
    state = model.state_dict()
    for name in state:
        if name not in params:
            raise MissingParameter(f"checkpoint lacks parameter {name!r}")
    for name in params:
        if name not in state:
            raise UnexpectedParameter(f"checkpoint has unknown parameter {name!r}")
    tensors = {}
    for name, arr in params.items():
        if tuple(state[name].shape) != arr.shape:
            raise CorruptArchive(
                f"parameter {name!r} has shape {arr.shape}, "
                f"model expects {tuple(state[name].shape)}")
        tensors[name] = torch.from_numpy(arr.copy())
    model.load_state_dict(tensors)


def rng_state_payload(data_rng: np.random.Generator | None = None) -> dict:
    payload = {
        "torch": base64.b64encode(
            torch.get_rng_state().numpy().tobytes()).decode("ascii"),
    }
    if data_rng is not None:
        payload["numpy"] = data_rng.bit_generator.state
    return payload


def restore_rng_state(payload: dict):
    raw = base64.b64decode(payload["torch"])
    torch.set_rng_state(torch.from_numpy(
        np.frombuffer(raw, dtype=np.uint8).copy()))


def _encode_array(arr: np.ndarray) -> bytes:
    arr = np.asarray(arr)
    if arr.ndim > 0 and not arr.flags["C_CONTIGUOUS"]:
        # ascontiguousarray would promote 0-d arrays to 1-d
        arr = np.ascontiguousarray(arr)
    buf = io.BytesIO()
    np.save(buf, arr)
    return buf.getvalue()


def _read_array(zf: zipfile.ZipFile, entry: str) -> np.ndarray:
    return np.load(io.BytesIO(zf.read(entry)))


def _writestr(zf: zipfile.ZipFile, name: str, data: bytes):
    info = zipfile.ZipInfo(name, date_time=_EPOCH)
    info.external_attr = 0o644 << 16
    zf.writestr(info, data)
