from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Tuple
import hashlib
import json
import logging
import struct

import numpy as np
import torch
from tqdm import tqdm

from app.config import settings
from app.errors import CheckpointError, HashMismatchError, MissingArtifactError
from app.models.constant import TOOL_VERSION

logger = logging.getLogger(__name__)

_HEADER_LEN = struct.Struct("<I")


def configure_logging(level: Optional[str] = None):
    logging.basicConfig(
        level=(level or settings.LOG_LEVEL).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def configure_torch():
    torch.set_num_threads(settings.TORCH_THREADS)


def progress(iterable: Iterable, **kwargs):
    """Wrap a loop in a tqdm bar when Settings.PROGRESS is on."""
    return tqdm(iterable, disable=not settings.PROGRESS, leave=False, **kwargs)


def config_hash(cfg) -> str:
    """Stable tag of a resolved ExperimentConfig (output_dir excluded)."""
    payload = cfg.model_dump(mode="json", exclude={"output_dir"})
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def write_container(path, magic: bytes, header: Dict[str, Any], payload: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(magic)
        f.write(_HEADER_LEN.pack(len(header_bytes)))
        f.write(header_bytes)
        f.write(payload)


def read_container(path, magic: bytes, error_cls=CheckpointError) -> Tuple[Dict[str, Any], bytes]:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < len(magic) + _HEADER_LEN.size:
        raise error_cls(f"{path}: truncated file (magic/header length)")
    if blob[: len(magic)] != magic:
        raise error_cls(f"{path}: bad magic bytes {blob[:len(magic)]!r}, expected {magic!r}")
    offset = len(magic)
    (header_len,) = _HEADER_LEN.unpack_from(blob, offset)
    offset += _HEADER_LEN.size
    if len(blob) < offset + header_len:
        raise error_cls(f"{path}: truncated file (header)")
    try:
        header = json.loads(blob[offset: offset + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise error_cls(f"{path}: header is not valid JSON: {e}")
    if not isinstance(header, dict):
        raise error_cls(f"{path}: header must be a JSON object")
    return header, blob[offset + header_len:]


def require_header_field(header: Dict[str, Any], field: str, path, error_cls=CheckpointError):
    if field not in header:
        raise error_cls(f"{path}: header field '{field}' missing")
    return header[field]


def float_block(payload: bytes, count: int, path, field: str, error_cls=CheckpointError) -> np.ndarray:
    expected = count * 8
    if len(payload) < expected:
        raise error_cls(f"{path}: truncated payload for '{field}' ({len(payload)} < {expected} bytes)")
    return np.frombuffer(payload[:expected], dtype="<f8").astype(np.float64)


def require_artifact(path, command: str) -> Path:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(path, command)
    return path


class ArtifactPaths:
    """File layout of one experiment directory; names encode variant, model tag and protocol."""

    def __init__(self, root):
        self.root = Path(root)

    @property
    def manifest(self) -> Path:
        return self.root / "manifest.json"

    def dataset(self, split: str) -> Path:
        return self.root / "data" / f"{split}.bin"

    def checkpoint(self, model_tag: str) -> Path:
        return self.root / "models" / f"classifier_{model_tag.lower()}.ckpt"

    def train_log(self, model_tag: str) -> Path:
        return self.root / "models" / f"classifier_{model_tag.lower()}_trainlog.json"

    def attack(self, variant: str, seed: int) -> Path:
        return self.root / "attacks" / f"{variant}_s{seed}.atk"

    def report(self, protocol: str, variant: str, model_tag: str, suffix: str = "json") -> Path:
        return self.root / "reports" / f"{protocol}_{variant}_{model_tag.lower()}.{suffix}"

    @property
    def reports_dir(self) -> Path:
        return self.root / "reports"

    @property
    def summary(self) -> Path:
        return self.root / "summary.json"

    @property
    def consolidated_csv(self) -> Path:
        return self.root / "summary.csv"


def check_manifest(paths: ArtifactPaths, cfg_hash: str) -> Optional[Dict[str, Any]]:
    """Existing manifest of the experiment directory, if its config hash matches."""
    if not paths.manifest.exists():
        return None
    manifest = json.loads(paths.manifest.read_text())
    if manifest.get("config_hash") != cfg_hash:
        raise HashMismatchError(
            f"{paths.root} holds artifacts for config {manifest.get('config_hash')}, "
            f"current config is {cfg_hash}; use a fresh output directory"
        )
    return manifest


def update_manifest(paths: ArtifactPaths, cfg_hash: str, command: str, seeds: Dict[str, Any], outputs: Iterable):
    """Record a command run; refuses to mix artifacts from a different config."""
    manifest = check_manifest(paths, cfg_hash) or {"config_hash": cfg_hash, "tool_version": TOOL_VERSION, "commands": {}}
    manifest["tool_version"] = TOOL_VERSION
    manifest["commands"][command] = {
        "seeds": seeds,
        "outputs": sorted(str(Path(o).relative_to(paths.root)) for o in outputs),
    }
    paths.root.mkdir(parents=True, exist_ok=True)
    paths.manifest.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    logger.info(f"Manifest updated for {command} ({cfg_hash})")
    return manifest


def check_artifact_hash(header: Dict[str, Any], cfg_hash: str, path):
    """An artifact without a recorded hash counts as foreign; loaders skip this check only
    when called without an expected hash."""
    found = header.get("config_hash", "")
    if not found:
        raise HashMismatchError(f"{path} records no config hash, current config is {cfg_hash}")
    if found != cfg_hash:
        raise HashMismatchError(f"{path} was produced by config {found}, current config is {cfg_hash}")
