"""Persistence: binary tensor container, JSON sidecars, dataset assembly.

Every tensor lives in its own little-endian "MLAT" file next to a JSON
sidecar describing what it is.  Writes go through a temp file + rename so
readers never observe a torn file.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .fieldsim import RfFrame, make_phantom, simulate_sweep
from .geometry import AcquisitionConfig, config_hash, hann_window
from .imaging import MlaConfig, apodized_sum, mla_line_plan
from .neural.network import NetConfig, NetParams, cube_to_tensor, image_to_tensor
from .rx_frontend import IqCube, build_iq_cube, iq_demodulate, sla_line_plan

__all__ = [
    "DatastoreError",
    "write_tensor",
    "read_tensor",
    "write_json",
    "read_json",
    "ManifestEntry",
    "DatasetManifest",
    "build_dataset",
    "save_rf_sweep",
    "load_rf_sweep",
    "save_cube",
    "load_cube",
    "save_image",
    "load_image_tensor",
    "save_checkpoint",
    "load_checkpoint",
]

MAGIC = b"MLAT"
FORMAT_VERSION = 1
_DTYPE_CODES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_CODE_FOR_KIND = {"f": {4: 1, 8: 2}}


class DatastoreError(ValueError):
    """Malformed or inconsistent on-disk data."""


def _atomic_write(path: Path, payload: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def write_tensor(path: str | Path, array: np.ndarray) -> None:
    """Persist a float32/float64 array in the MLAT container."""
    path = Path(path)
    array = np.asarray(array)
    if array.dtype.kind != "f" or array.dtype.itemsize not in (4, 8):
        raise DatastoreError(f"only f32/f64 tensors are supported, got {array.dtype}")
    if not np.all(np.isfinite(array)):
        raise DatastoreError("refusing to write non-finite tensor values")
    code = _CODE_FOR_KIND["f"][array.dtype.itemsize]
    header = MAGIC + struct.pack("<HBB", FORMAT_VERSION, code, array.ndim)
    header += struct.pack(f"<{array.ndim}Q", *array.shape)
    payload = header + np.ascontiguousarray(array, dtype=f"<f{array.dtype.itemsize}").tobytes()
    _atomic_write(path, payload)


def read_tensor(path: str | Path) -> np.ndarray:
    """Read and validate an MLAT tensor file."""
    raw = Path(path).read_bytes()
    if len(raw) < 8 or raw[:4] != MAGIC:
        raise DatastoreError(f"{path}: not an MLAT tensor file")
    version, code, rank = struct.unpack("<HBB", raw[4:8])
    if version != FORMAT_VERSION:
        raise DatastoreError(f"{path}: unsupported format version {version}")
    if code not in _DTYPE_CODES:
        raise DatastoreError(f"{path}: unknown dtype code {code}")
    header_end = 8 + 8 * rank
    if len(raw) < header_end:
        raise DatastoreError(f"{path}: truncated header")
    shape = struct.unpack(f"<{rank}Q", raw[8:header_end])
    dtype = _DTYPE_CODES[code]
    expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    if len(raw) - header_end != expected:
        raise DatastoreError(
            f"{path}: payload length {len(raw) - header_end} != expected {expected}"
        )
    return np.frombuffer(raw[header_end:], dtype=dtype).reshape(shape).copy()


def write_json(path: str | Path, obj) -> None:
    _atomic_write(Path(path), json.dumps(obj, indent=2, sort_keys=True).encode("utf-8"))


def read_json(path: str | Path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".json")


# ---------------------------------------------------------------------------
# RF sweeps


def save_rf_sweep(
    out_dir: str | Path,
    cfg: AcquisitionConfig,
    frames: list[RfFrame],
    phantom_meta: dict | None = None,
) -> None:
    """Write one tensor per transmit event plus the configuration."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "config.json", json.loads(cfg.to_json()))
    if phantom_meta is not None:
        write_json(out / "phantom.json", phantom_meta)
    digest = config_hash(cfg)
    for frame in frames:
        path = out / f"rf_{frame.tx_line_index:04d}.mlat"
        write_tensor(path, frame.samples.astype(np.float64))
        write_json(
            _sidecar(path),
            {
                "kind": "rf_frame",
                "tx_line_index": frame.tx_line_index,
                "t0": frame.t0,
                "config_hash": digest,
            },
        )


def load_rf_sweep(in_dir: str | Path) -> tuple[AcquisitionConfig, dict[int, RfFrame]]:
    """Read a sweep directory back into per-event frames keyed by line index."""
    path = Path(in_dir)
    cfg = AcquisitionConfig.from_json((path / "config.json").read_text())
    digest = config_hash(cfg)
    frames: dict[int, RfFrame] = {}
    for tensor_path in sorted(path.glob("rf_*.mlat")):
        meta = read_json(_sidecar(tensor_path))
        if meta.get("config_hash") != digest:
            raise DatastoreError(f"{tensor_path}: config hash mismatch")
        samples = read_tensor(tensor_path)
        index = int(meta["tx_line_index"])
        frames[index] = RfFrame(tx_line_index=index, samples=samples, t0=float(meta["t0"]))
    if not frames:
        raise DatastoreError(f"no rf_*.mlat frames found in {in_dir}")
    return cfg, frames


# ---------------------------------------------------------------------------
# Cubes, images, checkpoints


def _complex_to_interleaved(data: np.ndarray, dtype=np.float32) -> np.ndarray:
    out = np.empty((*data.shape, 2), dtype=dtype)
    out[..., 0] = data.real
    out[..., 1] = data.imag
    return out


def _interleaved_to_complex(data: np.ndarray) -> np.ndarray:
    if data.shape[-1] != 2:
        raise DatastoreError("interleaved tensor must have a trailing axis of size 2")
    return data[..., 0].astype(np.float64) + 1j * data[..., 1].astype(np.float64)


def save_cube(
    path: str | Path,
    cube: IqCube,
    cfg: AcquisitionConfig,
    line_plan: list[tuple[int, int]],
    mla_factor: int,
) -> None:
    path = Path(path)
    write_tensor(path, _complex_to_interleaved(cube.data))
    write_json(
        _sidecar(path),
        {
            "kind": "iq_cube",
            "config_hash": config_hash(cfg),
            "line_plan": [[int(a), int(b)] for a, b in line_plan],
            "mla_factor": int(mla_factor),
        },
    )


def load_cube(path: str | Path) -> tuple[IqCube, dict]:
    path = Path(path)
    meta = read_json(_sidecar(path))
    data = _interleaved_to_complex(read_tensor(path))
    sources = np.zeros(data.shape[2], dtype=np.int64)
    for rx_line, event in meta["line_plan"]:
        sources[rx_line] = event
    return IqCube(data=data, line_sources=sources), meta


def save_image(
    path: str | Path,
    data: np.ndarray,
    provenance: str,
    mla_factor: int,
    cfg: AcquisitionConfig,
) -> None:
    path = Path(path)
    write_tensor(path, _complex_to_interleaved(data))
    write_json(
        _sidecar(path),
        {
            "kind": "beamformed_image",
            "provenance": provenance,
            "mla_factor": int(mla_factor),
            "config_hash": config_hash(cfg),
        },
    )


def load_image_tensor(path: str | Path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    meta = read_json(_sidecar(path))
    return _interleaved_to_complex(read_tensor(path)), meta


_PARAM_GROUPS = ("enc_kernels", "enc_biases", "dec_kernels", "dec_biases")


def save_checkpoint(out_dir: str | Path, params: NetParams, net_cfg: NetConfig) -> None:
    """Persist network parameters as named tensors plus a manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    named = []
    for group in _PARAM_GROUPS:
        for i, tensor in enumerate(getattr(params, group)):
            named.append((f"{group}_{i}", tensor))
    named.append(("apod_weights", params.apod_weights))
    named.append(("apod_bias", params.apod_bias))
    for name, tensor in named:
        file_name = f"{name}.mlat"
        write_tensor(out / file_name, np.asarray(tensor, dtype=np.float32))
        entries.append({"name": name, "file": file_name, "shape": list(tensor.shape)})
    write_json(
        out / "manifest.json",
        {
            "kind": "checkpoint",
            "format_version": FORMAT_VERSION,
            "net_config": asdict(net_cfg),
            "tensors": entries,
        },
    )


def load_checkpoint(in_dir: str | Path) -> tuple[NetParams, NetConfig]:
    path = Path(in_dir)
    manifest = read_json(path / "manifest.json")
    if manifest.get("kind") != "checkpoint":
        raise DatastoreError(f"{in_dir}: not a checkpoint directory")
    net_cfg = NetConfig(**manifest["net_config"])
    tensors = {}
    for entry in manifest["tensors"]:
        arr = read_tensor(path / entry["file"])
        if list(arr.shape) != entry["shape"]:
            raise DatastoreError(f"{entry['file']}: shape mismatch against manifest")
        tensors[entry["name"]] = arr
    groups: dict[str, list[np.ndarray]] = {g: [] for g in _PARAM_GROUPS}
    for group in _PARAM_GROUPS:
        i = 0
        while f"{group}_{i}" in tensors:
            groups[group].append(tensors[f"{group}_{i}"])
            i += 1
        if len(groups[group]) != net_cfg.bifurcations:
            raise DatastoreError(f"checkpoint missing tensors for {group}")
    return (
        NetParams(
            enc_kernels=groups["enc_kernels"],
            enc_biases=groups["enc_biases"],
            dec_kernels=groups["dec_kernels"],
            dec_biases=groups["dec_biases"],
            apod_weights=tensors["apod_weights"],
            apod_bias=tensors["apod_bias"],
        ),
        net_cfg,
    )


# ---------------------------------------------------------------------------
# Dataset assembly


@dataclass(frozen=True)
class ManifestEntry:
    sample_id: str
    cube_path: str
    target_path: str
    mla_factor: int
    phantom_seed: int
    split: str


@dataclass(frozen=True)
class DatasetManifest:
    config: AcquisitionConfig
    mla: MlaConfig
    entries: list[ManifestEntry]

    def split_entries(self, split: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == split]

    def to_dict(self) -> dict:
        return {
            "kind": "dataset_manifest",
            "format_version": FORMAT_VERSION,
            "config": json.loads(self.config.to_json()),
            "config_hash": config_hash(self.config),
            "mla_factor": self.mla.factor,
            "center_offset": self.mla.center_offset,
            "samples": [asdict(e) for e in self.entries],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetManifest":
        if data.get("kind") != "dataset_manifest":
            raise DatastoreError("not a dataset manifest")
        cfg = AcquisitionConfig.from_json(json.dumps(data["config"]))
        if config_hash(cfg) != data.get("config_hash"):
            raise DatastoreError("manifest config hash mismatch")
        entries = [ManifestEntry(**e) for e in data["samples"]]
        splits = {e.split for e in entries}
        if not splits <= {"train", "val", "test"}:
            raise DatastoreError(f"unknown split labels: {splits}")
        test_seeds = {e.phantom_seed for e in entries if e.split == "test"}
        fit_seeds = {e.phantom_seed for e in entries if e.split != "test"}
        if test_seeds & fit_seeds:
            raise DatastoreError("test seeds leak into train/val splits")
        return cls(
            config=cfg,
            mla=MlaConfig(factor=data["mla_factor"], center_offset=data["center_offset"]),
            entries=entries,
        )


def split_counts(n_frames: int) -> tuple[int, int, int]:
    """70/15/15 split with at least one sample per split (needs n >= 3)."""
    if n_frames < 3:
        raise ValueError("need at least 3 frames for a train/val/test split")
    n_val = max(1, round(0.15 * n_frames))
    n_test = max(1, round(0.15 * n_frames))
    return n_frames - n_val - n_test, n_val, n_test


def build_dataset(
    cfg: AcquisitionConfig,
    mla: MlaConfig,
    n_frames: int,
    seed_base: int,
    out_dir: str | Path,
    n_scatterers: int = 200,
) -> DatasetManifest:
    """Simulate frames and write (MLA cube, SLA target) training pairs.

    Per frame: a seeded speckle phantom is swept in SLA mode; the Hann
    beamformed SLA image is the target and the decimated cube (per the MLA
    plan) is the input.  Frames split 70/15/15 by seed order, so test seeds
    never occur in train/val.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_train, n_val, _ = split_counts(n_frames)
    plan = mla_line_plan(cfg, mla)
    kept_events = sorted({ev for _, ev in plan})
    identity = sla_line_plan(cfg)
    hann = hann_window(cfg.element_count)
    entries: list[ManifestEntry] = []
    for i in range(n_frames):
        seed = seed_base + i
        phantom = make_phantom("random_speckle", seed, cfg, n_scatterers=n_scatterers)
        frames = simulate_sweep(cfg, phantom)
        iq = {f.tx_line_index: iq_demodulate(f, cfg) for f in frames}
        sla_cube = build_iq_cube(iq, identity, cfg)
        target = apodized_sum(sla_cube, hann)
        if mla.factor == 1:
            cube = sla_cube
        else:
            cube = build_iq_cube({ev: iq[ev] for ev in kept_events}, plan, cfg)
        sample_id = f"frame_{seed:06d}"
        cube_path = f"{sample_id}_cube.mlat"
        target_path = f"{sample_id}_target.mlat"
        save_cube(out / cube_path, cube, cfg, plan, mla.factor)
        save_image(out / target_path, target.data, "sla", 1, cfg)
        split = "train" if i < n_train else ("val" if i < n_train + n_val else "test")
        entries.append(
            ManifestEntry(
                sample_id=sample_id,
                cube_path=cube_path,
                target_path=target_path,
                mla_factor=mla.factor,
                phantom_seed=seed,
                split=split,
            )
        )
    manifest = DatasetManifest(config=cfg, mla=mla, entries=entries)
    write_json(out / "manifest.json", manifest.to_dict())
    return manifest


def load_manifest(path: str | Path) -> DatasetManifest:
    return DatasetManifest.from_dict(read_json(path))


def load_pairs(
    manifest: DatasetManifest, base_dir: str | Path, splits: tuple[str, ...]
) -> tuple[list[np.ndarray], list[np.ndarray], list[str]]:
    """Load (cube tensor, target tensor) pairs for the requested splits."""
    base = Path(base_dir)
    inputs, targets, split_of = [], [], []
    for entry in manifest.entries:
        if entry.split not in splits:
            continue
        cube, _ = load_cube(base / entry.cube_path)
        image, _ = load_image_tensor(base / entry.target_path)
        inputs.append(cube_to_tensor(cube.data))
        targets.append(image_to_tensor(image))
        split_of.append(entry.split)
    return inputs, targets, split_of
