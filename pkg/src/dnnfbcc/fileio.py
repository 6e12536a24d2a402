"""On-disk formats: FBF1 feature files, JSON tensor containers and manifests.

FBF1 layout (little endian)::

    b"FBF1" | u32 rows | u32 cols | u8 kind | rows*cols float32, row-major
"""

from __future__ import annotations

import base64
import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cepstral import FEATURE_KINDS
from .exceptions import FormatError, ManifestError

FBF_MAGIC = b"FBF1"
_FBF_HEADER = struct.Struct("<4sIIB")
CONTAINER_FORMAT = "dnnfbcc-tensors/1"


def write_features(path, features, kind):
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ValueError("features must be a 2-D (frames, dim) matrix")
    if kind not in FEATURE_KINDS:
        raise ValueError(f"unknown feature kind {kind!r}")
    rows, cols = features.shape
    with open(path, "wb") as fh:
        fh.write(_FBF_HEADER.pack(FBF_MAGIC, rows, cols, FEATURE_KINDS.index(kind)))
        fh.write(features.astype("<f4").tobytes())


def read_features(path):
    """Return ``(features, kind)``; features come back as float32."""
    blob = Path(path).read_bytes()
    if blob[:4] != FBF_MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}", offset=0)
    if len(blob) < _FBF_HEADER.size:
        raise FormatError(f"{path}: truncated header", offset=len(blob))
    _, rows, cols, tag = _FBF_HEADER.unpack_from(blob)
    if tag >= len(FEATURE_KINDS):
        raise FormatError(f"{path}: unknown kind tag {tag}", offset=_FBF_HEADER.size - 1)
    expected = _FBF_HEADER.size + 4 * rows * cols
    if len(blob) < expected:
        raise FormatError(f"{path}: header declares {rows}x{cols} values but data is truncated",
                          offset=len(blob))
    if len(blob) > expected:
        raise FormatError(f"{path}: {len(blob) - expected} trailing bytes", offset=expected)
    data = np.frombuffer(blob, dtype="<f4", count=rows * cols, offset=_FBF_HEADER.size)
    return data.reshape(rows, cols).astype(np.float32), FEATURE_KINDS[tag]


def _encode(array):
    # asarray keeps 0-d scalars 0-d; tobytes always emits C order
    array = np.asarray(array, dtype="<f8")
    return {"shape": list(array.shape), "dtype": "<f8",
            "data": base64.b64encode(array.tobytes(order="C")).decode("ascii")}


def _decode(name, record):
    if record.get("dtype") != "<f8":
        raise FormatError(f"tensor {name}: unsupported dtype {record.get('dtype')!r}")
    raw = base64.b64decode(record["data"])
    shape = tuple(record["shape"])
    if len(raw) != 8 * int(np.prod(shape, dtype=np.int64)):
        raise FormatError(f"tensor {name}: {len(raw)} bytes do not match shape {shape}")
    return np.frombuffer(raw, dtype="<f8").reshape(shape).copy()


def save_container(path, kind, tensors, meta=None):
    """Write named float64 tensors plus JSON metadata, deterministically."""
    doc = {"format": CONTAINER_FORMAT, "kind": kind, "meta": meta or {},
           "tensors": {name: _encode(value) for name, value in tensors.items()}}
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_container(path, kind=None):
    """Return ``(tensors, meta)``; checks the container ``kind`` when given."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not a JSON document ({exc})") from exc
    if doc.get("format") != CONTAINER_FORMAT:
        raise FormatError(f"{path}: not a {CONTAINER_FORMAT} container")
    if kind is not None and doc.get("kind") != kind:
        raise FormatError(f"{path}: expected a {kind} model, found {doc.get('kind')!r}")
    tensors = {name: _decode(name, rec) for name, rec in doc["tensors"].items()}
    return tensors, doc.get("meta", {})


def file_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass(frozen=True)
class ManifestRow:
    audio_path: Path
    label: str
    attack_id: str
    class_index: int

    @property
    def utt_id(self):
        return self.audio_path.stem


def parse_manifest(path, n_outputs=None, check_exists=True):
    """Read a TSV manifest of ``audio_path label attack_id [class_index]``.

    Relative audio paths are resolved against the manifest's directory.
    Without a class column, human rows get class 0 and spoof rows class 1.
    Lines starting with ``#`` are ignored.
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest {path} does not exist")
    rows, seen_paths, seen_ids = [], set(), set()
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) not in (3, 4):
            raise ManifestError(f"expected 3 or 4 tab-separated columns, got {len(parts)}", lineno)
        audio, label, attack = parts[:3]
        if label not in ("human", "spoof"):
            raise ManifestError(f"label must be 'human' or 'spoof', got {label!r}", lineno)
        if label == "human" and attack != "-":
            raise ManifestError("human rows must have attack_id '-'", lineno)
        if label == "spoof" and attack in ("", "-"):
            raise ManifestError("spoof rows need an attack_id", lineno)
        if len(parts) == 4:
            try:
                cls = int(parts[3])
            except ValueError:
                raise ManifestError(f"class_index must be an integer, got {parts[3]!r}", lineno) from None
        else:
            cls = 0 if label == "human" else 1
        if label == "human" and cls != 0:
            raise ManifestError("human rows must have class_index 0", lineno)
        if label == "spoof" and cls < 1:
            raise ManifestError("spoof rows need class_index >= 1", lineno)
        if n_outputs is not None and cls >= n_outputs:
            raise ManifestError(f"class_index {cls} out of range [0, {n_outputs})", lineno)
        audio_path = Path(audio)
        if not audio_path.is_absolute():
            audio_path = path.parent / audio_path
        if check_exists and not audio_path.is_file():
            raise ManifestError(f"audio file {audio_path} does not exist", lineno)
        if audio_path in seen_paths:
            raise ManifestError(f"duplicate audio path {audio}", lineno)
        if audio_path.stem in seen_ids:
            raise ManifestError(f"duplicate utterance id {audio_path.stem}", lineno)
        seen_paths.add(audio_path)
        seen_ids.add(audio_path.stem)
        rows.append(ManifestRow(audio_path, label, attack, cls))
    return rows
