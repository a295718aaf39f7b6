"""Versioned binary checkpoints for the segmentation model.

Layout: 4-byte magic ``OSCK``, u32 format version, u32 header length,
JSON header (architecture hash, parameter count, training config digest,
named parameter and statistic shapes), then raw little-endian blocks:
float32 for parameters, float64 for batch-norm running statistics.

Parameters are kept float32-representable in memory, so a save/load
round trip reproduces forward outputs bit for bit.
"""

import json
import struct

import numpy as np

from ..errors import DomainError

MAGIC = b"OSCK"
FORMAT_VERSION = 1


class VersionMismatch(DomainError):
    pass


class HashMismatch(DomainError):
    pass


class TruncatedFile(DomainError):
    pass


def checkpoint_bytes(model, train_digest="untrained"):
    header = {
        "format_version": FORMAT_VERSION,
        "arch_hash": model.arch_hash,
        "param_count": model.param_count,
        "train_digest": train_digest,
        "params": [[name, list(arr.shape)] for name, arr in model.params.items()],
        "stats": [[name, list(arr.shape)] for name, arr in model.stats.items()],
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    out = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(head)), head]
    for arr in model.params.values():
        out.append(arr.astype("<f4").tobytes())
    for arr in model.stats.values():
        out.append(arr.astype("<f8").tobytes())
    return b"".join(out)


def save_checkpoint(model, path, train_digest="untrained"):
    blob = checkpoint_bytes(model, train_digest)
    with open(path, "wb") as fh:
        fh.write(blob)
    return path


def _read_header(blob):
    if len(blob) < 12:
        raise TruncatedFile("file shorter than the fixed preamble")
    if blob[:4] != MAGIC:
        raise VersionMismatch("not a model checkpoint (magic bytes differ)")
    version, head_len = struct.unpack("<II", blob[4:12])
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"checkpoint format {version}, reader supports {FORMAT_VERSION}")
    if len(blob) < 12 + head_len:
        raise TruncatedFile("header extends past end of file")
    try:
        header = json.loads(blob[12:12 + head_len].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TruncatedFile(f"unreadable checkpoint header: {exc}") from exc
    return header, 12 + head_len


def peek_checkpoint(path):
    """Header dict with the parameter count recomputed from the shapes."""
    with open(path, "rb") as fh:
        blob = fh.read()
    header, _ = _read_header(blob)
    header["param_count_from_shapes"] = int(
        sum(int(np.prod(shape)) for _, shape in header["params"]))
    return header


def load_into(model, path):
    """Fill ``model`` from a checkpoint, validating the architecture hash."""
    with open(path, "rb") as fh:
        blob = fh.read()
    header, offset = _read_header(blob)
    if header["arch_hash"] != model.arch_hash:
        raise HashMismatch(
            f"checkpoint built for architecture {header['arch_hash']}, "
            f"model is {model.arch_hash}")

    for name, shape in header["params"]:
        count = int(np.prod(shape))
        end = offset + 4 * count
        if end > len(blob):
            raise TruncatedFile(f"parameter block {name} extends past end of file")
        arr = np.frombuffer(blob[offset:end], dtype="<f4").reshape(shape)
        model.params[name] = arr.astype(np.float64)
        offset = end
    for name, shape in header["stats"]:
        count = int(np.prod(shape))
        end = offset + 8 * count
        if end > len(blob):
            raise TruncatedFile(f"statistics block {name} extends past end of file")
        arr = np.frombuffer(blob[offset:end], dtype="<f8").reshape(shape)
        model.stats[name] = arr.astype(np.float64)
        offset = end
    return header
