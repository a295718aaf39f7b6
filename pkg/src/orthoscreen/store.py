"""Filesystem workspace for cases, clouds, models, reports, histories.

Artifacts are content-addressed: every filename ends in an 8-hex-digit
digest of the payload, so identical content dedups to one blob and any
corruption is caught on read. Writes go to a temp file in the target
directory followed by an atomic rename; a crash mid-write never leaves
a partial file under a canonical name.

When several blobs share a stem, reads resolve to the lexicographically
last name; listings are deterministic the same way.
"""

import hashlib
import json
import os
import tempfile

from .cases import parse_case, parse_plan, serialize_case, serialize_plan
from .errors import DomainError
from .pointcloud import cloud_to_ply, ply_to_cloud

SUBDIRS = ("cases", "clouds", "models", "reports", "history")


class NotFound(DomainError):
    pass


class CorruptArtifact(DomainError):
    pass


def _digest(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()[:8]


class Workspace:
    def __init__(self, root):
        self.root = os.path.abspath(root)
        for sub in SUBDIRS:
            os.makedirs(os.path.join(self.root, sub), exist_ok=True)

    # ----- low-level blob handling ----------------------------------------

    def _atomic_write(self, path, payload: bytes):
        directory = os.path.dirname(path)
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(payload)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def _put(self, subdir, stem, ext, payload: bytes):
        name = f"{stem}-{_digest(payload)}{ext}"
        path = os.path.join(self.root, subdir, name)
        if not os.path.exists(path):
            self._atomic_write(path, payload)
        return path

    def _matches(self, subdir, stem, ext):
        directory = os.path.join(self.root, subdir)
        prefix = f"{stem}-"
        out = []
        for name in sorted(os.listdir(directory)):
            if name.startswith(".tmp-") or not name.startswith(prefix) \
                    or not name.endswith(ext):
                continue
            middle = name[len(prefix):-len(ext)] if ext else name[len(prefix):]
            if len(middle) == 8 and all(c in "0123456789abcdef" for c in middle):
                out.append(os.path.join(directory, name))
        return out

    def _read(self, path):
        if not os.path.exists(path):
            raise NotFound(f"no artifact at {path}")
        with open(path, "rb") as fh:
            payload = fh.read()
        base = os.path.basename(path)
        stem, _ = os.path.splitext(base)
        tagged = stem.rsplit("-", 1)[-1]
        if _digest(payload) != tagged:
            raise CorruptArtifact(f"{base}: content digest {_digest(payload)} != name tag {tagged}")
        return payload

    def _resolve(self, subdir, stem, ext, kind):
        matches = self._matches(subdir, stem, ext)
        if not matches:
            raise NotFound(f"no {kind} stored for {stem!r}")
        return matches[-1]

    # ----- cases and plans -------------------------------------------------

    def put_case(self, case):
        return self._put("cases", case.case_id, ".json", serialize_case(case))

    def get_case(self, case_id):
        path = self._resolve("cases", case_id, ".json", "case")
        return parse_case(self._read(path))

    def put_plan(self, case_id, plan):
        return self._put("cases", f"{case_id}.plan", ".json", serialize_plan(plan))

    def get_plan(self, case_id):
        path = self._resolve("cases", f"{case_id}.plan", ".json", "plan")
        return parse_plan(self._read(path))

    def list_cases(self):
        ids = set()
        for name in sorted(os.listdir(os.path.join(self.root, "cases"))):
            if name.startswith(".tmp-") or not name.endswith(".json"):
                continue
            stem = name[:-len(".json")].rsplit("-", 1)[0]
            if not stem.endswith(".plan"):
                ids.add(stem)
        return sorted(ids)

    # ----- clouds ------------------------------------------------------------

    def put_cloud(self, cloud):
        return self._put("clouds", cloud.case_id, ".ply", cloud_to_ply(cloud))

    def get_cloud(self, case_id):
        path = self._resolve("clouds", case_id, ".ply", "cloud")
        return ply_to_cloud(self._read(path))

    def list_clouds(self):
        ids = set()
        for name in sorted(os.listdir(os.path.join(self.root, "clouds"))):
            if not name.startswith(".tmp-") and name.endswith(".ply"):
                ids.add(name[:-len(".ply")].rsplit("-", 1)[0])
        return sorted(ids)

    # ----- model checkpoints ---------------------------------------------------

    def put_checkpoint(self, name, blob: bytes):
        return self._put("models", name, ".ckpt", blob)

    def checkpoint_path(self, name="model"):
        return self._resolve("models", name, ".ckpt", "checkpoint")

    def read_checkpoint(self, name="model"):
        return self._read(self.checkpoint_path(name))

    def list_checkpoints(self):
        out = []
        for name in sorted(os.listdir(os.path.join(self.root, "models"))):
            if not name.startswith(".tmp-") and name.endswith(".ckpt"):
                out.append(os.path.join(self.root, "models", name))
        return out

    # ----- reports and histories ---------------------------------------------

    def put_report(self, case_id, report: dict):
        payload = json.dumps(report, sort_keys=True, indent=2).encode()
        return self._put("reports", case_id, ".json", payload)

    def get_report(self, case_id):
        path = self._resolve("reports", case_id, ".json", "report")
        return json.loads(self._read(path).decode())

    def put_history(self, name, records):
        lines = "\n".join(json.dumps(rec, sort_keys=True) for rec in records) + "\n"
        return self._put("history", name, ".jsonl", lines.encode())

    def get_history(self, name="model"):
        path = self._resolve("history", name, ".jsonl", "history")
        text = self._read(path).decode()
        return [json.loads(line) for line in text.splitlines() if line.strip()]
