"""JSON artifact files with provenance and a content hash."""
from dataclasses import asdict, dataclass, field
import hashlib
import json
import os
import tempfile

from .errors import InvalidParameterError

FORMAT_VERSION = 1


@dataclass
class RunConfig:
    """Everything needed to reproduce a run; embedded verbatim in its outputs."""

    command: str
    matrix_source: str = ""
    lam: str = ""
    scale: int = 7
    d: int = 0
    n_pairs: int = 0
    budget: float = 0.0
    outputs: list = field(default_factory=list)
    jobs: int = 1
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def content_hash(payload):
    return "sha256:" + hashlib.sha256(canonical_json(payload).encode()).hexdigest()


def wrap(kind, payload, config=None):
    """Attach kind, format version, provenance and the payload hash."""
    return {
        "kind": kind,
        "format": FORMAT_VERSION,
        "config": config.to_dict() if isinstance(config, RunConfig) else (config or {}),
        "payload": payload,
        "hash": content_hash(payload),
    }


def unwrap(doc, kind=None, check_hash=True):
    if not isinstance(doc, dict) or "payload" not in doc:
        raise InvalidParameterError("not an artifact document")
    if doc.get("format") != FORMAT_VERSION:
        raise InvalidParameterError(f"unsupported artifact format {doc.get('format')!r}")
    if kind is not None and doc.get("kind") != kind:
        raise InvalidParameterError(f"expected a {kind!r} artifact, got {doc.get('kind')!r}")
    if check_hash and doc.get("hash") != content_hash(doc["payload"]):
        raise InvalidParameterError("artifact hash does not match its payload")
    return doc["payload"]


def write_json(path, doc):
    """Write atomically: temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)  # mkstemp creates 0600
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_json(path):
    with open(path) as fh:
        return json.load(fh)
