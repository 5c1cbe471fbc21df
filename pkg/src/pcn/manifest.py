"""Run manifests: enough recorded state to replay a CLI run byte-for-byte."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

from .errors import ParseError

FORMAT_MANIFEST = "pcn-manifest/1"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    options: dict
    seed: int | None
    inputs: dict
    version: str
    duration_s: float
    created_utc: str

    def to_json(self) -> str:
        doc = {"format": FORMAT_MANIFEST, **asdict(self)}
        return json.dumps(doc, indent=1, sort_keys=True)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json() + "\n")

    @staticmethod
    def from_json(text: str) -> "RunManifest":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad manifest JSON: {exc}") from None
        if not isinstance(doc, dict) or doc.get("format") != FORMAT_MANIFEST:
            raise ParseError(f"not a run manifest (format={doc.get('format')!r})")
        try:
            return RunManifest(
                command=doc["command"],
                options=dict(doc["options"]),
                seed=doc["seed"],
                inputs=dict(doc["inputs"]),
                version=doc["version"],
                duration_s=float(doc["duration_s"]),
                created_utc=doc["created_utc"],
            )
        except KeyError as exc:
            raise ParseError(f"manifest missing field {exc}") from None

    @staticmethod
    def load(path) -> "RunManifest":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                return RunManifest.from_json(fh.read())
        except OSError as exc:
            raise ParseError(f"cannot read manifest {path}: {exc.strerror}") from None
