import json
from typing import Any
from uuid import uuid4

from cryptography.hazmat.primitives import hashes

FINGERPRINT_LENGTH = 16


def get_uuid() -> str:
    return str(uuid4())


def canonical_json(payload: Any) -> str:
    """Sorted keys, no whitespace: equal payloads give equal bytes."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=True)


def fingerprint(payload: Any) -> str:
    """First 16 hex characters of SHA-256 over the canonical JSON of ``payload``."""
    digest = hashes.Hash(hashes.SHA256())
    digest.update(canonical_json(payload).encode("utf-8"))
    return digest.finalize().hex()[:FINGERPRINT_LENGTH]
