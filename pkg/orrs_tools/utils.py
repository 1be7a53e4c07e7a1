import hashlib
import json
import math

import numpy as np


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    elif isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    elif isinstance(obj, np.ndarray):
        return _to_jsonable(obj.tolist())
    elif isinstance(obj, (np.floating,)):
        return float(obj)
    elif isinstance(obj, (np.integer,)):
        return int(obj)
    elif isinstance(obj, (np.bool_,)):
        return bool(obj)
    elif isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def canonical_json(obj):
    """Sorted-key compact JSON; floats keep their shortest round-trip repr."""
    return json.dumps(_to_jsonable(obj), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def sha256_text(s):
    return hashlib.sha256(s.encode("utf-8")).hexdigest()


def canonical_hash(obj):
    return sha256_text(canonical_json(obj))


def file_sha256(path, chunk_size=1 << 16):
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(chunk_size), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_canonical_json(path, obj):
    with open(path, "w", encoding="utf-8") as f:
        f.write(canonical_json(obj))
        f.write("\n")


def read_json(path):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def substream(seed, *keys):
    """Independent generator for (seed, key...) so results do not depend on scheduling."""
    return np.random.default_rng([int(seed)] + [int(k) for k in keys])
