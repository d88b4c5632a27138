"""Versioned on-disk cache for computed tables and sweeps.

Artifacts live under one directory as JSON files named by kind and key.
The key is a hash of everything the artifact depends on, and dependent
artifacts fold their upstream keys into their own payload, so
invalidating anything upstream (say, a different block-size schedule for
the crossing entropy) transitively renames every key downstream of it.
A stale entry is therefore simply never looked up again; nothing is
mutated in place.

Each artifact carries a sidecar recording the cache format version and
the full key payload.  A version mismatch on read raises instead of
silently reusing bytes written by an incompatible build.
"""

import hashlib
import json
import os
import tempfile

CACHE_VERSION = 1

EDGE_CONVENTION = "interface-edges-B-side"


class CacheVersionError(RuntimeError):
    """Stored artifact was written under a different cache format."""


def cache_key(kind: str, payload: dict) -> str:
    """Deterministic content key for an artifact of one kind."""
    canon = json.dumps({"kind": kind, "payload": payload}, sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()


def entropy_key(L_schedule, levels) -> str:
    return cache_key("entropy", {
        "L_schedule": [int(L) for L in L_schedule],
        "levels": int(levels),
        "rounding": "half-up-displacement",
    })


def interface_key(m_schedule, samples, seed, mu_grid=None, alpha=None,
                  beta=None) -> str:
    payload = {
        "m_schedule": [int(m) for m in m_schedule],
        "samples": int(samples),
        "seed": int(seed),
        "edge_convention": EDGE_CONVENTION,
    }
    if mu_grid is not None:
        payload["mu_grid"] = [float(m) for m in mu_grid]
    if alpha is not None:
        payload["alpha"] = float(alpha)
        payload["beta"] = float(beta)
    return cache_key("interface", payload)


def psi_key(alphas, betas, a_grid, m_schedule, samples, seed, L_schedule,
            levels, grid_nodes) -> str:
    """Pair-table key, folding in the upstream entropy and interface keys."""
    return cache_key("psi", {
        "alphas": [float(a) for a in alphas],
        "betas": [float(b) for b in betas],
        "a_grid": [float(a) for a in a_grid],
        "grid_nodes": int(grid_nodes),
        "entropy": entropy_key(L_schedule, levels),
        "interface": interface_key(m_schedule, samples, seed),
    })


def percolation_key(p_grid, length, samples, seed) -> str:
    return cache_key("perc", {
        "p_grid": [float(p) for p in p_grid],
        "length": int(length),
        "samples": int(samples),
        "seed": int(seed),
    })


class CacheStore:
    """One cache directory of JSON artifacts with version sidecars.

    Payload-style artifacts are written and read as dicts through
    ``write_payload``/``read_payload``.  Artifacts with their own
    serializers write to ``artifact_path`` and then ``register`` the
    sidecar; ``has`` validates the sidecar before the caller re-reads
    the file.
    """

    def __init__(self, root):
        self.root = str(root)
        os.makedirs(self.root, exist_ok=True)

    def artifact_path(self, kind: str, key: str) -> str:
        return os.path.join(self.root, f"{kind}-{key[:24]}.json")

    def _sidecar_path(self, kind: str, key: str) -> str:
        return os.path.join(self.root, f"{kind}-{key[:24]}.meta.json")

    def _check_sidecar(self, kind: str, key: str) -> bool:
        side = self._sidecar_path(kind, key)
        if not os.path.exists(side):
            return False
        with open(side) as fh:
            meta = json.load(fh)
        version = meta.get("cache_version")
        if version != CACHE_VERSION:
            raise CacheVersionError(
                f"cache entry {os.path.basename(side)} was written with "
                f"cache_version={version}, this build expects "
                f"{CACHE_VERSION}; refusing silent reuse (clear the cache "
                f"directory or point --cache-dir elsewhere)")
        if meta.get("key") != key:
            return False
        return True

    def has(self, kind: str, key: str) -> bool:
        return self._check_sidecar(kind, key) and \
            os.path.exists(self.artifact_path(kind, key))

    def register(self, kind: str, key: str, extra=None) -> None:
        meta = {"cache_version": CACHE_VERSION, "kind": kind, "key": key}
        meta.update(extra or {})
        _atomic_write_json(self._sidecar_path(kind, key), meta)

    def write_payload(self, kind: str, key: str, payload: dict) -> None:
        _atomic_write_json(self.artifact_path(kind, key),
                           {"cache_version": CACHE_VERSION, "kind": kind,
                            "key": key, "payload": payload})
        self.register(kind, key)

    def read_payload(self, kind: str, key: str):
        """Stored payload dict, or None when absent; raises on bad version."""
        if not self.has(kind, key):
            return None
        with open(self.artifact_path(kind, key)) as fh:
            wrapper = json.load(fh)
        if wrapper.get("cache_version") != CACHE_VERSION:
            raise CacheVersionError(
                f"artifact {kind}-{key[:24]} carries cache_version="
                f"{wrapper.get('cache_version')}, expected {CACHE_VERSION}")
        return wrapper["payload"]


def _atomic_write_json(path: str, payload) -> None:
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(payload, fh, sort_keys=True)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
