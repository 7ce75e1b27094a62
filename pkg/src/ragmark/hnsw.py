"""In-process HNSW approximate nearest-neighbor index over float32 vectors.

Distance metric is squared L2. Construction follows the usual multi-layer
navigable-small-world scheme: each entry draws a level from a geometric
distribution (seeded, so builds are reproducible), is linked to at most
``max_neighbors`` diverse neighbors per layer (2x at layer 0), and search
greedily descends the layers before a beam search on the base layer.

Ties between equal distances are broken by the lower entry_id, which makes
top-K results deterministic under duplicate vectors. Snapshots use a
little-endian binary format with an ``RGMKHNSW`` magic header; a loaded index
is frozen (search-only): rebuild from the corpus to change it.

Internally entries live in insertion-order slots with a contiguous float64
working matrix, so the hot loops are single numpy calls over slot lists.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
import struct
from dataclasses import dataclass, field
from heapq import heappop, heappush
from pathlib import Path
from typing import Iterable

import numpy as np

SNAPSHOT_MAGIC = b"RGMKHNSW"
SNAPSHOT_VERSION = 1


class VectorIndexError(Exception):
    """Raised for vector-index contract violations."""


class SnapshotError(VectorIndexError):
    """Raised when an index snapshot cannot be read."""


@dataclass(frozen=True)
class HnswParams:
    """Graph hyperparameters. ``level_scale`` defaults to 1/ln(max_neighbors)."""

    max_neighbors: int = 16
    ef_construction: int = 200
    ef_search: int = 64
    level_scale: float | None = None
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.max_neighbors <= 0:
            raise ValueError("max_neighbors must be positive")
        if self.ef_construction < self.max_neighbors:
            raise ValueError("ef_construction must be >= max_neighbors")
        if self.ef_search <= 0:
            raise ValueError("ef_search must be positive")
        if self.level_scale is not None and self.level_scale <= 0:
            raise ValueError("level_scale must be positive")

    @property
    def scale(self) -> float:
        if self.level_scale is not None:
            return self.level_scale
        return 1.0 / math.log(self.max_neighbors)


@dataclass(frozen=True)
class VectorEntry:
    """An indexed vector plus an opaque payload (chunk reference)."""

    entry_id: int
    vector: np.ndarray
    payload: dict = field(default_factory=dict)


def as_vector(values, dim: int | None = None) -> np.ndarray:
    """Coerce to a finite float32 1-D vector, optionally checking dimension."""
    arr = np.asarray(values, dtype=np.float32)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector contains non-finite values")
    return arr


def squared_l2(a, b) -> float:
    """Sum of squared component differences between two equal-length vectors."""
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape:
        raise ValueError(f"dimension mismatch: {va.shape} vs {vb.shape}")
    diff = va - vb
    return float(np.dot(diff, diff))


class HnswIndex:
    """Seeded, deterministic HNSW index with squared-L2 distance."""

    def __init__(self, dim: int, params: HnswParams | None = None):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.params = params or HnswParams()
        self._m = self.params.max_neighbors
        self._m0 = 2 * self._m
        self._rng = random.Random(self.params.rng_seed)
        self._frozen = False

        self._ids: list[int] = []  # slot -> entry_id
        self._slot_of: dict[int, int] = {}  # entry_id -> slot
        self._payloads: list[dict] = []  # per slot
        self._levels: list[int] = []  # per slot
        self._links: list[list[list[int]]] = []  # slot -> layer -> neighbor slots
        self._vectors32 = np.zeros((0, dim), dtype=np.float32)
        self._work = np.zeros((0, dim), dtype=np.float64)
        self._capacity = 0
        self._entry_slot: int | None = None
        self._max_level = -1

    # -- basic accessors ----------------------------------------------------

    def __len__(self) -> int:
        return len(self._ids)

    @property
    def frozen(self) -> bool:
        return self._frozen

    def freeze(self) -> None:
        """Mark the index read-only; concurrent searches are safe afterwards."""
        self._frozen = True

    def payload(self, entry_id: int) -> dict:
        slot = self._slot_of.get(entry_id)
        if slot is None:
            raise VectorIndexError(f"unknown entry_id {entry_id}")
        return self._payloads[slot]

    def vector(self, entry_id: int) -> np.ndarray:
        slot = self._slot_of.get(entry_id)
        if slot is None:
            raise VectorIndexError(f"unknown entry_id {entry_id}")
        return self._vectors32[slot].copy()

    def entry_ids(self) -> list[int]:
        return list(self._ids)

    # -- construction -------------------------------------------------------

    def _grow(self, needed: int) -> None:
        if needed <= self._capacity:
            return
        new_cap = max(needed, max(64, int(self._capacity * 1.5)))
        grown32 = np.zeros((new_cap, self.dim), dtype=np.float32)
        grown32[: len(self._ids)] = self._vectors32[: len(self._ids)]
        self._vectors32 = grown32
        grown64 = np.zeros((new_cap, self.dim), dtype=np.float64)
        grown64[: len(self._ids)] = self._work[: len(self._ids)]
        self._work = grown64
        self._capacity = new_cap

    def _draw_level(self) -> int:
        u = 1.0 - self._rng.random()  # (0, 1], avoids log(0)
        return int(-math.log(u) * self.params.scale)

    def _distances(self, query: np.ndarray, slots: list[int]) -> np.ndarray:
        rows = self._work[slots]
        diff = rows - query
        return np.einsum("ij,ij->i", diff, diff)

    def insert(self, entry: VectorEntry) -> None:
        """Insert one entry; errors on duplicate id, dim mismatch, or frozen index."""
        if self._frozen:
            raise VectorIndexError("index is frozen; rebuild to add entries")
        if entry.entry_id in self._slot_of:
            raise VectorIndexError(f"duplicate entry_id {entry.entry_id}")
        vec = as_vector(entry.vector, self.dim)

        level = self._draw_level()
        slot = len(self._ids)
        self._grow(slot + 1)
        self._vectors32[slot] = vec
        self._work[slot] = vec.astype(np.float64)
        self._ids.append(entry.entry_id)
        self._slot_of[entry.entry_id] = slot
        self._payloads.append(dict(entry.payload))
        self._levels.append(level)
        self._links.append([[] for _ in range(level + 1)])

        if self._entry_slot is None:
            self._entry_slot = slot
            self._max_level = level
            return

        query = self._work[slot]
        current = [self._entry_slot]
        for layer in range(self._max_level, level, -1):
            current = [s for _, s in self._search_layer(query, current, layer, 1)]

        for layer in range(min(level, self._max_level), -1, -1):
            candidates = self._search_layer(
                query, current, layer, self.params.ef_construction
            )
            cap = self._m0 if layer == 0 else self._m
            neighbors = self._select_neighbors(candidates, cap)
            self._links[slot][layer] = list(neighbors)
            for nslot in neighbors:
                links = self._links[nslot][layer]
                links.append(slot)
                if len(links) > cap:
                    base = self._work[nslot]
                    scored = sorted(zip(self._distances(base, links).tolist(), links))
                    self._links[nslot][layer] = self._select_neighbors(scored, cap)
            # Seed the next layer with the full beam, not just the links.
            current = [s for _, s in candidates]

        if level > self._max_level:
            self._max_level = level
            self._entry_slot = slot

    def _select_neighbors(
        self, candidates: list[tuple[float, int]], cap: int
    ) -> list[int]:
        """Diversity-aware neighbor pick: keep candidates closer to the base
        than to any already-selected one. Pairwise candidate distances are
        computed in one shot so the greedy loop stays cheap.
        """
        ordered = sorted(candidates)
        if len(ordered) <= cap:
            return [s for _, s in ordered]
        slots = [s for _, s in ordered]
        base_dist = [d for d, _ in ordered]
        rows = self._work[slots]
        norms = np.einsum("ij,ij->i", rows, rows)
        pairwise = norms[:, None] + norms[None, :] - 2.0 * (rows @ rows.T)

        n = len(slots)
        min_to_selected = np.full(n, np.inf)
        selected: list[int] = []
        for j in range(n):
            if len(selected) >= cap:
                break
            if selected and base_dist[j] >= min_to_selected[j]:
                continue
            selected.append(j)
            np.minimum(min_to_selected, pairwise[j], out=min_to_selected)
        return [slots[j] for j in selected]

    def _search_layer(
        self, query: np.ndarray, entry_slots: list[int], layer: int, ef: int
    ) -> list[tuple[float, int]]:
        """Beam search on one layer; returns (distance, slot) ascending."""
        visited = bytearray(len(self._ids))
        for s in entry_slots:
            visited[s] = 1
        dists = self._distances(query, entry_slots).tolist()
        candidates: list[tuple[float, int]] = []  # min-heap
        best: list[tuple[float, int]] = []  # max-heap via negation
        for dist, slot in zip(dists, entry_slots):
            heappush(candidates, (dist, slot))
            heappush(best, (-dist, -slot))
            if len(best) > ef:
                heappop(best)

        while candidates:
            dist, slot = heappop(candidates)
            if len(best) >= ef and dist > -best[0][0]:
                break
            links = self._links[slot]
            if layer >= len(links):
                continue
            neighbors = [n for n in links[layer] if not visited[n]]
            if not neighbors:
                continue
            for n in neighbors:
                visited[n] = 1
            for ndist, nslot in zip(
                self._distances(query, neighbors).tolist(), neighbors
            ):
                if len(best) < ef or ndist < -best[0][0]:
                    heappush(candidates, (ndist, nslot))
                    heappush(best, (-ndist, -nslot))
                    if len(best) > ef:
                        heappop(best)

        out = [(-nd, -ns) for nd, ns in best]
        out.sort()
        return out

    # -- search ---------------------------------------------------------------

    def search(self, query, k: int) -> list[tuple[int, float]]:
        """Return up to k (entry_id, squared-L2 distance) pairs, ascending by
        distance with ties broken by lower entry_id."""
        if k <= 0:
            raise VectorIndexError("k must be positive")
        if not self._ids:
            raise VectorIndexError("search on empty index")
        qvec = as_vector(query, self.dim).astype(np.float64)

        ef = max(self.params.ef_search, k)
        current = [self._entry_slot]
        for layer in range(self._max_level, 0, -1):
            current = [s for _, s in self._search_layer(qvec, current, layer, 1)]
        results = self._search_layer(qvec, current, 0, ef)
        scored = sorted(
            ((float(dist), self._ids[slot]) for dist, slot in results),
            key=lambda t: (t[0], t[1]),
        )
        return [(eid, dist) for dist, eid in scored[:k]]

    # -- structure hash and snapshots -------------------------------------------

    def structure_hash(self) -> str:
        """SHA-256 over the graph topology (levels, links, entry point)."""
        doc = {
            "dim": self.dim,
            "m": self._m,
            "entry_point": None
            if self._entry_slot is None
            else self._ids[self._entry_slot],
            "max_level": self._max_level,
            "nodes": sorted(
                (
                    eid,
                    self._levels[slot],
                    [[self._ids[n] for n in layer] for layer in self._links[slot]],
                )
                for eid, slot in self._slot_of.items()
            ),
        }
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def save(self, path: Path | str) -> None:
        """Write a versioned binary snapshot (deterministic byte layout)."""
        path = Path(path)
        buf = bytearray()
        buf += SNAPSHOT_MAGIC
        buf += struct.pack(
            "<IIIIIdqqi",
            SNAPSHOT_VERSION,
            self.dim,
            self._m,
            self.params.ef_construction,
            self.params.ef_search,
            self.params.scale,
            self.params.rng_seed,
            -1 if self._entry_slot is None else self._ids[self._entry_slot],
            self._max_level,
        )
        buf += struct.pack("<Q", len(self._ids))
        for eid in sorted(self._slot_of):
            slot = self._slot_of[eid]
            payload = json.dumps(
                self._payloads[slot], sort_keys=True, ensure_ascii=False,
                separators=(",", ":"),
            ).encode("utf-8")
            buf += struct.pack("<qiI", eid, self._levels[slot], len(payload))
            buf += payload
            buf += self._vectors32[slot].tobytes()
            layers = self._links[slot]
            buf += struct.pack("<I", len(layers))
            for links in layers:
                ids = [self._ids[n] for n in links]
                buf += struct.pack("<I", len(ids))
                buf += struct.pack(f"<{len(ids)}q", *ids) if ids else b""
        path.write_bytes(bytes(buf))

    @classmethod
    def load(cls, path: Path | str) -> "HnswIndex":
        """Read a snapshot; the returned index is frozen (search-only)."""
        data = Path(path).read_bytes()
        if data[:8] != SNAPSHOT_MAGIC:
            raise SnapshotError(f"bad magic in {path}")
        off = 8
        header = struct.Struct("<IIIIIdqqi")
        (
            version,
            dim,
            m,
            ef_construction,
            ef_search,
            scale,
            seed,
            entry_point,
            max_level,
        ) = header.unpack_from(data, off)
        off += header.size
        if version != SNAPSHOT_VERSION:
            raise SnapshotError(f"unsupported snapshot version {version}")
        (count,) = struct.unpack_from("<Q", data, off)
        off += 8

        index = cls(
            dim,
            HnswParams(
                max_neighbors=m,
                ef_construction=ef_construction,
                ef_search=ef_search,
                level_scale=scale,
                rng_seed=seed,
            ),
        )
        index._grow(count)
        raw_links: list[list[list[int]]] = []
        for _ in range(count):
            eid, level, payload_len = struct.unpack_from("<qiI", data, off)
            off += struct.calcsize("<qiI")
            payload = json.loads(data[off : off + payload_len].decode("utf-8"))
            off += payload_len
            vec = np.frombuffer(data, dtype=np.float32, count=dim, offset=off).copy()
            off += dim * 4
            (n_layers,) = struct.unpack_from("<I", data, off)
            off += 4
            layers: list[list[int]] = []
            for _layer in range(n_layers):
                (n_links,) = struct.unpack_from("<I", data, off)
                off += 4
                layers.append(
                    list(struct.unpack_from(f"<{n_links}q", data, off))
                    if n_links
                    else []
                )
                off += 8 * n_links
            slot = len(index._ids)
            index._vectors32[slot] = vec
            index._work[slot] = vec.astype(np.float64)
            index._ids.append(eid)
            index._slot_of[eid] = slot
            index._payloads.append(payload)
            index._levels.append(level)
            raw_links.append(layers)
        # Entry-id links -> slot links now that every id is known.
        index._links = [
            [[index._slot_of[eid] for eid in layer] for layer in layers]
            for layers in raw_links
        ]
        index._entry_slot = (
            None if entry_point < 0 else index._slot_of[entry_point]
        )
        index._max_level = max_level
        index._frozen = True
        return index


def exhaustive_search(
    entries: Iterable[tuple[int, np.ndarray]], query, k: int
) -> list[tuple[int, float]]:
    """Brute-force top-k by squared L2, with the same entry-id tie break.

    Independent of the graph index; used as the retrieval oracle.
    """
    scored = sorted(
        ((squared_l2(vec, query), eid) for eid, vec in entries),
        key=lambda t: (t[0], t[1]),
    )
    return [(eid, dist) for dist, eid in scored[:k]]
