"""Symmetry-reduced storage of the full element tensor up to a basis cutoff.

Only canonical keys (smallest member of the 8-fold symmetry orbit) with a
nonzero value are kept.  Parity zeros are re-derived on lookup.

Binary layout (little-endian)::

    b"OSCV"                    magic
    u16                        format version
    u8  u32                    cutoff mode (0 = per-axis, 1 = shell), cutoff value
    f64                        oscillator length a
    u8                         backend (0 = exact, 1 = float)
    u64                        element count
    count * (12 x u8, f64)     n1x n1y n1z n2x ... n4z, value
    32 bytes                   SHA-256 of everything above
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import struct
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

from .closed_form import ElementValue, ScaleLike, as_scale, check_backend, element_direct
from .core import (
    KeyLike,
    QuantumTriple,
    as_flat,
    axis_parity,
    canonical_flat,
)
from .recurrence import build_family, family_signature

MAGIC = b"OSCV"
FORMAT_VERSION = 1
CUTOFF_MODES = ("axis", "shell")
STRATEGIES = ("direct", "recurrence")
FORMATS = ("binary", "json", "csv")
INDEX_COLUMNS = [f"n{j}{ax}" for j in range(1, 5) for ax in "xyz"]

_HEADER = struct.Struct("<4sHBIdBQ")
_RECORD = struct.Struct("<12Bd")
_DIGEST_SIZE = 32


class TensorFileError(ValueError):
    """Unreadable, truncated, corrupted or version-mismatched tensor file."""


class OutOfCutoffError(KeyError):
    pass


class TensorTooLargeError(MemoryError):
    def __init__(self, count: int, limit: int):
        super().__init__(f"{count} canonical keys exceed the limit of {limit}")
        self.count = count
        self.limit = limit


@dataclass(frozen=True)
class BasisCutoff:
    """``axis``: every component ``<= value``; ``shell``: ``nx + ny + nz <= value``."""

    value: int
    mode: str = "shell"

    def __post_init__(self):
        if self.mode not in CUTOFF_MODES:
            raise ValueError(f"cutoff mode must be one of {CUTOFF_MODES}")
        if not isinstance(self.value, int) or self.value < 0:
            raise ValueError("cutoff must be a non-negative integer")
        if self.max_index > 255:
            raise ValueError("quantum numbers above 255 cannot be stored")

    @property
    def max_index(self) -> int:
        return self.value

    def contains(self, state: Sequence[int]) -> bool:
        if self.mode == "axis":
            return max(state) <= self.value
        return sum(state) <= self.value

    def basis(self) -> List[QuantumTriple]:
        """Single-particle states ordered by ``(nx+ny+nz, nx, ny, nz)``."""
        n = self.value
        states = [
            QuantumTriple(x, y, z)
            for x in range(n + 1) for y in range(n + 1) for z in range(n + 1)
            if self.contains((x, y, z))
        ]
        return sorted(states, key=lambda s: (s.total, s.nx, s.ny, s.nz))


def estimate_key_count(cutoff: BasisCutoff) -> int:
    """Number of symmetry orbits of index quadruples (zeros included).

    Burnside count over the order-8 symmetry group acting on ``B**4`` keys.
    """
    b = len(cutoff.basis())
    return (b ** 4 + 2 * b ** 3 + 3 * b ** 2 + 2 * b) // 8


def canonical_keys(cutoff: BasisCutoff) -> Iterator[Tuple[int, ...]]:
    """Canonical keys allowed by the parity rule, in lexicographic order."""
    basis = sorted(tuple(s) for s in cutoff.basis())
    for s1 in basis:
        for s2 in basis:
            for s3 in basis:
                for s4 in basis:
                    flat = s1 + s2 + s3 + s4
                    if (axis_parity(flat, 0) is None or axis_parity(flat, 1) is None
                            or axis_parity(flat, 2) is None):
                        continue
                    if canonical_flat(flat) == flat:
                        yield flat


@dataclass
class TensorStore:
    cutoff: BasisCutoff
    a: float
    backend: str
    elements: Dict[Tuple[int, ...], float] = field(default_factory=dict)

    def __post_init__(self):
        self.elements = dict(sorted(self.elements.items()))

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def count(self) -> int:
        return len(self.elements)

    def lookup(self, key: KeyLike) -> ElementValue:
        """Value of any in-cutoff key; parity-forbidden or unstored keys give 0."""
        flat = as_flat(key)
        for j in range(4):
            if not self.cutoff.contains(flat[3 * j:3 * j + 3]):
                raise OutOfCutoffError(f"key {flat} lies outside cutoff {self.cutoff}")
        value = self.elements.get(canonical_flat(flat), 0.0)
        return ElementValue(value, self.backend, self.a)

    def to_bytes(self) -> bytes:
        body = _body_bytes(self)
        return body + hashlib.sha256(body).digest()

    @property
    def digest(self) -> str:
        return hashlib.sha256(_body_bytes(self)).hexdigest()


def _mode_tag(mode: str) -> int:
    return CUTOFF_MODES.index(mode)


def _body_bytes(store: TensorStore) -> bytes:
    out = io.BytesIO()
    out.write(_HEADER.pack(
        MAGIC, FORMAT_VERSION, _mode_tag(store.cutoff.mode), store.cutoff.value,
        store.a, ("exact", "float").index(store.backend), len(store.elements),
    ))
    for key, value in store.elements.items():
        out.write(_RECORD.pack(*key, value))
    return out.getvalue()


# ---------------------------------------------------------------------------
# building


def _shard_of(key: Tuple[int, ...], workers: int) -> int:
    return zlib.crc32(bytes(key)) % workers


def _evaluate_shard(args) -> Dict[Tuple[int, ...], float]:
    keys, a, strategy, backend, max_index = args
    out: Dict[Tuple[int, ...], float] = {}
    if strategy == "direct":
        for key in keys:
            try:
                value = element_direct(key, a, backend).value
            except Exception as exc:
                raise RuntimeError(f"evaluation failed for key {key}: {exc}") from exc
            if value != 0.0:
                out[key] = value
        return out
    families: Dict[Tuple[int, ...], List[Tuple[Tuple[int, ...], int, int]]] = {}
    for key in keys:
        base, lo, hi = family_signature(key, "x", "14")
        families.setdefault(base, []).append((key, lo, hi))
    for base, members in families.items():
        # n_max fixed by the cutoff so results do not depend on how keys are grouped
        frontier = build_family("x", "14", max_index, base, a, backend)
        for key, lo, hi in members:
            value = frontier.value(lo, hi).value
            if value != 0.0:
                out[key] = value
    return out


def build_tensor(
    cutoff: BasisCutoff,
    scale: ScaleLike = 1.0,
    strategy: str = "direct",
    backend: str = "exact",
    workers: int = 1,
    max_keys: int = 5_000_000,
) -> TensorStore:
    """Evaluate every canonical nonzero element within ``cutoff``.

    Keys are sharded by CRC-32 of their index bytes; each shard is evaluated
    independently and the merge is sorted, so the result does not depend on
    ``workers``.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}")
    check_backend(backend)
    a = as_scale(scale).a
    estimate = estimate_key_count(cutoff)
    if estimate > max_keys:
        raise TensorTooLargeError(estimate, max_keys)
    workers = max(1, int(workers))
    shards: List[List[Tuple[int, ...]]] = [[] for _ in range(workers)]
    for key in canonical_keys(cutoff):
        shards[_shard_of(key, workers)].append(key)
    jobs = [(shard, a, strategy, backend, cutoff.max_index) for shard in shards]
    if workers == 1:
        parts = [_evaluate_shard(jobs[0])]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_evaluate_shard, jobs))
    merged: Dict[Tuple[int, ...], float] = {}
    for part in parts:
        merged.update(part)
    return TensorStore(cutoff, a, backend, merged)


def lookup(store: TensorStore, key: KeyLike) -> ElementValue:
    return store.lookup(key)


# ---------------------------------------------------------------------------
# serialisation


def _format_value(value: float) -> str:
    return format(value, ".17g")


def _header_dict(store: TensorStore) -> dict:
    return {
        "format": MAGIC.decode(),
        "version": FORMAT_VERSION,
        "cutoff": {"mode": store.cutoff.mode, "value": store.cutoff.value},
        "a": store.a,
        "backend": store.backend,
        "count": store.count,
        "digest": store.digest,
    }


def _check_header(header: dict) -> None:
    if header.get("format") != MAGIC.decode():
        raise TensorFileError("not a tensor file")
    if header.get("version") != FORMAT_VERSION:
        raise TensorFileError(f"unsupported format version {header.get('version')}")


def _verified(store: TensorStore, header: dict) -> TensorStore:
    if store.count != header["count"]:
        raise TensorFileError(f"expected {header['count']} elements, found {store.count}")
    if store.digest != header["digest"]:
        raise TensorFileError("content digest mismatch")
    return store


def export(store: TensorStore, fmt: str, path: Union[str, Path]) -> None:
    path = Path(path)
    if fmt == "binary":
        path.write_bytes(store.to_bytes())
    elif fmt == "json":
        doc = {
            "header": _header_dict(store),
            "elements": [
                {"key": list(key), "value": _format_value(v)} for key, v in store.elements.items()
            ],
        }
        path.write_text(json.dumps(doc, indent=1) + "\n")
    elif fmt == "csv":
        with path.open("w", newline="") as fh:
            header = _header_dict(store)
            for name in ("format", "version", "a", "backend", "count", "digest"):
                fh.write(f"# {name}={header[name]}\n")
            fh.write(f"# cutoff={store.cutoff.mode}:{store.cutoff.value}\n")
            writer = csv.writer(fh)
            writer.writerow(INDEX_COLUMNS + ["value"])
            for key, v in store.elements.items():
                writer.writerow(list(key) + [_format_value(v)])
    else:
        raise ValueError(f"format must be one of {FORMATS}")


def from_bytes(data: bytes) -> TensorStore:
    if len(data) < _HEADER.size + _DIGEST_SIZE:
        raise TensorFileError("file too short for a tensor header")
    body, digest = data[:-_DIGEST_SIZE], data[-_DIGEST_SIZE:]
    if data[:4] != MAGIC:
        raise TensorFileError("bad magic bytes")
    if hashlib.sha256(body).digest() != digest:
        raise TensorFileError("content digest mismatch (corrupted or truncated file)")
    magic, version, mode, value, a, backend, count = _HEADER.unpack_from(body)
    if version != FORMAT_VERSION:
        raise TensorFileError(f"unsupported format version {version}")
    if len(body) != _HEADER.size + count * _RECORD.size:
        raise TensorFileError("record count does not match file length")
    elements = {}
    for off in range(_HEADER.size, len(body), _RECORD.size):
        rec = _RECORD.unpack_from(body, off)
        elements[tuple(rec[:12])] = rec[12]
    return TensorStore(BasisCutoff(value, CUTOFF_MODES[mode]), a, ("exact", "float")[backend], elements)


def import_store(path: Union[str, Path], fmt: Optional[str] = None) -> TensorStore:
    """Read a tensor written by :func:`export`; the format is sniffed if not given."""
    path = Path(path)
    data = path.read_bytes()
    if fmt is None:
        if data[:4] == MAGIC:
            fmt = "binary"
        elif data.lstrip()[:1] == b"{":
            fmt = "json"
        else:
            fmt = "csv"
    if fmt == "binary":
        return from_bytes(data)
    try:
        text = data.decode()
    except UnicodeDecodeError as exc:
        raise TensorFileError("tensor text file is not valid UTF-8") from exc
    if fmt == "json":
        try:
            doc = json.loads(text)
            header = doc["header"]
            _check_header(header)
            cutoff = BasisCutoff(header["cutoff"]["value"], header["cutoff"]["mode"])
            elements = {tuple(e["key"]): float(e["value"]) for e in doc["elements"]}
            store = TensorStore(cutoff, float(header["a"]), header["backend"], elements)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, TensorFileError):
                raise
            raise TensorFileError(f"malformed JSON tensor: {exc}") from exc
        return _verified(store, header)
    if fmt == "csv":
        meta = {}
        rows = []
        try:
            lines = text.splitlines()
            body = []
            for line in lines:
                if line.startswith("# "):
                    name, _, val = line[2:].partition("=")
                    meta[name] = val
                else:
                    body.append(line)
            reader = csv.reader(body)
            if next(reader) != INDEX_COLUMNS + ["value"]:
                raise TensorFileError("unexpected CSV header row")
            for row in reader:
                if row:
                    rows.append((tuple(int(x) for x in row[:12]), float(row[12])))
            mode, _, value = meta["cutoff"].partition(":")
            header = {
                "format": meta["format"], "version": int(meta["version"]),
                "count": int(meta["count"]), "digest": meta["digest"],
            }
            _check_header(header)
            store = TensorStore(BasisCutoff(int(value), mode), float(meta["a"]), meta["backend"], dict(rows))
        except TensorFileError:
            raise
        except (KeyError, ValueError, IndexError, StopIteration) as exc:
            raise TensorFileError(f"malformed CSV tensor: {exc}") from exc
        return _verified(store, header)
    raise ValueError(f"format must be one of {FORMATS}")
