"""Binary cache for built matrices, plus a textual dump for small spaces.

Layout (all integers little-endian, fixed width):

    magic       4 bytes  "PBM1"
    model id    u16 length + utf-8 bytes
    space spec  u8 kind (0 plain, 1 truncated, 2 triangle) + 3 x u32
                (k,0,0 | k,i,j | L,focus,0)
    exponents   u8 width of the exponent tuples (2 per parameter)
    states      u64 state count
    pool        u64 poly count; per poly: u32 term count; per term:
                width x u16 exponents, u64 coefficient
    rows        u64 row count; per row: u32 entry count, then
                (u32 col, u32 poly id) pairs
"""

from __future__ import annotations

import struct
from typing import BinaryIO

import numpy as np

from .errors import UsageError
from .models import get_model
from .poly import PolyPool, TransitionPoly
from .spaces import SpaceSpec, enumerate_space
from .transition import BuildStats, MeanMatrix

MAGIC = b"PBM1"
_KINDS = {"plain": 0, "truncated": 1, "triangle": 2}
_KIND_NAMES = {v: k for k, v in _KINDS.items()}


def _spec_fields(spec: SpaceSpec):
    if spec.kind == "plain":
        return (spec.k, 0, 0)
    if spec.kind == "truncated":
        return (spec.k, spec.i, spec.j)
    return (spec.side, spec.focus, 0)


def write_cache(matrix: MeanMatrix, fh: BinaryIO) -> None:
    spec = matrix.space.spec
    fh.write(MAGIC)
    ident = matrix.model.ident.encode()
    fh.write(struct.pack("<H", len(ident)))
    fh.write(ident)
    fh.write(struct.pack("<BIII", _KINDS[spec.kind], *_spec_fields(spec)))
    width = 2 * matrix.model.arity
    fh.write(struct.pack("<B", width))
    fh.write(struct.pack("<Q", matrix.dimension))
    fh.write(struct.pack("<Q", len(matrix.pool)))
    for poly in matrix.pool:
        fh.write(struct.pack("<I", len(poly.terms)))
        for exps, coeff in sorted(poly.terms.items()):
            if coeff >= 1 << 64:
                raise UsageError("coefficient too large for the cache format")
            fh.write(struct.pack(f"<{width}HQ", *exps, coeff))
    fh.write(struct.pack("<Q", matrix.dimension))
    cols = matrix.cols.astype(np.uint32, copy=False)
    pids = matrix.pids.astype(np.uint32, copy=False)
    for i in range(matrix.dimension):
        a, b = int(matrix.indptr[i]), int(matrix.indptr[i + 1])
        fh.write(struct.pack("<I", b - a))
        if b > a:
            pairs = np.empty((b - a, 2), dtype="<u4")
            pairs[:, 0] = cols[a:b]
            pairs[:, 1] = pids[a:b]
            fh.write(pairs.tobytes())


def read_cache(fh: BinaryIO) -> MeanMatrix:
    if fh.read(4) != MAGIC:
        raise UsageError("not a matrix cache file (bad magic)")
    (idlen,) = struct.unpack("<H", fh.read(2))
    model = get_model(fh.read(idlen).decode())
    kind, f1, f2, f3 = struct.unpack("<BIII", fh.read(13))
    kind_name = _KIND_NAMES[kind]
    if kind_name == "plain":
        spec = SpaceSpec.plain(model, f1)
    elif kind_name == "truncated":
        spec = SpaceSpec.truncated(model, f1, f2, f3)
    else:
        spec = SpaceSpec.triangle(model, f1, f2)
    (width,) = struct.unpack("<B", fh.read(1))
    if width != 2 * model.arity:
        raise UsageError("exponent width does not match the model arity")
    (n_states,) = struct.unpack("<Q", fh.read(8))
    space = enumerate_space(spec)
    if len(space) != n_states:
        raise UsageError(
            f"cache holds {n_states} states but {spec.label()} has {len(space)}"
        )
    (n_polys,) = struct.unpack("<Q", fh.read(8))
    pool = PolyPool()
    for _ in range(n_polys):
        (n_terms,) = struct.unpack("<I", fh.read(4))
        terms = {}
        for _ in range(n_terms):
            row = struct.unpack(f"<{width}HQ", fh.read(2 * width + 8))
            terms[tuple(row[:-1])] = row[-1]
        pool.intern(TransitionPoly(model.arity, terms))
    if len(pool) != n_polys:
        raise UsageError("cache pool contains duplicate polynomials")
    (n_rows,) = struct.unpack("<Q", fh.read(8))
    if n_rows != n_states:
        raise UsageError("row count does not match state count")
    counts = np.zeros(n_rows, dtype=np.int64)
    col_parts, pid_parts = [], []
    for i in range(n_rows):
        (cnt,) = struct.unpack("<I", fh.read(4))
        counts[i] = cnt
        if cnt:
            pairs = np.frombuffer(fh.read(8 * cnt), dtype="<u4").reshape(cnt, 2)
            col_parts.append(pairs[:, 0].astype(np.int32))
            pid_parts.append(pairs[:, 1].astype(np.uint32))
    indptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    cols = np.concatenate(col_parts) if col_parts else np.empty(0, np.int32)
    pids = np.concatenate(pid_parts) if pid_parts else np.empty(0, np.uint32)
    stats = BuildStats(states=n_states, nnz=int(indptr[-1]),
                       distinct_polys=n_polys, build_seconds=0.0)
    return MeanMatrix(model, space, indptr, cols, pids, pool, stats)


def dump_text(matrix: MeanMatrix, max_states: int = 64) -> str:
    """Human-readable dump of a small matrix, one line per transition."""
    if matrix.dimension > max_states:
        raise UsageError(
            f"textual dump limited to {max_states} states; "
            f"{matrix.space.spec.label()} has {matrix.dimension}"
        )
    space = matrix.space
    lines = [
        f"# {matrix.model.ident} {space.spec.label()} "
        f"states={matrix.dimension} polys={len(matrix.pool)}"
    ]
    for i in range(matrix.dimension):
        for col, pid in matrix.row(i):
            lines.append(
                f"{space.render_state(i)} -> {space.render_state(col)} : "
                f"{matrix.pool[pid].render()}"
            )
    return "\n".join(lines) + "\n"
