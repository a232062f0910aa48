"""Symbolic mean matrix of the window automaton.

Row i of the matrix holds, for every child state j, the expected number
of type-j children of state i as a polynomial in the parameters.  A
child in direction d exists when the root's d-successor is infected from
the root via a good edge; conditional on the parent state, the child's
root is then occupied and every other child slot is occupied or vacant
independently, because distinct successor slots depend on disjoint
randomness (each edge feeds exactly one successor; each site is its own
coin).  The expected count is therefore a sum over directions of

    existence_factor * prod(per-slot factor)

expanded over all bit assignments of the live slots.  Expectation
additivity over directions needs no independence between siblings.

Internally every factor is a product of a handful of atom polynomials
(p, q, 1-q^2, ... per model), so a child pattern's polynomial is encoded
as a packed vector of atom exponents.  Patterns are enumerated with
vectorized doubling, truncation merges are applied analytically (the two
patterns differing in the last bit sum to the factor-free prefix), and
only the distinct exponent vectors are ever expanded into canonical
polynomials and interned.
"""

from __future__ import annotations

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import InternalInvariantError, MemoryBudgetError, UsageError
from .models import (
    Inhomogeneity,
    ModelSpec,
    VariantTag,
    WindowGeometry,
    child_tag,
    param_index,
)
from .poly import PolyPool, TransitionPoly
from .spaces import StateSpace

_FIELD_BITS = 8
_FIELD_MASK = (1 << _FIELD_BITS) - 1


class AtomSystem:
    """Per-model alphabet of factor polynomials with packed exponents.

    Every slot or existence factor is a product of atoms; a packed key is
    the exponent vector, one byte per atom.  Only distinct keys are ever
    expanded to canonical polynomials.
    """

    def __init__(self, model: ModelSpec):
        self.arity = model.arity
        a = model.arity
        p = lambda i: TransitionPoly.var_p(a, i)
        q = lambda i: TransitionPoly.var_q(a, i)
        if a == 1:
            # p, q, 1-q^2, 1-q^3
            self.atoms = [p(0), q(0), _one_minus(q(0) * q(0)),
                          _one_minus(q(0) * q(0) * q(0))]
        else:
            # p1, q1, p2, q2, 1-q1*q2
            self.atoms = [p(0), q(0), p(1), q(1), _one_minus(q(0) * q(1))]
        self.n_atoms = len(self.atoms)
        self._expanded: Dict[int, TransitionPoly] = {}

    def pack(self, *exps: int) -> int:
        key = 0
        for idx, e in enumerate(exps):
            if e:
                if e > _FIELD_MASK:
                    raise InternalInvariantError("atom exponent overflow")
                key |= e << (_FIELD_BITS * idx)
        return key

    def field(self, idx: int, e: int = 1) -> int:
        return e << (_FIELD_BITS * idx)

    def unpack(self, key: int) -> Tuple[int, ...]:
        return tuple((key >> (_FIELD_BITS * i)) & _FIELD_MASK for i in range(self.n_atoms))

    def expand(self, key: int) -> TransitionPoly:
        poly = self._expanded.get(key)
        if poly is None:
            poly = TransitionPoly.one(self.arity)
            for atom, e in zip(self.atoms, self.unpack(key)):
                if e:
                    poly = poly * atom ** e
            self._expanded[key] = poly
        return poly


def _one_minus(qprod: TransitionPoly) -> TransitionPoly:
    """1 - prod(q_i^e_i), expanded with nonnegative coefficients.

    Expands prod (p_i + q_i)^e_i and removes the all-closed monomial, so
    the result is the sum over configurations with at least one open
    variable and the basis nonnegativity is preserved.
    """
    arity = qprod.arity
    (exps, coeff), = qprod.terms.items()
    assert coeff == 1
    total = TransitionPoly.one(arity)
    for param in range(arity):
        e = exps[2 * param + 1]
        if e:
            pq = TransitionPoly.var_p(arity, param) + TransitionPoly.var_q(arity, param)
            total = total * pq ** e
    return _subtract_monomial(total, exps)


def _subtract_monomial(poly: TransitionPoly, exps) -> TransitionPoly:
    terms = dict(poly.terms)
    exps = tuple(exps)
    terms[exps] = terms.get(exps, 0) - 1
    if terms[exps] == 0:
        del terms[exps]
    if any(c < 0 for c in terms.values()):
        raise InternalInvariantError("negative coefficient in 1-q^c expansion")
    return TransitionPoly(poly.arity, terms)


# ---------------------------------------------------------------------------
# Child laws
# ---------------------------------------------------------------------------


@dataclass
class _RawLaw:
    """Factorized child law with packed atom exponents."""

    direction: int
    exists: bool
    ekey: int = 0
    base_raw: int = 0  # child pattern with root bit set, live slots 0
    live: List[Tuple[int, int, int]] = field(default_factory=list)  # (slot, d1, d0)
    dead: List[int] = field(default_factory=list)


def _slot_param(model: ModelSpec, tag: Optional[VariantTag], offset) -> int:
    """0-based parameter index of a site at a lattice offset."""
    if not model.tagged:
        return 0
    return param_index(model, tag, offset) - 1


def _raw_law(
    model: ModelSpec,
    geom: WindowGeometry,
    atoms: AtomSystem,
    bits: int,
    tag: Optional[VariantTag],
    direction: int,
) -> _RawLaw:
    n = geom.n_slots
    occupied = lambda slot: (bits >> (n - 1 - slot)) & 1
    window = geom.child_windows[direction]
    target = window[geom.root_slot]
    law = _RawLaw(direction=direction, exists=True,
                  base_raw=1 << (n - 1 - geom.root_slot))

    # Existence: the root's infection of the target must be realized and
    # not preempted by a higher-priority occupied route.
    ekey = 0
    site = model.is_site
    for w, d in geom.in_neighbors[target]:
        if d == direction:
            if w != geom.root_slot:
                raise InternalInvariantError("child target not fed by the root slot")
            break
        if occupied(w):
            if site:
                law.exists = False
                return law
            ekey += atoms.field(2 * geom.edge_param(d) - 1)  # blocking edge closed
    else:
        raise InternalInvariantError("root slot does not feed the child target")
    if site:
        ekey += atoms.field(2 * _slot_param(model, tag, geom.successor_offsets[target]))
    else:
        ekey += atoms.field(2 * (geom.edge_param(direction) - 1))
    law.ekey = ekey

    # Per-slot factors for the other child slots.
    for child_slot in range(n):
        if child_slot == geom.root_slot:
            continue
        u = window[child_slot]
        occ_in = [(w, d) for (w, d) in geom.in_neighbors[u] if occupied(w)]
        if not occ_in:
            law.dead.append(child_slot)
            continue
        if site:
            pi = _slot_param(model, tag, geom.successor_offsets[u])
            d1 = atoms.field(2 * pi)
            d0 = atoms.field(2 * pi + 1)
        elif model.arity == 1:
            c = len(occ_in)
            if c == 1:
                d1 = atoms.field(0)
            elif c == 2:
                d1 = atoms.field(2)
            elif c == 3:
                d1 = atoms.field(3)
            else:
                raise InternalInvariantError("in-degree above 3")
            d0 = atoms.field(1, c)
        else:
            params = sorted({geom.edge_param(d) - 1 for (w, d) in occ_in})
            if len(occ_in) != len(params):
                raise InternalInvariantError("duplicate edge param in window in-edges")
            if params == [0]:
                d1, d0 = atoms.field(0), atoms.field(1)
            elif params == [1]:
                d1, d0 = atoms.field(2), atoms.field(3)
            else:
                d1 = atoms.field(4)
                d0 = atoms.field(1) + atoms.field(3)
        law.live.append((child_slot, d1, d0))
    return law


@dataclass
class ChildLaw:
    """Public view of one direction's offspring law.

    ``existence_poly`` is the probability that the child exists (zero if
    a higher-priority occupied route always preempts it).  For every
    non-root child slot, ``slot_polys`` holds the pair
    (P(bit=1), P(bit=0)); the pair sums to one, and slots with no
    occupied in-neighbor have P(bit=1) = 0.
    """

    direction: int
    existence_poly: TransitionPoly
    slot_polys: Dict[int, Tuple[TransitionPoly, TransitionPoly]]

    def pattern_polys(self, root_slot: int, n_slots: int) -> Dict[int, TransitionPoly]:
        """Expected-count polynomial per raw child pattern (small windows)."""
        if n_slots > 16:
            raise UsageError("pattern expansion is limited to small windows")
        out: Dict[int, TransitionPoly] = {}
        if self.existence_poly.is_zero():
            return out
        live = [s for s, (p1, _) in self.slot_polys.items() if not p1.is_zero()]
        base = 1 << (n_slots - 1 - root_slot)
        for m in range(1 << len(live)):
            poly = self.existence_poly
            raw = base
            for t, s in enumerate(live):
                p1, p0 = self.slot_polys[s]
                if (m >> t) & 1:
                    poly = poly * p1
                    raw |= 1 << (n_slots - 1 - s)
                else:
                    poly = poly * p0
            out[raw] = poly
        return out


def child_law(
    model: ModelSpec,
    geometry: WindowGeometry,
    space: StateSpace,
    state: int,
    direction: int,
    tag: Optional[VariantTag] = None,
) -> ChildLaw:
    """The offspring law of ``state`` in one direction."""
    if direction >= geometry.n_directions:
        raise UsageError(f"direction {direction} invalid for this geometry")
    atoms = AtomSystem(model)
    law = _raw_law(model, geometry, atoms, state, tag, direction)
    arity = model.arity
    if not law.exists:
        return ChildLaw(direction, TransitionPoly.zero(arity), {})
    slot_polys: Dict[int, Tuple[TransitionPoly, TransitionPoly]] = {}
    for slot in law.dead:
        slot_polys[slot] = (TransitionPoly.zero(arity), TransitionPoly.one(arity))
    for slot, d1, d0 in law.live:
        slot_polys[slot] = (atoms.expand(d1), atoms.expand(d0))
    return ChildLaw(direction, atoms.expand(law.ekey), slot_polys)


# ---------------------------------------------------------------------------
# Matrix build
# ---------------------------------------------------------------------------


class _ComboRegistry:
    """Synthetic keys for sums of single factor keys (column collisions)."""

    def __init__(self):
        self._lock = threading.Lock()
        self._by_combo: Dict[tuple, int] = {}
        self.combos: List[tuple] = []

    def lookup(self, combo: tuple) -> int:
        syn = self._by_combo.get(combo)
        if syn is None:
            with self._lock:
                syn = self._by_combo.get(combo)
                if syn is None:
                    self.combos.append(combo)
                    syn = -len(self.combos)
                    self._by_combo[combo] = syn
        return syn


def _expand_direction(
    space: StateSpace,
    law: _RawLaw,
    tag_block: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """Enumerate all child patterns of one direction as (cols, keys).

    Truncation is folded in analytically: when the last window slot is
    live and the pattern ending in 1 is not a member, its mass merges
    with the ending-0 sibling and the merged polynomial is simply the
    prefix product, because the two slot factors sum to one.  Each
    emitted column is distinct within a direction.
    """
    n = space.n_slots
    truncating = space.spec.kind == "truncated"
    live = law.live
    last = None
    if truncating and live and live[-1][0] == n - 1:
        live, last = live[:-1], live[-1]

    keys = np.array([law.ekey], dtype=np.int64)
    raws = np.array([law.base_raw], dtype=np.int64)
    for slot, d1, d0 in live:
        bit = 1 << (n - 1 - slot)
        keys = np.concatenate([keys + d0, keys + d1])
        raws = np.concatenate([raws, raws + bit])

    proj = space.project_table
    if last is None:
        cols = proj[raws]
    else:
        _, d1, d0 = last
        raw1 = raws | 1
        member = space.member_mask[raw1]
        nm = ~member
        cols = np.concatenate([proj[raws[member]], proj[raw1[member]], proj[raws[nm]]])
        keys = np.concatenate([keys[member] + d0, keys[member] + d1, keys[nm]])
    if (cols < 0).any():
        raise InternalInvariantError("child pattern not representable after truncation")
    if tag_block:
        cols = cols + tag_block
    return cols, keys


def _merge_runs(
    cols_parts: List[np.ndarray],
    keys_parts: List[np.ndarray],
    registry: _ComboRegistry,
    n_directions: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """Sort by column and replace collision groups by synthetic sum keys."""
    cols = np.concatenate(cols_parts)
    keys = np.concatenate(keys_parts)
    order = np.argsort(cols, kind="stable")
    sc = cols[order]
    sk = keys[order]
    if len(sc) == 0:
        return sc, sk
    boundary = np.empty(len(sc), dtype=bool)
    boundary[0] = True
    np.not_equal(sc[1:], sc[:-1], out=boundary[1:])
    if boundary.all():
        return sc, sk
    starts = np.flatnonzero(boundary)
    lens = np.diff(np.append(starts, len(sc)))
    out_cols = sc[starts]
    out_keys = sk[starts].copy()
    for runlen in range(2, n_directions + 1):
        sel = lens == runlen
        idx = starts[sel]
        if len(idx) == 0:
            continue
        stacked = np.stack([sk[idx + t] for t in range(runlen)], axis=1)
        stacked.sort(axis=1)
        uniq, inv = np.unique(stacked, axis=0, return_inverse=True)
        syn = np.fromiter(
            (registry.lookup(tuple(int(x) for x in row)) for row in uniq),
            dtype=np.int64, count=len(uniq),
        )
        out_keys[sel] = syn[inv]
    if lens.max() > n_directions:
        raise InternalInvariantError("column collision deeper than direction count")
    return out_cols, out_keys


@dataclass
class BuildStats:
    states: int
    nnz: int
    distinct_polys: int
    build_seconds: float


class MeanMatrix:
    """Row-sparse symbolic mean matrix with interned polynomial ids."""

    def __init__(self, model: ModelSpec, space: StateSpace, indptr, cols, pids,
                 pool: PolyPool, stats: BuildStats):
        self.model = model
        self.space = space
        self.indptr = indptr
        self.cols = cols
        self.pids = pids
        self.pool = pool
        self.stats = stats

    @property
    def dimension(self) -> int:
        return len(self.indptr) - 1

    @property
    def nnz(self) -> int:
        return len(self.cols)

    def row(self, i: int) -> List[Tuple[int, int]]:
        a, b = self.indptr[i], self.indptr[i + 1]
        return list(zip(self.cols[a:b].tolist(), self.pids[a:b].tolist()))

    def row_polys(self, i: int) -> Dict[int, TransitionPoly]:
        return {col: self.pool[pid] for col, pid in self.row(i)}

    def __repr__(self) -> str:
        return (
            f"MeanMatrix({self.space.spec.label()}, dim={self.dimension}, "
            f"nnz={self.nnz}, polys={len(self.pool)})"
        )


def build_matrix(
    model: ModelSpec,
    space: StateSpace,
    threads: int = 1,
    max_entries: Optional[int] = None,
) -> MeanMatrix:
    """Build the symbolic mean matrix over a state space.

    The result is deterministic and independent of ``threads``: rows are
    produced per state and consumed in state order, and polynomial ids
    are assigned by a serial first-use renumbering over that stream.
    """
    if space.spec.model is not model:
        if space.spec.model.ident != model.ident:
            raise UsageError("space was enumerated for a different model")
    t0 = time.monotonic()
    geom = space.geometry
    atoms = AtomSystem(model)
    registry = _ComboRegistry()
    n_states = len(space)
    members = space._members
    per_tag = space.members_per_tag
    tags = space.tags
    tag_blocks = {}
    for d in range(geom.n_directions):
        for ti, tg in enumerate(tags):
            if tg is None:
                tag_blocks[(ti, d)] = 0
            else:
                tag_blocks[(ti, d)] = child_tag(model, tg, d).residue * per_tag

    def state_row(ordinal: int) -> Tuple[np.ndarray, np.ndarray]:
        ti, o = divmod(ordinal, per_tag)
        bits = int(members[o])
        tg = tags[ti]
        cols_parts, keys_parts = [], []
        for d in range(geom.n_directions):
            law = _raw_law(model, geom, atoms, bits, tg, d)
            if not law.exists:
                continue
            c, k = _expand_direction(space, law, tag_blocks[(ti, d)])
            cols_parts.append(c)
            keys_parts.append(k)
        if not cols_parts:
            return (np.empty(0, np.int64), np.empty(0, np.int64))
        if len(cols_parts) == 1:
            order = np.argsort(cols_parts[0], kind="stable")
            return cols_parts[0][order], keys_parts[0][order]
        return _merge_runs(cols_parts, keys_parts, registry, geom.n_directions)

    pool = PolyPool()
    key2pid: Dict[int, int] = {}

    def intern_keys(keys: np.ndarray) -> np.ndarray:
        # New polynomials are interned in first-appearance order within
        # the row, so pool ids depend only on row content, never on the
        # run-specific synthetic key values.
        uniq, first, inv = np.unique(keys, return_index=True, return_inverse=True)
        pid_u = np.empty(len(uniq), dtype=np.int64)
        for t in np.argsort(first, kind="stable").tolist():
            kk = int(uniq[t])
            pid = key2pid.get(kk)
            if pid is None:
                if kk >= 0:
                    poly = atoms.expand(kk)
                else:
                    combo = registry.combos[-kk - 1]
                    poly = atoms.expand(combo[0])
                    for single in combo[1:]:
                        poly = poly + atoms.expand(single)
                pid = pool.intern(poly)
                key2pid[kk] = pid
            pid_u[t] = pid
        return pid_u[inv].astype(np.uint32)

    chunk = 512
    ranges = [(a, min(a + chunk, n_states)) for a in range(0, n_states, chunk)]

    def work(bounds):
        a, b = bounds
        return [state_row(i) for i in range(a, b)]

    row_cols: List[np.ndarray] = []
    row_pids: List[np.ndarray] = []
    counts = np.zeros(n_states, dtype=np.int64)
    total = 0
    i_state = 0

    def consume(rows):
        nonlocal total, i_state
        for c, k in rows:
            total += len(c)
            if max_entries is not None and total > max_entries:
                raise MemoryBudgetError(
                    f"matrix entry budget {max_entries} exceeded at row {i_state}",
                    row_index=i_state,
                )
            counts[i_state] = len(c)
            row_cols.append(c.astype(np.int32))
            row_pids.append(intern_keys(k))
            i_state += 1

    if threads <= 1:
        for bounds in ranges:
            consume(work(bounds))
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            futures = [ex.submit(work, bounds) for bounds in ranges]
            for fut in futures:
                consume(fut.result())

    indptr = np.zeros(n_states + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    cols = np.concatenate(row_cols) if row_cols else np.empty(0, np.int32)
    pids = np.concatenate(row_pids) if row_pids else np.empty(0, np.uint32)
    stats = BuildStats(
        states=n_states,
        nnz=int(total),
        distinct_polys=len(pool),
        build_seconds=time.monotonic() - t0,
    )
    return MeanMatrix(model, space, indptr, cols, pids, pool, stats)
