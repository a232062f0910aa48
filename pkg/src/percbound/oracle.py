"""Independent verification oracles.

Three ways to cross-check the automaton against the underlying
percolation process:

* ``exact_reach_probability`` computes P(origin reaches height n)
  exactly, by dynamic programming over the distribution of occupancy
  subsets of each level.  Conditional on the previous level's subset,
  the vertices of the next level are occupied independently, so the
  transition factorizes per target vertex.  For the planar lattices the
  per-level transition is computed with a sweep that retires source bits
  as soon as no later target needs them, keeping arrays near the subset
  count of a single level.
* ``expected_alive`` is the branching-process side of the same quantity:
  the expected number of particles alive at generation n from the root
  state.  Reachability never exceeds it.
* ``mc_survival`` simulates cluster growth level by level with a
  splittable seeded generator; a sanity layer, not a proof.

``brute_force_children`` is the transition oracle: it enumerates every
configuration of the finitely many relevant sites/edges of one window,
applies the goodness and occupancy rules literally, and accumulates the
exact expected-count polynomial per child state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.stats import norm

from .errors import BudgetError, UsageError
from .models import (
    Inhomogeneity,
    Lattice,
    ModelSpec,
    VariantTag,
    child_tag,
    classify,
    param_index,
    param_of_residue,
)
from .poly import TransitionPoly
from .spaces import StateSpace
from .spectral import evaluate
from .transition import MeanMatrix

_LEVEL_BITS_BUDGET = 22  # largest level subset array: 2^22 doubles


def _check_params(model: ModelSpec, params) -> Tuple[float, ...]:
    if isinstance(params, (int, float)):
        params = (params,)
    params = tuple(float(p) for p in params)
    if len(params) != model.arity:
        raise UsageError(f"model {model.ident} takes {model.arity} parameters")
    for p in params:
        if not (0.0 <= p <= 1.0):
            raise UsageError(f"parameter {p} outside [0, 1]")
    return params


def _site_prob(model: ModelSpec, params, x: int, y: int) -> float:
    if not model.tagged:
        return params[0]
    return params[param_of_residue(model, classify(model, x, y)) - 1]


# ---------------------------------------------------------------------------
# Exact reachability
# ---------------------------------------------------------------------------


def exact_reach_probability(model: ModelSpec, n: int, params) -> float:
    """Exact probability that some vertex of height n is occupied.

    The origin itself counts as occupied (height 0), so the result is 1
    at n=0 and nondecreasing in the parameters.
    """
    params = _check_params(model, params)
    if n < 0:
        raise UsageError("depth must be nonnegative")
    if n == 0:
        return 1.0
    if model.lattice is Lattice.VL3:
        return _exact_reach_vl3(model, n, params)
    return _exact_reach_2d(model, n, params)


def _vl2_targets(model: ModelSpec, m: int, params):
    """Per target of level m+1: (in-list, site prob) for the VL2 lattice.

    Level m holds vertices (x, m-x) for x = 0..m.  Target x is fed by
    source x-1 via the horizontal edge and source x via the vertical one.
    """
    bond = not model.is_site
    if model.inhomogeneity is Inhomogeneity.MODEL_V:
        q_h, q_v = 1.0 - params[0], 1.0 - params[1]
    else:
        q_h = q_v = 1.0 - params[0]
    targets = []
    for x in range(m + 2):
        ins = []
        if x - 1 >= 0:
            ins.append((x - 1, q_h))
        if x <= m:
            ins.append((x, q_v))
        psite = None if bond else _site_prob(model, params, x, m + 1 - x)
        targets.append((ins, psite))
    return targets, 1  # last source needed by target x = source+1


def _alt2_targets(model: ModelSpec, m: int, params):
    """Targets of level m+1 for the ALT2 lattice (sources x = -m..m)."""
    bond = not model.is_site
    q = 1.0 - params[0]
    targets = []
    for p in range(2 * m + 3):
        x = p - (m + 1)
        ins = []
        for xs in (x - 1, x, x + 1):
            if -m <= xs <= m:
                ins.append((xs + m, q))
        psite = None if bond else params[0]
        targets.append((ins, psite))
    return targets, 2


def _sweep_level(A: np.ndarray, w_src: int, targets, last_offset: int,
                 collapse: bool):
    """One level transition of the subset DP.

    ``A`` is the distribution over source subsets (source position t at
    bit w_src-1-t).  Returns the distribution over target subsets, or,
    with ``collapse``, the probability that the target level is empty.
    Source bits are marginalized out as soon as no later target reads
    them, so the working array stays near one level's subset count.
    """
    D = A.reshape(-1, 1)
    lo = 0  # earliest source position still alive
    n_src = w_src
    for p, (ins, psite) in enumerate(targets):
        # Retire sources whose last consumer has been processed.
        while lo < n_src and lo + last_offset < p:
            D = D.reshape(2, -1, D.shape[1]).sum(axis=0)
            lo += 1
        alive = n_src - lo
        idx = np.arange(D.shape[0], dtype=np.int64)
        if ins:
            if psite is None:
                prod = np.ones(D.shape[0])
                for src, qv in ins:
                    bit = (idx >> (alive - 1 - (src - lo))) & 1
                    prod *= np.where(bit == 1, qv, 1.0)
                p1 = 1.0 - prod
            else:
                any_occ = np.zeros(D.shape[0], dtype=bool)
                for src, _ in ins:
                    any_occ |= ((idx >> (alive - 1 - (src - lo))) & 1) == 1
                p1 = psite * any_occ.astype(float)
        else:
            p1 = np.zeros(D.shape[0])
        if collapse:
            D = D * (1.0 - p1)[:, None]
        else:
            d0 = D * (1.0 - p1)[:, None]
            d1 = D * p1[:, None]
            D = np.stack([d0, d1], axis=-1).reshape(D.shape[0], -1)
    while lo < n_src:
        D = D.reshape(2, -1, D.shape[1]).sum(axis=0)
        lo += 1
    if collapse:
        return float(D.sum())
    return D.reshape(-1)


def _exact_reach_2d(model: ModelSpec, n: int, params) -> float:
    level_targets = _vl2_targets if model.lattice is Lattice.VL2 else _alt2_targets
    A = np.array([0.0, 1.0])  # origin occupied with certainty
    w = 1
    for m in range(n - 1):
        targets, last_offset = level_targets(model, m, params)
        width = len(targets)
        if width > _LEVEL_BITS_BUDGET:
            raise BudgetError(
                f"depth {n} needs level subsets of {width} bits; "
                f"budget is {_LEVEL_BITS_BUDGET}"
            )
        A = _sweep_level(A, w, targets, last_offset, collapse=False)
        w = width
    targets, last_offset = level_targets(model, n - 1, params)
    empty = _sweep_level(A, w, targets, last_offset, collapse=True)
    return 1.0 - empty


def _vl3_level_positions(h: int) -> List[Tuple[int, int]]:
    """(x, y) of the height-h vertices, row-major by (x+y, x); z = h-x-y."""
    return [(x, s - x) for s in range(h + 1) for x in range(s + 1)]


def _exact_reach_vl3(model: ModelSpec, n: int, params) -> float:
    bond = not model.is_site
    p = params[0]
    q = 1.0 - p
    width_last = (n * (n + 1)) // 2  # level n-1
    if width_last > _LEVEL_BITS_BUDGET:
        raise BudgetError(
            f"3d depth {n} needs level subsets of {width_last} bits; "
            f"budget is {_LEVEL_BITS_BUDGET}"
        )
    A = np.array([0.0, 1.0])
    src_pos = _vl3_level_positions(0)
    for m in range(n):
        tgt_pos = _vl3_level_positions(m + 1)
        w_src, w_tgt = len(src_pos), len(tgt_pos)
        index = {pos: t for t, pos in enumerate(src_pos)}
        in_lists = []
        for (x, y) in tgt_pos:
            ins = [index[c] for c in ((x - 1, y), (x, y - 1), (x, y)) if c in index]
            in_lists.append(ins)
        collapse = m == n - 1
        B = None if collapse else np.zeros(1 << w_tgt)
        empty_total = 0.0
        nonzero = np.flatnonzero(A)
        for S in nonzero.tolist():
            aS = A[S]
            live = []
            for t, ins in enumerate(in_lists):
                c = sum(1 for s in ins if (S >> (w_src - 1 - s)) & 1)
                if c:
                    live.append((t, (1.0 - q ** c) if bond else p))
            if collapse:
                prod = 1.0
                for _, p1 in live:
                    prod *= 1.0 - p1
                empty_total += aS * prod
                continue
            vec = np.array([aS])
            idx = np.array([0], dtype=np.int64)
            for t, p1 in live:
                vec = np.concatenate([vec * (1.0 - p1), vec * p1])
                idx = np.concatenate([idx, idx + (1 << (w_tgt - 1 - t))])
            B[idx] += vec
        if collapse:
            return 1.0 - empty_total
        A = B
        src_pos = tgt_pos
    raise AssertionError("unreachable")


# ---------------------------------------------------------------------------
# Branching-process expectation and Monte Carlo
# ---------------------------------------------------------------------------


def expected_alive(matrix: MeanMatrix, params, root: Optional[int] = None,
                   n: int = 0) -> float:
    """Expected number of particles alive at generation n from the root."""
    if n < 0:
        raise UsageError("generation must be nonnegative")
    if root is None:
        root = matrix.space.root_ordinal()
    if n == 0:
        return 1.0
    numeric = evaluate(matrix, params)
    u = np.ones(matrix.dimension)
    for _ in range(n):
        u = numeric @ u
    return float(u[root])


@dataclass
class MCResult:
    """Survival estimate with a 99% Wilson confidence interval."""

    estimate: float
    ci_low: float
    ci_high: float
    survivors: int
    trials: int
    depth: int
    seed: int

    def to_json(self) -> dict:
        return {
            "estimate": self.estimate,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "survivors": self.survivors,
            "trials": self.trials,
            "depth": self.depth,
            "seed": self.seed,
        }


def _wilson(successes: int, trials: int, level: float = 0.99) -> Tuple[float, float]:
    z = norm.ppf(0.5 + level / 2.0)
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = (z / denom) * np.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials))
    return max(0.0, center - half), min(1.0, center + half)


def _mc_trial_2d(model: ModelSpec, params, depth: int, rng) -> bool:
    vl2 = model.lattice is Lattice.VL2
    bond = not model.is_site
    if model.inhomogeneity is Inhomogeneity.MODEL_V:
        p_h, p_v = params[0], params[1]
    else:
        p_h = p_v = params[0]
    xs = np.array([0], dtype=np.int64)
    for m in range(depth):
        if vl2:
            if bond:
                vert = xs[rng.random(len(xs)) < p_v]
                horiz = (xs + 1)[rng.random(len(xs)) < p_h]
                xs = np.unique(np.concatenate([vert, horiz]))
            else:
                cand = np.unique(np.concatenate([xs, xs + 1]))
                ys = (m + 1) - cand
                if model.tagged:
                    probs = np.array(
                        [_site_prob(model, params, int(x), int(y))
                         for x, y in zip(cand, ys)]
                    )
                else:
                    probs = params[0]
                xs = cand[rng.random(len(cand)) < probs]
        else:
            if bond:
                parts = [
                    (xs + dx)[rng.random(len(xs)) < params[0]]
                    for dx in (-1, 0, 1)
                ]
                xs = np.unique(np.concatenate(parts))
            else:
                cand = np.unique(np.concatenate([xs - 1, xs, xs + 1]))
                xs = cand[rng.random(len(cand)) < params[0]]
        if len(xs) == 0:
            return False
    return True


def _mc_trial_vl3(model: ModelSpec, params, depth: int, rng) -> bool:
    bond = not model.is_site
    p = params[0]
    pts = np.zeros((1, 2), dtype=np.int64)  # (x, y); z implied by height
    shifts = np.array([[1, 0], [0, 1], [0, 0]], dtype=np.int64)
    for _ in range(depth):
        if bond:
            parts = [
                (pts + s)[rng.random(len(pts)) < p]
                for s in shifts
            ]
            nxt = np.concatenate(parts)
        else:
            cand = np.unique(np.concatenate([pts + s for s in shifts]), axis=0)
            nxt = cand[rng.random(len(cand)) < p]
        if len(nxt) == 0:
            return False
        pts = np.unique(nxt, axis=0)
    return True


def mc_survival(model: ModelSpec, params, depth: int, trials: int,
                seed: int = 0, threads: int = 1) -> MCResult:
    """Fraction of seeded cluster-growth trials surviving to ``depth``.

    Per-trial generators are spawned from the seed up front, so the
    result is bit-reproducible for a fixed seed regardless of worker
    count.
    """
    params = _check_params(model, params)
    if trials < 1:
        raise UsageError("trials must be at least 1")
    trial_fn = _mc_trial_vl3 if model.lattice is Lattice.VL3 else _mc_trial_2d
    children = np.random.SeedSequence(seed).spawn(trials)

    def run(seq_slice) -> int:
        count = 0
        for ss in seq_slice:
            rng = np.random.default_rng(ss)
            if trial_fn(model, params, depth, rng):
                count += 1
        return count

    if threads <= 1:
        survivors = run(children)
    else:
        from concurrent.futures import ThreadPoolExecutor

        chunk = max(1, (trials + threads - 1) // threads)
        slices = [children[a:a + chunk] for a in range(0, trials, chunk)]
        with ThreadPoolExecutor(max_workers=threads) as ex:
            survivors = sum(ex.map(run, slices))
    lo, hi = _wilson(survivors, trials)
    return MCResult(
        estimate=survivors / trials, ci_low=lo, ci_high=hi,
        survivors=survivors, trials=trials, depth=depth, seed=seed,
    )


# ---------------------------------------------------------------------------
# Brute-force transition oracle
# ---------------------------------------------------------------------------

_MAX_BRUTE_VARS = 24


def brute_force_children(
    model: ModelSpec,
    space: StateSpace,
    state: int,
    tag: Optional[VariantTag] = None,
) -> Dict[int, TransitionPoly]:
    """Exact expected-count polynomials per child ordinal, by enumeration.

    Enumerates every configuration of the relevant randomness (out-edges
    of occupied window slots for bond models; successor sites with an
    occupied in-neighbor for site models), applies the good-edge and
    occupancy rules literally, projects each child through the space,
    and accumulates monomials with integer counts.
    """
    geom = space.geometry
    n = geom.n_slots
    occupied = lambda slot: (state >> (n - 1 - slot)) & 1
    if not state & space.root_bit:
        raise UsageError("state must have its root bit set")
    site = model.is_site

    # Enumerate the random variables and their parameter indices.
    var_param: List[int] = []
    edge_var: Dict[Tuple[int, int], int] = {}
    site_var: Dict[int, int] = {}
    if site:
        for u, nbrs in enumerate(geom.in_neighbors):
            if any(occupied(w) for w, _ in nbrs):
                site_var[u] = len(var_param)
                if model.tagged:
                    pi = param_index(model, tag, geom.successor_offsets[u]) - 1
                else:
                    pi = 0
                var_param.append(pi)
    else:
        for u, nbrs in enumerate(geom.in_neighbors):
            for w, d in nbrs:
                if occupied(w):
                    edge_var[(w, d)] = len(var_param)
                    var_param.append(geom.edge_param(d) - 1)
    V = len(var_param)
    if V > _MAX_BRUTE_VARS:
        raise BudgetError(f"instance too large: {V} random variables")

    configs = np.arange(1 << V, dtype=np.int64)
    bits = [(configs >> v) & 1 for v in range(V)]

    # Occupancy of every successor, as a 0/1 vector over configs.
    succ_occ = []
    for u, nbrs in enumerate(geom.in_neighbors):
        if site:
            occ = bits[site_var[u]] if u in site_var else np.zeros_like(configs)
        else:
            occ = np.zeros_like(configs)
            for w, d in nbrs:
                if occupied(w):
                    occ = occ | bits[edge_var[(w, d)]]
        succ_occ.append(occ)

    # Open-variable counts per parameter, for the probability monomial.
    var_counts = [0] * model.arity
    for pi in var_param:
        var_counts[pi] += 1
    opens = []
    for pi in range(model.arity):
        tot = np.zeros_like(configs)
        for v, vp in enumerate(var_param):
            if vp == pi:
                tot = tot + bits[v]
        opens.append(tot)

    per_tag = space.members_per_tag
    accum: Dict[int, Dict[tuple, int]] = {}
    for d in range(geom.n_directions):
        window = geom.child_windows[d]
        target = window[geom.root_slot]
        exists = np.ones_like(configs, dtype=bool)
        blocked = False
        for w, dd in geom.in_neighbors[target]:
            if dd == d:
                break
            if occupied(w):
                if site:
                    blocked = True
                else:
                    exists &= bits[edge_var[(w, dd)]] == 0
        if blocked:
            continue
        if site:
            exists &= bits[site_var[target]] == 1
        else:
            exists &= bits[edge_var[(geom.root_slot, d)]] == 1

        raw = np.full_like(configs, 1 << (n - 1 - geom.root_slot))
        for child_slot in range(n):
            if child_slot == geom.root_slot:
                continue
            raw = raw + (succ_occ[window[child_slot]] << (n - 1 - child_slot))
        ordinals = space.project_table[raw]
        if tag is not None:
            ordinals = ordinals + child_tag(model, tag, d).residue * per_tag

        # One monomial per configuration: pack (ordinal, open counts) and
        # tally; equal monomials merge into integer coefficients.
        base = 64 ** model.arity
        packed = ordinals * base
        for pi in range(model.arity):
            packed = packed + opens[pi] * (64 ** (model.arity - 1 - pi))
        uniq, counts = np.unique(packed[exists], return_counts=True)
        for val, cnt in zip(uniq.tolist(), counts.tolist()):
            ordinal, rem = divmod(val, base)
            key = []
            for pi in range(model.arity):
                scale = 64 ** (model.arity - 1 - pi)
                a, rem = divmod(rem, scale)
                key += [a, var_counts[pi] - a]
            terms = accum.setdefault(int(ordinal), {})
            tk = tuple(key)
            terms[tk] = terms.get(tk, 0) + cnt
    return {
        ordinal: TransitionPoly(model.arity, terms)
        for ordinal, terms in sorted(accum.items())
    }
