"""Model catalog: lattices, percolation kinds, parameter assignment, priorities.

Three oriented lattices are supported:

* ``VL2``  -- the square lattice Z^2 with edges (x,y)->(x+1,y) and
  (x,y)->(x,y+1); a window is an interval of k vertices of the same
  height x+y, ordered by increasing x.
* ``ALT2`` -- the alternative planar lattice with edges (x,y)->(x-1,y+1),
  (x,y)->(x,y+1), (x,y)->(x+1,y+1); a window is an interval of k vertices
  of the same height y.
* ``VL3``  -- the 3d lattice with edges along e1, e2, e3; a window is a
  triangular arrangement of vertices of the same height x+y+z.

Every vertex infection has a well-defined priority among the routes that
can reach it, and an infection is *good* exactly when no strictly
higher-priority route from an occupied window vertex also infects the
target.  Direction ids are ordered by priority, 0 highest:

* VL2:  0 = up (the original vertical edge), 1 = right (horizontal).
* ALT2: 0 = left-diag, 1 = vertical, 2 = right-diag (rightmost
  in-neighbor wins).
* VL3:  0 = e3, 1 = e2, 2 = e1.

Vertices outside the window are treated as vacant when evaluating
occupancy and goodness; this underestimates infection and preserves the
domination direction of the bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

from .errors import UsageError


class Lattice(Enum):
    VL2 = "vl2"
    ALT2 = "alt2"
    VL3 = "vl3"


class Percolation(Enum):
    SITE = "site"
    BOND = "bond"


class Inhomogeneity(Enum):
    NONE = 0
    MODEL_I = 1
    MODEL_II = 2
    MODEL_III = 3
    MODEL_IV = 4
    MODEL_V = 5


@dataclass(frozen=True)
class ModelSpec:
    """A percolation model: lattice, site/bond, parameter structure."""

    ident: str
    lattice: Lattice
    percolation: Percolation
    arity: int
    inhomogeneity: Inhomogeneity = Inhomogeneity.NONE

    def __post_init__(self):
        inh = self.inhomogeneity
        if inh in (Inhomogeneity.MODEL_I, Inhomogeneity.MODEL_II,
                   Inhomogeneity.MODEL_III, Inhomogeneity.MODEL_IV):
            assert self.lattice is Lattice.VL2
            assert self.percolation is Percolation.SITE
            assert self.arity == 2
        elif inh is Inhomogeneity.MODEL_V:
            assert self.lattice is Lattice.VL2
            assert self.percolation is Percolation.BOND
            assert self.arity == 2
        else:
            assert self.arity == 1

    @property
    def is_site(self) -> bool:
        return self.percolation is Percolation.SITE

    @property
    def n_directions(self) -> int:
        return 2 if self.lattice is Lattice.VL2 else 3

    @property
    def tag_period(self) -> int:
        """Number of variant tags (1 when the model needs none)."""
        inh = self.inhomogeneity
        if inh in (Inhomogeneity.MODEL_I, Inhomogeneity.MODEL_II):
            return 2
        if inh in (Inhomogeneity.MODEL_III, Inhomogeneity.MODEL_IV):
            return 4
        return 1

    @property
    def tagged(self) -> bool:
        return self.tag_period > 1


MODELS = {
    m.ident: m
    for m in [
        ModelSpec("site-vl2", Lattice.VL2, Percolation.SITE, 1),
        ModelSpec("bond-vl2", Lattice.VL2, Percolation.BOND, 1),
        ModelSpec("site-alt2", Lattice.ALT2, Percolation.SITE, 1),
        ModelSpec("bond-alt2", Lattice.ALT2, Percolation.BOND, 1),
        ModelSpec("site-vl3", Lattice.VL3, Percolation.SITE, 1),
        ModelSpec("bond-vl3", Lattice.VL3, Percolation.BOND, 1),
        ModelSpec("inhom-1", Lattice.VL2, Percolation.SITE, 2, Inhomogeneity.MODEL_I),
        ModelSpec("inhom-2", Lattice.VL2, Percolation.SITE, 2, Inhomogeneity.MODEL_II),
        ModelSpec("inhom-3", Lattice.VL2, Percolation.SITE, 2, Inhomogeneity.MODEL_III),
        ModelSpec("inhom-4", Lattice.VL2, Percolation.SITE, 2, Inhomogeneity.MODEL_IV),
        ModelSpec("inhom-5", Lattice.VL2, Percolation.BOND, 2, Inhomogeneity.MODEL_V),
    ]
}


def get_model(ident: str) -> ModelSpec:
    try:
        return MODELS[ident]
    except KeyError:
        raise UsageError(
            f"unknown model {ident!r}; known: {', '.join(sorted(MODELS))}"
        ) from None


# ---------------------------------------------------------------------------
# Variant tags for the inhomogeneous vertex models
# ---------------------------------------------------------------------------
#
# A tag is the residue class of the window's reference vertex (the
# rightmost one) under the model's classifier:
#
#   Model I:   x mod 2            (param 1 iff residue 0)
#   Model II:  (x+y) mod 2        (param 1 iff residue 0)
#   Model III: (x-y) mod 4        (param 1 iff residue <= 1)
#   Model IV:  x mod 4            (param 1 iff residue <= 1)
#
# The letter rendering follows the convention "rightmost type, then type
# of its horizontal successor": residues 0,1,2,3 map to a,b,d,c for the
# period-4 models and 0,1 to a,b for the period-2 models.


@dataclass(frozen=True)
class VariantTag:
    residue: int


_LETTERS_P2 = {0: "a", 1: "b"}
_LETTERS_P4 = {0: "a", 1: "b", 2: "d", 3: "c"}


def classify(model: ModelSpec, x: int, y: int) -> int:
    """Residue class of the lattice vertex (x, y) under the model."""
    inh = model.inhomogeneity
    if inh is Inhomogeneity.MODEL_I:
        return x % 2
    if inh is Inhomogeneity.MODEL_II:
        return (x + y) % 2
    if inh is Inhomogeneity.MODEL_III:
        return (x - y) % 4
    if inh is Inhomogeneity.MODEL_IV:
        return x % 4
    raise UsageError(f"model {model.ident} has no vertex classes")


def param_of_residue(model: ModelSpec, residue: int) -> int:
    """Parameter index in {1, 2} for a vertex of the given residue class."""
    if model.tag_period == 2:
        return 1 if residue == 0 else 2
    return 1 if residue <= 1 else 2


def param_index(model: ModelSpec, tag: VariantTag, offset: Tuple[int, int]) -> int:
    """Parameter index in {1, 2} of the vertex at ``offset`` = (dx, dy)
    relative to the window's rightmost vertex, given the window's tag."""
    dx, dy = offset
    inh = model.inhomogeneity
    if inh is Inhomogeneity.MODEL_I:
        r = (tag.residue + dx) % 2
    elif inh is Inhomogeneity.MODEL_II:
        r = (tag.residue + dx + dy) % 2
    elif inh is Inhomogeneity.MODEL_III:
        r = (tag.residue + dx - dy) % 4
    elif inh is Inhomogeneity.MODEL_IV:
        r = (tag.residue + dx) % 4
    else:
        raise UsageError(f"model {model.ident} has no vertex classes")
    return param_of_residue(model, r)


def child_tag(model: ModelSpec, tag: VariantTag, direction: int) -> VariantTag:
    """Tag of the child window in the given direction.

    The up-child's rightmost vertex sits at the parent's rightmost plus
    (0, 1); the right-child's at plus (1, 0).
    """
    if direction not in (0, 1):
        raise UsageError(f"invalid direction {direction} for a VL2 model")
    dx, dy = (0, 1) if direction == 0 else (1, 0)
    inh = model.inhomogeneity
    period = model.tag_period
    if inh is Inhomogeneity.MODEL_I:
        r = tag.residue + dx
    elif inh is Inhomogeneity.MODEL_II:
        r = tag.residue + dx + dy
    elif inh is Inhomogeneity.MODEL_III:
        r = tag.residue + dx - dy
    elif inh is Inhomogeneity.MODEL_IV:
        r = tag.residue + dx
    else:
        raise UsageError(f"model {model.ident} has no variant tags")
    return VariantTag(r % period)


def tag_letter(model: ModelSpec, tag: VariantTag) -> str:
    table = _LETTERS_P2 if model.tag_period == 2 else _LETTERS_P4
    return table[tag.residue]


def tag_from_letter(model: ModelSpec, letter: str) -> VariantTag:
    table = _LETTERS_P2 if model.tag_period == 2 else _LETTERS_P4
    for residue, name in table.items():
        if name == letter:
            return VariantTag(residue)
    raise UsageError(f"unknown tag letter {letter!r} for model {model.ident}")


def initial_tag(model: ModelSpec, window_size: int) -> Optional[VariantTag]:
    """Tag of the seed window, whose leftmost vertex is the origin.

    The rightmost vertex of that window is (k-1, 1-k) for window size k.
    """
    if not model.tagged:
        return None
    return VariantTag(classify(model, window_size - 1, 1 - window_size))


def all_tags(model: ModelSpec):
    if not model.tagged:
        return [None]
    return [VariantTag(r) for r in range(model.tag_period)]


# ---------------------------------------------------------------------------
# Window geometry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WindowGeometry:
    """Static wiring of a window and its successor row/triangle.

    ``in_neighbors[u]`` lists the (window slot, direction) pairs that can
    infect successor ``u``, in descending priority order.  The map
    (slot, direction) -> successor is injective per slot, which is what
    makes the per-bit product formulas of the transition builder valid.

    ``child_windows[d]`` maps each child slot to the successor index it
    occupies; the child root (slot ``root_slot``) maps to the successor
    infected from the parent root via direction ``d``.
    """

    model: ModelSpec
    n_slots: int
    root_slot: int
    slot_offsets: tuple
    successor_offsets: tuple
    in_neighbors: tuple
    child_windows: tuple

    @property
    def n_successors(self) -> int:
        return len(self.successor_offsets)

    @property
    def n_directions(self) -> int:
        return len(self.child_windows)

    def child_root_successor(self, direction: int) -> int:
        return self.child_windows[direction][self.root_slot]

    def successors_of(self, slot: int):
        """The (direction, successor) out-edges of a window slot."""
        out = []
        for u, nbrs in enumerate(self.in_neighbors):
            for v, d in nbrs:
                if v == slot:
                    out.append((d, u))
        return sorted(out)

    def edge_param(self, direction: int) -> int:
        """Parameter index in {1, 2} of an edge, for bond models."""
        if self.model.inhomogeneity is Inhomogeneity.MODEL_V:
            # up = original vertical -> p2, right = horizontal -> p1
            return 2 if direction == 0 else 1
        return 1


# Triangle positions are stored row-major: (r, c) with 1 <= c <= r <= L
# maps to index r(r-1)/2 + c - 1, matching the numbering 1..10 of the
# side-4 figure.  The lattice embedding is (x, y, z) = (r-c, c-1, L-r).

def _tri_index(r: int, c: int) -> int:
    return r * (r - 1) // 2 + (c - 1)


def default_focus(side: int) -> int:
    """Default focus slot (1-based) for a triangle of the given side."""
    return {4: 3, 5: 6}[side]


def window_geometry(model: ModelSpec, size, focus: Optional[int] = None) -> WindowGeometry:
    """Build the window geometry for a model.

    ``size`` is the interval length k (>= 2) for the 2d lattices, or the
    triangle side L in {4, 5} for VL3, in which case ``focus`` is the
    1-based focus slot (defaulting to 3 for L=4 and 6 for L=5).
    """
    if model.lattice is Lattice.VL2:
        return _geometry_vl2(model, size)
    if model.lattice is Lattice.ALT2:
        return _geometry_alt2(model, size)
    return _geometry_vl3(model, size, focus)


def _geometry_vl2(model: ModelSpec, k: int) -> WindowGeometry:
    if k < 2:
        raise UsageError(f"window size must be at least 2, got {k}")
    # Slots v_0..v_{k-1} left to right; successors u_0..u_k with
    # u_j = v_j + (0,1) = v_{j-1} + (1,0).  The vertical in-edge outranks
    # the horizontal one.
    slot_offsets = tuple((j - (k - 1), (k - 1) - j) for j in range(k))
    successor_offsets = tuple((j - (k - 1), k - j) for j in range(k + 1))
    in_neighbors = []
    for j in range(k + 1):
        nbrs = []
        if j < k:
            nbrs.append((j, 0))
        if j >= 1:
            nbrs.append((j - 1, 1))
        in_neighbors.append(tuple(nbrs))
    child_windows = (
        tuple(range(0, k)),      # up-child rooted at u_0
        tuple(range(1, k + 1)),  # right-child rooted at u_1
    )
    return WindowGeometry(
        model=model, n_slots=k, root_slot=0,
        slot_offsets=slot_offsets, successor_offsets=successor_offsets,
        in_neighbors=tuple(in_neighbors), child_windows=child_windows,
    )


def _geometry_alt2(model: ModelSpec, k: int) -> WindowGeometry:
    if k < 2:
        raise UsageError(f"window size must be at least 2, got {k}")
    # Slots v_0..v_{k-1}; successors s_0..s_{k+1} with s_j = root + (j-1, 1).
    # In-neighbors of s_j, by priority: v_j (left-diag), v_{j-1} (vertical),
    # v_{j-2} (right-diag) -- the rightmost in-neighbor wins.
    slot_offsets = tuple((j - (k - 1), 0) for j in range(k))
    successor_offsets = tuple((j - k, 1) for j in range(k + 2))
    in_neighbors = []
    for j in range(k + 2):
        nbrs = []
        if j <= k - 1:
            nbrs.append((j, 0))
        if 1 <= j <= k:
            nbrs.append((j - 1, 1))
        if j >= 2:
            nbrs.append((j - 2, 2))
        in_neighbors.append(tuple(nbrs))
    child_windows = (
        tuple(range(0, k)),      # left-diag child rooted at s_0
        tuple(range(1, k + 1)),  # vertical child rooted at s_1
        tuple(range(2, k + 2)),  # right-diag child rooted at s_2
    )
    return WindowGeometry(
        model=model, n_slots=k, root_slot=0,
        slot_offsets=slot_offsets, successor_offsets=successor_offsets,
        in_neighbors=tuple(in_neighbors), child_windows=child_windows,
    )


def _geometry_vl3(model: ModelSpec, side: int, focus: Optional[int]) -> WindowGeometry:
    if side not in (4, 5):
        raise UsageError(f"triangle side must be 4 or 5, got {side}")
    if focus is None:
        focus = default_focus(side)
    n_slots = side * (side + 1) // 2
    if not (1 <= focus <= n_slots):
        raise UsageError(f"focus slot {focus} outside triangle of side {side}")
    slot_offsets = tuple(
        (r - c, c - 1, side - r) for r in range(1, side + 1) for c in range(1, r + 1)
    )
    successor_offsets = tuple(
        (r - c, c - 1, side + 1 - r)
        for r in range(1, side + 2) for c in range(1, r + 1)
    )
    # Successor (r', c') is reached from parent (r', c') via e3, from
    # (r'-1, c'-1) via e2, and from (r'-1, c') via e1; priority e3>e2>e1.
    in_neighbors = []
    for rp in range(1, side + 2):
        for cp in range(1, rp + 1):
            nbrs = []
            if rp <= side and cp <= rp:
                nbrs.append((_tri_index(rp, cp), 0))
            if rp - 1 >= 1 and 1 <= cp - 1 <= rp - 1:
                nbrs.append((_tri_index(rp - 1, cp - 1), 1))
            if rp - 1 >= 1 and cp <= rp - 1:
                nbrs.append((_tri_index(rp - 1, cp), 2))
            in_neighbors.append(tuple(nbrs))

    def succ_index(r, c, drop):
        # Position of parent slot (r, c) inside the child sub-triangle:
        # e3 keeps (r, c); e2 shifts to (r+1, c+1); e1 shifts to (r+1, c).
        if drop == 0:
            return _tri_index(r, c)
        if drop == 1:
            return _tri_index(r + 1, c + 1)
        return _tri_index(r + 1, c)

    child_windows = tuple(
        tuple(
            succ_index(r, c, d)
            for r in range(1, side + 1) for c in range(1, r + 1)
        )
        for d in range(3)
    )
    return WindowGeometry(
        model=model, n_slots=n_slots, root_slot=focus - 1,
        slot_offsets=slot_offsets, successor_offsets=successor_offsets,
        in_neighbors=tuple(in_neighbors), child_windows=child_windows,
    )
