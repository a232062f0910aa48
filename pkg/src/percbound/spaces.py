"""State spaces: encoding, enumeration, indexing and the truncation rule.

A state is the occupancy bit pattern of a window, with the root slot
(leftmost slot in 2d, focus slot in 3d) forced to 1.  Slot 0 is the most
significant bit, so lexicographic order on bit strings equals numeric
order on encodings.

Three space kinds exist:

* ``plain``:     all length-k patterns rooted at slot 0 (2^(k-1) states).
* ``truncated``: the intermediate spaces between window sizes k and k+1.
  Patterns have length k+1 and the space holds every pattern ending in 0,
  every pattern ending in 1 with at most i+1 ones, and exactly j patterns
  ending in 1 with exactly i+2 ones (the first j in ascending encoding).
  A child that falls outside the space has its last bit cleared, which
  always lands back inside.
* ``triangle``:  all patterns of a side-L triangle (L in {4, 5}) with the
  focus bit set.

For the inhomogeneous models the space is the cartesian product of bit
patterns and variant tags, ordered tag-major.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import InternalInvariantError, UsageError
from .models import (
    ModelSpec,
    VariantTag,
    WindowGeometry,
    all_tags,
    default_focus,
    initial_tag,
    tag_letter,
    window_geometry,
)


@dataclass(frozen=True)
class SpaceSpec:
    """Description of a state space, pairing a model with a window shape."""

    model: ModelSpec
    kind: str  # "plain" | "truncated" | "triangle"
    k: Optional[int] = None
    i: Optional[int] = None
    j: Optional[int] = None
    side: Optional[int] = None
    focus: Optional[int] = None  # 1-based slot number, as in the figures

    @classmethod
    def plain(cls, model: ModelSpec, k: int) -> "SpaceSpec":
        if model.lattice.value == "vl3":
            raise UsageError("plain interval spaces need a 2d lattice")
        if k < 2:
            raise UsageError(f"k must be at least 2, got {k}")
        return cls(model, "plain", k=k)

    @classmethod
    def truncated(cls, model: ModelSpec, k: int, i: int, j: int) -> "SpaceSpec":
        if model.lattice.value == "vl3":
            raise UsageError("truncated spaces need a 2d lattice")
        if k < 2:
            raise UsageError(f"k must be at least 2, got {k}")
        if i < 0:
            raise UsageError(f"i must be nonnegative, got {i}")
        jmax = math.comb(k - 1, i + 1)
        if not (0 <= j <= jmax):
            raise UsageError(f"j={j} out of range 0..{jmax} for S({k},{i},·)")
        return cls(model, "truncated", k=k, i=i, j=j)

    @classmethod
    def triangle(cls, model: ModelSpec, side: int, focus: Optional[int] = None) -> "SpaceSpec":
        if model.lattice.value != "vl3":
            raise UsageError("triangle spaces need the 3d lattice")
        if side not in (4, 5):
            raise UsageError(f"triangle side must be 4 or 5, got {side}")
        if focus is None:
            focus = default_focus(side)
        n = side * (side + 1) // 2
        if not (1 <= focus <= n):
            raise UsageError(f"focus slot {focus} outside triangle of side {side}")
        return cls(model, "triangle", side=side, focus=focus)

    @property
    def window_slots(self) -> int:
        if self.kind == "plain":
            return self.k
        if self.kind == "truncated":
            return self.k + 1
        return self.side * (self.side + 1) // 2

    def label(self) -> str:
        if self.kind == "plain":
            return f"P({self.k})"
        if self.kind == "truncated":
            return f"S({self.k},{self.i},{self.j})"
        return f"T({self.side},{self.focus})"

    def to_json(self) -> dict:
        if self.kind == "plain":
            return {"kind": "plain", "k": self.k}
        if self.kind == "truncated":
            return {"kind": "truncated", "k": self.k, "i": self.i, "j": self.j}
        return {"kind": "triangle", "L": self.side, "focus": self.focus}


def truncated_cardinality(k: int, i: int, j: int) -> int:
    """Member count of S(k, i, j) per tag value."""
    return 2 ** (k - 1) + sum(math.comb(k - 1, t) for t in range(i)) + j


class StateSpace:
    """Materialized ordered enumeration of a space, with exact lookup.

    States are ordered tag-major, bit patterns ascending within a tag.
    ``project_raw`` maps any raw child pattern (root bit set) to the
    ordinal of its member representative, applying the truncation rule
    when needed.
    """

    def __init__(self, spec: SpaceSpec):
        self.spec = spec
        model = spec.model
        if spec.kind == "triangle":
            self.geometry: WindowGeometry = window_geometry(
                model, spec.side, focus=spec.focus
            )
        else:
            self.geometry = window_geometry(model, spec.window_slots)
        n = self.geometry.n_slots
        self.n_slots = n
        self.root_slot = self.geometry.root_slot
        self.root_bit = 1 << (n - 1 - self.root_slot)

        members = self._enumerate_members()
        self._members = members
        self.members_per_tag = len(members)

        # Dense lookup over all 2^n encodings: ordinal of the member, or
        # ordinal of the truncated representative for rooted non-members.
        ordinal = np.full(1 << n, -1, dtype=np.int64)
        ordinal[members] = np.arange(len(members))
        self._member_ordinal = ordinal
        project = ordinal.copy()
        rooted = np.flatnonzero(
            (np.arange(1 << n, dtype=np.int64) & self.root_bit) != 0
        )
        missing = rooted[ordinal[rooted] < 0]
        if len(missing):
            if spec.kind != "truncated":
                raise InternalInvariantError("non-truncated space missing rooted patterns")
            repl = ordinal[missing & ~np.int64(1)]
            if (repl < 0).any():
                raise InternalInvariantError("truncation left the space")
            project[missing] = repl
        self._project = project
        # Vectorized lookup surfaces for the matrix builder.
        self.member_mask = ordinal >= 0
        self.project_table = project

        self.tags = all_tags(model)
        self.n_tags = len(self.tags)
        self.size = self.members_per_tag * self.n_tags
        self._initial_tag = initial_tag(model, n) if model.tagged else None

    # -- enumeration ----------------------------------------------------

    def _enumerate_members(self) -> np.ndarray:
        spec = self.spec
        n = self.n_slots
        if spec.kind in ("plain", "triangle"):
            codes = np.arange(1 << n, dtype=np.int64)
            return codes[(codes & self.root_bit) != 0]
        # Truncated: length k+1 patterns starting with 1; keep patterns
        # ending in 0, light patterns ending in 1, and the first j
        # patterns ending in 1 with exactly i+2 ones.
        i, j = spec.i, spec.j
        codes = np.arange(1 << (n - 1), 1 << n, dtype=np.int64)
        ones = np.zeros(len(codes), dtype=np.int64)
        v = codes.copy()
        while v.any():
            ones += v & 1
            v >>= 1
        ends1 = (codes & 1) == 1
        keep = ~ends1 | (ones <= i + 1)
        extra = codes[ends1 & (ones == i + 2)]
        keep_set = codes[keep]
        admitted = extra[:j]
        return np.sort(np.concatenate([keep_set, admitted]))

    # -- lookups ----------------------------------------------------------

    def _tag_index(self, tag: Optional[VariantTag]) -> int:
        if self.n_tags == 1:
            return 0
        if tag is None:
            raise UsageError(f"model {self.spec.model.ident} requires a tag")
        return tag.residue

    def ordinal(self, bits: int, tag: Optional[VariantTag] = None) -> int:
        """Exact reverse lookup; raises for non-members."""
        o = int(self._member_ordinal[bits])
        if o < 0:
            raise KeyError(f"pattern {self.render_bits(bits)} not in {self.spec.label()}")
        return self._tag_index(tag) * self.members_per_tag + o

    def contains(self, bits: int) -> bool:
        return 0 <= bits < (1 << self.n_slots) and self._member_ordinal[bits] >= 0

    def state(self, ordinal: int) -> Tuple[int, Optional[VariantTag]]:
        t, o = divmod(ordinal, self.members_per_tag)
        return int(self._members[o]), self.tags[t]

    def project_raw(self, raw: int, tag: Optional[VariantTag] = None) -> int:
        """Ordinal of a raw child pattern, truncating if necessary."""
        if not raw & self.root_bit:
            raise InternalInvariantError("raw child pattern lost its root bit")
        o = int(self._project[raw])
        if o < 0:
            raise InternalInvariantError(
                f"pattern {self.render_bits(raw)} not representable in {self.spec.label()}"
            )
        return self._tag_index(tag) * self.members_per_tag + o

    def root_ordinal(self) -> int:
        return self.ordinal(self.root_bit, self._initial_tag)

    # -- rendering --------------------------------------------------------

    def render_bits(self, bits: int) -> str:
        return format(bits, f"0{self.n_slots}b")

    def render_state(self, ordinal: int) -> str:
        bits, tag = self.state(ordinal)
        s = self.render_bits(bits)
        if tag is not None:
            s += f",{tag_letter(self.spec.model, tag)}"
        return s

    def parse_bits(self, text: str) -> int:
        if len(text) != self.n_slots or set(text) - {"0", "1"}:
            raise UsageError(
                f"state pattern must be {self.n_slots} binary digits, got {text!r}"
            )
        return int(text, 2)

    def __len__(self) -> int:
        return self.size

    def __repr__(self) -> str:
        return f"StateSpace({self.spec.label()}, {self.size} states)"


def enumerate_space(spec: SpaceSpec) -> StateSpace:
    """Materialize the ordered state space for a space description."""
    return StateSpace(spec)
