import math

import pytest

from percbound import (
    SpaceSpec,
    UsageError,
    enumerate_space,
    get_model,
    truncated_cardinality,
)

BOND = get_model("bond-vl2")
SITE3 = get_model("site-vl3")


def brute_count(k, i, j):
    """Direct filtering enumeration of S(k, i, j)."""
    n = k + 1
    members = []
    extras = 0
    for v in range(1 << (n - 1), 1 << n):
        ones = bin(v).count("1")
        if v & 1 == 0:
            members.append(v)
        elif ones <= i + 1:
            members.append(v)
        elif ones == i + 2 and extras < j:
            members.append(v)
            extras += 1
    return len(members)


class TestCardinalities:
    @pytest.mark.parametrize("k,i,j,expected", [
        (16, 7, 3620, 46337),
        (6, 2, 0, 38),
        (8, 2, 1, 137),
    ])
    def test_reference_counts(self, k, i, j, expected):
        space = enumerate_space(SpaceSpec.truncated(BOND, k, i, j))
        assert len(space) == expected

    def test_plain_counts(self):
        assert len(enumerate_space(SpaceSpec.plain(BOND, 4))) == 8
        for k in range(2, 10):
            assert len(enumerate_space(SpaceSpec.plain(BOND, k))) == 2 ** (k - 1)

    @pytest.mark.parametrize("k", range(2, 11))
    def test_formula_matches_direct_filtering(self, k):
        for i in range(0, k):
            jmax = math.comb(k - 1, i + 1)
            for j in sorted({0, 1, jmax // 2, jmax}):
                space = enumerate_space(SpaceSpec.truncated(BOND, k, i, j))
                expected = truncated_cardinality(k, i, j)
                assert len(space) == expected == brute_count(k, i, j)

    def test_tagged_spaces_are_products(self):
        for ident, factor in [("inhom-1", 2), ("inhom-3", 4), ("inhom-5", 1)]:
            m = get_model(ident)
            space = enumerate_space(SpaceSpec.plain(m, 5))
            assert len(space) == factor * 16

    def test_triangle_counts(self):
        assert len(enumerate_space(SpaceSpec.triangle(SITE3, 4, 3))) == 2 ** 9
        assert len(enumerate_space(SpaceSpec.triangle(SITE3, 5, 6))) == 2 ** 14


class TestValidation:
    def test_j_out_of_range(self):
        with pytest.raises(UsageError):
            SpaceSpec.truncated(BOND, 6, 2, math.comb(5, 3) + 1)

    def test_k_too_small(self):
        with pytest.raises(UsageError):
            SpaceSpec.plain(BOND, 1)

    def test_bad_triangle_side(self):
        with pytest.raises(UsageError):
            SpaceSpec.triangle(SITE3, 6)

    def test_lattice_mismatch(self):
        with pytest.raises(UsageError):
            SpaceSpec.plain(SITE3, 4)
        with pytest.raises(UsageError):
            SpaceSpec.triangle(BOND, 4)


class TestIndexing:
    def test_enumerate_index_round_trip(self):
        space = enumerate_space(SpaceSpec.truncated(BOND, 7, 2, 3))
        for ordinal in range(len(space)):
            bits, tag = space.state(ordinal)
            assert space.ordinal(bits, tag) == ordinal

    def test_round_trip_tagged(self):
        space = enumerate_space(SpaceSpec.plain(get_model("inhom-3"), 4))
        for ordinal in range(len(space)):
            bits, tag = space.state(ordinal)
            assert space.ordinal(bits, tag) == ordinal

    def test_ascending_numeric_order(self):
        space = enumerate_space(SpaceSpec.truncated(BOND, 6, 2, 0))
        values = [space.state(o)[0] for o in range(len(space))]
        assert values == sorted(values)


class TestProjection:
    def test_truncation_clears_last_bit(self):
        space = enumerate_space(SpaceSpec.truncated(BOND, 6, 2, 0))
        child = 0b1011011  # five ones, ends in 1, not a member
        assert not space.contains(child)
        assert space.project_raw(child) == space.ordinal(0b1011010)

    def test_member_maps_to_itself(self):
        space = enumerate_space(SpaceSpec.truncated(BOND, 6, 2, 0))
        child = 0b1100000
        assert space.project_raw(child) == space.ordinal(child)

    def test_admitted_j_sequence_is_member(self):
        # S(8,2,1): the single admitted 4-ones pattern ending in 1 is the
        # ascending-first one, 100000111.
        space = enumerate_space(SpaceSpec.truncated(BOND, 8, 2, 1))
        admitted = 0b100000111
        assert space.contains(admitted)
        assert space.project_raw(admitted) == space.ordinal(admitted)
        rejected = 0b100001011  # next 4-ones candidate, not admitted
        assert not space.contains(rejected)
        assert space.project_raw(rejected) == space.ordinal(0b100001010)

    def test_projection_idempotent(self):
        space = enumerate_space(SpaceSpec.truncated(BOND, 7, 1, 2))
        for raw in range(1 << 7, 1 << 8):
            o = space.project_raw(raw)
            bits, tag = space.state(o)
            assert space.project_raw(bits, tag) == o


class TestRootState:
    def test_plain_root(self):
        space = enumerate_space(SpaceSpec.plain(BOND, 4))
        assert space.root_ordinal() == space.ordinal(0b1000)
        assert space.root_ordinal() == 0

    def test_truncated_root(self):
        space = enumerate_space(SpaceSpec.truncated(BOND, 6, 2, 0))
        assert space.root_ordinal() == space.ordinal(0b1000000)

    def test_triangle_root_is_focus_only(self):
        space = enumerate_space(SpaceSpec.triangle(SITE3, 4, 3))
        bits, _ = space.state(space.root_ordinal())
        assert bits == 1 << (10 - 3)  # only the focus bit (slot 3, 1-based)

    def test_tagged_root_uses_seed_window_tag(self):
        m = get_model("inhom-1")
        space = enumerate_space(SpaceSpec.plain(m, 4))
        bits, tag = space.state(space.root_ordinal())
        assert bits == 0b1000
        # seed window rightmost vertex is (k-1, 1-k) = (3, -3): odd x
        assert tag.residue == 1


class TestRendering:
    def test_bit_strings(self):
        space = enumerate_space(SpaceSpec.plain(BOND, 4))
        assert space.render_state(space.ordinal(0b1100)) == "1100"

    def test_tag_letters(self):
        space = enumerate_space(SpaceSpec.plain(get_model("inhom-3"), 4))
        from percbound import VariantTag
        assert space.render_state(space.ordinal(0b1000, VariantTag(2))).endswith(",d")

    def test_parse_bits_validates(self):
        space = enumerate_space(SpaceSpec.plain(BOND, 4))
        with pytest.raises(UsageError):
            space.parse_bits("110")
        with pytest.raises(UsageError):
            space.parse_bits("11x0")
