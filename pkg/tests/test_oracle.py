import numpy as np
import pytest

from percbound import (
    BudgetError,
    SpaceSpec,
    brute_force_children,
    build_matrix,
    enumerate_space,
    exact_reach_probability,
    expected_alive,
    get_model,
    mc_survival,
)

BOND = get_model("bond-vl2")
SITE = get_model("site-vl2")


def reach_by_edge_enumeration(n, p):
    """Independent oracle: enumerate every configuration of the edges in
    the depth-n cone of the bond model and test reachability by search."""
    verts = [(x, y) for h in range(n) for x in range(h + 1) for y in [h - x]]
    edges = [(v, (v[0] + 1, v[1])) for v in verts] + \
            [(v, (v[0], v[1] + 1)) for v in verts]
    total = 0.0
    for mask in range(1 << len(edges)):
        occupied = {(0, 0)}
        opens = [e for t, e in enumerate(edges) if (mask >> t) & 1]
        changed = True
        while changed:
            changed = False
            for a, b in opens:
                if a in occupied and b not in occupied:
                    occupied.add(b)
                    changed = True
        if any(x + y == n for x, y in occupied):
            k = bin(mask).count("1")
            total += p ** k * (1 - p) ** (len(edges) - k)
    return total


class TestExactReach:
    def test_depth1_bond(self):
        for p in (0.2, 0.5, 0.75):
            assert exact_reach_probability(BOND, 1, p) == pytest.approx(
                1 - (1 - p) ** 2, abs=1e-14)

    def test_p1_reaches_everything(self):
        for ident in ("bond-vl2", "site-alt2", "bond-vl3"):
            m = get_model(ident)
            params = (1.0,) * m.arity
            assert exact_reach_probability(m, 5, params) == pytest.approx(1.0, abs=1e-12)

    def test_depth0_is_one(self):
        assert exact_reach_probability(BOND, 0, 0.0) == 1.0

    def test_depth3_matches_edge_enumeration(self):
        p = 0.6
        assert exact_reach_probability(BOND, 3, p) == pytest.approx(
            reach_by_edge_enumeration(3, p), abs=1e-12)

    def test_nondecreasing_in_p(self):
        for ident in ("bond-vl2", "site-vl2", "bond-alt2", "site-vl3"):
            m = get_model(ident)
            values = [
                exact_reach_probability(m, 4, (p,) * m.arity)
                for p in np.linspace(0.1, 0.9, 9)
            ]
            assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))

    def test_budget_error_on_wide_levels(self):
        with pytest.raises(BudgetError):
            exact_reach_probability(get_model("site-alt2"), 14, 0.5)

    def test_site_depth1(self):
        # origin occupied by convention; both height-1 sites independent
        for p in (0.3, 0.8):
            assert exact_reach_probability(SITE, 1, p) == pytest.approx(
                1 - (1 - p) ** 2, abs=1e-14)

    def test_inhom_depth1(self):
        m = get_model("inhom-1")
        p1, p2 = 0.3, 0.7
        # height-1 vertices: (1,0) odd x -> p2, (0,1) even x -> p1
        assert exact_reach_probability(m, 1, (p1, p2)) == pytest.approx(
            1 - (1 - p1) * (1 - p2), abs=1e-14)

    def test_model_v_depth1(self):
        m = get_model("inhom-5")
        p1, p2 = 0.4, 0.65
        assert exact_reach_probability(m, 1, (p1, p2)) == pytest.approx(
            1 - (1 - p1) * (1 - p2), abs=1e-14)


class TestExpectedAlive:
    def test_generation_zero(self):
        matrix = build_matrix(BOND, enumerate_space(SpaceSpec.plain(BOND, 2)))
        assert expected_alive(matrix, 0.5, n=0) == 1.0

    def test_p0_kills_everything(self):
        matrix = build_matrix(BOND, enumerate_space(SpaceSpec.plain(BOND, 2)))
        assert expected_alive(matrix, 0.0, n=3) == 0.0

    def test_hand_multiplied_2x2(self):
        matrix = build_matrix(BOND, enumerate_space(SpaceSpec.plain(BOND, 2)))
        A = np.array([[0.75, 0.25], [0.25, 0.5]])
        expected = (A @ A)[0].sum()
        assert expected_alive(matrix, 0.5, n=2) == pytest.approx(expected, abs=1e-12)


class TestDomination:
    @pytest.mark.parametrize("ident", [
        "bond-vl2", "site-vl2", "bond-alt2", "site-alt2", "inhom-1", "inhom-5",
    ])
    def test_reach_never_exceeds_expected_alive_2d(self, ident):
        model = get_model(ident)
        space = enumerate_space(SpaceSpec.plain(model, 4))
        matrix = build_matrix(model, space)
        root = space.root_ordinal()
        for p in (0.2, 0.5, 0.8):
            params = (p,) if model.arity == 1 else (p, 0.6)
            for n in (1, 2, 4):
                reach = exact_reach_probability(model, n, params)
                alive = expected_alive(matrix, params, root=root, n=n)
                assert reach <= alive + 1e-9

    def test_reach_never_exceeds_expected_alive_3d(self):
        model = get_model("bond-vl3")
        space = enumerate_space(SpaceSpec.triangle(model, 4, 3))
        matrix = build_matrix(model, space)
        root = space.root_ordinal()
        for p in (0.25, 0.6):
            for n in (1, 3):
                reach = exact_reach_probability(model, n, (p,))
                alive = expected_alive(matrix, (p,), root=root, n=n)
                assert reach <= alive + 1e-9


class TestMonteCarlo:
    def test_p1_survives_exactly(self):
        r = mc_survival(BOND, 1.0, depth=50, trials=64, seed=3)
        assert r.estimate == 1.0

    def test_p0_dies_exactly(self):
        r = mc_survival(BOND, 0.0, depth=50, trials=64, seed=3)
        assert r.estimate == 0.0

    def test_bit_reproducible(self):
        a = mc_survival(BOND, 0.66, depth=60, trials=300, seed=42)
        b = mc_survival(BOND, 0.66, depth=60, trials=300, seed=42)
        assert a.survivors == b.survivors

    def test_worker_count_invariant(self):
        a = mc_survival(BOND, 0.66, depth=60, trials=300, seed=9, threads=1)
        b = mc_survival(BOND, 0.66, depth=60, trials=300, seed=9, threads=3)
        assert a.survivors == b.survivors

    def test_wilson_interval_brackets_estimate(self):
        r = mc_survival(BOND, 0.7, depth=40, trials=500, seed=1)
        assert 0.0 <= r.ci_low <= r.estimate <= r.ci_high <= 1.0

    def test_3d_models_run(self):
        r = mc_survival(get_model("site-vl3"), 0.2, depth=30, trials=50, seed=5)
        assert 0.0 <= r.estimate <= 1.0


class TestBruteForceChildren:
    def test_lone_root_at_p1_maximal_children(self):
        # With p=1 every direction's child exists with its maximal pattern.
        model = BOND
        space = enumerate_space(SpaceSpec.plain(model, 3))
        table = brute_force_children(model, space, 0b100)
        values = {
            space.render_state(c): poly.eval(1.0) for c, poly in table.items()
            if poly.eval(1.0) > 0
        }
        # up-child is (110): root plus the successor fed by the root's
        # right edge; right-child is (100): root alone
        assert values == {"110": 1.0, "100": 1.0}

    def test_site_alt2_lone_root_children_all_good(self):
        # For the lone-root state no infection is ever preempted, so each
        # of the three children exists exactly when its root site is open.
        model = get_model("site-alt2")
        space = enumerate_space(SpaceSpec.plain(model, 2))
        table = brute_force_children(model, space, 0b10)
        total = sum(poly.eval(0.37) for poly in table.values())
        assert total == pytest.approx(3 * 0.37, abs=1e-12)

    def test_instance_too_large(self):
        model = get_model("bond-vl3")
        space = enumerate_space(SpaceSpec.triangle(model, 4, 3))
        full = (1 << 10) - 1  # all ten vertices occupied: 30 edges
        with pytest.raises(BudgetError):
            brute_force_children(model, space, full)
