import math

import numpy as np
import pytest
from scipy.optimize import brentq

from percbound import (
    SpaceSpec,
    UsageError,
    build_matrix,
    enumerate_space,
    evaluate,
    get_model,
    grid_scan,
    lower_bound,
    reproduce_tables,
    spectral_radius,
)

BOND = get_model("bond-vl2")


def rho_2x2(p):
    a, b = 2 * p - p * p, p * p
    c, d = 2 * p * (1 - p) ** 2, p * p * (3 - 2 * p)
    tr, det = a + d, a * d - b * c
    return (tr + math.sqrt(tr * tr - 4 * det)) / 2


class TestPlain2Bound:
    def test_matches_independent_root_finder(self):
        # The closed-form crossing rho(p*) = 1, floored to six decimals,
        # up to the certification margin's pullback.
        root = brentq(lambda p: rho_2x2(p) - 1.0, 0.1, 0.9, xtol=1e-13)
        result = lower_bound(BOND, SpaceSpec.plain(BOND, 2))
        floored = math.floor(root * 1e6) / 1e6
        assert result.bound <= floored
        assert result.bound == pytest.approx(floored, abs=2e-5)
        assert rho_2x2(result.bound) < 1 - 1e-6

    def test_result_fields(self):
        result = lower_bound(BOND, SpaceSpec.plain(BOND, 2))
        assert result.model_id == "bond-vl2"
        assert result.state_count == 2
        assert result.bisection_iterations > 20
        assert result.lambda_at_bound < 1 - 1e-6
        assert result.wall_time >= 0


class TestCertification:
    @pytest.mark.parametrize("spec_args", [(6, 2, 0), (7, 2, 0)])
    def test_emitted_bound_is_certified(self, spec_args):
        spec = SpaceSpec.truncated(BOND, *spec_args)
        result = lower_bound(BOND, spec)
        matrix = build_matrix(BOND, enumerate_space(spec))
        report = spectral_radius(evaluate(matrix, result.bound))
        assert report.converged
        assert report.radius_estimate < 1 - 1e-6

    def test_bracket_high_end_not_subcritical(self):
        spec = SpaceSpec.truncated(BOND, 6, 2, 0)
        result = lower_bound(BOND, spec)
        matrix = build_matrix(BOND, enumerate_space(spec))
        # one bisection tolerance above the bracket's low end
        high = result.bound + 2e-6
        report = spectral_radius(evaluate(matrix, high))
        assert report.radius_estimate >= 1 - 1e-6 or high >= 1.0

    def test_bisect_tol_validated(self):
        with pytest.raises(UsageError):
            lower_bound(BOND, SpaceSpec.plain(BOND, 2), bisect_tol=1e-12)

    def test_arity2_requires_p2(self):
        m = get_model("inhom-1")
        with pytest.raises(UsageError):
            lower_bound(m, SpaceSpec.plain(m, 3))


class TestChainRegression:
    def test_first_chain_space(self):
        result = lower_bound(BOND, SpaceSpec.truncated(BOND, 6, 2, 0))
        assert result.bound >= 0.624211
        assert result.state_count == 38

    def test_nested_space_improvement(self):
        b1 = lower_bound(BOND, SpaceSpec.truncated(BOND, 6, 2, 0)).bound
        b2 = lower_bound(BOND, SpaceSpec.truncated(BOND, 7, 2, 0)).bound
        assert b1 <= b2


class TestGridScan:
    def test_monotone_profile_small_space(self, capsys):
        matrix = build_matrix(BOND, enumerate_space(SpaceSpec.plain(BOND, 3)))
        rows = grid_scan(matrix, points=11)
        capsys.readouterr()
        radii = [r for _, r, _ in rows]
        assert all(b >= a - 1e-9 for a, b in zip(radii, radii[1:]))
        assert radii[0] == pytest.approx(0.0, abs=1e-9)


class TestTables:
    def test_inhomogeneous_desk_scale(self):
        rows = reproduce_tables("inhomogeneous", k=4)
        assert len(rows) == 10
        stated = [
            ("inhom-1", 0.6, 0.7693), ("inhom-1", 0.8, 0.5444),
            ("inhom-2", 0.6, 0.8189), ("inhom-2", 0.8, 0.6103),
            ("inhom-2", 1.0, 0.5223), ("inhom-3", 0.6, 0.7759),
            ("inhom-3", 0.8, 0.5753), ("inhom-4", 0.6, 0.7720),
            ("inhom-4", 0.8, 0.5583), ("inhom-5", 0.5, 0.7539),
        ]
        for row, (ident, p2, full_value) in zip(rows, stated):
            assert row.model_id == ident
            assert row.p2 == p2
            # reduced-k bounds are certified but weaker than the full runs
            assert 0 < row.bound <= full_value

    def test_three_d_selector_desk_scale(self):
        rows = reproduce_tables("three-d", k=4)
        assert [r.model_id for r in rows] == ["site-vl3", "bond-vl3"]
        assert rows[0].bound == pytest.approx(0.41, abs=5e-3)

    def test_unknown_selector(self):
        with pytest.raises(UsageError):
            reproduce_tables("everything")
