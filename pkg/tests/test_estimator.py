from __future__ import annotations

import math

import numpy as np
import pytest

from cheegerlab import (BruteForceBudgetError, CellSet, build_grid,
                        builtin_specs, counterexample_comb, faber_krahn_lower,
                        hk_bruteforce, hk_local_search, hk_upper, iso_ratio,
                        p_to_one_sweep, partition_upper, unit_ball_volume,
                        verify_bilateral)
from conftest import DIRICHLET, RELATIVE


class TestUnitBallVolume:
    def test_closed_forms(self):
        assert unit_ball_volume(1) == 2.0
        assert unit_ball_volume(2) == pytest.approx(math.pi, rel=1e-15)
        assert unit_ball_volume(3) == pytest.approx(4.0 * math.pi / 3.0, rel=1e-15)

    def test_gamma_branch_consistent(self):
        # the general formula must agree with the special-cased dimensions
        for n in (1, 2, 3):
            general = math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)
            assert unit_ball_volume(n) == pytest.approx(general, rel=1e-14)
        assert unit_ball_volume(4) == pytest.approx(math.pi ** 2 / 2.0, rel=1e-14)


class TestFaberKrahnLower:
    def test_examples(self):
        assert faber_krahn_lower(2, 1, 1.0) == pytest.approx(2.0 * math.sqrt(math.pi))
        assert faber_krahn_lower(1, 1, 1.0) == pytest.approx(2.0)
        assert faber_krahn_lower(2, 4, 1.0) == pytest.approx(2.0 * math.sqrt(4.0 * math.pi))

    def test_monotone_in_k(self):
        vals = [faber_krahn_lower(2, k, 1.0) for k in range(1, 6)]
        assert vals == sorted(vals)

    def test_bad_volume(self):
        with pytest.raises(ValueError):
            faber_krahn_lower(2, 1, 0.0)


class TestBruteForce:
    def test_interval_exact_values(self, interval_8):
        # k equal blocks of 1/k each have ratio 2k in dirichlet mode
        for k in (1, 2, 4):
            val, wits = hk_bruteforce(interval_8, k, DIRICHLET)
            assert val == pytest.approx(2.0 * k, rel=1e-12)
            assert len(wits) == k
            used = set()
            for w in wits:
                assert used.isdisjoint(w.indices.tolist())
                used.update(w.indices.tolist())

    def test_interval_relative_mode(self, interval_8):
        # relative h_1 is 0: the whole interval cuts nothing
        val, wits = hk_bruteforce(interval_8, 1, RELATIVE)
        assert val == 0.0
        assert len(wits[0]) == 8

    def test_square_res4_values(self, square_4):
        v1, w1 = hk_bruteforce(square_4, 1, DIRICHLET)
        assert v1 == pytest.approx(4.0)
        assert len(w1[0]) == 16
        v2, _ = hk_bruteforce(square_4, 2, DIRICHLET)
        assert v2 == pytest.approx(6.0)
        v3, _ = hk_bruteforce(square_4, 3, DIRICHLET)
        assert v3 == pytest.approx(8.0)

    def test_witness_achieves_value(self, square_4):
        val, wits = hk_bruteforce(square_4, 2, DIRICHLET)
        assert max(iso_ratio(square_4, w, DIRICHLET) for w in wits) == pytest.approx(val)

    def test_dfs_matches_dp_in_1d(self, interval_8):
        # route the 1D instance through the generic DFS by faking dimension
        from cheegerlab.estimator import _hk_exact_connected_dfs
        for k in (1, 2, 3):
            dp_val, _ = hk_bruteforce(interval_8, k, DIRICHLET)
            dfs_val, _ = _hk_exact_connected_dfs(interval_8, k, DIRICHLET,
                                                 2_000_000)
            assert dfs_val == pytest.approx(dp_val, rel=1e-12)

    def test_budget_errors(self, square_64, interval_1024):
        with pytest.raises(BruteForceBudgetError, match="20 cells"):
            hk_bruteforce(square_64, 1, DIRICHLET)
        with pytest.raises(BruteForceBudgetError, match="24 cells"):
            hk_bruteforce(square_64, 2, DIRICHLET)
        with pytest.raises(BruteForceBudgetError, match="DP needs"):
            hk_bruteforce(interval_1024, 2, DIRICHLET, budget=1000)

    def test_too_many_sets(self, interval_8):
        with pytest.raises(ValueError):
            hk_bruteforce(interval_8, 9, DIRICHLET)


class TestLocalSearch:
    def test_optimum_is_fixed_point(self, interval_8):
        val, wits = hk_bruteforce(interval_8, 2, DIRICHLET)
        improved, parts = hk_local_search(interval_8, 2, DIRICHLET, wits)
        assert improved == pytest.approx(val)

    def test_never_worse_than_seed(self, square_4):
        # seed with the two vertical halves (ratio 6); search may only improve
        halves = [CellSet(square_4, np.flatnonzero(square_4.index[:, 0] < 2)),
                  CellSet(square_4, np.flatnonzero(square_4.index[:, 0] >= 2))]
        seed_obj = max(iso_ratio(square_4, h, DIRICHLET) for h in halves)
        assert seed_obj == pytest.approx(6.0)
        improved, parts = hk_local_search(square_4, 2, DIRICHLET, halves)
        assert improved <= seed_obj + 1e-12
        assert len(parts) == 2

    def test_improves_bad_seed(self, interval_8):
        # lopsided seed: {0} and the rest; the optimum is two halves at 4.0
        seed = [CellSet(interval_8, [0]), CellSet(interval_8, range(1, 8))]
        bad = max(iso_ratio(interval_8, s, DIRICHLET) for s in seed)
        improved, _ = hk_local_search(interval_8, 2, DIRICHLET, seed)
        assert improved < bad
        assert improved == pytest.approx(4.0)

    def test_overlapping_seed_rejected(self, interval_8):
        seed = [CellSet(interval_8, [0, 1]), CellSet(interval_8, [1, 2])]
        with pytest.raises(ValueError, match="not disjoint"):
            hk_local_search(interval_8, 2, DIRICHLET, seed)

    def test_wrong_part_count(self, interval_8):
        with pytest.raises(ValueError):
            hk_local_search(interval_8, 3, DIRICHLET, [CellSet(interval_8, [0])])


class TestPartitionUpper:
    def test_interval_strips(self, interval_64):
        # exact 2k when the resolution divides into k equal strips
        for k in (1, 2, 4, 8):
            val, parts = partition_upper(interval_64, k, DIRICHLET)
            assert val == pytest.approx(2.0 * k, rel=1e-12)
            assert len(parts) == k

    def test_interval_uneven_strips_stay_close(self, interval_64):
        # 64 is not divisible by 3: the short strip is one cell narrower
        val, _ = partition_upper(interval_64, 3, DIRICHLET)
        assert 6.0 <= val <= 6.0 * (1.0 + 3.0 / 64)

    def test_square_values(self, square_64):
        assert partition_upper(square_64, 1, DIRICHLET)[0] == pytest.approx(4.0)
        assert partition_upper(square_64, 2, DIRICHLET)[0] == pytest.approx(6.0)
        assert partition_upper(square_64, 4, DIRICHLET)[0] == pytest.approx(8.0)

    def test_parts_partition_the_grid(self, square_64):
        _, parts = partition_upper(square_64, 4, DIRICHLET)
        seen = np.zeros(square_64.num_cells, dtype=int)
        for p in parts:
            seen[p.indices] += 1
        assert np.all(seen == 1)

    def test_upper_bounds_exact(self, square_4):
        for k in (1, 2, 3):
            exact, _ = hk_bruteforce(square_4, k, DIRICHLET)
            val, _ = partition_upper(square_4, k, DIRICHLET)
            assert val >= exact - 1e-12

    def test_too_many_parts(self, interval_8):
        with pytest.raises(ValueError):
            partition_upper(interval_8, 9, DIRICHLET)


class TestHkUpper:
    def test_interval_k2_report(self, interval_256, eig_interval_256):
        rep = hk_upper(interval_256, 2.0, 2, DIRICHLET, eig=eig_interval_256)
        assert rep.h1_ref == pytest.approx(2.0, rel=1e-12)
        assert rep.k == 2 and rep.p == 2.0
        assert all(c.passed for c in rep.checks)
        # the reported bound is the worst witness ratio
        assert rep.h_k_upper == pytest.approx(
            max(iso_ratio(interval_256, w, DIRICHLET) for w in rep.witnesses))
        for a in range(len(rep.witnesses)):
            for b in range(a + 1, len(rep.witnesses)):
                assert rep.witnesses[a].isdisjoint(rep.witnesses[b])

    def test_sandwich_against_exact(self, interval_256, eig_interval_256):
        for k in (1, 2, 3):
            rep = hk_upper(interval_256, 2.0, k, DIRICHLET, eig=eig_interval_256)
            exact, _ = hk_bruteforce(interval_256, k, DIRICHLET)
            assert exact <= rep.h_k_upper + 1e-12
            # 2k up to the one-cell rounding of 256/k blocks
            assert exact == pytest.approx(2.0 * k, rel=2.0 * k / 256)

    def test_local_search_refines_witnesses(self, interval_256,
                                            eig_interval_256):
        rep = hk_upper(interval_256, 2.0, 2, DIRICHLET, eig=eig_interval_256)
        improved, _ = hk_local_search(interval_256, 2, DIRICHLET,
                                      rep.witnesses, rounds=3)
        assert improved <= rep.h_k_upper + 1e-12
        exact, _ = hk_bruteforce(interval_256, 2, DIRICHLET)
        assert exact <= improved + 1e-12

    def test_faber_krahn_attached_for_convex(self, interval_256,
                                             eig_interval_256):
        rep = hk_upper(interval_256, 2.0, 2, DIRICHLET, eig=eig_interval_256)
        assert rep.faber_krahn == pytest.approx(4.0)
        assert rep.faber_krahn <= rep.h_k_upper

    def test_c_eff_recomputable(self, interval_256, eig_interval_256):
        rep = hk_upper(interval_256, 2.0, 2, DIRICHLET, eig=eig_interval_256)
        n = interval_256.n
        scaling = 2 ** (1.0 / n) * (rep.lambda_refs["lambda1"] / rep.h1_ref)
        assert rep.c_eff == pytest.approx(rep.h_k_upper / scaling, rel=1e-12)
        assert rep.theorem11_rhs == pytest.approx(rep.h_k_upper, rel=1e-12)


class TestVerifyBilateral:
    def test_interval_scaling(self):
        spec = builtin_specs()["unit_interval"]
        out = verify_bilateral(spec, [64, 120], 2.0, 4)
        s = out["summary"]
        # 120 is divisible by 1..4, so exact h_k = 2k and the slope is 1
        assert s["slope"] == pytest.approx(1.0, abs=0.05)
        assert s["slope_ok"] and s["ratio_band_ok"]
        finest = [r for r in out["rows"] if r["resolution"] == 120]
        for r in finest:
            assert r["h_exact"] == pytest.approx(2.0 * r["k"], rel=1e-12)
            assert r["faber_krahn"] <= r["h_best"] + 1e-12

    def test_square_scaling(self):
        # resolutions divisible by 2 and 3 so the strip partitions are exact
        spec = builtin_specs()["unit_square"]
        out = verify_bilateral(spec, [3, 6], 2.0, 3)
        s = out["summary"]
        assert s["slope_ok"]      # near 1/2 within the 0.2 band
        assert s["ratio_band_ok"]
        for r in out["rows"]:
            assert r["faber_krahn"] <= r["h_best"] + 1e-12

    def test_nonconvex_rejected(self):
        spec = builtin_specs()["l_shape"]
        with pytest.raises(ValueError, match="convex"):
            verify_bilateral(spec, [4], 2.0, 1)


class TestPToOneSweep:
    def test_descending_sweep(self, interval_64):
        out = p_to_one_sweep(interval_64, [2.0, 1.8, 1.5, 1.3])
        assert out["h1"] == pytest.approx(2.0)
        assert out["monotone_decreasing"]
        rows = out["rows"]
        assert rows[0]["lambda1"] == pytest.approx(math.pi ** 2, rel=1e-2)
        for r in rows:
            assert r["classical_ok"]
            assert r["lambda1"] >= r["classical_lower"] * 0.9

    def test_input_validation(self, interval_8):
        with pytest.raises(ValueError):
            p_to_one_sweep(interval_8, [2.5, 2.0])
        with pytest.raises(ValueError):
            p_to_one_sweep(interval_8, [1.5, 1.8])


@pytest.fixture(scope="module")
def comb():
    return counterexample_comb(4, [0.5, 0.375, 0.25, 0.125], (2.0, 0.5), 16)


class TestCounterexampleComb:
    def test_relative_tooth_ratios_flat(self, comb):
        # unit-length teeth: the only relative cut is the mouth, area = width
        assert comb["tooth_ratios_relative"] == pytest.approx([1.0] * 4)

    def test_dirichlet_ratios_blow_up(self, comb):
        expected = [2.0 / w + 2.0 for w in (0.5, 0.375, 0.25, 0.125)]
        assert comb["tooth_ratios_dirichlet"] == pytest.approx(expected)

    def test_hk_bounded_lambda_grows(self, comb):
        rows = comb["rows"]
        assert all(r["h_k_rel_upper"] == pytest.approx(1.0) for r in rows)
        assert comb["ratio_strictly_increasing"]
        assert rows[3]["lambda_k_p2"] >= math.pi ** 2

    def test_witnesses_are_teeth(self, comb):
        assert comb["rows"][3]["witness_teeth"] == [0, 1, 2, 3]

    def test_thin_tooth_rejected(self):
        with pytest.raises(ValueError, match="thinner"):
            counterexample_comb(1, [0.01], (1.0, 0.5), 16)
