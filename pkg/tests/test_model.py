import math

import numpy as np
import pytest

from mallows_consensus.model import (
    THETA_CAP,
    GMModel,
    ThetaTable,
    build_theta_table,
    decode_v_array,
    default_theta_table,
    log_pmf,
    log_psi,
    log_psi_j,
    marginal_v_pmf,
    mean_v,
    psi_j,
    read_model,
    sample,
    sample_one_slow,
    sample_orders,
    sample_v,
    solve_theta,
    write_model,
)
from mallows_consensus.perm import FormatError, Permutation, all_permutations, decode_v, kendall_distance, v_code


def psi_oracle(theta, m):
    return sum(math.exp(-theta * r) for r in range(m))


class TestPsi:
    def test_uniform(self):
        assert psi_j(0.0, 4) == pytest.approx(4.0, rel=1e-15)

    def test_ln2(self):
        assert psi_j(math.log(2), 3) == pytest.approx(7 / 4, rel=1e-14)

    @pytest.mark.parametrize("n", range(1, 9))
    def test_product_is_factorial(self, n):
        assert math.exp(log_psi([0.0] * (n - 1))) == pytest.approx(math.factorial(n), rel=1e-12)

    @pytest.mark.parametrize("theta", [-3.0, -0.2, -1e-8, 0.0, 1e-9, 1e-7, 2e-6, 0.01, 0.7, 5.0, 40.0])
    @pytest.mark.parametrize("m", [1, 2, 3, 10, 30])
    def test_against_direct_sum(self, theta, m):
        assert log_psi_j(theta, m) == pytest.approx(math.log(psi_oracle(theta, m)), rel=1e-12, abs=1e-13)

    def test_no_overflow_at_cap(self):
        assert log_psi_j(THETA_CAP, 50) == pytest.approx(0.0, abs=1e-20)
        assert math.isfinite(log_psi_j(-THETA_CAP, 50))


class TestMarginal:
    def test_uniform(self):
        assert [marginal_v_pmf(0.0, 5, r) for r in range(5)] == pytest.approx([0.2] * 5)

    def test_geometric_weights(self):
        got = [marginal_v_pmf(math.log(2), 3, r) for r in range(3)]
        assert got == pytest.approx([4 / 7, 2 / 7, 1 / 7], rel=1e-14)

    def test_normalized(self, rng):
        for _ in range(50):
            t, m = rng.uniform(0, 10), int(rng.integers(1, 21))
            assert sum(marginal_v_pmf(t, m, r) for r in range(m)) == pytest.approx(1.0, abs=1e-12)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            marginal_v_pmf(1.0, 3, 3)


class TestMeanV:
    @pytest.mark.parametrize("m", [1, 2, 5, 30])
    def test_uniform_limit(self, m):
        assert mean_v(0.0, m) == pytest.approx((m - 1) / 2)
        assert mean_v(1e-9, m) == pytest.approx((m - 1) / 2, abs=1e-6)

    def test_large_theta(self):
        assert mean_v(700.0, 10) == pytest.approx(0.0, abs=1e-300)
        assert mean_v(THETA_CAP, 10) < 1e-20

    def test_matches_summation(self, rng):
        for _ in range(200):
            t, m = rng.uniform(0.01, 10), int(rng.integers(2, 31))
            direct = sum(r * marginal_v_pmf(t, m, r) for r in range(m))
            assert mean_v(t, m) == pytest.approx(direct, abs=1e-12)

    def test_series_branch_continuous(self):
        for m in (3, 12, 40):
            t = 1.001e-6
            series = 0.5 * (m - 1) - (m * m - 1) * t / 12 + (m ** 4 - 1) * t ** 3 / 720
            assert abs(mean_v(t, m) - series) < 1e-8

    def test_decreasing(self):
        grid = np.linspace(0.0, 20.0, 400)
        vals = [mean_v(t, 9) for t in grid]
        assert all(a > b for a, b in zip(vals, vals[1:]))


class TestSolveTheta:
    def test_uniform_mean_gives_zero(self):
        for m in (2, 5, 17):
            assert solve_theta((m - 1) / 2, m) == 0.0
            assert solve_theta(m - 1, m) == 0.0

    def test_zero_mean_gives_cap(self):
        assert solve_theta(0.0, 6) == THETA_CAP
        assert solve_theta(0.0, 6, theta_cap=12.0) == 12.0

    def test_round_trip(self, rng):
        for _ in range(300):
            t, m = rng.uniform(0.01, 10), int(rng.integers(2, 31))
            assert abs(solve_theta(mean_v(t, m), m) - t) < 1e-8

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            solve_theta(0.5, 1)
        with pytest.raises(ValueError):
            solve_theta(5.0, 3)


class TestThetaTable:
    def test_uniform_mean(self):
        table = build_theta_table(20)
        for m in range(2, 21):
            assert table.lookup((m - 1) / 2, m) == 0.0

    def test_against_solver(self, rng):
        table = build_theta_table(50)
        for _ in range(1000):
            m = int(rng.integers(2, 51))
            v = rng.uniform(0.0, (m - 1) / 2)
            assert abs(table.lookup(v, m) - solve_theta(v, m)) < 1e-4

    def test_array_matches_scalar(self, rng):
        table = build_theta_table(12)
        for m in (2, 7, 12):
            v = np.concatenate([[0.0, (m - 1) / 2, m - 1], rng.uniform(0, (m - 1) / 2, 50)])
            scal = [table.lookup(float(x), m) for x in v]
            assert np.allclose(table.lookup_array(v, m), scal, rtol=0, atol=1e-12)

    def test_covers_every_level(self):
        table = build_theta_table(50)
        n = 50
        for j in range(1, n):
            table.lookup(0.3, n - j + 1)
        with pytest.raises(ValueError):
            table.lookup(0.3, 51)

    def test_default_is_shared(self):
        assert default_theta_table(10) is default_theta_table(30)
        assert default_theta_table(100).m_max >= 100

    def test_save_load(self, tmp_path):
        table = build_theta_table(8, resolution=1e-2)
        path = tmp_path / "t.txt"
        table.save(path)
        assert path.read_text().startswith("# theta-table v1\n")
        again = ThetaTable.load(path)
        for m in range(2, 9):
            for v in np.linspace(0, (m - 1) / 2, 13):
                assert again.lookup(v, m) == table.lookup(v, m)

    def test_load_rejects_bad_header(self, tmp_path):
        path = tmp_path / "t.txt"
        path.write_text("theta\n")
        with pytest.raises(FormatError):
            ThetaTable.load(path)


class TestLogPmf:
    def test_uniform(self):
        model = GMModel(Permutation.identity(4), (0.0, 0.0, 0.0))
        for p in all_permutations(4):
            assert log_pmf(model, p) == pytest.approx(-math.log(24))

    def test_small_example(self):
        model = GMModel(Permutation.identity(3), (math.log(2), math.log(2)))
        assert log_pmf(model, model.pi0) == pytest.approx(-math.log(21 / 8), rel=1e-14)

    @pytest.mark.parametrize("n", range(2, 8))
    def test_normalized(self, n, rng):
        pi0 = Permutation(tuple(rng.permutation(n).tolist()))
        model = GMModel(pi0, tuple(rng.uniform(0, 3, n - 1)))
        total = sum(math.exp(log_pmf(model, p)) for p in all_permutations(n))
        assert total == pytest.approx(1.0, abs=1e-10)

    def test_scalar_theta_broadcasts(self):
        model = GMModel(Permutation.identity(4), 0.5)
        assert model.theta == (0.5, 0.5, 0.5)

    def test_rejects_negative_theta(self):
        with pytest.raises(ValueError):
            GMModel(Permutation.identity(3), (1.0, -1.0))


class TestSampling:
    def test_decode_array_matches_scalar(self, rng):
        codes = sample_v([0.3, 0.1, 0.0, 2.0, 0.5], 200, rng)
        orders = decode_v_array(codes)
        for code, order in zip(codes.tolist(), orders.tolist()):
            assert decode_v(code).order == tuple(order)

    def test_concentrated_returns_center(self):
        pi0 = Permutation((3, 1, 0, 2, 4))
        draws = sample(GMModel(pi0, 50.0), 200, seed=1)
        assert all(p == pi0 for p in draws)

    def test_uniform_mean_distance(self):
        n = 6
        pi0 = Permutation((5, 4, 0, 1, 3, 2))
        orders = sample_orders(GMModel(pi0, 0.0), 100_000, np.random.default_rng(3))
        codes = np.array([v_code(Permutation(tuple(o))).v for o in orders[:2000].tolist()])
        assert codes.sum(1).mean() == pytest.approx(n * (n - 1) / 4, abs=0.25)

    def test_center_relative_vcode_distribution(self, rng):
        """V of pi pi0^-1 follows the per-level truncated geometric law."""
        n, theta = 5, (1.0, 0.5, 2.0, 0.2)
        pi0 = Permutation((2, 4, 0, 3, 1))
        model = GMModel(pi0, theta)
        draws = sample(model, 20_000, seed=rng)
        dist = np.array([kendall_distance(p, pi0) for p in draws[:4000]])
        expected = sum(mean_v(t, n - j) for j, t in enumerate(theta))
        assert dist.mean() == pytest.approx(expected, abs=0.1)

    def test_fast_and_slow_paths_agree_in_law(self):
        model = GMModel(Permutation((1, 2, 0, 3)), (0.8, 0.3, 1.5))
        fast = sample(model, 20_000, seed=5)
        rng = np.random.default_rng(6)
        slow = [sample_one_slow(model, rng) for _ in range(20_000)]
        for target in (model.pi0, Permutation.identity(4)):
            pf = np.mean([p == target for p in fast])
            ps = np.mean([p == target for p in slow])
            assert abs(pf - ps) < 0.015
            assert pf == pytest.approx(math.exp(log_pmf(model, target)), abs=0.015)

    def test_seeded_reproducible(self):
        model = GMModel(Permutation.identity(6), 0.4)
        assert sample(model, 50, seed=9) == sample(model, 50, seed=9)


class TestModelFile:
    def test_round_trip(self, tmp_path):
        model = GMModel(Permutation.from_items([2, 3, 1]), (0.5, 1.25))
        path = tmp_path / "m.txt"
        write_model(path, model)
        assert read_model(path) == model

    def test_scalar_theta_line(self, tmp_path):
        path = tmp_path / "m.txt"
        path.write_text("4\n4 3 2 1\n0.7\n")
        assert read_model(path).theta == (0.7, 0.7, 0.7)

    @pytest.mark.parametrize("text,line", [
        ("x\n1 2\n1\n", 1),
        ("3\n1 2 2\n1 1\n", 2),
        ("3\n1 2 3\n1 2 3\n", 3),
        ("3\n1 2 3\n1 -2\n", 3),
    ])
    def test_errors(self, tmp_path, text, line):
        path = tmp_path / "m.txt"
        path.write_text(text)
        with pytest.raises(FormatError) as err:
            read_model(path)
        assert err.value.line == line
