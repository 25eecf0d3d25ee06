import math

import numpy as np
import pytest
from scipy import stats

from rwmlab import (
    GSpec,
    KernelConfig,
    StuckChainError,
    couple_geometrics,
    coupled_rwm_rwh_step,
    mwg_step,
    normalize,
    pseudo_rwm_step,
    rwh_step,
    rwm_step,
    sample_iid,
)
from rwmlab import _loops
from rwmlab.diagnostics import boundary_count, estimate_J
from tests.conftest import make_rng, run_chain_trace


class TestKernelConfig:
    def test_sigma_bound(self):
        with pytest.raises(ValueError):
            KernelConfig(l=4.0, d=8)
        cfg = KernelConfig(l=4.0, d=9)
        assert cfg.sigma == pytest.approx(4.0 / 9.0)

    def test_mwg_block_size(self):
        cfg = KernelConfig(l=4.0, d=100, kind="mwg", c=0.1)
        assert cfg.n_update == 10
        with pytest.raises(ValueError):
            KernelConfig(l=1.0, d=5, kind="mwg", c=0.1)

    def test_kind_and_c_validation(self):
        with pytest.raises(ValueError):
            KernelConfig(l=1.0, d=10, kind="hmc")
        with pytest.raises(ValueError):
            KernelConfig(l=1.0, d=10, c=1.5)
        with pytest.raises(ValueError):
            KernelConfig(l=0.0, d=10)


class TestRwmStep:
    def test_uniform_inside_always_accepts(self, uniform_target):
        cfg = KernelConfig(l=0.5, d=10)
        x = np.full(10, 0.5)
        rng = make_rng(0)
        for _ in range(500):
            x, accepted = rwm_step(uniform_target, cfg, x, rng)
            # sigma = 0.05 keeps every proposal well inside from the center
            assert accepted or not np.all((x > 0.06) & (x < 0.94))

    def test_uniform_outside_always_rejects(self, uniform_target):
        cfg = KernelConfig(l=0.4, d=1)
        rng = make_rng(1)
        x = np.array([0.999])
        for _ in range(2000):
            y, accepted = rwm_step(uniform_target, cfg, x, rng)
            if accepted:
                assert 0.0 < y[0] < 1.0
            else:
                assert y is x

    def test_rejection_returns_input_state(self, uniform_target):
        cfg = KernelConfig(l=0.4, d=1)
        rng = make_rng(2)
        x = np.array([1e-9])
        rejections = 0
        for _ in range(50):
            y, accepted = rwm_step(uniform_target, cfg, x, rng)
            if not accepted:
                assert y is x
                rejections += 1
        assert rejections > 0

    def test_long_run_acceptance_uniform(self, uniform_target):
        # stationary acceptance is exactly (1 - l/(2d))^d for the uniform target
        d, l = 100, 4.0
        rng = make_rng(3)
        _, acc, _, _ = run_chain_trace(uniform_target, d, l, 400_000, rng)
        assert acc == pytest.approx((1 - l / (2 * d)) ** d, abs=0.004)


class TestMwgStep:
    def test_c1_identical_to_rwm(self, linear2_target):
        cfg_r = KernelConfig(l=3.0, d=30)
        cfg_m = KernelConfig(l=3.0, d=30, kind="mwg", c=1.0)
        r1, r2 = make_rng(4), make_rng(4)
        x1 = sample_iid(linear2_target, 30, r1)
        x2 = sample_iid(linear2_target, 30, r2)
        for _ in range(500):
            x1, a1 = rwm_step(linear2_target, cfg_r, x1, r1)
            x2, a2 = mwg_step(linear2_target, cfg_m, x2, r2)
            assert a1 == a2
            np.testing.assert_array_equal(x1, x2)

    def test_partial_update_moves_exact_block(self, uniform_target):
        cfg = KernelConfig(l=4.0, d=100, kind="mwg", c=0.1)
        rng = make_rng(5)
        x = sample_iid(uniform_target, 100, rng)
        moved_counts = []
        for _ in range(400):
            y, accepted = mwg_step(uniform_target, cfg, x, rng)
            if accepted:
                moved_counts.append(int(np.count_nonzero(y != x)))
            x = y
        assert moved_counts and all(m == 10 for m in moved_counts)

    def test_block_acceptance_rate(self, uniform_target):
        # c = 0.2, l = 4/(c f*) = 20: asymptotic acceptance e^-2
        d, rng = 200, make_rng(6)
        _, acc, _, _ = run_chain_trace(uniform_target, d, 20.0, 400_000, rng, kind="mwg", c=0.2)
        assert acc == pytest.approx(math.exp(-2.0), abs=0.01)


class TestRwhStep:
    def test_safe_zone_always_accepts(self):
        cfg = KernelConfig(l=0.5, d=5)
        rng = make_rng(7)
        x = np.full(5, 0.5)
        for _ in range(200):
            safe = np.all((x > cfg.sigma) & (x < 1 - cfg.sigma))
            x, accepted = rwh_step(cfg, x, rng)
            if safe:
                assert accepted

    def test_one_dim_boundary_acceptance(self):
        # x = sigma/2: acceptance is 1/2 + x/(2 sigma) = 0.75
        cfg = KernelConfig(l=0.4, d=1)
        rng = make_rng(8)
        x = np.array([cfg.sigma / 2.0])
        hits = sum(rwh_step(cfg, x, rng)[1] for _ in range(200_000))
        assert hits / 200_000 == pytest.approx(0.75, abs=0.004)

    def test_exact_law_equality_with_rwm_uniform(self, uniform_target):
        cfg = KernelConfig(l=4.0, d=50)
        r1, r2 = make_rng(9), make_rng(9)
        x1 = sample_iid(uniform_target, 50, r1)
        x2 = sample_iid(uniform_target, 50, r2)
        for _ in range(500):
            x1, a1 = rwm_step(uniform_target, cfg, x1, r1)
            x2, a2 = rwh_step(cfg, x2, r2)
            assert a1 == a2
            np.testing.assert_array_equal(x1, x2)


class TestCoupledStep:
    def test_uniform_never_decouples(self, uniform_target):
        cfg = KernelConfig(l=4.0, d=20)
        rng = make_rng(10)
        x = sample_iid(uniform_target, 20, rng)
        pair = (x, x.copy())
        for _ in range(3000):
            pair, decoupled = coupled_rwm_rwh_step(uniform_target, cfg, pair, rng)
            assert not decoupled
            np.testing.assert_array_equal(pair[0], pair[1])

    def test_equal_states_outside_proposal_both_reject(self, linear2_target):
        cfg = KernelConfig(l=0.45, d=1)
        rng = make_rng(11)
        x = np.array([0.999])
        saw_joint_rejection = False
        pair = (x, x.copy())
        for _ in range(300):
            new_pair, decoupled = coupled_rwm_rwh_step(linear2_target, cfg, pair, rng)
            if new_pair[0] is pair[0] and new_pair[1] is pair[1]:
                saw_joint_rejection = True
                assert not decoupled
            pair = (x, x.copy())
        assert saw_joint_rejection

    def test_decoupling_happens_for_nonuniform(self, linear2_target):
        cfg = KernelConfig(l=3.0, d=30)
        rng = make_rng(12)
        x = sample_iid(linear2_target, 30, rng)
        events = 0
        for _ in range(2000):
            (xn, _), decoupled = coupled_rwm_rwh_step(linear2_target, cfg, (x, x.copy()), rng)
            events += decoupled
            x = xn
        assert events > 0


class TestPseudoRwm:
    def test_interior_uniform_holding_one(self, uniform_target):
        # every component at least sigma from the boundary: J = 1 exactly
        cfg = KernelConfig(l=0.5, d=10)
        rng = make_rng(13)
        x0 = np.full(10, 0.5)
        for _ in range(100):
            step = pseudo_rwm_step(uniform_target, cfg, x0, rng)
            assert step.holding == 1

    def test_one_dim_mean_holding(self, uniform_target):
        # J(x) = 0.75 at x = sigma/2, so E[holding] = 4/3
        cfg = KernelConfig(l=0.4, d=1)
        rng = make_rng(14)
        x0 = np.array([cfg.sigma / 2.0])
        holdings = [pseudo_rwm_step(uniform_target, cfg, x0, rng).holding for _ in range(30_000)]
        assert np.mean(holdings) == pytest.approx(4.0 / 3.0, abs=0.02)

    def test_expansion_reproduces_rwm_path_exactly(self, linear2_target):
        # shared stream: the jump chain consumes draws exactly like the
        # rejections + acceptance it stands for
        cfg = KernelConfig(l=2.0, d=5)
        r1, r2 = make_rng(15), make_rng(15)
        x0 = sample_iid(linear2_target, 5, r1)
        sample_iid(linear2_target, 5, r2)
        path = [x0.copy()]
        x = x0.copy()
        for _ in range(300):
            x, _ = rwm_step(linear2_target, cfg, x, r1)
            path.append(x.copy())
        expanded = []
        x = x0.copy()
        while len(expanded) < len(path):
            step = pseudo_rwm_step(linear2_target, cfg, x, r2)
            expanded.extend([x.copy()] * step.holding)
            x = step.state
        for a, b in zip(path, expanded):
            np.testing.assert_array_equal(a, b)

    def test_matched_iteration_marginals(self, uniform_target):
        # first-component law at iteration 2000, jump chain expanded vs plain
        # chain, independent streams, two-sample KS at the 1% level
        cfg = KernelConfig(l=2.0, d=10)
        n_iter, n_rep = 2000, 400
        rwm_vals = np.empty(n_rep)
        pseudo_vals = np.empty(n_rep)
        rng = make_rng(16)
        for i in range(n_rep):
            x = sample_iid(uniform_target, 10, rng)
            dummy = np.empty(1)
            wins = np.zeros(1, np.int64)
            _loops.run_chain(uniform_target._coeffs, 0, _loops.KIND_RWM, cfg.sigma,
                             10, 10, n_iter, x, rng, dummy, False, dummy, False,
                             0, False, 0, wins)
            rwm_vals[i] = x[0]
        rng = make_rng(17)
        for i in range(n_rep):
            x = sample_iid(uniform_target, 10, rng)
            t = 0
            while True:
                step = pseudo_rwm_step(uniform_target, cfg, x, rng)
                if t + step.holding > n_iter:
                    break
                t += step.holding
                x = step.state
            pseudo_vals[i] = x[0]
        assert stats.ks_2samp(rwm_vals, pseudo_vals).pvalue > 0.01

    def test_stuck_state_cap_raises(self, uniform_target):
        cfg = KernelConfig(l=4.0, d=30, kind="pseudo")
        x = np.full(30, 1e-9)
        with pytest.raises(StuckChainError):
            pseudo_rwm_step(uniform_target, cfg, x, make_rng(18), max_trials=500)


class TestCoupleGeometrics:
    def test_ordering_validation(self):
        with pytest.raises(ValueError):
            couple_geometrics(0.25, 0.5, make_rng(0))
        with pytest.raises(ValueError):
            couple_geometrics(0.5, 0.0, make_rng(0))

    def test_degenerate_ones(self):
        assert couple_geometrics(1.0, 1.0, make_rng(19)) == (1, 1)

    def test_mismatch_probability(self):
        p, q, n = 0.5, 0.25, 200_000
        rng = make_rng(20)
        mism = sum(x != y for x, y in (couple_geometrics(p, q, rng) for _ in range(n)))
        assert mism / n == pytest.approx((p - q) / p, abs=0.004)

    @pytest.mark.parametrize("which,prob", [(0, 0.5), (1, 0.25)])
    def test_marginals_chi_square(self, which, prob):
        rng = make_rng(21 + which)
        n = 50_000
        draws = np.array([couple_geometrics(0.5, 0.25, rng)[which] for _ in range(n)])
        # truncate where the tail cell still expects >= 10 counts
        kmax = int(math.log(10.0 / n) / math.log(1 - prob)) + 1
        observed = np.bincount(np.minimum(draws, kmax), minlength=kmax + 1)[1:]
        ks = np.arange(1, kmax + 1)
        pmf = (1 - prob) ** (ks - 1) * prob
        expected = np.append(pmf[:-1], (1 - prob) ** (kmax - 1)) * n
        res = stats.chisquare(observed, expected)
        assert res.pvalue > 0.01


class TestChainLawInvariants:
    @pytest.mark.parametrize("family,params", [("uniform", ()), ("linear", (2.0,))])
    def test_detailed_balance_d1(self, family, params):
        target = normalize(GSpec(family, params))
        l, d, n = 0.4, 1, 2_000_000
        sigma = l / d
        grid = np.linspace(0.01, 0.99, 50)
        rng = make_rng(23)

        def kernel_to_bin(x, lo, hi):
            z = rng.uniform(-1.0, 1.0, n)
            y = x + sigma * z
            u = rng.random(n)
            logr = np.where((y > 0) & (y < 1), target.g(y) - target.g(x), -np.inf)
            acc = np.log(u) < logr
            return np.mean(acc & (y >= lo) & (y < hi))

        half = (grid[1] - grid[0]) / 2.0
        for xi, yi in [(10, 14), (24, 27), (40, 43), (2, 5)]:
            x, y = grid[xi], grid[yi]
            lhs = float(target.pdf(x)) * kernel_to_bin(x, y - half, y + half)
            rhs = float(target.pdf(y)) * kernel_to_bin(y, x - half, x + half)
            assert lhs == pytest.approx(rhs, abs=1e-3)

    def test_detailed_balance_d2_uniform(self, uniform_target):
        l, d, n = 0.4, 2, 2_000_000
        sigma = l / d
        centers = np.linspace(1 / 14, 13 / 14, 7)
        half = 1 / 14
        rng = make_rng(24)

        def kernel_to_cell(x, cy):
            z = rng.uniform(-1.0, 1.0, (n, 2))
            y = x + sigma * z
            acc = np.all((y > 0) & (y < 1), axis=1)
            inside = np.all(np.abs(y - cy) < half, axis=1)
            return np.mean(acc & inside)

        pairs = [((0, 0), (1, 1)), ((3, 3), (4, 3)), ((6, 6), (5, 6))]
        for (i1, j1), (i2, j2) in pairs:
            x = np.array([centers[i1], centers[j1]])
            y = np.array([centers[i2], centers[j2]])
            lhs = kernel_to_cell(x, y)
            rhs = kernel_to_cell(y, x)
            assert lhs == pytest.approx(rhs, abs=1e-3)

    @pytest.mark.parametrize("family,params", [("uniform", ()), ("linear", (2.0,))])
    def test_stationarity_preserved_ks(self, family, params):
        # i.i.d. stationary starts stay distributed as f after 1000 steps
        target = normalize(GSpec(family, params))
        d, l, n_chains, n_iters = 20, 2.0, 20_000, 1000
        rng = make_rng(25)
        states = target.ppf(rng.random((n_chains, d)))
        _loops.ensemble_chains(target._coeffs, 0, l / d, d, n_iters, states, rng)
        res = stats.kstest(states[:, 0], lambda x: target.cdf(x))
        assert res.pvalue > 0.01

    def test_accept_lower_bound_linear(self, linear2_target):
        # J(x) >= exp(-l g*) 2^(-b) for every sampled stationary state
        d, l, n_states, n_mc = 100, 4.0, 1000, 1000
        cfg = KernelConfig(l=l, d=d)
        rng = make_rng(26)
        for _ in range(n_states):
            x = sample_iid(linear2_target, d, rng)
            p, se = estimate_J(linear2_target, cfg, x, n_mc, rng)
            b = boundary_count(x, l, l, d)
            bound = math.exp(-l * linear2_target.gstar) * 2.0 ** (-b)
            if p > 0.0:
                assert p + 3 * se >= bound
            else:
                # zero hits: exact one-sided binomial upper confidence bound
                assert 1.0 - 0.003 ** (1.0 / n_mc) >= bound

    def test_pseudo_matches_rwm_moments(self, uniform_target):
        # first-component mean/variance at iteration 10^4, d = 20
        d, l, n_iter, n_rep = 20, 2.0, 10_000, 400
        vals = {}
        for label, seed in [("rwm", 27), ("pseudo", 28)]:
            rng = make_rng(seed)
            out = np.empty(n_rep)
            for i in range(n_rep):
                x = sample_iid(uniform_target, d, rng)
                if label == "rwm":
                    dummy = np.empty(1)
                    wins = np.zeros(1, np.int64)
                    _loops.run_chain(uniform_target._coeffs, 0, _loops.KIND_RWM,
                                     l / d, d, d, n_iter, x, rng, dummy, False,
                                     dummy, False, 0, False, 0, wins)
                else:
                    t = 0
                    while True:
                        before = x.copy()
                        total = _loops.pseudo_jumps(uniform_target._coeffs, 0,
                                                    l / d, d, 1, x, rng, 10**9)
                        if t + total > n_iter:
                            # the chain sits at the pre-jump state through
                            # iteration n_iter
                            x = before
                            break
                        t += total
                out[i] = x[0]
            vals[label] = out
        se_mean = math.sqrt(vals["rwm"].var() / n_rep + vals["pseudo"].var() / n_rep)
        assert abs(vals["rwm"].mean() - vals["pseudo"].mean()) < 3 * se_mean
        se_var = math.sqrt(2.0 / n_rep) * max(vals["rwm"].var(), vals["pseudo"].var())
        assert abs(vals["rwm"].var() - vals["pseudo"].var()) < 3 * se_var
