import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdp_dissip import finite_mdp as fm
from mdp_dissip.errors import (
    DivergenceError,
    InputError,
    MultichainError,
    NoSolutionError,
    NotApplicableError,
    SizeError,
    UniquenessError,
)


def single_action(P, c):
    return fm.FiniteMdp(np.asarray(P, dtype=float)[None], np.asarray(c, dtype=float)[:, None])


def eig_stationary(P):
    """Left Perron vector of P via numpy's general eigensolver."""
    w, V = np.linalg.eig(P.T)
    v = np.real(V[:, np.argmin(np.abs(w - 1))])
    return v / v.sum()


def brute_force(mdp):
    best = (np.inf, None)
    for pol in itertools.product(range(mdp.num_actions), repeat=mdp.num_states):
        P = mdp.policy_matrix(pol)
        S = mdp.num_states
        # stationary distribution from the augmented linear system
        Amat = np.vstack([P.T - np.eye(S), np.ones(S)])
        rho = np.linalg.lstsq(Amat, np.r_[np.zeros(S), 1.0], rcond=None)[0]
        value = rho @ mdp.policy_cost(pol)
        if value < best[0] - 1e-12:
            best = (value, np.array(pol))
    return best


@pytest.fixture(params=["mdp_two_state", "mdp_full_support", "mdp_random4"])
def fixture_mdp(request, configs):
    return fm.FiniteMdp.load(configs / f"{request.param}.json")


@pytest.fixture()
def full_support(configs):
    return fm.FiniteMdp.load(configs / "mdp_full_support.json")


class TestModel:
    def test_malformed_fixture(self, configs):
        with pytest.raises(InputError):
            fm.FiniteMdp.load(configs / "mdp_malformed.json")

    def test_negative_probability(self):
        with pytest.raises(InputError):
            single_action([[1.5, -0.5], [0.5, 0.5]], [0, 0])

    def test_cost_shape(self):
        with pytest.raises(InputError):
            fm.FiniteMdp(np.eye(2)[None], np.zeros((3, 1)))

    def test_round_trip(self, fixture_mdp):
        again = fm.FiniteMdp.from_dict(fixture_mdp.to_dict())
        np.testing.assert_array_equal(again.kernel, fixture_mdp.kernel)
        np.testing.assert_array_equal(again.cost, fixture_mdp.cost)

    def test_inconsistent_counts(self, fixture_mdp):
        data = fixture_mdp.to_dict()
        data["num_states"] += 1
        with pytest.raises(InputError):
            fm.FiniteMdp.from_dict(data)

    def test_bad_policy(self, fixture_mdp):
        with pytest.raises(InputError):
            fixture_mdp.policy_matrix([fixture_mdp.num_actions] * fixture_mdp.num_states)

    def test_bad_distribution(self, fixture_mdp):
        with pytest.raises(InputError):
            fm.apply_transition(np.full(fixture_mdp.num_states, 0.6), [0] * fixture_mdp.num_states,
                                fixture_mdp)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_transition_preserves_simplex(self, seed):
        rng = np.random.default_rng(seed)
        S, A = int(rng.integers(1, 6)), int(rng.integers(1, 4))
        kernel = rng.dirichlet(np.ones(S), size=(A, S))
        mdp = fm.FiniteMdp(kernel, rng.random((S, A)))
        rho = rng.dirichlet(np.ones(S))
        out = fm.apply_transition(rho, rng.integers(0, A, S), mdp)
        assert np.all(out >= 0) and abs(out.sum() - 1) <= 1e-12


class TestStationary:
    def test_identity_chain_is_reducible(self):
        with pytest.raises(UniquenessError):
            fm.stationary_distribution([0, 0], single_action(np.eye(2), [0, 1]))

    def test_periodic_swap(self):
        with pytest.raises(UniquenessError):
            fm.stationary_distribution([0, 0], single_action([[0, 1], [1, 0]], [0, 1]))

    def test_doubly_stochastic_uniform(self):
        P = np.array([[0.2, 0.5, 0.3], [0.5, 0.1, 0.4], [0.3, 0.4, 0.3]])
        np.testing.assert_allclose(fm.stationary_distribution([0, 0, 0], single_action(P, [0, 0, 0])),
                                   1 / 3, atol=1e-12)

    @pytest.mark.parametrize("p,q", [(0.3, 0.6), (0.05, 0.9), (0.5, 0.5)])
    def test_two_state_closed_form(self, p, q):
        mdp = single_action([[1 - p, p], [q, 1 - q]], [0, 1])
        rho = fm.stationary_distribution([0, 0], mdp)
        np.testing.assert_allclose(rho, [q / (p + q), p / (p + q)], atol=1e-11)

    def test_against_eigenvector(self, fixture_mdp):
        rng = np.random.default_rng(0)
        for _ in range(5):
            pol = rng.integers(0, fixture_mdp.num_actions, fixture_mdp.num_states)
            P = fixture_mdp.policy_matrix(pol)
            np.testing.assert_allclose(fm.stationary_distribution(pol, fixture_mdp), eig_stationary(P),
                                       atol=1e-10)


class TestSteadyState:
    def test_single_state(self, configs):
        sol = fm.solve_steady_state(fm.FiniteMdp.load(configs / "mdp_single_state.json"))
        assert sol.L0 == 1.0 and sol.policy.tolist() == [1]
        np.testing.assert_array_equal(sol.rho_star, [1.0])

    def test_two_state_values(self, configs):
        sol = fm.solve_steady_state(fm.FiniteMdp.load(configs / "mdp_two_state.json"))
        # policy [1, 1]: P = [[.9, .1], [.8, .2]], costs (1.5, 4.5)
        assert sol.policy.tolist() == [1, 1]
        np.testing.assert_allclose(sol.rho_star, [8 / 9, 1 / 9], atol=1e-11)
        assert sol.L0 == pytest.approx(1.5 * 8 / 9 + 4.5 / 9, abs=1e-11)

    def test_brute_force(self, fixture_mdp):
        value, pol = brute_force(fixture_mdp)
        sol = fm.solve_steady_state(fixture_mdp)
        assert sol.L0 == pytest.approx(value, abs=1e-10)
        assert sol.policy.tolist() == pol.tolist()

    def test_tie_break_lexicographic(self):
        kernel = np.stack([np.full((2, 2), 0.5)] * 2)
        sol = fm.solve_steady_state(fm.FiniteMdp(kernel, np.ones((2, 2))))
        assert sol.policy.tolist() == [0, 0]

    def test_size_guard(self):
        S = 20
        with pytest.raises(SizeError):
            fm.solve_steady_state(fm.FiniteMdp(np.stack([np.eye(S)] * 2), np.zeros((S, 2))))

    def test_absorbing_steady_state(self, configs):
        sol = fm.solve_steady_state(fm.FiniteMdp.load(configs / "mdp_absorbing.json"))
        assert sol.L0 == pytest.approx(0.0, abs=1e-10)
        np.testing.assert_allclose(sol.rho_star, [1, 0, 0], atol=1e-10)

    def test_skips_multichain_policies(self, caplog):
        # action 0 freezes every state, action 1 mixes; cheap action 0 must not win
        kernel = np.stack([np.eye(2), np.full((2, 2), 0.5)])
        mdp = fm.FiniteMdp(kernel, np.array([[0.0, 1.0], [0.0, 2.0]]))
        sol = fm.solve_steady_state(mdp)
        assert [0, 0] in sol.skipped
        assert sol.policy.tolist() != [0, 0]
        assert "skipping policy" in caplog.text

    def test_all_policies_multichain(self):
        with pytest.raises(NoSolutionError):
            fm.solve_steady_state(fm.FiniteMdp(np.eye(2)[None], np.zeros((2, 1))))


class TestAverageCost:
    def test_rvi_matches_enumeration(self, fixture_mdp):
        sol = fm.solve_steady_state(fixture_mdp)
        gain, h, pol = fm.relative_value_iteration(fixture_mdp)
        assert h[0] == 0
        assert fm.bellman_residual(fixture_mdp, gain, h) <= 1e-9
        assert gain == pytest.approx(sol.L0, abs=1e-8)
        assert fm.expected_cost(fm.stationary_distribution(pol, fixture_mdp), pol, fixture_mdp) == \
            pytest.approx(sol.L0, abs=1e-8)

    def test_rvi_multichain(self):
        mdp = fm.FiniteMdp(np.stack([np.eye(2)] * 2), np.array([[0.0, 1.0], [2.0, 3.0]]))
        with pytest.raises(MultichainError):
            fm.relative_value_iteration(mdp, max_iter=1000)

    def test_poisson_gain(self, fixture_mdp):
        sol = fm.solve_steady_state(fixture_mdp)
        gain, h = fm.policy_bias(sol.policy, fixture_mdp)
        assert gain == pytest.approx(sol.L0, abs=1e-10)
        P, c = fixture_mdp.policy_matrix(sol.policy), fixture_mdp.policy_cost(sol.policy)
        np.testing.assert_allclose(gain + h - P @ h, c, atol=1e-10)

    def test_bias_series_matches_formula(self, fixture_mdp):
        sol = fm.solve_steady_state(fixture_mdp)
        _, h = fm.policy_bias(sol.policy, fixture_mdp)
        rng = np.random.default_rng(1)
        for _ in range(5):
            rho0 = rng.dirichlet(np.ones(fixture_mdp.num_states))
            series = fm.bias_value(rho0, sol.policy, fixture_mdp, sol.L0)
            assert series == pytest.approx(rho0 @ h - sol.rho_star @ h, abs=1e-8)

    def test_bias_zero_at_steady_state(self, fixture_mdp):
        sol = fm.solve_steady_state(fixture_mdp)
        assert fm.bias_value(sol.rho_star, sol.policy, fixture_mdp, sol.L0) == pytest.approx(0, abs=1e-9)

    def test_bias_diverges_with_wrong_l0(self, fixture_mdp):
        sol = fm.solve_steady_state(fixture_mdp)
        with pytest.raises(DivergenceError):
            fm.bias_value(sol.rho_star, sol.policy, fixture_mdp, sol.L0 + 0.1)


class TestRotation:
    def test_telescoping(self, fixture_mdp):
        sol = fm.solve_steady_state(fixture_mdp)
        rho0 = np.zeros(fixture_mdp.num_states)
        rho0[-1] = 1.0
        report = fm.telescoping_check(rho0, sol.policy, fixture_mdp, sol.L0, 50)
        assert report and report.max_error <= 1e-8
        assert len(report.values) == 51 and len(report.excess_costs) == 50

    def test_negative_excess_steps(self, full_support):
        sol = fm.solve_steady_state(full_support)
        start = int(np.argmin(full_support.policy_cost(sol.policy)))
        rho0 = np.eye(full_support.num_states)[start]
        report = fm.telescoping_check(rho0, sol.policy, full_support, sol.L0, 50)
        assert report.passed and report.negative_steps

    def test_linear_rotation_average_invariant(self, fixture_mdp):
        sol = fm.solve_steady_state(fixture_mdp)
        rng = np.random.default_rng(4)
        for _ in range(20):
            lam = rng.normal(size=fixture_mdp.num_states) * 10
            assert sol.rho_star @ fm.linear_rotation(lam, sol.policy, fixture_mdp) == \
                pytest.approx(sol.L0, abs=1e-9)

    def test_linear_rotation_input(self, fixture_mdp):
        with pytest.raises(InputError):
            fm.linear_rotation(np.zeros(fixture_mdp.num_states + 1), [0] * fixture_mdp.num_states,
                               fixture_mdp)

    def test_witness(self, fixture_mdp):
        sol = fm.solve_steady_state(fixture_mdp)
        rng = np.random.default_rng(6)
        for lam in [np.zeros(fixture_mdp.num_states)] + [rng.normal(size=fixture_mdp.num_states)
                                                         for _ in range(20)]:
            w = fm.lemma1_witness(fixture_mdp, sol.policy, lam, sol.L0)
            assert len(w.support) >= 2
            assert abs(w.expected_rotated_excess) <= 1e-9
            assert not w.positivity_holds and w.violating_states
            assert w.contradiction_certified

    def test_witness_bias_storage_gives_zero_excess(self, full_support):
        # with lam = bias the rotated excess vanishes on every state
        sol = fm.solve_steady_state(full_support)
        _, h = fm.policy_bias(sol.policy, full_support)
        w = fm.lemma1_witness(full_support, sol.policy, h, sol.L0)
        np.testing.assert_allclose(w.rotated_excess, 0, atol=1e-10)
        assert sorted(w.violating_states) == w.support

    def test_witness_not_applicable_on_dirac(self, configs):
        mdp = fm.FiniteMdp.load(configs / "mdp_absorbing.json")
        sol = fm.solve_steady_state(mdp)
        with pytest.raises(NotApplicableError):
            fm.lemma1_witness(mdp, sol.policy, np.zeros(3), sol.L0)
