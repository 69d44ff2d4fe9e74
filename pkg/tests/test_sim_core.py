import numpy as np
import pytest
from hypothesis import given, strategies as st

from stochgrowth.errors import ConfigError, ConvergenceError, DomainError, ValidationError
from stochgrowth.sim_core import (
    EmpiricalDistribution,
    RandomMapEconomy,
    SolowParams,
    equality_in_probability_check,
    estimate_stationary,
    extreme_cdf_monotonicity,
    simulate_chain,
    simulate_population,
    solow_fixed_point,
    solow_step,
    stationary_uniqueness,
)

P = SolowParams(beta1=0.3, beta2=0.1, prod_exponent=0.5)


def affine(a=(0.0, 1.0), b=(0.0, 0.5), bounds=(0.0, 2.0)):
    return RandomMapEconomy("affine", {"A": a, "B": b}, bounds)


# --- Solow baseline ---------------------------------------------------------


def test_solow_step_examples():
    assert solow_step(0.0, P) == 0.0
    assert solow_step(9.0, P) == pytest.approx(9.0, abs=1e-12)
    assert solow_step(1.0, P) == pytest.approx(1.2, abs=1e-12)


def test_solow_step_negative_state():
    with pytest.raises(DomainError):
        solow_step(-1.0, P)


def test_solow_fixed_point_matches_hand_solution():
    fp = solow_fixed_point(P, tol=1e-10)
    assert fp.x_star == pytest.approx(9.0, rel=1e-8)
    assert abs(solow_step(fp.x_star, P) - fp.x_star) <= 1e-10
    assert fp.B_S == pytest.approx(0.5 / 3.0, rel=1e-8)
    assert fp.A_S == pytest.approx(1.5, rel=1e-8)


def test_solow_fixed_point_iteration_cap():
    with pytest.raises(ConvergenceError):
        solow_fixed_point(P, tol=1e-14, max_iter=3)


@given(
    st.floats(0.05, 1.0), st.floats(0.05, 1.0), st.floats(0.1, 0.9)
)
def test_solow_fixed_point_agrees_with_closed_form(b1, b2, e):
    p = SolowParams(b1, b2, e)
    tol = 1e-10
    fp = solow_fixed_point(p, tol=tol)
    assert abs(solow_step(fp.x_star, p) - fp.x_star) <= tol
    # closed form (b1/b2)^(1/(1-e)) as an independent oracle; the map's slope
    # at the fixed point is 1 - b2 (1 - e), which bounds |x - x*| by the residual
    exact = (b1 / b2) ** (1.0 / (1.0 - e))
    assert abs(fp.x_star - exact) <= 2 * tol / (b2 * (1.0 - e)) + 1e-12 * exact


def test_solow_params_validation():
    with pytest.raises(ValidationError):
        SolowParams(0.0, 0.1, 0.5)
    with pytest.raises(ValidationError):
        SolowParams(0.3, 0.1, 1.0)


# --- economy construction ---------------------------------------------------


def test_economy_from_config_round_trip():
    econ = RandomMapEconomy.from_config({"kind": "affine", "state_bounds": [0, 1], "noise": {"A": [0, 1], "B": 0.25}})
    again = RandomMapEconomy.from_config(econ.to_config())
    assert again.to_config() == econ.to_config()


def test_economy_bad_bounds_names_key():
    with pytest.raises(ConfigError) as err:
        RandomMapEconomy.from_config({"state_bounds": [1.0, 1.0]})
    assert "state_bounds" in str(err.value)


def test_economy_unknown_key():
    with pytest.raises(ConfigError) as err:
        RandomMapEconomy.from_config({"bounds": [0, 1]})
    assert err.value.key == "economy.bounds"


def test_economy_rejects_negative_slope():
    with pytest.raises((ConfigError, ValidationError)):
        RandomMapEconomy("affine", {"A": (-1.0, 1.0), "B": (0.0, 0.5)}, (0.0, 2.0))


def test_logistic_and_table_economies_stay_in_bounds():
    logi = RandomMapEconomy.from_config(
        {"kind": "logistic", "state_bounds": [0, 1], "noise": {"steepness": [1, 5], "center": [0.2, 0.8]}}
    )
    table = RandomMapEconomy.from_config(
        {"kind": "table", "state_bounds": [0, 1],
         "table": {"nodes": [0, 1], "values": [[0.1, 0.5], [0.3, 0.9]], "weights": [0.5, 0.5]}}
    )
    for econ in (logi, table):
        tr = simulate_chain(econ, 0.5, 200, seed=1)
        assert np.all((tr.states >= 0) & (tr.states <= 1))


# --- chains -----------------------------------------------------------------


def test_chain_horizon_zero():
    tr = simulate_chain(affine(), 0.7, 0, seed=0)
    assert tr.states.tolist() == [0.7]


def test_chain_degenerate_noise_hand_iteration():
    econ = affine(a=0.5, b=0.25)
    tr = simulate_chain(econ, 1.0, 3, seed=0)
    np.testing.assert_allclose(tr.states, [1.0, 0.75, 0.625, 0.5625], rtol=0, atol=1e-15)


def test_chain_reproducible_and_seed_sensitive():
    econ = affine()
    a = simulate_chain(econ, 0.0, 50, seed=11).states
    b = simulate_chain(econ, 0.0, 50, seed=11).states
    c = simulate_chain(econ, 0.0, 50, seed=12).states
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_chain_initial_outside_bounds():
    with pytest.raises(DomainError):
        simulate_chain(affine(), 3.0, 5, seed=0)


@given(st.integers(0, 2**31 - 1), st.floats(0.0, 2.0))
def test_chain_state_bound_closure(seed, x0):
    econ = affine(a=(0.0, 1.5), b=(0.0, 1.0))
    tr = simulate_chain(econ, x0, 40, seed)
    assert tr.states.size == 41
    assert np.all((tr.states >= 0.0) & (tr.states <= 2.0))


def test_clipping_is_counted():
    econ = affine(a=(1.5, 2.0), b=(0.5, 1.0))
    tr = simulate_chain(econ, 1.0, 20, seed=3)
    assert tr.n_clipped > 0
    assert tr.states.max() <= 2.0


def test_trajectory_csv_header():
    text = simulate_chain(affine(), 0.0, 2, seed=0).to_csv()
    assert text.splitlines()[0] == "t,value"
    assert len(text.splitlines()) == 4


def test_population_shape_and_bounds():
    econ = RandomMapEconomy("affine", {"A": (0.0, 1.0), "B": (0.0, 0.5)}, (0.0, 2.0), n_individuals=50)
    pop = simulate_population(econ, 10, seed=4)
    assert pop.shape == (11, 50)
    assert np.all((pop >= 0) & (pop <= 2))


# --- extreme-start CDF monotonicity -----------------------------------------


def test_extreme_cdf_identity_maps_constant_rows():
    econ = affine(a=1.0, b=0.0, bounds=(0.0, 1.0))
    res = extreme_cdf_monotonicity(econ, 1, 200, [0.0, 0.5, 1.0], seed=0)
    np.testing.assert_array_equal(res.cdf_inf[0], res.cdf_inf[1])
    np.testing.assert_array_equal(res.cdf_sup[0], res.cdf_sup[1])


def test_extreme_cdf_top_threshold_is_one():
    res = extreme_cdf_monotonicity(affine(bounds=(0.0, 1.0)), 5, 1000, [0.2, 1.0], seed=1)
    assert np.all(res.cdf_inf[:, -1] == 1.0)


def test_extreme_cdf_monotone_on_unit_interval():
    grid = np.linspace(0.05, 0.95, 10)
    res = extreme_cdf_monotonicity(affine(bounds=(0.0, 1.0)), 6, 10_000, grid, seed=5)
    assert res.is_monotone(3.0), res.violations(3.0)


def test_decreasing_table_map_rejected():
    with pytest.raises(ConfigError) as err:
        RandomMapEconomy.from_config(
            {"kind": "table", "state_bounds": [0, 1], "table": {"nodes": [0, 1], "values": [[1.0, 0.0]]}}
        )
    assert "monotone" in str(err.value)


def test_extreme_cdf_argument_errors():
    with pytest.raises(ValidationError):
        extreme_cdf_monotonicity(affine(), 3, 1000, [], seed=0)
    with pytest.raises(ValidationError):
        extreme_cdf_monotonicity(affine(), 3, 10, [0.5], seed=0)


# --- stationary law ---------------------------------------------------------


def test_stationary_degenerate_contraction_hits_fixed_point():
    econ = affine(a=0.5, b=0.25)
    dist = estimate_stationary(econ, burn_in=200, n_samples=500, seed=0)
    np.testing.assert_allclose(dist.samples, 0.5, atol=1e-9)


def test_stationary_singleton():
    dist = estimate_stationary(affine(), 10, 1, seed=0)
    assert len(dist) == 1


def test_stationary_argument_checks():
    with pytest.raises(ValidationError):
        estimate_stationary(affine(), 0, 10, seed=0)


def test_uniqueness_small_sample_passes_level_001():
    rep = stationary_uniqueness(affine(), burn_in=200, n_samples=20_000, seed=2)
    assert rep.p_value > 0.01
    assert rep.ks_distance < 0.02


def test_stationary_mean_matches_affine_moment():
    # E[X] = E[B] / (1 - E[A]) for the unclipped affine chain: 0.25 / 0.5
    dist = estimate_stationary(affine(), 300, 50_000, seed=8)
    assert dist.mean() == pytest.approx(0.5, abs=0.01)


# --- equality in probability ------------------------------------------------


def test_equality_full_bounds():
    chk = equality_in_probability_check(affine(), (0.0, 2.0), 10, 500, seed=0)
    assert chk.p_inf_in == 1.0


def test_equality_affine_subset_both_positive():
    chk = equality_in_probability_check(affine(), (0.1, 0.3), 50, 10_000, seed=0)
    assert chk.holds
    assert chk.p_inf_in > 0 and chk.p_sup_out > 0


def test_equality_identity_map_flags_violation():
    chk = equality_in_probability_check(affine(a=1.0, b=0.0), (0.5, 1.5), 10, 200, seed=0)
    assert chk.p_inf_in == 0.0
    assert not chk.holds


def test_equality_subset_outside_bounds():
    with pytest.raises(ValidationError):
        equality_in_probability_check(affine(), (-1.0, 0.5), 10, 100, seed=0)


# --- empirical distribution -------------------------------------------------


def test_empirical_weights_must_sum_to_one():
    with pytest.raises(ValidationError):
        EmpiricalDistribution(np.array([1.0, 2.0]), np.array([0.5, 0.6]))


def test_empirical_cdf_and_csv():
    d = EmpiricalDistribution(np.array([3.0, 1.0, 2.0]))
    assert d.cdf(2.0) == pytest.approx(2 / 3)
    assert d.to_csv().splitlines()[0] == "value,weight"
