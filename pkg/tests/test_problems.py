import numpy as np
import pytest

from imexrfm.features import sample_feature_bank
from imexrfm.geometry import decompose
from imexrfm.model import TrialFunction
from imexrfm.problems import (
    CH_IC_SEED,
    PROBLEMS,
    LinearOpSpec,
    NonlinearSpec,
    apply_linear,
    apply_nonlinear,
    cahn_hilliard_ic,
    make_problem,
)


def d1(f, h=1e-2):
    """Richardson-extrapolated central difference of a function of x."""
    return lambda x: (4 * (f(x + h / 2) - f(x - h / 2)) / h - (f(x + h) - f(x - h)) / (2 * h)) / 3


def dn(f, n, h=1e-2):
    for _ in range(n):
        f = d1(f, h)
    return f


def manufactured(n):
    """n-th derivative of u(x) = 0.6 sin(pi x) + 0.3 cos(2 pi x + 0.4)."""
    return lambda x: (0.6 * np.pi**n * np.sin(np.pi * x + n * np.pi / 2)
                      + 0.3 * (2 * np.pi) ** n * np.cos(2 * np.pi * x + 0.4 + n * np.pi / 2))


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_catalog_names():
    assert set(PROBLEMS) >= {"allen_cahn_1d", "burgers_1d", "kdv_1d", "cahn_hilliard_1d", "allen_cahn_2d"}
    with pytest.raises(ValueError):
        make_problem("navier_stokes")


def test_full_scale_parameters():
    ac = make_problem("allen_cahn_1d")
    assert ac.linear.terms == (((2,), pytest.approx(1e-4)),)
    ch = make_problem("cahn_hilliard_1d")
    assert ch.params["gamma1"] == 0.01 and ch.params["gamma2"] == 1e-6
    assert make_problem("burgers_1d").params["nu"] == pytest.approx(0.03183, abs=1e-5)
    assert make_problem("kdv_1d").params["alpha"] == 0.022
    assert [p.continuity_order for p in map(make_problem, ["allen_cahn_1d", "kdv_1d", "cahn_hilliard_1d"])] == [1, 2, 3]
    assert make_problem("allen_cahn_2d").dim == 2


def test_overrides():
    assert make_problem("allen_cahn_1d", epsilon=0.1).linear.terms[0][1] == pytest.approx(0.01)
    with pytest.raises(TypeError):
        make_problem("allen_cahn_1d", gamma=1.0)


def test_apply_linear_examples():
    v = np.array([1.0, 2.0])
    np.testing.assert_array_equal(apply_linear(LinearOpSpec((((2,), 1.0),)), {(2,): v}), v)
    np.testing.assert_array_equal(apply_linear(LinearOpSpec((((0,), 1.0), ((0,), -1.0))), {(0,): v}), 0.0)
    x = np.linspace(0, 3, 7)
    stacks = {(3,): -np.cos(x)}  # third derivative of sin
    alpha = 0.022
    np.testing.assert_allclose(apply_linear(make_problem("kdv_1d").linear, stacks), alpha**2 * np.cos(x))
    with pytest.raises(KeyError):
        apply_linear(LinearOpSpec((((1,), 1.0),)), {(0,): v})
    with pytest.raises(ValueError):
        LinearOpSpec(())


def test_apply_nonlinear_examples():
    ac = make_problem("allen_cahn_1d").nonlinear
    np.testing.assert_array_equal(apply_nonlinear(ac, {(0,): np.array([0.0, 1.0, -1.0])}), 0.0)
    burgers = make_problem("burgers_1d").nonlinear
    assert apply_nonlinear(burgers, {(0,): np.array([2.0]), (1,): np.array([3.0])})[0] == -6.0
    ch = make_problem("cahn_hilliard_1d").nonlinear
    # u = sin x at x = 0
    assert apply_nonlinear(ch, {(0,): np.array([0.0]), (1,): np.array([1.0]), (2,): np.array([0.0])})[0] == 0.0
    with pytest.raises(KeyError):
        apply_nonlinear(burgers, {(0,): np.array([1.0])})


def test_cahn_hilliard_chain_rule_formula():
    g1 = 0.01
    x = np.linspace(-2, 2, 9)
    u, ux, uxx = np.sin(x), np.cos(x), -np.sin(x)
    got = apply_nonlinear(make_problem("cahn_hilliard_1d").nonlinear, {(0,): u, (1,): ux, (2,): uxx})
    want = g1 * (6 * u * np.cos(x) ** 2 + (3 * u**2 - 1) * (-np.sin(x)))
    np.testing.assert_allclose(got, want, rtol=1e-14, atol=1e-17)
    fd = dn(lambda v: g1 * (np.sin(v) ** 3 - np.sin(v)), 2)(x)
    assert rel(got, fd) <= 1e-6


def test_nonlinear_spec_validation():
    with pytest.raises(ValueError):
        NonlinearSpec("type_i", "allen_cahn_well", outer=(1,))
    with pytest.raises(ValueError):
        NonlinearSpec("type_ii", "ch_well")
    with pytest.raises(ValueError):
        NonlinearSpec("type_ii", "ch_well", outer=(3,))
    with pytest.raises(ValueError):
        NonlinearSpec("type_iii")


TEXTBOOK = {
    # u_t written out directly, derivatives by finite differences
    "allen_cahn_1d": lambda u, x: 1e-4 * dn(u, 2)(x) + 5 * (u(x) - u(x) ** 3),
    "burgers_1d": lambda u, x: dn(u, 2)(x) / (10 * np.pi) - u(x) * dn(u, 1)(x),
    "kdv_1d": lambda u, x: -(0.022**2) * dn(u, 3)(x) - u(x) * dn(u, 1)(x),
    "cahn_hilliard_1d": lambda u, x: -1e-6 * dn(u, 4)(x) + dn(lambda v: 0.01 * (u(v) ** 3 - u(v)), 2)(x),
    "heat_1d": lambda u, x: dn(u, 2)(x),
}


@pytest.mark.parametrize("name", sorted(TEXTBOOK))
def test_split_consistency_1d(name):
    p = make_problem(name)
    x = np.linspace(-0.95, 0.95, 23)
    stacks = {(n,): manufactured(n)(x) for n in range(5)}
    got = p.rhs(stacks)
    assert rel(got, TEXTBOOK[name](manufactured(0), x)) <= 1e-5


def test_split_consistency_2d():
    p = make_problem("allen_cahn_2d")

    def u(x, y):
        return np.sin(np.pi * x) * np.cos(np.pi * y) + 0.2 * np.sin(2 * np.pi * y)

    x, y = np.meshgrid(np.linspace(-0.9, 0.9, 7), np.linspace(-0.8, 0.8, 5))
    x, y = x.ravel(), y.ravel()
    uxx = dn(lambda v: u(v, y), 2)(x)
    uyy = dn(lambda v: u(x, v), 2)(y)
    fd = 1e-4 * (uxx + uyy) + u(x, y) - u(x, y) ** 3
    pi2 = np.pi**2
    stacks = {
        (0, 0): u(x, y),
        (2, 0): -pi2 * np.sin(np.pi * x) * np.cos(np.pi * y),
        (0, 2): -pi2 * np.sin(np.pi * x) * np.cos(np.pi * y) - 0.2 * 4 * pi2 * np.sin(2 * np.pi * y),
    }
    assert rel(p.rhs(stacks), fd) <= 1e-5


@pytest.mark.parametrize("name", ["burgers_1d", "cahn_hilliard_1d"])
def test_type_ii_matches_nested_differences_on_trial_functions(name):
    p = make_problem(name)
    bank = sample_feature_bank(decompose(p.domain, [2]), 8, 1.5, seed=4)
    rng = np.random.default_rng(0)
    x = np.linspace(-0.9, -0.1, 9)  # inside subdomain 0, away from its faces
    order = sum(p.nonlinear.outer)
    for _ in range(5):
        f = TrialFunction(bank, rng.standard_normal(bank.n_features) / 4)
        stacks = {(n,): f(x, n) for n in range(3)}
        got = apply_nonlinear(p.nonlinear, stacks)
        if name == "burgers_1d":
            fd = dn(lambda v: -0.5 * f(v) ** 2, order, 1e-3)(x)
        else:
            fd = dn(lambda v: 0.01 * (f(v) ** 3 - f(v)), order, 1e-3)(x)
        assert rel(got, fd) <= 1e-5


def test_cahn_hilliard_realization_is_fixed():
    a, b = make_problem("cahn_hilliard_1d"), make_problem("cahn_hilliard_1d")
    x = np.linspace(-1, 1, 50)[:, None]
    np.testing.assert_array_equal(a.initial(x), b.initial(x))
    info = cahn_hilliard_ic(CH_IC_SEED)
    assert a.initial_info["n"] == info["n"] and all(1 <= n <= 8 for n in info["n"])
    assert all(0 <= v <= 1 for v in info["amplitude"])
    assert all(0 < v < 2 * np.pi for v in info["phase"])
    assert make_problem("cahn_hilliard_1d", ic_seed=5).initial_info["seed"] == 5


def test_initial_conditions():
    x = np.array([[-1.0], [0.0], [0.5]])
    np.testing.assert_allclose(make_problem("allen_cahn_1d").initial(x), [-1.0, 0.0, 0.25 * np.cos(np.pi / 2)])
    np.testing.assert_allclose(make_problem("burgers_1d").initial(x), [0.0, 0.0, -1.0], atol=1e-15)
    p2 = make_problem("allen_cahn_2d")
    assert p2.initial(np.array([[0.5, 0.5]]))[0] == pytest.approx(0.05)


def test_heat_exact_solution():
    p = make_problem("heat_1d")
    x = np.linspace(-1, 1, 5)[:, None]
    np.testing.assert_allclose(p.exact(x, 0.0), p.initial(x))
    np.testing.assert_allclose(p.exact(x, 0.3), np.exp(-np.pi**2 * 0.3) * p.initial(x))
