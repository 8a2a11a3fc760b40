import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from superstab import (
    ConstantBound,
    Element,
    ExactExponential,
    IdentityMap,
    Instance,
    Perturbed,
    SemigroupDescriptor,
    SeriesDivergenceError,
    SuperstabError,
    baker_residual,
    ger_residual,
    jung_alpha,
    jung_alpha_terms,
    jung_sandwich,
)
from superstab.baselines import BOUNDED, NEAR_EXPONENTIAL, NEITHER, sandwich_csv_rows
from superstab.presets import make_jung

POS = SemigroupDescriptor(kind="pos_real")


def mult_triples(points):
    return [(x, y, x * y) for x in points for y in points]


def add_triples(points):
    return [(x, y, x + y) for x in points for y in points]


# -- baker ----------------------------------------------------------------------


def test_baker_constant_one():
    points = [1.0, 2.0, 4.0]
    values = {p: 0.0 for p in points}
    values.update({x * y: 0.0 for x, y, _ in mult_triples(points)})
    residual, label = baker_residual(values, mult_triples(points))
    assert residual == 0.0 and label == NEAR_EXPONENTIAL


def test_baker_exact_multiplicative_exponential():
    # f(z) = z^2 satisfies f(xy) = f(x) f(y) on the multiplicative pairing
    points = [1.0, 2.0, 3.0]
    keys = set(points) | {x * y for x, y, _ in mult_triples(points)}
    values = {k: 2.0 * math.log(k) for k in keys}
    residual, label = baker_residual(values, mult_triples(points))
    assert residual <= 1e-9 and label == NEAR_EXPONENTIAL


def test_baker_bounded_constant():
    points = [1.0, 2.0]
    keys = set(points) | {x * y for x, y, _ in mult_triples(points)}
    values = {k: math.log(0.5) for k in keys}
    residual, label = baker_residual(values, mult_triples(points))
    assert math.isclose(residual, 0.25, rel_tol=1e-12)
    assert label == BOUNDED


def test_baker_neither():
    # e^x on multiplicative pairs: neither multiplicative nor bounded
    points = [1.0, 2.0, 4.0]
    keys = set(points) | {x * y for x, y, _ in mult_triples(points)}
    values = {k: float(k) for k in keys}
    _, label = baker_residual(values, mult_triples(points))
    assert label == NEITHER


def test_baker_missing_point():
    with pytest.raises(SuperstabError):
        baker_residual({1.0: 0.0}, [(1.0, 2.0, 2.0)])


# -- ger ------------------------------------------------------------------------


def test_ger_exact_exponential_multiplicative():
    points = [0.5, 1.0, 2.0]
    keys = set(points) | {x + y for x, y, _ in add_triples(points)}
    values = {k: 1.7 * k for k in keys}  # f = e^{1.7 x} on additive pairs
    assert ger_residual(values, add_triples(points)) <= 1e-12


def test_ger_literal_additive_constant():
    points = [1.0, 2.0]
    keys = set(points) | {x + y for x, y, _ in add_triples(points)}
    values = {k: math.log(2.0) for k in keys}
    residual = ger_residual(values, add_triples(points), form="literal_additive")
    assert math.isclose(residual, 0.5, rel_tol=1e-12)


def test_ger_scaled_exponential_matches_oracle():
    # f(x) = e^x (1 + 0.01): quotient is 1/1.01 on every additive pair
    points = [0.5, 1.0, 1.5]
    keys = set(points) | {x + y for x, y, _ in add_triples(points)}
    values = {k: k + math.log(1.01) for k in keys}
    residual = ger_residual(values, add_triples(points))
    assert math.isclose(residual, 0.01 / 1.01, rel_tol=1e-12)


def test_ger_rejects_unknown_form():
    with pytest.raises(ValueError):
        ger_residual({1.0: 0.0}, [(1.0, 1.0, 1.0)], form="harmonic")


# -- the alpha series -------------------------------------------------------------


def test_alpha_matches_brute_force_partial_sum():
    value = jung_alpha(2.0)
    brute = oracles.alpha_partial_sum(2.0, 10)
    assert abs(value - brute) <= 1e-12


def test_alpha_term_count_reported():
    value, terms = jung_alpha_terms(2.0, tol=1e-15)
    assert 5 <= terms <= 8
    assert math.isclose(value, 0.6328430180437863, rel_tol=1e-15)


@pytest.mark.parametrize("x", [2.0, 3.0, 5.0])
def test_alpha_self_consistency(x):
    # reindexing the series gives alpha(x) = (1 + alpha(x^2)) / x
    assert abs(jung_alpha(x) - (1.0 + jung_alpha(x * x)) / x) <= 1e-12


def test_alpha_leading_term_dominates():
    assert abs(jung_alpha(1e6) * 1e6 - 1.0) <= 1e-5


def test_alpha_monotone_decreasing():
    assert jung_alpha(2.0) > jung_alpha(3.0) > jung_alpha(5.0)


@given(st.floats(min_value=1.05, max_value=1e5))
@settings(max_examples=80)
def test_alpha_recursion_property(x):
    assert abs(jung_alpha(x) - (1.0 + jung_alpha(x * x)) / x) <= 1e-11 * jung_alpha(x)


@pytest.mark.parametrize("x", [1.0, 0.5, -2.0])
def test_alpha_diverges_at_or_below_one(x):
    with pytest.raises(SeriesDivergenceError):
        jung_alpha(x)


# -- the sandwich ------------------------------------------------------------------


def exact_jung_instance(c=0.9):
    return Instance(
        semigroup=POS,
        f=ExactExponential(c=c),
        g=IdentityMap(),
        psi=ConstantBound(delta=0.0),
        grid=tuple(Element.from_real(float(v)) for v in range(1, 9)),
    )


@pytest.mark.parametrize("delta", [0.05, 0.3, 0.9])
def test_sandwich_exact_instance(delta):
    checks = jung_sandwich(exact_jung_instance(), delta)
    assert checks and all(c.holds for c in checks)
    for c in checks:
        assert math.isclose(c.ratio, 1.0, rel_tol=1e-9)
        assert c.lower <= 1.0 <= c.upper


@pytest.mark.parametrize("delta", [0.0, 1.0, -0.1, 1.5])
def test_sandwich_rejects_delta_outside_open_interval(delta):
    with pytest.raises(ValueError):
        jung_sandwich(exact_jung_instance(), delta)


def test_sandwich_perturbed_full_oracle():
    delta = 0.1
    inst = make_jung(delta=delta, c=1.0)
    amp = inst.f.amplitude
    checks = jung_sandwich(inst, delta)
    assert all(c.holds for c in checks)

    # oracle: base from the deep-orbit limit at the identity, alpha from
    # partial sums, both sides via plain powers
    log_a = oracles.orbit_limit_pos(1.0, amp, -1, 8.0, 1.0, n=20)
    for c in checks:
        alpha = oracles.alpha_partial_sum(c.x, 12)
        ratio = math.exp(c.x * log_a) / math.exp(oracles.log_f_pos(1.0, c.x, amp=amp, sign=-1))
        assert math.isclose(c.alpha, alpha, rel_tol=1e-12)
        assert math.isclose(c.ratio, ratio, rel_tol=1e-9)
        assert (1.0 - delta) ** alpha <= ratio <= (1.0 + delta) ** alpha


def test_sandwich_requires_identity_exponent():
    inst = make_jung(delta=0.1)
    bad = Instance(
        semigroup=SemigroupDescriptor(kind="free_monoid", generators=("u",)),
        f=ExactExponential(c=1.0, bases=(2.0,)),
        g=__import__("superstab").MultiplicativeForm(bases=(2.0,)),
        psi=ConstantBound(delta=0.0),
        grid=(Element.from_exponents((1,)),),
    )
    with pytest.raises(ValueError):
        jung_sandwich(bad, 0.1)
    # and the bound spec must fit under delta
    with pytest.raises(ValueError):
        jung_sandwich(inst, 0.05)  # instance carries delta = 0.1 > 0.05


def test_sandwich_rejects_violating_sample():
    inst = Instance(
        semigroup=POS,
        f=Perturbed(base=ExactExponential(c=1.0), family="inv_square_log", amplitude=0.2, sign=1),
        g=IdentityMap(),
        psi=ConstantBound(delta=0.1),
        grid=tuple(Element.from_real(float(v)) for v in range(1, 9)),
    )
    with pytest.raises(SuperstabError):
        jung_sandwich(inst, 0.1)


def test_sandwich_csv_rows():
    checks = jung_sandwich(exact_jung_instance(), 0.2)
    rows = sandwich_csv_rows(checks)
    assert len(rows) == len(checks)
    assert rows[0][0] == checks[0].x and rows[0][5] == checks[0].holds
