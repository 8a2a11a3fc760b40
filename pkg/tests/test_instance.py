import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from superstab import (
    BoundedSin,
    ConstantBound,
    CoverageError,
    Element,
    ExactExponential,
    IdentityMap,
    Instance,
    LinearForm,
    MultiplicativeForm,
    Perturbed,
    SemigroupDescriptor,
    SeparableBound,
    TableFunction,
    anchor_candidates,
    eval_g,
    eval_log_f,
    eval_psi,
    instance_from_obj,
    validate_instance,
)
from superstab.instance import log_f_values, orbit_log_f, orbit_psi_tilde
from superstab.presets import make_perturbed_cor23

POS = SemigroupDescriptor(kind="pos_real")
FREE = SemigroupDescriptor(kind="free_monoid", generators=("u", "v"))


def real_grid(values):
    return tuple(Element.from_real(v) for v in values)


def pos_instance(f, g=None, psi=None, grid=range(1, 9)):
    return Instance(
        semigroup=POS,
        f=f,
        g=g or IdentityMap(),
        psi=psi or ConstantBound(delta=0.0),
        grid=real_grid(grid),
    )


# -- evaluation ----------------------------------------------------------------


def test_eval_log_f_exact():
    inst = pos_instance(ExactExponential(c=1.0))
    assert eval_log_f(inst, Element.from_real(3.0)) == 3.0


def test_eval_log_f_constant_one():
    inst = pos_instance(ExactExponential(c=0.0))
    assert eval_log_f(inst, Element.from_real(17.5)) == 0.0


def test_eval_log_f_perturbed_matches_closed_form():
    inst = pos_instance(
        Perturbed(base=ExactExponential(c=1.0), family="inv_square_log", amplitude=0.1, sign=1)
    )
    got = eval_log_f(inst, Element.from_real(2.0))
    want = oracles.log_f_pos(1.0, 2.0, amp=0.1, sign=1)
    assert math.isclose(got, want, rel_tol=1e-15)
    assert math.isclose(got, 2.0 + math.log(1.025), rel_tol=1e-12)


def test_eval_g_identity():
    inst = pos_instance(ExactExponential(c=1.0))
    assert eval_g(inst, Element.from_real(2.0)) == 2.0


def test_eval_g_linear_form():
    inst = Instance(
        semigroup=FREE,
        f=ExactExponential(c=0.0, bases=(1.0, 1.0)),
        g=LinearForm(weights=(1.0, 1.0)),
        psi=ConstantBound(delta=0.0),
        grid=(Element.from_exponents((2, 3)),),
    )
    assert eval_g(inst, Element.from_exponents((2, 3))) == 5.0


def test_eval_g_bounded_family():
    inst = pos_instance(ExactExponential(c=1.0), g=BoundedSin(amplitude=1.0, frequency=1.0))
    for v in (0.5, 1.0, 2.0, 7.3):
        assert abs(eval_g(inst, Element.from_real(v))) <= 1.0


def test_eval_g_mult_form_negative_base():
    inst = Instance(
        semigroup=FREE,
        f=ExactExponential(c=1.0, bases=(-2.0, 1.5)),
        g=MultiplicativeForm(bases=(-2.0, 1.5)),
        psi=ConstantBound(delta=0.0),
        grid=(Element.from_exponents((1, 0)), Element.from_exponents((1, 1))),
    )
    assert math.isclose(eval_g(inst, Element.from_exponents((1, 0))), -2.0, rel_tol=1e-15)
    assert math.isclose(eval_g(inst, Element.from_exponents((1, 1))), -3.0, rel_tol=1e-15)


def test_eval_psi_constant():
    inst = pos_instance(ExactExponential(c=1.0), psi=ConstantBound(delta=0.5))
    x, y = Element.from_real(2.0), Element.from_real(3.0)
    assert eval_psi(inst, x, y) == 0.5
    assert eval_psi(inst, x, y, tilde=True) == 1.5


def test_eval_psi_tilde_of_zero_bound():
    inst = pos_instance(ExactExponential(c=1.0))
    assert eval_psi(inst, Element.from_real(2.0), Element.from_real(5.0), tilde=True) == 1.0


@given(st.floats(min_value=0.0, max_value=1e6), st.floats(min_value=1.0, max_value=50.0))
def test_psi_tilde_is_exactly_one_plus_psi(delta, point):
    # the tilde weight is the single operation 1.0 + psi; the literal
    # difference-form identity cannot survive rounding for psi near 1e-8
    inst = pos_instance(ExactExponential(c=1.0), psi=ConstantBound(delta=delta), grid=[point])
    x = y = Element.from_real(point)
    assert eval_psi(inst, x, y, tilde=True) == 1.0 + eval_psi(inst, x, y)


def test_psi_tilde_difference_at_representative_values():
    for delta in (0.0, 0.5, 2.0):
        inst = pos_instance(ExactExponential(c=1.0), psi=ConstantBound(delta=delta), grid=[2.0])
        x = y = Element.from_real(2.0)
        assert eval_psi(inst, x, y, tilde=True) - eval_psi(inst, x, y) == 1.0


# -- anchors -------------------------------------------------------------------


def test_anchor_candidates_identity_grid():
    inst = pos_instance(ExactExponential(c=1.0), grid=[0.5, 1.0, 2.0, 4.0])
    got = [(a.real, g) for a, g in anchor_candidates(inst)]
    assert got == [(4.0, 4.0), (2.0, 2.0)]


def test_anchor_candidates_bounded_g_empty():
    inst = pos_instance(ExactExponential(c=1.0), g=BoundedSin(amplitude=1.0))
    assert anchor_candidates(inst) == []


def test_anchor_candidates_linear_form():
    inst = Instance(
        semigroup=SemigroupDescriptor(kind="free_monoid", generators=("u",)),
        f=ExactExponential(c=0.0, bases=(1.0,)),
        g=LinearForm(weights=(2.0,)),
        psi=ConstantBound(delta=0.0),
        grid=(
            Element.from_exponents((0,)),
            Element.from_exponents((1,)),
            Element.from_exponents((3,)),
        ),
    )
    got = [(a.exp, g) for a, g in anchor_candidates(inst)]
    assert got == [((3,), 6.0), ((1,), 2.0)]


@given(st.lists(st.floats(min_value=0.1, max_value=50.0), min_size=1, max_size=12, unique=True))
@settings(max_examples=50)
def test_anchor_candidates_matches_brute_force(values):
    inst = pos_instance(ExactExponential(c=1.0), grid=values)
    got = {a.real for a, _ in anchor_candidates(inst)}
    want = {v for v in values if abs(v) > 1.0}
    assert got == want


def test_anchor_ties_break_on_serialized_order():
    # equal |g| values sort by the serialized element form
    inst = Instance(
        semigroup=FREE,
        f=ExactExponential(c=1.0, bases=(2.0, 2.0)),
        g=MultiplicativeForm(bases=(2.0, 2.0)),
        psi=ConstantBound(delta=0.0),
        grid=(Element.from_exponents((1, 0)), Element.from_exponents((0, 1))),
    )
    got = [a.exp for a, _ in anchor_candidates(inst)]
    assert got == [(0, 1), (1, 0)]


# -- validation ----------------------------------------------------------------


def test_validate_exact_instance(exact_pos_instance):
    report = validate_instance(exact_pos_instance)
    assert report.hypothesis_holds
    assert report.monotonicity_holds
    assert report.anchor_set_nonempty
    assert report.worst_violation <= 1e-12


def test_validate_exact_free_instance(exact_free_instance):
    report = validate_instance(exact_free_instance)
    assert report.hypothesis_holds
    assert report.worst_violation <= 1e-12


def test_validate_constant_bound_always_monotone():
    inst = pos_instance(ExactExponential(c=1.0), psi=ConstantBound(delta=0.5))
    report = validate_instance(inst)
    assert report.monotonicity_holds
    assert all(ok for _, ok in report.per_anchor_monotonicity)


def test_validate_rejects_increasing_separable_bound():
    inst = pos_instance(
        ExactExponential(c=1.0),
        psi=SeparableBound(scale=0.1, x_power=0.0, y_power=1.0),
        grid=[1.0, 2.0, 4.0],
    )
    report = validate_instance(inst)
    assert not report.monotonicity_holds
    mono = [f for f in report.failures if f.kind == "monotonicity"]
    assert mono and mono[0].anchor is not None and mono[0].x is not None


def test_validate_perturbed_matches_brute_force():
    inst = make_perturbed_cor23(delta=0.2, c=1.0)
    amp = inst.f.amplitude
    report = validate_instance(inst, orbit_depth=3)
    assert report.hypothesis_holds

    # independent worst violation: scalar loops over the same pair set
    anchors = [a for a, _ in anchor_candidates(inst)]
    worst = -math.inf
    checked = 0
    y_levels = [(None, 0)] + [(a, k) for a in anchors for k in range(1, 4)]
    for anchor, k in y_levels:
        for x in (p.real for p in inst.grid):
            for y0 in (p.real for p in inst.grid):
                y = (anchor.real**k) * y0 if anchor is not None else y0
                r = math.expm1(
                    oracles.log_f_pos(1.0, x * y, amp=amp)
                    - x * oracles.log_f_pos(1.0, y, amp=amp)
                )
                worst = max(worst, max(-r, r - 0.2))
                checked += 1
    assert checked == report.checked_pairs
    assert math.isclose(worst, report.worst_violation, rel_tol=1e-9, abs_tol=1e-15)
    assert worst <= 0.2


def test_validate_reports_violating_pair():
    # positive-sign perturbation pushes the ratio below 1 for x > 1
    inst = pos_instance(
        Perturbed(base=ExactExponential(c=1.0), family="inv_square_log", amplitude=0.1, sign=1),
        psi=ConstantBound(delta=0.2),
        grid=[1.0, 2.0, 4.0, 8.0],
    )
    report = validate_instance(inst)
    assert not report.hypothesis_holds
    assert report.worst_violation > 1e-9
    ratio_failures = [f for f in report.failures if f.kind == "ratio"]
    assert ratio_failures and ratio_failures[0].x is not None


# -- tables --------------------------------------------------------------------


def table_instance():
    grid_vals = [1.0, 2.0, 4.0]
    entries = []
    for v in [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0]:
        entries.append((Element.from_real(v), math.exp(v)))
    return Instance(
        semigroup=POS,
        f=TableFunction(entries=tuple(entries), orbit_depth=2),
        g=IdentityMap(),
        psi=ConstantBound(delta=0.0),
        grid=real_grid(grid_vals),
    )


def test_table_function_eval_and_miss():
    inst = table_instance()
    assert math.isclose(eval_log_f(inst, Element.from_real(4.0)), 4.0, rel_tol=1e-15)
    with pytest.raises(CoverageError) as err:
        eval_log_f(inst, Element.from_real(3.0))
    assert err.value.missing_key == '{"real":3.0}'


def test_table_validation_closure():
    inst = table_instance()
    report = validate_instance(inst, orbit_depth=2)
    assert report.orbit_closure_ok
    assert report.skipped_pairs > 0  # products 16*anything leave the table


def test_json_round_trip_all_specs(exact_free_instance):
    insts = [
        exact_free_instance,
        make_perturbed_cor23(delta=0.2, c=1.0),
        table_instance(),
        pos_instance(
            ExactExponential(c=1.0),
            psi=SeparableBound(scale=0.2, x_power=1.0, y_power=-2.0),
        ),
    ]
    for inst in insts:
        assert instance_from_obj(inst.to_obj()) == inst


# -- vector/scalar agreement -----------------------------------------------------


def test_orbit_tables_match_scalar_eval():
    from superstab.semigroup import orbit_elements

    inst = make_perturbed_cor23(delta=0.3, c=-0.7)
    a = Element.from_real(2.0)
    pts = list(inst.grid)
    O = orbit_log_f(inst, a, pts, 6)
    P = orbit_psi_tilde(inst, a, pts, 6)
    for j, p in enumerate(pts):
        for k, z in enumerate(orbit_elements(POS, a, p, 6)):
            assert math.isclose(O[k, j], eval_log_f(inst, z), rel_tol=1e-12, abs_tol=1e-12)
            if k < 6:
                assert math.isclose(P[k, j], eval_psi(inst, a, z, tilde=True), rel_tol=1e-15)
    row0 = log_f_values(inst, pts)
    for j, p in enumerate(pts):
        assert row0[j] == eval_log_f(inst, p)
