"""The call-by-value machine, fuel, traces and bounded joins."""

import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import CORPUS, U, closed, seeded_uterms, sig, uterms, welltyped
from trellys.cbv import (
    IsAbort,
    IsValue,
    Stepped,
    Stuck,
    cbv_join,
    default_fuel,
    run,
    step,
    trace,
)
from trellys.erasure import erase
from trellys.parallel import BudgetExceeded, parallel_reducts
from trellys.prelude import load_with_prelude
from trellys.syntax import (
    ERASED,
    UAbort,
    UApp,
    UBranch,
    UCase,
    UDCon,
    UIApp,
    UILam,
    ULam,
    URec,
    UVar,
    alpha_eq,
    alpha_key,
    as_numeral,
    is_value,
    nat_literal,
)

ZERO = UDCon("0", ())
x = UVar("x")


def numeral(n):
    return nat_literal(n, annotated=False)


class TestStep:
    def test_abort_argument_propagates(self):
        m = UApp(ULam("x", numeral(3)), UAbort())
        assert step(m) == Stepped(UAbort(), "sc_abort")
        assert run(m, 10).outcome == "abort"
        assert run(m, 10).steps <= 2

    def test_identity(self):
        assert step(UApp(ULam("x", x), ZERO)).next == ZERO

    def test_rec_unrolls(self):
        f = URec("f", ULam("x", UApp(UVar("f"), x)))
        out = step(UApp(f, ZERO))
        assert isinstance(out, Stepped) and out.rule == "sc_apprec"
        assert alpha_eq(out.next, UApp(ULam("x", UApp(f, x)), ZERO))

    def test_irrelevant_beta(self):
        assert step(UIApp(UILam(ZERO))).next == ZERO

    def test_irrelevant_rec(self):
        f = URec("f", UILam(UIApp(UVar("f"))))
        out = step(UIApp(f))
        assert out.rule == "sc_iapprec" and alpha_eq(out.next, UIApp(UILam(UIApp(f))))

    def test_case_selects_branch(self):
        m = UCase(numeral(2), (UBranch("0", (), ZERO), UBranch("S", ("k",), UVar("k"))))
        assert step(m).next == numeral(1)

    def test_case_binds_only_relevant_fields(self):
        m = U("case cons' [Nat] [1] [0] [join] 5 (nil' [Nat] [0] [join]) as [e] of "
              "{ nil' [p] => 0; cons' [m] [p] v rest => v }")
        assert run(m, 10).term == numeral(5)

    def test_values_are_terminal(self):
        for m in (ZERO, ULam("x", x), x, URec("f", ULam("x", x))):
            assert step(m) == IsValue()

    def test_abort_is_terminal(self):
        assert step(UAbort()) == IsAbort()
        assert run(UAbort(), 10) == run(UAbort(), 0)
        assert run(UAbort(), 10).steps == 0

    def test_stuck_application(self):
        out = step(UApp(ZERO, ZERO))
        assert isinstance(out, Stuck) and "0" in out.reason

    def test_stuck_case(self):
        assert isinstance(step(UCase(ULam("x", x), (UBranch("0", (), ZERO),))), Stuck)

    def test_left_to_right_order(self):
        m = UApp(UApp(ULam("x", x), ULam("y", UVar("y"))), UApp(ULam("z", UVar("z")), ZERO))
        assert step(m).next == UApp(ULam("y", UVar("y")), UApp(ULam("z", UVar("z")), ZERO))

    def test_constructor_arguments_left_to_right(self):
        m = UDCon("cons'", (ERASED, ERASED, UApp(ULam("x", x), ZERO), UAbort()))
        assert step(m).next == UDCon("cons'", (ERASED, ERASED, ZERO, UAbort()))
        assert run(m, 5).term == UAbort()


class TestRun:
    def test_safediv(self):
        prog = load_with_prelude((CORPUS / "safediv.tre").read_text())
        result = run(prog.signature.definition("demo").closed, 10**6)
        assert result.outcome == "value" and as_numeral(result.term) == 2

    def test_division_values(self):
        for n, m in ((7, 2), (9, 3), (0, 4), (5, 9)):
            result = run(closed(f"div {n} {m}"), 10**5)
            assert as_numeral(result.term) == n // m

    def test_division_by_zero_aborts(self):
        assert run(closed("div 3 0"), 1000).outcome == "abort"

    def test_fuel_exhaustion(self):
        f = URec("f", ULam("x", UApp(UVar("f"), x)))
        result = run(UApp(f, ZERO), 50)
        assert result.outcome == "out-of-fuel" and result.steps == 50

    def test_zero_fuel(self):
        assert run(UApp(ULam("x", x), ZERO), 0).outcome == "out-of-fuel"
        assert run(ZERO, 0).outcome == "value"

    def test_default_fuel_from_environment(self, monkeypatch):
        monkeypatch.delenv("TRELLYS_FUEL", raising=False)
        assert default_fuel() == 1_000_000
        monkeypatch.setenv("TRELLYS_FUEL", "25")
        assert default_fuel() == 25
        monkeypatch.setenv("TRELLYS_FUEL", "lots")
        assert default_fuel() == 1_000_000

    def test_trace_numbers_steps(self):
        lines = list(trace(closed("(\\x:Nat.x) (S 0)"), 10))
        assert [k for k, _, _ in lines] == [0, 1]
        assert lines[1][2] == "sc_appbeta" and lines[1][1] == numeral(1)


class TestCbvJoin:
    def test_one_plus_one(self):
        assert cbv_join(closed("1+1"), closed("2"), 100, 100)

    def test_no_reduction_under_binders(self):
        assert not cbv_join(U(r"\x:Nat.(\y:Nat.y) x"), U(r"\x:Nat.x"), 100, 100)

    def test_zero_steps_is_alpha_equality(self):
        m = U(r"\x:Nat.x")
        assert cbv_join(m, U(r"\y:Nat.y"), 0, 0)
        assert not cbv_join(closed("1+1"), closed("2"), 0, 0)

    def test_bounds_are_respected(self):
        steps = run(closed("1+1"), 100).steps
        assert cbv_join(closed("1+1"), closed("2"), steps, 0)
        assert not cbv_join(closed("1+1"), closed("2"), steps - 1, 0)

    def test_aborting_sides_meet(self):
        assert cbv_join(closed("div 1 0"), UAbort(), 100, 0)


def test_divergence_budget_is_tractable():
    prog = load_with_prelude((CORPUS / "diverge.tre").read_text())
    start = time.perf_counter()
    result = run(prog.signature.definition("main").closed, 20_000)
    assert result.outcome == "out-of-fuel"
    assert time.perf_counter() - start < 5


# ---------------------------------------------------------------------------
# properties


@given(uterms)
def test_step_is_deterministic(m):
    assert step(m) == step(m)


@given(uterms)
def test_values_never_step(m):
    if is_value(m):
        assert step(m) == IsValue()
    else:
        assert not isinstance(step(m), IsValue)


_CONTEXTS = [
    lambda h: UApp(h, ZERO),
    lambda h: UApp(ULam("x", x), h),
    lambda h: UIApp(h),
    lambda h: UDCon("cons'", (ERASED, ERASED, ZERO, h)),
    lambda h: UCase(h, (UBranch("0", (), ZERO),)),
]


@given(st.lists(st.sampled_from(_CONTEXTS), min_size=1, max_size=6))
def test_abort_propagates_through_evaluation_contexts(frames):
    m = UAbort()
    for frame in frames:
        m = frame(m)
    result = run(m, 100)
    # contexts are single frames, so abort climbs one frame per step
    assert result.outcome == "abort" and result.steps == len(frames)


@settings(max_examples=200, deadline=None)
@given(seeded_uterms)
def test_cbv_step_is_a_parallel_step(m):
    out = step(m)
    if not isinstance(out, Stepped) or m.size > 30:
        return
    try:
        reducts = {alpha_key(r) for r in parallel_reducts(m)}
    except BudgetExceeded:
        return
    assert alpha_key(out.next) in reducts


@settings(max_examples=200, deadline=None)
@given(welltyped)
def test_well_typed_closed_terms_never_get_stuck(case):
    term, _ = case
    assert run(sig().close(erase(term)), 2000).outcome != "stuck"
