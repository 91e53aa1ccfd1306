"""Generators, the erased-derivation validator, property suites and the shrinker."""

import copy
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import A, CORPUS, sig, uterms, welltyped
from trellys.cbv import run
from trellys.erasure import erase
from trellys.meta import suites
from trellys.meta.generate import (
    GenConfig,
    GenerationError,
    gen_conv_term,
    gen_mutant,
    gen_uterm,
    gen_welltyped,
    numeral_type_pool,
)
from trellys.meta.suites import (
    SUITES,
    canonical_for,
    canonical_forms_suite,
    diamond_suite,
    erasure_soundness_suite,
    progress_suite,
    shrink,
    subst_lemma_suite,
    typed_candidates,
    untyped_candidates,
)
from trellys.meta.uderiv import UDerivation, erase_derivation, validate_uderivation
from trellys.parallel import DiamondResult
from trellys.prelude import _prelude, load_with_prelude, prelude_signature
from trellys.syntax import (
    Pi,
    TCon,
    UAbort,
    UApp,
    UDCon,
    UJoin,
    ULam,
    URec,
    UStar,
    UTCon,
    UVar,
    alpha_eq,
    as_numeral,
    subterms,
)
from trellys.typecheck import CheckError, check, infer

NAT = TCon("Nat")


# ---------------------------------------------------------------------------
# generation


class TestGenConfig:
    def test_size_must_be_positive(self):
        with pytest.raises(ValueError):
            GenConfig(max_size=0)

    def test_weights_must_be_usable(self):
        with pytest.raises(ValueError):
            GenConfig(weights={"value": -1.0, "app": 1.0, "case": 0.0, "other": 0.0})
        with pytest.raises(ValueError):
            GenConfig(weights={"value": 0.0, "app": 0.0, "case": 0.0, "other": 0.0})


class TestGenWelltyped:
    def test_smallest_nat(self):
        assert gen_welltyped(None, NAT, GenConfig(seed=3, max_size=1)) == A("0")

    def test_numerals_appear(self):
        found = set()
        for seed in range(100):
            term = gen_welltyped(None, NAT, GenConfig(seed=seed))
            check(sig(), term, NAT)
            found.add(as_numeral(term))
        assert 2 in found

    def test_functions_evaluate_to_lambdas_or_recs(self):
        target = A("(x:Nat) -> Nat")
        for seed in range(50):
            term = gen_welltyped(None, target, GenConfig(seed=seed))
            check(sig(), term, target)
            result = run(sig().close(erase(term)), 2000)
            if result.outcome == "value":
                assert isinstance(result.term, (ULam, URec))

    def test_uninhabited_target_falls_back_to_abort(self):
        s = load_with_prelude("data Void where { }\n").signature
        term = gen_welltyped(s, TCon("Void"), GenConfig(seed=0, retries=5, sig=s))
        assert any(isinstance(t, UAbort) for t in subterms(erase(term)))

    def test_non_type_target_fails(self):
        with pytest.raises(GenerationError):
            gen_welltyped(None, A("0"), GenConfig(seed=0, retries=3))

    def test_same_seed_same_term(self):
        cfg = GenConfig(seed=11)
        assert gen_welltyped(None, NAT, cfg) == gen_welltyped(None, NAT, cfg)

    def test_every_pool_type_is_a_type(self):
        for t in numeral_type_pool(sig()):
            infer(sig(), t)


def test_generator_soundness_over_many_seeds():
    pool = numeral_type_pool(sig())
    for seed in range(300):
        target = pool[seed % len(pool)]
        try:
            term = gen_welltyped(None, target, GenConfig(seed=seed))
        except GenerationError:
            continue
        check(sig(), term, target)


def test_generated_programs_mostly_finish():
    outcomes = {"value": 0, "abort": 0, "out-of-fuel": 0, "stuck": 0}
    for seed in range(200):
        term = gen_welltyped(None, NAT, GenConfig(seed=seed))
        outcomes[run(sig().close(erase(term)), 2000).outcome] += 1
    assert outcomes["stuck"] == 0
    assert outcomes["value"] + outcomes["abort"] >= 0.3 * 200


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=0, max_value=2**32))
def test_conversion_terms_check(seed):
    infer(sig(), gen_conv_term(sig(), random.Random(seed)))


@settings(max_examples=300, deadline=None)
@given(st.integers(min_value=0, max_value=2**32))
def test_checker_is_total_on_mutants(seed):
    term = gen_mutant(sig(), random.Random(seed))
    try:
        infer(sig(), term)
    except CheckError as err:
        assert err.rule.startswith("t")


def test_mutants_are_mostly_ill_typed():
    rejected = 0
    for seed in range(200):
        try:
            infer(sig(), gen_mutant(sig(), random.Random(seed)))
        except CheckError:
            rejected += 1
    assert rejected >= 100


@given(st.integers(min_value=0, max_value=2**32), st.integers(min_value=1, max_value=30))
def test_untyped_generator_respects_scope(seed, size):
    m = gen_uterm(random.Random(seed), size, ("x",))
    assert m.fv <= {"x"}


# ---------------------------------------------------------------------------
# erased derivations


def _derivation(text: str, ctx=None):
    return infer(sig(), A(text))[1]


class TestEraseDerivation:
    def test_join_node(self):
        u = erase_derivation(_derivation("join : 1 + 1 = 2"))
        assert u.rule == "et_join" and u.subject == UJoin()

    def test_abstraction_drops_domain(self):
        u = erase_derivation(_derivation(r"\x:Nat.x"))
        assert u.rule == "et_abs" and u.subject == ULam("x", UVar("x"))

    def test_conv_with_only_annotation_proofs_is_retyped_child(self):
        d = _derivation(r"conv (join : (\y:Nat.y) = (\y:Nat.y)) at (\y:~[Nat = Bool].y) = (\y:Nat.y)")
        u = erase_derivation(d)
        assert u.rule == "et_join"
        assert alpha_eq(u.type, erase(d.type))
        assert alpha_eq(erase(d.type), erase(d.children[0].type))

    def test_conv_with_value_proofs(self):
        d = _derivation("conv (join : 1 + 1 = 1 + 1) at 1 + 1 = ~(join : 1 + 1 = 2)")
        u = erase_derivation(d)
        assert u.rule == "et_conv" and len(u.extra["tvars"]) == 1
        assert validate_uderivation(u, sig()).ok

    def test_names_all_have_the_erased_prefix(self):
        u = erase_derivation(_prelude().derivations["div"])
        assert all(n.rule.startswith("et") for n in u.nodes())


class TestValidate:
    def test_single_type_node(self):
        assert validate_uderivation(UDerivation("et_type", (), UStar(), UStar()), sig()).ok

    def test_ill_scoped_context(self):
        d = UDerivation("et_type", (("x", UVar("nowhere")),), UStar(), UStar())
        result = validate_uderivation(d, sig())
        assert not result.ok and "scoped" in result.reason

    def test_unknown_rule(self):
        assert not validate_uderivation(UDerivation("et_magic", (), UStar(), UStar()), sig()).ok

    def test_tampered_root(self):
        u = erase_derivation(_derivation(r"\x:Nat.S x"))
        u.type = UTCon("Bool")
        result = validate_uderivation(u, sig())
        assert not result.ok and result.path == ()

    def test_tampered_nodes_are_caught(self):
        base = erase_derivation(load_with_prelude((CORPUS / "vec.tre").read_text()).derivations["app"])
        paths = []

        def walk(node, path):
            paths.append(path)
            for k, c in enumerate(node.children):
                walk(c, path + (k,))

        walk(base, ())
        rng = random.Random(0)
        for path in rng.sample(paths, 60):
            u = copy.deepcopy(base)
            node = u
            for k in path:
                node = node.children[k]
            if isinstance(node.type, tuple):
                continue
            node.type = UDCon("tampered", ())
            result = validate_uderivation(u, sig())
            assert not result.ok
            assert path[: len(result.path)] == result.path

    def test_join_accepted_by_parallel_reduction(self, monkeypatch):
        import trellys.typecheck as tc

        text = (
            r"\[x:Nat].\p:((\x:Nat.Bool) x = (\x:Nat.Nat) x)."
            r" conv p at ~(join : ((\x:Nat.Bool) x = (\x:Nat.Nat) x) = (Bool = Nat))"
        )
        monkeypatch.setattr(tc, "cbv_join", lambda m, n, i, j: True)
        d = infer(sig(), A(text))[1]
        monkeypatch.undo()
        u = erase_derivation(d)
        assert validate_uderivation(u, sig()).ok
        assert not validate_uderivation(u, sig(), join_fuel=(100, 0)).ok

    def test_bogus_join_rejected(self, monkeypatch):
        import trellys.typecheck as tc

        monkeypatch.setattr(tc, "cbv_join", lambda m, n, i, j: True)
        d = infer(sig(), A("join : 0 = 1"))[1]
        monkeypatch.undo()
        result = validate_uderivation(erase_derivation(d), sig())
        assert not result.ok and result.rule == "et_join"


def _corpus_derivations():
    base = prelude_signature()
    out = [(f"prelude:{n}", base, d) for n, d in _prelude().derivations.items()]
    for path in sorted(CORPUS.glob("*.tre")):
        prog = load_with_prelude(path.read_text())
        out += [(f"{path.name}:{n}", prog.signature, d) for n, d in prog.derivations.items()]
    return out


@pytest.mark.parametrize("name,signature,deriv", _corpus_derivations(), ids=lambda v: v if isinstance(v, str) else "")
def test_corpus_derivations_validate(name, signature, deriv):
    result = validate_uderivation(erase_derivation(deriv), signature)
    assert result.ok, (result.path, result.rule, result.reason)


@settings(max_examples=60, deadline=None)
@given(welltyped)
def test_generated_derivations_validate(case):
    term, _ = case
    u = erase_derivation(infer(sig(), term)[1])
    assert validate_uderivation(u, sig()).ok


# ---------------------------------------------------------------------------
# suites


class TestSuites:
    @pytest.mark.parametrize("name", sorted(SUITES))
    def test_small_runs_pass(self, name):
        report = SUITES[name](30, seed=5)
        assert report.ok, report.to_text()
        assert report.passed + report.skipped == 30

    def test_reports_are_deterministic(self):
        a, b = progress_suite(40, seed=2), progress_suite(40, seed=2)
        assert (a.passed, a.stats) == (b.passed, b.stats)

    def test_progress_counts_outcomes(self):
        report = progress_suite(50)
        assert report.stats.get("value", 0) + report.stats.get("abort", 0) + report.stats.get("out-of-fuel", 0) == 50

    def test_text_and_json_reports(self):
        report = diamond_suite(10)
        assert report.to_text().startswith("diamond: ok")
        data = report.to_json()
        assert data["ok"] and data["cases"] == 10 and data["counterexamples"] == []

    def test_failures_are_reported_and_shrunk(self, monkeypatch):
        def broken(m):
            return DiamondResult(not any(isinstance(s, UAbort) for s in subterms(m)), (m, m))

        monkeypatch.setattr(suites, "diamond_check", broken)
        report = diamond_suite(200, seed=1)
        assert report.failed > 0 and not report.ok
        cx = report.counterexamples[0]
        assert cx.shrunk == "abort"
        assert 0 < cx.shrink_attempts <= 200

    def test_progress_violation_is_reported(self, monkeypatch):
        from trellys.cbv import Stuck

        monkeypatch.setattr(suites, "step", lambda m: Stuck("forced"))
        report = progress_suite(3)
        assert report.failed == 3 and "forced" in report.counterexamples[0].reason


class TestCanonicalForms:
    def test_shapes(self):
        s = sig()
        assert canonical_for(s, ULam("x", UVar("x")), A("Nat -> Nat"))
        assert canonical_for(s, URec("f", ULam("x", UVar("x"))), A("Nat -> Nat"))
        assert not canonical_for(s, UDCon("0", ()), A("Nat -> Nat"))
        assert canonical_for(s, UDCon("true", ()), A("Bool"))
        assert not canonical_for(s, UDCon("0", ()), A("Bool"))
        assert canonical_for(s, UJoin(), A("0 = 0"))
        assert canonical_for(s, UTCon("Nat"), A("*"))
        assert canonical_for(s, UVar("x"), A("a")) is None


# ---------------------------------------------------------------------------
# shrinking


def _has_abort(m) -> bool:
    return any(isinstance(s, UAbort) for s in subterms(m))


@settings(max_examples=100, deadline=None)
@given(uterms.filter(_has_abort))
def test_shrinking_preserves_the_failure(m):
    small, attempts = shrink(m, _has_abort, untyped_candidates)
    assert _has_abort(small)
    assert small.size <= m.size
    assert attempts <= 200


def test_shrinking_reaches_a_local_minimum():
    m = UApp(ULam("x", UApp(UVar("x"), UAbort())), UDCon("S", (UDCon("0", ()),)))
    small, _ = shrink(m, _has_abort, untyped_candidates)
    assert small == UAbort()


def test_shrinking_is_bounded():
    calls = []

    def never(_):
        calls.append(1)
        return False

    big = gen_uterm(random.Random(4), 200, ("x",))
    _, attempts = shrink(big, never, untyped_candidates)
    assert attempts == len(calls) <= 200


def test_typed_shrinking_keeps_terms_well_typed():
    s = sig()
    term = A("plus (S (S 0)) (pred (S 3))")

    def fails(t) -> bool:
        try:
            check(s, t, NAT)
        except CheckError:
            return False
        result = run(s.close(erase(t)), 2000)
        return (as_numeral(result.term) or 0) >= 1

    assert fails(term)
    small, attempts = shrink(term, fails, typed_candidates(s))
    assert fails(small) and small.size < term.size and attempts <= 200
