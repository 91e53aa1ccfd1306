"""Randomised property suites over the metatheory, with a shrinker.

Every suite takes a case count and a seed, draws each case from its own
seeded generator, and returns a :class:`SuiteReport`.  Failing cases are
shrunk structurally before they are reported.
"""

from __future__ import annotations

import collections
import json
import random
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterator, Optional

from ..cbv import IsAbort, IsValue, Stepped, Stuck, step
from ..erasure import erase
from ..parallel import BudgetExceeded, diamond_check, parallel_reducts
from ..syntax import (
    Eq,
    Pi,
    Star,
    TCon,
    Term,
    UAbort,
    UDCon,
    UEq,
    UILam,
    UJoin,
    ULam,
    UPi,
    URec,
    UStar,
    UTCon,
    UTerm,
    UVar,
    alpha_key,
    head_constructor,
    is_value,
    subst,
)
from ..typecheck import CheckError, Signature, check, infer
from .generate import (
    GenConfig,
    GenerationError,
    Generator,
    _Env,
    _Fail,
    gen_conv_term,
    gen_uterm,
    numeral_type_pool,
    positions,
    replace_at,
)
from .uderiv import erase_derivation, validate_uderivation

MAX_SHRINK_ATTEMPTS = 200
PROGRESS_FUEL = 2000
DIAMOND_MAX_NODES = 12


# ---------------------------------------------------------------------------
# reports


@dataclass
class Counterexample:
    case: int
    term: str
    shrunk: str
    reason: str
    shrink_attempts: int


@dataclass
class SuiteReport:
    suite: str
    seed: int
    cases: int
    passed: int = 0
    failed: int = 0
    skipped: int = 0
    seconds: float = 0.0
    counterexamples: list[Counterexample] = field(default_factory=list)
    stats: dict[str, int] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.failed == 0

    def to_json(self) -> dict:
        out = asdict(self)
        out["ok"] = self.ok
        out["seconds"] = round(self.seconds, 3)
        out["stats"] = dict(sorted(self.stats.items()))
        return out

    def to_text(self) -> str:
        lines = [
            f"{self.suite}: {'ok' if self.ok else 'FAILED'}  "
            f"cases={self.cases} passed={self.passed} failed={self.failed} "
            f"skipped={self.skipped} seed={self.seed} time={self.seconds:.2f}s"
        ]
        for k, v in sorted(self.stats.items()):
            lines.append(f"  {k}: {v}")
        for cx in self.counterexamples:
            lines.append(f"  case {cx.case}: {cx.reason}")
            lines.append(f"    term:   {cx.term}")
            lines.append(f"    shrunk: {cx.shrunk} ({cx.shrink_attempts} attempts)")
        return "\n".join(lines)


def dump_reports(reports: list[SuiteReport]) -> str:
    return json.dumps({"suites": [r.to_json() for r in reports]}, indent=2)


class _Run:
    """Bookkeeping shared by the suites."""

    def __init__(self, name: str, n: int, seed: int):
        self.report = SuiteReport(name, seed, n)
        self.stats: collections.Counter = collections.Counter()
        self.start = time.perf_counter()

    def rng(self, case: int) -> random.Random:
        return random.Random(self.report.seed * 1_000_003 + case)

    def ok(self) -> None:
        self.report.passed += 1

    def skip(self, why: str) -> None:
        self.report.skipped += 1
        self.stats["skipped: " + why] += 1

    def fail(self, case: int, term: Term, shrunk: Term, attempts: int, reason: str) -> None:
        self.report.failed += 1
        if len(self.report.counterexamples) < 5:
            self.report.counterexamples.append(
                Counterexample(case, str(term), str(shrunk), reason, attempts)
            )

    def done(self) -> SuiteReport:
        self.report.stats = dict(self.stats)
        self.report.seconds = time.perf_counter() - self.start
        return self.report


# ---------------------------------------------------------------------------
# shrinking


Path = tuple[int, ...]


def shrink(
    term: Term,
    still_fails: Callable[[Term], bool],
    candidates: Callable[[Term], Iterator[Term]],
    max_attempts: int = MAX_SHRINK_ATTEMPTS,
) -> tuple[Term, int]:
    """Greedy structural shrinking.

    Repeatedly moves to the first strictly smaller candidate that still
    fails, stopping at a local minimum or after ``max_attempts`` property
    evaluations.
    """
    attempts = 0
    improved = True
    while improved and attempts < max_attempts:
        improved = False
        for cand in candidates(term):
            if cand.size >= term.size:
                continue
            attempts += 1
            if still_fails(cand):
                term, improved = cand, True
                break
            if attempts >= max_attempts:
                break
    return term, attempts


_U_LEAVES = (UDCon("0", ()), UStar(), UJoin())


def untyped_candidates(t: UTerm) -> Iterator[UTerm]:
    """Replace a subterm by one of its own children or by a leaf."""
    for path, sub in positions(t):
        for _, child in sub.slots():
            if child is not None:
                yield replace_at(t, path, child)
        if sub.size > 1:
            for leaf in _U_LEAVES:
                yield replace_at(t, path, leaf)


def typed_candidates(sig: Signature) -> Callable[[Term], Iterator[Term]]:
    """Replace a closed subterm by the smallest inhabitant of its type."""
    globals_ = set(sig.globals)

    def candidates(t: Term) -> Iterator[Term]:
        gen = Generator(sig, random.Random(0), GenConfig(sig=sig))
        for path, sub in positions(t):
            if sub.size <= 1 or not sub.fv <= globals_:
                continue
            try:
                ty, _ = infer(sig, sub)
                small = gen.minimal(ty, _Env(), is_value(sub), 3)
            except (CheckError, _Fail):
                continue
            yield replace_at(t, path, small)

    return candidates


# ---------------------------------------------------------------------------
# case generation


def _prelude(sig: Optional[Signature]) -> Signature:
    if sig is not None:
        return sig
    from ..prelude import prelude_signature

    return prelude_signature()


def _typed_case(sig: Signature, rng: random.Random, max_size: int) -> tuple[Term, Term]:
    pool = numeral_type_pool(sig)
    gen = Generator(sig, rng, GenConfig(max_size=max_size, sig=sig))
    for _ in range(20):
        target = rng.choice(pool)
        try:
            return gen.gen(target, _Env(), rng.randint(1, max_size)), target
        except _Fail:
            continue
    raise GenerationError("no typed case")


def _welltyped(sig: Signature, term: Term, target: Term) -> bool:
    try:
        check(sig, term, target)
    except CheckError:
        return False
    return True


# ---------------------------------------------------------------------------
# progress


def _progress_violation(u: UTerm, fuel: int, stats: collections.Counter) -> Optional[str]:
    """Run ``u``; report a stuck state or a head constructor that changes
    into anything other than ``abort``."""
    for _ in range(fuel):
        out = step(u)
        if isinstance(out, Stuck):
            return f"stuck: {out.reason}"
        if isinstance(out, IsValue):
            stats["value"] += 1
            return None
        if isinstance(out, IsAbort):
            stats["abort"] += 1
            return None
        assert isinstance(out, Stepped)
        head = head_constructor(u)
        if head is not None and not isinstance(out.next, UAbort):
            if head_constructor(out.next) != head:
                return f"head constructor {head} changed by {out.rule}"
        u = out.next
    stats["out-of-fuel"] += 1
    return None


def progress_suite(
    n: int, seed: int = 0, sig: Optional[Signature] = None, fuel: int = PROGRESS_FUEL, max_size: int = 24
) -> SuiteReport:
    """Closed well-typed terms never reach a stuck state under CBV, and
    head constructors survive every step except a step to ``abort``."""
    sig = _prelude(sig)
    r = _Run("progress", n, seed)
    for i in range(n):
        try:
            term, target = _typed_case(sig, r.rng(i), max_size)
        except GenerationError:
            r.skip("generation")
            continue
        if not _welltyped(sig, term, target):
            r.fail(i, term, term, 0, "generated term is ill-typed")
            continue
        why = _progress_violation(sig.close(erase(term)), fuel, r.stats)
        if why is None:
            r.ok()
            continue

        def still(t: Term) -> bool:
            return _welltyped(sig, t, target) and (
                _progress_violation(sig.close(erase(t)), fuel, collections.Counter()) is not None
            )

        small, tries = shrink(term, still, typed_candidates(sig))
        r.fail(i, term, small, tries, why)
    return r.done()


# ---------------------------------------------------------------------------
# diamond


def _diamond_case(sig: Signature, rng: random.Random, max_nodes: int) -> Optional[UTerm]:
    """A term of at most ``max_nodes`` nodes, preferring ones with a redex."""
    fallback: Optional[UTerm] = None
    for _ in range(30):
        if rng.random() < 0.5:
            u = gen_uterm(rng, rng.randint(2, max_nodes), ("x", "y"))
        else:
            try:
                term, _ = _typed_case(sig, rng, max_nodes)
            except GenerationError:
                continue
            u = erase(term)
        if u.size > max_nodes:
            continue
        fallback = fallback or u
        try:
            if len(parallel_reducts(u)) > 1:
                return u
        except BudgetExceeded:
            continue
    return fallback


def _diamond_fails(u: UTerm) -> bool:
    try:
        return not diamond_check(u).holds
    except BudgetExceeded:
        return False


def diamond_suite(
    n: int, seed: int = 0, sig: Optional[Signature] = None, max_nodes: int = DIAMOND_MAX_NODES
) -> SuiteReport:
    """Parallel reduction has the one-step diamond property on small
    terms, both random and erased from well-typed ones."""
    sig = _prelude(sig)
    r = _Run("diamond", n, seed)
    for i in range(n):
        u = _diamond_case(sig, r.rng(i), max_nodes)
        if u is None:
            r.skip("generation")
            continue
        try:
            result = diamond_check(u)
        except BudgetExceeded:
            r.skip("budget")
            continue
        r.stats["cases with a redex"] += len(parallel_reducts(u)) > 1
        if result.holds:
            r.ok()
            continue
        small, tries = shrink(u, _diamond_fails, untyped_candidates)
        a, b = result.counterexample
        r.fail(i, u, small, tries, f"reducts {a} and {b} have no common reduct")
    return r.done()


# ---------------------------------------------------------------------------
# erasure soundness


def _erasure_violation(sig: Signature, term: Term) -> Optional[str]:
    try:
        _, deriv = infer(sig, term)
    except CheckError as err:
        return f"annotated term rejected: {err.rule}"
    result = validate_uderivation(erase_derivation(deriv), sig)
    if not result.ok:
        return f"erased derivation invalid at {result.rule}: {result.reason}"
    return None


def erasure_soundness_suite(
    n: int, seed: int = 0, sig: Optional[Signature] = None, max_size: int = 24
) -> SuiteReport:
    """Erasing an annotated derivation yields a valid unannotated one."""
    sig = _prelude(sig)
    r = _Run("erasure-soundness", n, seed)
    for i in range(n):
        rng = r.rng(i)
        try:
            if rng.random() < 0.3:
                term = gen_conv_term(sig, rng, max_size)
                r.stats["conv cases"] += 1
            else:
                term, _ = _typed_case(sig, rng, max_size)
        except GenerationError:
            r.skip("generation")
            continue
        why = _erasure_violation(sig, term)
        if why is None:
            r.ok()
            continue

        def still(t: Term) -> bool:
            return _erasure_violation(sig, t) is not None

        small, tries = shrink(term, still, typed_candidates(sig))
        r.fail(i, term, small, tries, why)
    return r.done()


# ---------------------------------------------------------------------------
# canonical forms


def canonical_for(sig: Signature, u: UTerm, ty: Term) -> Optional[bool]:
    """Whether the closed value ``u`` has the canonical shape for ``ty``,
    or ``None`` when ``ty`` prescribes no shape."""
    if isinstance(ty, Pi):
        if ty.irrelevant:
            return isinstance(u, (UILam, URec))
        return isinstance(u, (ULam, URec))
    if isinstance(ty, TCon) and ty.name in sig.datatypes:
        return isinstance(u, UDCon) and u.name in sig.datatypes[ty.name].con_names
    if isinstance(ty, Eq):
        return isinstance(u, UJoin)
    if isinstance(ty, Star):
        return isinstance(u, (UStar, UPi, UTCon, UEq))
    return None


def canonical_forms_suite(
    n: int, seed: int = 0, sig: Optional[Signature] = None, fuel: int = PROGRESS_FUEL, max_size: int = 24
) -> SuiteReport:
    """A closed well-typed term that evaluates to a value has the
    canonical shape its type prescribes."""
    sig = _prelude(sig)
    r = _Run("canonical-forms", n, seed)
    from ..cbv import run

    def violation(t: Term, target: Term) -> Optional[str]:
        res = run(sig.close(erase(t)), fuel)
        if res.outcome != "value":
            return None
        verdict = canonical_for(sig, res.term, target)
        if verdict is False:
            return f"value {res.term} is not canonical at {target}"
        return None

    for i in range(n):
        try:
            term, target = _typed_case(sig, r.rng(i), max_size)
        except GenerationError:
            r.skip("generation")
            continue
        if not _welltyped(sig, term, target):
            r.fail(i, term, term, 0, "generated term is ill-typed")
            continue
        res = run(sig.close(erase(term)), fuel)
        if res.outcome != "value":
            r.skip(res.outcome)
            continue
        r.stats["type " + type(target).__name__] += 1
        why = violation(term, target)
        if why is None:
            r.ok()
            continue

        def still(t: Term) -> bool:
            return _welltyped(sig, t, target) and violation(t, target) is not None

        small, tries = shrink(term, still, typed_candidates(sig))
        r.fail(i, term, small, tries, why)
    return r.done()


# ---------------------------------------------------------------------------
# substitution lemma


def _random_value(rng: random.Random) -> UTerm:
    for _ in range(50):
        u = gen_uterm(rng, rng.randint(1, 4), ("y",))
        if is_value(u):
            return u
    return UDCon("0", ())


def _subst_violation(m: UTerm, x: str, v: UTerm, m2: UTerm, v2: UTerm) -> bool:
    target = subst(m, x, v)
    if target.size > 30:
        raise BudgetExceeded("substituted term too large")
    keys = {alpha_key(t) for t in parallel_reducts(target)}
    return alpha_key(subst(m2, x, v2)) not in keys


def subst_lemma_suite(n: int, seed: int = 0, sig: Optional[Signature] = None) -> SuiteReport:
    """If ``m`` reduces to ``m'`` and the value ``u`` to ``u'``, then
    ``[u/x]m`` reduces to ``[u'/x]m'`` in one parallel step."""
    r = _Run("substitution", n, seed)
    for i in range(n):
        rng = r.rng(i)
        m = gen_uterm(rng, rng.randint(1, 8), ("x", "y"))
        v = _random_value(rng)
        try:
            m2 = rng.choice(parallel_reducts(m))
            v2 = rng.choice(parallel_reducts(v))
            bad = _subst_violation(m, "x", v, m2, v2)
        except BudgetExceeded:
            r.skip("budget")
            continue
        r.stats["x free"] += "x" in m.fv
        if not bad:
            r.ok()
            continue
        r.fail(i, m, m, 0, f"[{v}/x]({m}) does not reach [{v2}/x]({m2})")
    return r.done()


SUITES: dict[str, Callable[..., SuiteReport]] = {
    "progress": progress_suite,
    "diamond": diamond_suite,
    "erasure-soundness": erasure_soundness_suite,
    "canonical-forms": canonical_forms_suite,
    "substitution": subst_lemma_suite,
}
