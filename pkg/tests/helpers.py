"""Shared constructors and hypothesis strategies for the test suite."""

from __future__ import annotations

import itertools
import random
from pathlib import Path

from hypothesis import strategies as st

from trellys.erasure import erase
from trellys.meta.generate import Generator, GenConfig, _Env, _Fail, gen_uterm, numeral_type_pool
from trellys.prelude import prelude_signature
from trellys.surface import parse_expr
from trellys.syntax import (
    ERASED,
    Term,
    UAbort,
    UApp,
    UBranch,
    UCase,
    UDCon,
    UEq,
    UIApp,
    UILam,
    UJoin,
    ULam,
    UPi,
    URec,
    UStar,
    UTCon,
    UVar,
    subst_many,
    var_like,
)

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"


def sig():
    return prelude_signature()


def A(text: str) -> Term:
    """An annotated expression parsed in the prelude scope."""
    return parse_expr(text, sig().scope.copy())


def U(text: str):
    """An unannotated expression: the erasure of a parsed one."""
    return erase(A(text))


def closed(text: str):
    """The erasure of ``text`` with prelude definitions inlined."""
    return sig().close(U(text))


_counter = itertools.count()


def rename_binders(t: Term) -> Term:
    """An alpha-variant of ``t`` in which every binder has a new name."""
    names = t.binders()
    new = [f"{n}_{next(_counter)}" for n in names]
    children = []
    for bound, child in t.slots():
        if child is None:
            children.append(None)
            continue
        if bound:
            child = subst_many(child, {names[k]: var_like(child, new[k]) for k in bound})
        children.append(rename_binders(child))
    return t.rebuild(children, new) if names else t.rebuild(children, names)


# ---------------------------------------------------------------------------
# strategies

_NAMES = st.sampled_from(["x", "y", "z"])

_u_leaves = st.one_of(
    _NAMES.map(UVar),
    st.just(UStar()),
    st.just(UDCon("0", ())),
    st.just(UDCon("true", ())),
    st.just(UAbort()),
    st.just(UJoin()),
    st.just(UTCon("Nat", ())),
)


def _u_extend(children):
    return st.one_of(
        st.builds(ULam, _NAMES, children),
        st.builds(UApp, children, children),
        st.builds(UILam, children),
        st.builds(UIApp, children),
        st.builds(lambda b: UDCon("S", (b,)), children),
        st.builds(lambda a, b: UDCon("cons'", (ERASED, ERASED, a, b)), children, children),
        st.builds(lambda f, x, b: URec(f, ULam(x, b)), _NAMES, _NAMES, children),
        st.builds(lambda x, a, b, irr: UPi(x, a, b, irr), _NAMES, children, children, st.booleans()),
        st.builds(UEq, children, children),
        st.builds(
            lambda s, z, p, b: UCase(s, (UBranch("0", (), z), UBranch("S", (p,), b))),
            children,
            children,
            _NAMES,
            children,
        ),
    )


uterms = st.recursive(_u_leaves, _u_extend, max_leaves=8)
"""Random unannotated terms over a fixed vocabulary; not necessarily typed."""

small_uterms = uterms.filter(lambda t: t.size <= 12)


def _welltyped_from_seed(seed: int):
    s = sig()
    rng = random.Random(seed)
    gen = Generator(s, rng, GenConfig(sig=s))
    pool = numeral_type_pool(s)
    for _ in range(20):
        target = rng.choice(pool)
        try:
            return gen.gen(target, _Env(), rng.randint(1, 24)), target
        except _Fail:
            continue
    return A("0"), A("Nat")


welltyped = st.integers(min_value=0, max_value=2**32).map(_welltyped_from_seed)
"""Closed well-typed annotated terms paired with their type."""

seeded_uterms = st.integers(min_value=0, max_value=2**32).map(
    lambda s: gen_uterm(random.Random(s), random.Random(s).randint(1, 20), ("x", "y"))
)
