"""Type-directed generation of well-typed annotated terms.

The generator works from a target type and a local environment.  Every
choice it makes respects the typing rules by construction (values where
values are required, joins only when CBV evaluation actually meets), and
callers re-check the output with ``infer`` anyway.  Random unannotated
terms for the reduction lemmas come from ``gen_uterm``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterator, Optional

from ..cbv import cbv_join
from ..erasure import erase
from ..syntax import (
    ERASED,
    Abort,
    App,
    Arg,
    Branch,
    Case,
    Conv,
    DCon,
    Entry,
    Eq,
    Join,
    Lam,
    Pi,
    ProofAnnot,
    ProofValue,
    Rec,
    Star,
    TCon,
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
    UTerm,
    UVar,
    Var,
    fresh_name,
    is_value,
    nat_literal,
    subst,
)
from ..typecheck import Signature, instantiate, tele_to_pi, type_eq

# Category weights: value forms, applications, case analysis, everything else.
DEFAULT_WEIGHTS = {"value": 0.6, "app": 0.2, "case": 0.1, "other": 0.1}

NAT = TCon("Nat")
BOOL = TCon("Bool")
STAR = Star()


class GenerationError(Exception):
    """No term could be produced within the retry budget."""


class _Fail(Exception):
    pass


@dataclass
class GenConfig:
    seed: int = 0
    max_size: int = 24
    weights: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))
    sig: Optional[Signature] = None
    closed: bool = True
    retries: int = 50

    def __post_init__(self) -> None:
        if self.max_size < 1:
            raise ValueError("max_size must be at least 1")
        if any(w < 0 for w in self.weights.values()) or not any(self.weights.values()):
            raise ValueError("weights must be non-negative and not all zero")


def _signature(cfg: GenConfig) -> Signature:
    if cfg.sig is not None:
        return cfg.sig
    from ..prelude import prelude_signature

    return prelude_signature()


@dataclass(frozen=True)
class _Binding:
    name: str
    type: Term
    usable: bool  # false for irrelevant variables and case equations


class _Env:
    def __init__(self, bindings: tuple[_Binding, ...] = ()):
        self.bindings = bindings

    def extend(self, name: str, ty: Term, usable: bool = True) -> _Env:
        return _Env(self.bindings + (_Binding(name, ty, usable),))

    @property
    def names(self) -> set[str]:
        return {b.name for b in self.bindings}

    def usable(self):
        # innermost binding of each name wins
        seen: set[str] = set()
        for b in reversed(self.bindings):
            if b.name in seen:
                continue
            seen.add(b.name)
            if b.usable:
                yield b


def numeral_type_pool(sig: Signature) -> list[Term]:
    """Target types the suites draw from, restricted to what ``sig`` declares."""
    pool: list[Term] = []
    have = sig.datatypes
    if "Nat" in have:
        pool += [NAT, Pi("x", NAT, NAT), Pi("x", NAT, NAT, True)]
    if "Bool" in have:
        pool += [BOOL, Pi("x", BOOL, BOOL)]
    if "Nat" in have and "Bool" in have:
        pool += [Pi("x", NAT, BOOL), Pi("x", BOOL, Pi("y", NAT, NAT))]
    if "Maybe" in have and "Nat" in have:
        pool.append(TCon("Maybe", (NAT,)))
    if "List" in have and "Bool" in have:
        pool.append(TCon("List", (BOOL,)))
    if "Vec'" in have and "Nat" in have:
        pool.append(TCon("Vec'", (NAT, nat_literal(2))))
    if "Vec" in have and "Bool" in have:
        pool.append(TCon("Vec", (BOOL, nat_literal(1))))
    pool.append(Pi("a", STAR, Pi("x", Var("a"), Var("a"))))
    if "Nat" in have:
        pool.append(Eq(App(App(Var("plus"), nat_literal(1)), nat_literal(1)), nat_literal(2))
                    if "plus" in sig.globals else Eq(NAT, NAT))
    pool.append(STAR)
    return pool


class Generator:
    def __init__(self, sig: Signature, rng: random.Random, cfg: GenConfig):
        self.sig = sig
        self.rng = rng
        self.cfg = cfg
        self.scrutinee_types = [t for t in numeral_type_pool(sig) if isinstance(t, TCon)]
        self.base_types = [t for t in self.scrutinee_types if not t.params] or [STAR]

    # -- naming and small utilities -------------------------------------

    def fresh(self, base: str, env: _Env) -> str:
        taken = env.names | set(self.sig.globals) | set(self.sig.owners) | set(self.sig.datatypes)
        if base not in taken:
            return base
        return fresh_name(base, taken)

    def category(self) -> str:
        w = self.cfg.weights
        keys = [k for k in ("value", "app", "case", "other") if w.get(k, 0) > 0]
        return self.rng.choices(keys, [w[k] for k in keys])[0]

    def joins(self, env: _Env, lhs: Term, rhs: Term) -> bool:
        local = env.names
        m = self.sig.close(erase(lhs), local)
        n = self.sig.close(erase(rhs), local)
        return cbv_join(m, n, 100, 100)

    # -- entry point ------------------------------------------------------

    def gen(self, ty: Term, env: _Env, size: int, value: bool = False) -> Term:
        if size <= 1:
            return self.minimal(ty, env, value, 4)
        for _ in range(6):
            cat = self.category()
            try:
                if cat == "value":
                    return self.gen_value(ty, env, size, value)
                if value:
                    continue
                if cat == "app":
                    return self.gen_app(ty, env, size)
                if cat == "case":
                    return self.gen_case(ty, env, size)
                return self.gen_other(ty, env, size)
            except _Fail:
                continue
        return self.minimal(ty, env, value, 4)

    # -- value forms ------------------------------------------------------

    def variables(self, ty: Term, env: _Env) -> list[Term]:
        return [Var(b.name) for b in env.usable() if type_eq(b.type, ty)]

    def gen_value(self, ty: Term, env: _Env, size: int, value: bool = False) -> Term:
        options = []
        vars_ = self.variables(ty, env)
        if vars_:
            options.append(lambda: self.rng.choice(vars_))
        if isinstance(ty, Pi):
            options.append(lambda: self.gen_lam(ty, env, size))
            if not ty.irrelevant and size > 4:
                options.append(lambda: self.gen_rec(ty, env, size))
        elif isinstance(ty, TCon):
            options.append(lambda: self.gen_dcon(ty, env, size, value))
        elif isinstance(ty, Eq):
            options.append(lambda: self.gen_join(ty, env))
        elif isinstance(ty, Star):
            options.append(lambda: self.gen_type(env, size))
        if not options:
            raise _Fail()
        self.rng.shuffle(options)
        for opt in options:
            try:
                return opt()
            except _Fail:
                continue
        raise _Fail()

    def gen_lam(self, ty: Pi, env: _Env, size: int) -> Term:
        x = self.fresh(ty.name if ty.name not in ("x",) else self.rng.choice("xyz"), env)
        cod = subst(ty.cod, ty.name, Var(x))
        inner = env.extend(x, ty.dom, usable=not ty.irrelevant)
        body = self.gen(cod, inner, size - 1)
        return Lam(x, ty.dom, body, ty.irrelevant)

    def gen_rec(self, ty: Pi, env: _Env, size: int) -> Term:
        f = self.fresh("f", env)
        x = self.fresh("n", env.extend(f, ty))
        inner = env.extend(f, ty).extend(x, ty.dom)
        cod = subst(ty.cod, ty.name, Var(x))
        body = self.gen(cod, inner, size - 2)
        return Rec(f, ty, Lam(x, ty.dom, body))

    def gen_join(self, ty: Eq, env: _Env) -> Term:
        if self.joins(env, ty.lhs, ty.rhs):
            return Join(ty.lhs, ty.rhs)
        raise _Fail()

    def gen_type(self, env: _Env, size: int) -> Term:
        choices = list(self.base_types)
        choices += [Var(b.name) for b in env.usable() if isinstance(b.type, Star)]
        if size > 3:
            a, b = self.rng.choice(choices), self.rng.choice(choices)
            choices.append(Pi("x", a, b) if "x" not in b.fv else Pi(fresh_name("x", b.fv), a, b))
        return self.rng.choice(choices)

    def gen_dcon(self, ty: TCon, env: _Env, size: int, value: bool = False) -> Term:
        info = self.sig.datatypes.get(ty.name)
        if info is None or not info.cons:
            raise _Fail()
        cons = list(info.cons)
        self.rng.shuffle(cons)
        # smaller budgets prefer constructors with fewer fields
        if size < 4:
            cons.sort(key=lambda c: len(c[1]))
        for con, _ in cons:
            try:
                return self.build_dcon(ty, con, env, size, value=value)
            except _Fail:
                continue
        raise _Fail()

    def build_dcon(
        self, ty: TCon, con: str, env: _Env, size: int, minimal: bool = False, depth: int = 4, value: bool = False
    ) -> Term:
        info = self.sig.datatypes[ty.name]
        tele = instantiate(info.constructor(con), [e.name for e in info.params], ty.params)
        share = max(1, (size - 1) // max(1, len(tele)))
        args: list[Arg] = []
        rest = tele
        while rest:
            e = rest[0]
            arg = self.field(e, rest[1:], env, share, minimal, depth, value or e.irrelevant)
            args.append(Arg(arg, e.irrelevant))
            rest = instantiate(rest[1:], [e.name], [arg])
        return DCon(con, ty.params, tuple(args))

    def field(self, e: Entry, later, env: _Env, size: int, minimal: bool, depth: int, value: bool) -> Term:
        """An argument for field ``e``; Nat fields that later equations
        mention are solved by trying small numerals."""
        if type_eq(e.type, NAT) and "S" in self.sig.owners:
            eqs = [x for x in later if isinstance(x.type, Eq) and e.name in x.type.fv]
            if eqs:
                for k in range(8):
                    lit = nat_literal(k)
                    if all(
                        self.joins(env, subst(x.type.lhs, e.name, lit), subst(x.type.rhs, e.name, lit))
                        for x in eqs
                    ):
                        return lit
                raise _Fail()
        if isinstance(e.type, Eq):
            return self.gen_join(e.type, env)
        if minimal:
            return self.minimal(e.type, env, value, depth - 1)
        return self.gen(e.type, env, size, value=value)

    # -- minimal inhabitants ----------------------------------------------

    def minimal(self, ty: Term, env: _Env, value: bool, depth: int) -> Term:
        vars_ = self.variables(ty, env)
        if vars_:
            return vars_[0]
        if depth <= 0:
            return self.fallback(ty, value)
        try:
            if isinstance(ty, Star):
                return self.base_types[0]
            if isinstance(ty, Pi):
                x = self.fresh("x", env)
                inner = env.extend(x, ty.dom, usable=not ty.irrelevant)
                body = self.minimal(subst(ty.cod, ty.name, Var(x)), inner, False, depth - 1)
                return Lam(x, ty.dom, body, ty.irrelevant)
            if isinstance(ty, Eq):
                return self.gen_join(ty, env)
            if isinstance(ty, TCon) and ty.name in self.sig.datatypes:
                cons = sorted(self.sig.datatypes[ty.name].cons, key=lambda c: len(c[1]))
                for con, _ in cons:
                    try:
                        return self.build_dcon(ty, con, env, 1, minimal=True, depth=depth, value=value)
                    except _Fail:
                        continue
        except _Fail:
            pass
        return self.fallback(ty, value)

    def fallback(self, ty: Term, value: bool) -> Term:
        if value:
            raise _Fail()
        return Abort(ty)

    # -- eliminations -----------------------------------------------------

    def callables(self, env: _Env):
        for b in env.usable():
            if isinstance(b.type, Pi):
                yield Var(b.name), b.type
        for name, g in self.sig.globals.items():
            if isinstance(g.type, Pi):
                yield Var(name), g.type

    def gen_app(self, ty: Term, env: _Env, size: int) -> Term:
        if self.rng.random() < 0.4:
            return self.gen_redex(ty, env, size)
        candidates = []
        for head, fty in self.callables(env):
            binders = []
            t = fty
            while isinstance(t, Pi):
                binders.append(t)
                t = t.cod
                sub = _match(t, ty, {b.name for b in binders})
                if sub is not None:
                    candidates.append((head, fty, len(binders), sub))
        if not candidates:
            return self.gen_redex(ty, env, size)
        head, fty, n, sub = self.rng.choice(candidates)
        share = max(1, (size - 1) // n)
        term: Term = head
        t = fty
        for _ in range(n):
            assert isinstance(t, Pi)
            if t.name in sub:
                arg = sub[t.name]
                if t.irrelevant and not is_value(arg):
                    raise _Fail()
            elif isinstance(t.dom, Eq):
                arg = self.gen_join(t.dom, env) if self.joins(env, t.dom.lhs, t.dom.rhs) else Abort(t.dom)
                if t.irrelevant and not is_value(arg):
                    raise _Fail()
            else:
                arg = self.gen(t.dom, env, share, value=t.irrelevant)
            term = App(term, arg, t.irrelevant)
            t = subst(t.cod, t.name, arg)
        if not type_eq(t, ty):
            raise _Fail()
        return term

    def gen_redex(self, ty: Term, env: _Env, size: int) -> Term:
        dom = self.rng.choice(self.base_types)
        irrelevant = self.rng.random() < 0.25
        x = self.fresh(self.rng.choice("xyz"), env)
        body = self.gen(ty, env.extend(x, dom, usable=not irrelevant), max(1, size // 2))
        arg = self.gen(dom, env, max(1, size // 2), value=irrelevant)
        return App(Lam(x, dom, body, irrelevant), arg, irrelevant)

    def gen_case(self, ty: Term, env: _Env, size: int) -> Term:
        sty = self.rng.choice(self.scrutinee_types)
        info = self.sig.datatypes[sty.name]
        share = max(1, (size - 1) // (len(info.cons) + 1))
        scrut = self.gen(sty, env, share)
        y = self.fresh("e", env)
        branches = []
        for con, tele in info.cons:
            tele = instantiate(tele, [e.name for e in info.params], sty.params)
            inner = env.extend(y, STAR, usable=False)  # reserve the name
            entries = []
            rest = tele_to_pi(tele)
            while isinstance(rest, Pi):
                n = self.fresh(rest.name if rest.name != "x" else "v", inner)
                inner = inner.extend(n, rest.dom, usable=not rest.irrelevant)
                entries.append(Entry(n, None, rest.irrelevant))
                rest = subst(rest.cod, rest.name, Var(n))
            body = self.gen(ty, inner, share)
            branches.append(Branch(con, tuple(entries), body))
        return Case(scrut, y, tuple(branches))

    def gen_other(self, ty: Term, env: _Env, size: int) -> Term:
        roll = self.rng.random()
        if roll < 0.3:
            return Abort(ty)
        if roll < 0.6 and isinstance(ty, TCon):
            rewritten = self.gen_index_conv(ty, env, size)
            if rewritten is not None:
                return rewritten
        subject = self.gen(ty, env, size - 1)
        x = fresh_name("x", ty.fv | {"x"})
        return Conv(subject, (ProofValue(Join(ty, ty, 0, 0)),), (x,), Var(x))

    def gen_index_conv(self, ty: TCon, env: _Env, size: int) -> Optional[Term]:
        """``conv a at D .. ~(join : e = k) ..`` where ``a`` has index ``e``."""
        if "plus" not in self.sig.globals:
            return None
        spots = [k for k, p in enumerate(ty.params) if _numeral(p) is not None]
        if not spots:
            return None
        k = self.rng.choice(spots)
        n = _numeral(ty.params[k])
        left = self.rng.randint(0, n)
        e = App(App(Var("plus"), nat_literal(left)), nat_literal(n - left))
        source = TCon(ty.name, ty.params[:k] + (e,) + ty.params[k + 1 :])
        x = fresh_name("x", ty.fv | {"x"})
        template = TCon(ty.name, ty.params[:k] + (Var(x),) + ty.params[k + 1 :])
        try:
            subject = self.gen(source, env, size - 1)
        except _Fail:
            return None
        return Conv(subject, (ProofValue(Join(e, ty.params[k])),), (x,), template)


def _numeral(t: Term) -> Optional[int]:
    n = 0
    while isinstance(t, DCon) and t.name == "S" and len(t.args) == 1:
        n += 1
        t = t.args[0].expr
    if isinstance(t, DCon) and t.name == "0" and not t.args:
        return n
    return None


def _match(pat: Term, target: Term, holes: set[str], sub: Optional[dict] = None) -> Optional[dict]:
    """First-order matching of ``pat`` against ``target``; ``holes`` are
    the pattern variables.  Binding forms must match exactly."""
    sub = {} if sub is None else sub
    if isinstance(pat, Var) and pat.name in holes:
        if pat.name in sub:
            return sub if type_eq(sub[pat.name], target) else None
        if target.fv & holes:
            return None
        sub[pat.name] = target
        return sub
    if not (pat.fv & holes):
        return sub if type_eq(pat, target) else None
    if type(pat) is not type(target) or pat.binders() or target.binders():
        return None
    if pat.data() != target.data():
        return None
    ps, ts = pat.slots(), target.slots()
    if len(ps) != len(ts):
        return None
    for (_, pc), (_, tc) in zip(ps, ts):
        if pc is None or tc is None:
            if pc is not tc:
                return None
            continue
        if _match(pc, tc, holes, sub) is None:
            return None
    return sub


def gen_welltyped(sig: Optional[Signature], target: Term, cfg: GenConfig) -> Term:
    """A closed term whose inferred type matches ``target``."""
    from ..typecheck import CheckError, check

    cfg_sig = sig if sig is not None else _signature(cfg)
    rng = random.Random(cfg.seed)
    gen = Generator(cfg_sig, rng, cfg)
    for _ in range(cfg.retries):
        size = rng.randint(1, cfg.max_size)
        try:
            term = gen.gen(target, _Env(), size)
        except _Fail:
            continue
        try:
            check(cfg_sig, term, target)
        except CheckError:
            continue
        return term
    raise GenerationError(f"no term of type {target} after {cfg.retries} attempts")


# ---------------------------------------------------------------------------
# random unannotated terms


_U_CONS = (("0", 0), ("S", 1), ("true", 0), ("false", 0), ("nil'", 1), ("cons'", 4))


def gen_uterm(rng: random.Random, size: int, scope: tuple[str, ...] = ()) -> UTerm:
    """A random, not necessarily well-typed, unannotated term."""
    leaves: list = [lambda: UStar(), lambda: UJoin(), lambda: UAbort(), lambda: UDCon("0", ()),
                    lambda: UDCon("true", ()), lambda: UTCon("Nat", ())]
    if scope:
        leaves += [lambda: UVar(rng.choice(scope))] * 3
    if size <= 1:
        return rng.choice(leaves)()
    fresh = f"v{len(scope)}"
    forms = [
        "lam", "lam", "app", "app", "app", "ilam", "iapp", "rec", "succ", "case", "case",
        "pi", "eq", "cons", "leaf", "beta", "beta", "ibeta", "iota",
    ]
    form = rng.choice(forms)
    k = size - 1
    if form == "lam":
        return ULam(fresh, gen_uterm(rng, k, scope + (fresh,)))
    if form == "ilam":
        return UILam(gen_uterm(rng, k, scope))
    if form == "beta" and k >= 2:
        a = rng.randint(1, k - 1)
        return UApp(ULam(fresh, gen_uterm(rng, a, scope + (fresh,))), gen_uterm(rng, k - a, scope))
    if form == "ibeta":
        return UIApp(UILam(gen_uterm(rng, max(1, k - 1), scope)))
    if form == "iota" and k >= 3:
        parts = max(1, (k - 1) // 3)
        pred = fresh + "p"
        scrut = UDCon("S", (gen_uterm(rng, parts, scope),)) if rng.random() < 0.6 else UDCon("0", ())
        return UCase(
            scrut,
            (
                UBranch("0", (), gen_uterm(rng, parts, scope)),
                UBranch("S", (pred,), gen_uterm(rng, parts, scope + (pred,))),
            ),
        )
    if form == "rec":
        body = ULam(fresh + "x", gen_uterm(rng, max(1, k - 1), scope + (fresh, fresh + "x")))
        return URec(fresh, body)
    if form == "app":
        a = rng.randint(1, max(1, k - 1))
        return UApp(gen_uterm(rng, a, scope), gen_uterm(rng, max(1, k - a), scope))
    if form == "iapp":
        return UIApp(gen_uterm(rng, k, scope))
    if form == "succ":
        return UDCon("S", (gen_uterm(rng, k, scope),))
    if form == "cons":
        a = rng.randint(1, max(1, k - 1))
        return UDCon("cons'", (ERASED, ERASED, gen_uterm(rng, a, scope), gen_uterm(rng, max(1, k - a), scope)))
    if form == "pi":
        a = rng.randint(1, max(1, k - 1))
        return UPi(fresh, gen_uterm(rng, a, scope), gen_uterm(rng, max(1, k - a), scope + (fresh,)), rng.random() < 0.3)
    if form == "eq":
        a = rng.randint(1, max(1, k - 1))
        return UEq(gen_uterm(rng, a, scope), gen_uterm(rng, max(1, k - a), scope))
    if form == "case":
        parts = max(1, k // 3)
        pred = fresh + "p"
        return UCase(
            gen_uterm(rng, parts, scope),
            (
                UBranch("0", (), gen_uterm(rng, parts, scope)),
                UBranch("S", (pred,), gen_uterm(rng, parts, scope + (pred,))),
            ),
        )
    return rng.choice(leaves)()


def gen_conv_term(sig: Signature, rng: random.Random, max_size: int = 16) -> Term:
    """A well-typed ``conv`` term.  Shapes cycle through identity
    conversions, index rewriting, several proofs at once, and annotation
    proofs at positions the erasure removes."""
    from ..typecheck import CheckError, infer

    gen = Generator(sig, rng, GenConfig(seed=0, sig=sig))
    pool = numeral_type_pool(sig)
    for _ in range(100):
        target = rng.choice(pool)
        shape = rng.randrange(4)
        try:
            if shape == 0:
                subject = gen.gen(target, _Env(), rng.randint(1, max_size))
                term: Term = Conv(subject, (ProofValue(Join(target, target)),), ("x1",), Var("x1"))
            elif shape == 1 and isinstance(target, TCon):
                found = gen.gen_index_conv(target, _Env(), rng.randint(2, max_size))
                if found is None:
                    continue
                term = found
            elif shape == 2:
                # an annotation proof inside a lambda's domain annotation
                a, b = rng.choice(gen.base_types), rng.choice(gen.base_types)
                ident = Lam("y", a, Var("y"))
                subject = Join(ident, ident, 0, 0)
                template = Eq(Lam("y", Var("x1"), Var("y")), ident)
                term = Conv(subject, (ProofAnnot(a, b),), ("x1",), template)
            else:
                # a value proof and an annotation proof, both in erased positions
                a, b = rng.choice(gen.base_types), rng.choice(gen.base_types)
                ident = Lam("y", a, Var("y"))
                subject = Join(ident, ident, 0, 0)
                template = Eq(Lam("y", Var("x1"), Var("y")), Lam("y", Var("x2"), Var("y")))
                term = Conv(subject, (ProofAnnot(a, b), ProofValue(Join(a, a))), ("x1", "x2"), template)
        except _Fail:
            continue
        try:
            infer(sig, term)
        except CheckError:
            continue
        return term
    raise GenerationError("no conversion term found")


# ---------------------------------------------------------------------------
# mutated annotated terms

Path = tuple[int, ...]


def positions(t: Term, path: Path = ()) -> Iterator[tuple[Path, Term]]:
    """Every subterm with the slot path leading to it, outermost first."""
    yield path, t
    for k, (_, child) in enumerate(t.slots()):
        if child is not None:
            yield from positions(child, path + (k,))


def replace_at(t: Term, path: Path, new: Term) -> Term:
    if not path:
        return new
    children = [c for _, c in t.slots()]
    children[path[0]] = replace_at(children[path[0]], path[1:], new)
    return t.rebuild(children, t.binders())


_MUTANT_LEAVES = (
    Star(),
    Var("x"),
    Var("plus"),
    TCon("Nat"),
    TCon("Bool"),
    DCon("0"),
    DCon("true"),
    Abort(TCon("Nat")),
    Join(DCon("0"), DCon("0")),
    Join(Var("x"), DCon("0"), 3, 3),
    Lam("x", TCon("Nat"), Var("x")),
)


def gen_mutant(sig: Signature, rng: random.Random, max_size: int = 20) -> Term:
    """An annotated term that is usually ill-typed: a well-typed term
    after one to three random edits.

    Edits replace a subterm by a leaf, by a subterm of a second generated
    term (possibly capturing or escaping binders), or apply it to a leaf.
    """
    pool = numeral_type_pool(sig)
    gen = Generator(sig, rng, GenConfig(max_size=max_size, sig=sig))

    def draw() -> Term:
        for _ in range(20):
            try:
                return gen.gen(rng.choice(pool), _Env(), rng.randint(1, max_size))
            except _Fail:
                continue
        return rng.choice(_MUTANT_LEAVES)

    term = draw()
    for _ in range(rng.randint(1, 3)):
        path, sub = rng.choice(list(positions(term)))
        kind = rng.randrange(3)
        if kind == 0:
            new = rng.choice(_MUTANT_LEAVES)
        elif kind == 1:
            new = rng.choice([s for _, s in positions(draw())])
        else:
            new = App(sub, rng.choice(_MUTANT_LEAVES), rng.random() < 0.2)
        term = replace_at(term, path, new)
    return term
