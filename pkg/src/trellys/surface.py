"""Concrete syntax: lexer, parser with desugaring, and pretty-printer.

Program files (``.tre``) are sequences of top-level items, each starting
in column 1::

    data Nat where { 0 : Nat; S : Nat -> Nat }

    plus : Nat -> Nat -> Nat
    plus = rec plus : Nat -> Nat -> Nat . \\n:Nat.\\m:Nat.
      case n as [y] of { 0 => m; S k => S (plus k m) }

Datatypes declared with indices (``data V (a:*) : Nat -> * where ...``)
are elaborated into extra parameters plus irrelevant equality fields, so
the checker only ever sees uniformly parameterised declarations.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Union

from .syntax import (
    Abort,
    App,
    Arg,
    Branch,
    Case,
    Conv,
    DCon,
    Entry,
    Eq,
    Erased,
    InjDom,
    InjRng,
    InjTCon,
    Join,
    Lam,
    Pi,
    ProofAnnot,
    ProofValue,
    Rec,
    Star,
    TCon,
    Telescope,
    Term,
    UAbort,
    UApp,
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
    Var,
    as_numeral,
    fresh_name,
    nat_literal,
    subst,
    subst_many,
)

KEYWORDS = frozenset(
    "data where case of as rec abort join conv at injdom injrng injtcon let in return".split()
)
MAX_STEPS = 2**31 - 1
PLUS = "plus"


class ParseError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message = message
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line else ""
        super().__init__(f"{where}{message}")


@dataclass(frozen=True)
class Token:
    kind: str  # ident, num, sym, kw, eof
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>--[^\n]*)
  | (?P<num>[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>->|=>|λ|[\\.:()\[\]{};=*~+])
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> list[Token]:
    out: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        value = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "ident":
            out.append(Token("kw" if value in KEYWORDS else "ident", value, line, col))
        elif kind == "sym":
            out.append(Token("sym", "\\" if value == "λ" else value, line, col))
        elif kind == "num":
            out.append(Token("num", value, line, col))
        pos = m.end()
    out.append(Token("eof", "", line, pos - line_start + 1))
    return out


# ---------------------------------------------------------------------------
# program structure


@dataclass(frozen=True)
class DataDecl:
    name: str
    params: Telescope
    cons: tuple[tuple[str, Telescope], ...]
    line: int = 0


@dataclass(frozen=True)
class Definition:
    name: str
    type: Term
    body: Term
    line: int = 0


Item = Union[DataDecl, Definition]


@dataclass(frozen=True)
class SourceProgram:
    items: tuple[Item, ...]


@dataclass
class Scope:
    """Names the parser must resolve specially: type and data constructors."""

    tcons: dict[str, int] = field(default_factory=dict)
    dcons: dict[str, tuple[int, tuple[bool, ...]]] = field(default_factory=dict)

    def copy(self) -> Scope:
        return Scope(dict(self.tcons), dict(self.dcons))

    def add(self, decl: DataDecl) -> None:
        self.tcons[decl.name] = len(decl.params)
        for con, tele in decl.cons:
            self.dcons[con] = (len(decl.params), tuple(e.irrelevant for e in tele))

    def has_nat(self) -> bool:
        return "0" in self.dcons and "S" in self.dcons


# ---------------------------------------------------------------------------
# parser


class _TemplateFrame:
    def __init__(self) -> None:
        self.proofs: list[Union[ProofValue, ProofAnnot]] = []
        self.blocked = False


class Parser:
    def __init__(self, text: str, scope: Optional[Scope] = None):
        self.toks = tokenize(text)
        self.pos = 0
        self.scope = scope.copy() if scope is not None else Scope()
        self.depth = 0
        self.item_mode = False
        self.item_start = 0
        self.templates: list[_TemplateFrame] = []

    # token helpers -----------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        tok = self.toks[min(self.pos + ahead, len(self.toks) - 1)]
        if self.item_mode and self.depth == 0 and tok.col == 1 and self.pos + ahead > self.item_start:
            return Token("eof", "", tok.line, tok.col)
        return tok

    def advance(self) -> Token:
        tok = self.toks[self.pos]
        self.pos += 1
        if tok.kind == "sym":
            if tok.text in "([{":
                self.depth += 1
            elif tok.text in ")]}":
                self.depth -= 1
        return tok

    def at(self, text: str) -> bool:
        tok = self.peek()
        return tok.kind in ("sym", "kw") and tok.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.advance()
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            tok = self.peek()
            found = tok.text or "end of item"
            raise ParseError(f"expected {text!r}, found {found!r}", tok.line, tok.col)
        return self.advance()

    def error(self, message: str) -> ParseError:
        tok = self.peek()
        return ParseError(message, tok.line, tok.col)

    def ident(self) -> str:
        tok = self.peek()
        if tok.kind != "ident":
            raise self.error(f"expected identifier, found {tok.text or 'end of item'!r}")
        self.advance()
        return tok.text

    def binder_name(self) -> str:
        tok = self.peek()
        name = self.ident()
        if name in self.scope.tcons or name in self.scope.dcons:
            raise ParseError(f"binder {name!r} shadows a constructor", tok.line, tok.col)
        return name

    def number(self) -> int:
        tok = self.peek()
        if tok.kind != "num":
            raise self.error("expected a number")
        self.advance()
        value = int(tok.text)
        if value > MAX_STEPS:
            raise ParseError(f"number {value} exceeds 2^31-1", tok.line, tok.col)
        return value

    # programs ----------------------------------------------------------

    def program(self) -> SourceProgram:
        items: list[Item] = []
        pending: dict[str, tuple[Term, int]] = {}
        defined: set[str] = set()
        while self.toks[self.pos].kind != "eof":
            start = self.toks[self.pos]
            if start.col != 1:
                raise ParseError("top-level items must start in column 1", start.line, start.col)
            self.item_mode = True
            self.item_start = self.pos
            if start.kind == "kw" and start.text == "data":
                decl = self.data_decl()
                self.scope.add(decl)
                items.append(decl)
            elif start.kind == "ident":
                name = self.advance().text
                if self.accept(":"):
                    if name in pending or name in defined:
                        raise ParseError(f"second signature for {name!r}", start.line, start.col)
                    pending[name] = (self.expr(), start.line)
                elif self.accept("="):
                    if name not in pending:
                        raise ParseError(f"definition of {name!r} has no signature", start.line, start.col)
                    ty, _ = pending.pop(name)
                    items.append(Definition(name, ty, self.expr(), start.line))
                    defined.add(name)
                else:
                    raise self.error("expected ':' or '=' after a top-level name")
            else:
                raise ParseError(f"unexpected {start.text!r} at top level", start.line, start.col)
            tok = self.peek()
            if tok.kind != "eof":
                raise ParseError(f"unexpected {tok.text!r}", tok.line, tok.col)
            self.item_mode = False
        if pending:
            name, (_, line) = next(iter(pending.items()))
            raise ParseError(f"signature for {name!r} has no definition", line, 1)
        return SourceProgram(tuple(items))

    def data_decl(self) -> DataDecl:
        line = self.expect("data").line
        name = self.ident()
        params: list[Entry] = []
        while self.at("("):
            params.extend(self.paren_binders())
        for e in params:
            if e.irrelevant:
                raise self.error("datatype parameters must be relevant")
        indices: list[Entry] = []
        if self.accept(":"):
            kind = self.expr()
            while isinstance(kind, Pi):
                indices.append(Entry(kind.name, kind.dom))
                kind = kind.cod
            if not isinstance(kind, Star):
                raise self.error("datatype kind must end in *")
        self.expect("where")
        nparams = len(params)
        self.scope.tcons[name] = nparams + len(indices)
        raw: list[tuple[str, Term, Token]] = []
        self.expect("{")
        while not self.at("}"):
            tok = self.peek()
            if tok.kind == "num" and tok.text == "0":
                self.advance()
                con = "0"
            else:
                con = self.ident()
            self.expect(":")
            raw.append((con, self.expr(), tok))
            if not self.accept(";"):
                break
        self.expect("}")
        cons = tuple(
            self.constructor(name, params, indices, con, ty, tok) for con, ty, tok in raw
        )
        index_params = _index_params(params, indices, cons)
        cons = tuple(_elaborate_indices(c, tele, idx, index_params) for c, tele, idx in cons)
        all_params = tuple(params) + tuple(
            Entry(n, e.type) for n, e in zip(index_params, _renamed_indices(indices, index_params))
        )
        self.scope.tcons[name] = len(all_params)
        return DataDecl(name, all_params, cons, line)

    def constructor(self, dname, params, indices, con, ty, tok):
        entries: list[Entry] = []
        while isinstance(ty, Pi):
            name = ty.name
            taken = {e.name for e in entries} | {p.name for p in params}
            if name in taken:
                fresh = fresh_name(name, taken | set(ty.cod.fv))
                ty = Pi(fresh, ty.dom, subst(ty.cod, name, Var(fresh)), ty.irrelevant)
                name = fresh
            entries.append(Entry(name, ty.dom, ty.irrelevant))
            ty = ty.cod
        if not (isinstance(ty, TCon) and ty.name == dname):
            raise ParseError(f"constructor {con!r} must return {dname}", tok.line, tok.col)
        args = ty.params
        if len(args) != len(params) + len(indices):
            raise ParseError(f"constructor {con!r} result has wrong arity", tok.line, tok.col)
        for p, a in zip(params, args):
            if not (isinstance(a, Var) and a.name == p.name):
                raise ParseError(
                    f"constructor {con!r} must return {dname} applied to its parameters",
                    tok.line,
                    tok.col,
                )
        return con, tuple(entries), args[len(params) :]

    def paren_binders(self) -> list[Entry]:
        self.expect("(")
        names = [self.binder_name()]
        while self.peek().kind == "ident":
            names.append(self.binder_name())
        self.expect(":")
        ty = self.expr()
        self.expect(")")
        return [Entry(n, ty) for n in names]

    # expressions -------------------------------------------------------

    def expr(self, allow_eq: bool = True) -> Term:
        if self.at("\\"):
            self.advance()
            if self.accept("["):
                x = self.binder_name()
                self.expect(":")
                dom = self.expr()
                self.expect("]")
                irr = True
            else:
                x = self.binder_name()
                self.expect(":")
                dom = self.expr()
                irr = False
            self.expect(".")
            return Lam(x, dom, self.expr(allow_eq), irr)
        if self.at("rec"):
            self.advance()
            f = self.binder_name()
            self.expect(":")
            ty = self.expr()
            self.expect(".")
            return Rec(f, ty, self.expr(allow_eq))
        if self.at("conv"):
            self.advance()
            subject = self.expr()
            self.expect("at")
            return self.template(subject, allow_eq)
        if self.at("case"):
            return self.case_expr(allow_eq)
        if self.at("let"):
            self.advance()
            x = self.binder_name()
            self.expect(":")
            ty = self.expr(allow_eq=False)
            self.expect("=")
            bound = self.expr()
            self.expect("in")
            body = self.expr(allow_eq)
            return App(Lam(x, ty, body), bound)
        return self.arrow(allow_eq)

    def template(self, subject: Term, allow_eq: bool) -> Term:
        frame = _TemplateFrame()
        self.templates.append(frame)
        try:
            body = self.expr(allow_eq)
        finally:
            self.templates.pop()
        return make_conv(subject, body, frame.proofs)

    def case_expr(self, allow_eq: bool) -> Term:
        self.expect("case")
        scrut = self.expr()
        self.expect("as")
        self.expect("[")
        y = self.binder_name()
        self.expect("]")
        ret = self.expr() if self.accept("return") else None
        self.expect("of")
        self.expect("{")
        branches: list[Branch] = []
        while not self.at("}"):
            branches.append(self.branch())
            if not self.accept(";"):
                break
        self.expect("}")
        return Case(scrut, y, tuple(branches), ret)

    def branch(self) -> Branch:
        wrapped = self.accept("(")
        tok = self.peek()
        if tok.kind == "num" and tok.text == "0":
            self.advance()
            con = "0"
        else:
            con = self.ident()
        if con not in self.scope.dcons:
            raise ParseError(f"unknown constructor {con!r} in pattern", tok.line, tok.col)
        tele: list[Entry] = []
        while True:
            if self.peek().kind == "ident":
                tele.append(Entry(self.binder_name(), None, False))
            elif self.at("[") or (self.at("(") and self.peek(1).kind == "ident"):
                irr = self.advance().text == "["
                x = self.binder_name()
                ty = None
                if self.accept(":"):
                    ty = self.expr()
                self.expect("]" if irr else ")")
                tele.append(Entry(x, ty, irr))
            else:
                break
        if wrapped:
            self.expect(")")
        self.expect("=>")
        return Branch(con, tuple(tele), self.expr())

    def arrow(self, allow_eq: bool) -> Term:
        if self.at("(") and self._binder_ahead():
            entries = self.paren_binders()
            self.expect("->")
            cod = self.arrow(allow_eq)
            for e in reversed(entries):
                cod = Pi(e.name, e.type, cod)
            return cod
        if self.at("[") and self.peek(1).kind == "ident" and self.peek(2).text == ":":
            self.advance()
            x = self.binder_name()
            self.expect(":")
            dom = self.expr()
            self.expect("]")
            self.expect("->")
            return Pi(x, dom, self.arrow(allow_eq), True)
        lhs = self.equation(allow_eq)
        if self.accept("->"):
            cod = self.arrow(allow_eq)
            x = "x" if "x" not in cod.fv else fresh_name("x", cod.fv)
            return Pi(x, lhs, cod)
        return lhs

    def _binder_ahead(self) -> bool:
        k = 1
        while self.peek(k).kind == "ident":
            k += 1
        return k > 1 and self.peek(k).kind == "sym" and self.peek(k).text == ":"

    def equation(self, allow_eq: bool) -> Term:
        lhs = self.sum()
        if allow_eq and self.accept("="):
            return Eq(lhs, self.sum())
        return lhs

    def sum(self) -> Term:
        lhs = self.application()
        while self.accept("+"):
            lhs = App(App(Var(PLUS), lhs), self.application())
        return lhs

    def application(self) -> Term:
        head = self.atom()
        spine: list[tuple[Term, bool]] = []
        while True:
            if self.at("["):
                self.advance()
                spine.append((self.expr(), True))
                self.expect("]")
            elif self._atom_start():
                spine.append((self.resolve(self.atom(), []), False))
            else:
                break
        return self.resolve(head, spine)

    def _atom_start(self) -> bool:
        tok = self.peek()
        if tok.kind in ("ident", "num"):
            return True
        if tok.kind == "kw":
            return tok.text in ("abort", "join", "injdom", "injrng", "injtcon")
        return tok.kind == "sym" and tok.text in ("*", "(", "~")

    def resolve(self, head: Term, spine: list[tuple[Term, bool]]) -> Term:
        rest = spine
        if isinstance(head, Var) and head.name in self.scope.tcons:
            arity = self.scope.tcons[head.name]
            taken = spine[:arity]
            if any(irr for _, irr in taken):
                raise self.error(f"type constructor {head.name} takes relevant parameters")
            head = TCon(head.name, tuple(a for a, _ in taken))
            rest = spine[arity:]
        elif isinstance(head, Var) and head.name in self.scope.dcons:
            nparams, fields = self.scope.dcons[head.name]
            k = 0
            while k < nparams and k < len(spine) and spine[k][1]:
                k += 1
            if k < nparams and k < len(spine):
                raise self.error(f"parameters of {head.name} are written in brackets")
            params = tuple(a for a, _ in spine[:k])
            args = tuple(Arg(a, irr) for a, irr in spine[k : k + len(fields)])
            head = DCon(head.name, params, args)
            rest = spine[k + len(fields) :]
        for arg, irr in rest:
            head = App(head, arg, irr)
        return head

    def atom(self) -> Term:
        tok = self.peek()
        if tok.kind == "ident":
            self.advance()
            return Var(tok.text)
        if tok.kind == "num":
            if not self.scope.has_nat():
                raise self.error("numeric literals need Nat (0, S) in scope")
            return nat_literal(self.number())
        if self.accept("*"):
            return Star()
        if self.accept("("):
            inner = self.expr()
            self.expect(")")
            return inner
        if self.accept("abort"):
            return Abort(self.resolve(self.atom(), []))
        if self.accept("join"):
            i = j = None
            if self.peek().kind == "num":
                i = self.number()
                j = self.number()
            if self.accept(":"):
                lhs = self.sum()
                self.expect("=")
                rhs = self.sum()
            else:
                lhs = rhs = None
            if i is None:
                return Join(lhs, rhs)
            return Join(lhs, rhs, i, j)
        if self.accept("injdom"):
            return InjDom(self.resolve(self.atom(), []))
        if self.accept("injrng"):
            proof = self.resolve(self.atom(), [])
            return InjRng(proof, self.resolve(self.atom(), []))
        if self.accept("injtcon"):
            k = self.number()
            if k < 1:
                raise self.error("injtcon index starts at 1")
            return InjTCon(k, self.resolve(self.atom(), []))
        if self.at("~"):
            return self.tilde()
        raise self.error(f"unexpected {tok.text or 'end of item'!r}")

    def tilde(self) -> Term:
        tok = self.advance()
        if not self.templates or self.templates[-1].blocked:
            msg = "nested '~' inside a conversion proof" if self.templates else "'~' outside a conv template"
            raise ParseError(msg, tok.line, tok.col)
        frame = self.templates[-1]
        frame.blocked = True
        try:
            if self.accept("["):
                lhs = self.sum()
                self.expect("=")
                rhs = self.sum()
                self.expect("]")
                proof: Union[ProofValue, ProofAnnot] = ProofAnnot(lhs, rhs)
            else:
                proof = ProofValue(self.resolve(self.atom(), []))
        finally:
            frame.blocked = False
        frame.proofs.append(proof)
        return Var(_marker(len(frame.proofs)))


def _marker(k: int) -> str:
    return f"~{k}"


def make_conv(subject: Term, body: Term, proofs) -> Conv:
    """Replace the tilde markers of ``body`` by fresh template variables."""
    markers = [_marker(k + 1) for k in range(len(proofs))]
    avoid = set(body.fv) - set(markers)
    names = []
    for k in range(len(markers)):
        name = f"x{k + 1}"
        if name in avoid:
            name = fresh_name(name, avoid)
        avoid.add(name)
        names.append(name)
    template = subst_many(body, {m: Var(n) for m, n in zip(markers, names)})
    return Conv(subject, tuple(proofs), tuple(names), template)


def _index_params(params, indices, cons) -> list[str]:
    taken = {p.name for p in params}
    for _, tele, _ in cons:
        taken |= {e.name for e in tele}
    out = []
    for k, e in enumerate(indices):
        name = e.name if e.name not in taken and not e.name.startswith("x") else f"i{k + 1}"
        if name in taken:
            name = fresh_name(name, taken)
        taken.add(name)
        out.append(name)
    return out


def _renamed_indices(indices: list[Entry], names: list[str]) -> list[Entry]:
    out = []
    mapping: dict[str, Term] = {}
    for e, n in zip(indices, names):
        out.append(Entry(n, subst_many(e.type, mapping)))
        mapping[e.name] = Var(n)
    return out


def _elaborate_indices(con, tele, index_args, index_params):
    if not index_args:
        return con, tele
    taken = {e.name for e in tele} | set(index_params)
    entries = list(tele)
    for k, (param, idx) in enumerate(zip(index_params, index_args)):
        pname = "p" if len(index_args) == 1 else f"p{k + 1}"
        if pname in taken:
            pname = fresh_name(pname, taken)
        taken.add(pname)
        entries.append(Entry(pname, Eq(Var(param), idx), True))
    return con, tuple(entries)


def parse(text: str, scope: Optional[Scope] = None) -> SourceProgram:
    """Parse a program file.  ``scope`` carries datatypes declared earlier."""
    return Parser(text, scope).program()


def parse_with_scope(text: str, scope: Optional[Scope] = None) -> tuple[SourceProgram, Scope]:
    p = Parser(text, scope)
    prog = p.program()
    return prog, p.scope


def parse_expr(text: str, scope: Optional[Scope] = None) -> Term:
    p = Parser(text, scope)
    e = p.expr()
    tok = p.peek()
    if tok.kind != "eof":
        raise ParseError(f"unexpected {tok.text!r}", tok.line, tok.col)
    return e


def parse_conv_template(text: str, scope: Optional[Scope] = None):
    """Parse a template with ``~`` marks.

    Returns ``(template, template_vars, proofs)`` with one fresh variable
    per tilde, in left-to-right order.
    """
    p = Parser(text, scope)
    frame = _TemplateFrame()
    p.templates.append(frame)
    body = p.expr()
    tok = p.peek()
    if tok.kind != "eof":
        raise ParseError(f"unexpected {tok.text!r}", tok.line, tok.col)
    conv = make_conv(Var("_"), body, frame.proofs)
    return conv.template, conv.tvars, conv.proofs


# ---------------------------------------------------------------------------
# pretty-printer

EXPR, ARROW, EQ, SUM, APP, ATOM = range(6)
NUMERAL_LIMIT = 1000


def pretty(e: Term) -> str:
    """Render a term of either language with minimal parentheses.

    A function type prints as a plain arrow only when its binder is unused
    and is the generated name ``x``, so written signatures survive.
    """
    return _Printer().show(e, EXPR, {})


class _Printer:
    def show(self, e: Term, level: int, tildes: dict) -> str:
        text, own = self.render(e, tildes)
        return f"({text})" if own < level else text

    def render(self, e: Term, tildes: dict) -> tuple[str, int]:
        n = as_numeral(e)
        if n is not None:
            if n <= NUMERAL_LIMIT:
                return str(n), ATOM
            return "S (" * (n - 1) + "S 0" + ")" * (n - 1), APP
        match e:
            case Star() | UStar():
                return "*", ATOM
            case Var(name=x) | UVar(name=x):
                if x in tildes:
                    return tildes[x], ATOM
                return x, ATOM
            case Erased():
                return "[]", ATOM
            case Lam(name=x, dom=dom, body=body, irrelevant=irr):
                inner = self.drop(tildes, [x])
                b = f"[{x}:{self.show(dom, EXPR, tildes)}]" if irr else f"{x}:{self.show(dom, ARROW, tildes)}"
                return f"\\{b}.{self.show(body, EXPR, inner)}", EXPR
            case ULam(name=x, body=body):
                return f"\\{x}.{self.show(body, EXPR, tildes)}", EXPR
            case UILam(body=body):
                return f"\\[].{self.show(body, EXPR, tildes)}", EXPR
            case Rec(name=f, type=ty, body=body):
                inner = self.drop(tildes, [f])
                return f"rec {f} : {self.show(ty, ARROW, tildes)} . {self.show(body, EXPR, inner)}", EXPR
            case URec(name=f, body=body):
                return f"rec {f} . {self.show(body, EXPR, tildes)}", EXPR
            case Pi(name=x, dom=dom, cod=cod, irrelevant=irr) | UPi(name=x, dom=dom, cod=cod, irrelevant=irr):
                inner = self.drop(tildes, [x])
                rhs = self.show(cod, ARROW, inner)
                if irr:
                    return f"[{x}:{self.show(dom, EXPR, tildes)}] -> {rhs}", ARROW
                if x in cod.fv or x.rstrip("'") != "x":
                    return f"({x}:{self.show(dom, EXPR, tildes)}) -> {rhs}", ARROW
                return f"{self.show(dom, EQ, tildes)} -> {rhs}", ARROW
            case Eq(lhs=a, rhs=b) | UEq(lhs=a, rhs=b):
                return f"{self.show(a, SUM, tildes)} = {self.show(b, SUM, tildes)}", EQ
            case App(fun=App(fun=Var(name="plus"), arg=a, irrelevant=False), arg=b, irrelevant=False) if "plus" not in tildes:
                return f"{self.show(a, SUM, tildes)} + {self.show(b, APP, tildes)}", SUM
            case App(fun=f, arg=a, irrelevant=irr):
                arg = f"[{self.show(a, EXPR, tildes)}]" if irr else self.show(a, ATOM, tildes)
                return f"{self.show(f, APP, tildes)} {arg}", APP
            case UApp(fun=f, arg=a):
                return f"{self.show(f, APP, tildes)} {self.show(a, ATOM, tildes)}", APP
            case UIApp(fun=f):
                return f"{self.show(f, APP, tildes)} []", APP
            case TCon(name=d, params=ps) | UTCon(name=d, params=ps):
                if not ps:
                    return d, ATOM
                return " ".join([d] + [self.show(p, ATOM, tildes) for p in ps]), APP
            case DCon(name=d, params=ps, args=args):
                parts = [d] + [f"[{self.show(p, EXPR, tildes)}]" for p in ps]
                for a in args:
                    parts.append(f"[{self.show(a.expr, EXPR, tildes)}]" if a.irrelevant else self.show(a.expr, ATOM, tildes))
                return " ".join(parts), (ATOM if len(parts) == 1 else APP)
            case UDCon(name=d, args=args):
                parts = [d] + [self.show(a, ATOM, tildes) for a in args]
                return " ".join(parts), (ATOM if len(parts) == 1 else APP)
            case Abort(type=ty):
                return f"abort {self.show(ty, ATOM, tildes)}", APP
            case UAbort():
                return "abort", ATOM
            case UJoin():
                return "join", ATOM
            case Join(lhs=a, rhs=b, i=i, j=j):
                steps = "" if (i, j) == (100, 100) else f" {i} {j}"
                if a is None:
                    return f"join{steps}", APP
                return f"join{steps} : {self.show(a, SUM, tildes)} = {self.show(b, SUM, tildes)}", EXPR
            case InjDom(proof=p):
                return f"injdom {self.show(p, ATOM, tildes)}", APP
            case InjRng(proof=p, witness=w):
                return f"injrng {self.show(p, ATOM, tildes)} {self.show(w, ATOM, tildes)}", APP
            case InjTCon(index=k, proof=p):
                return f"injtcon {k} {self.show(p, ATOM, tildes)}", APP
            case Conv(subject=s, proofs=proofs, tvars=tvars, template=t):
                marks = self.drop(tildes, tvars)
                for x, proof in zip(tvars, proofs):
                    if isinstance(proof, ProofValue):
                        marks[x] = "~" + self.show(proof.value, ATOM, tildes)
                    else:
                        marks[x] = f"~[{self.show(proof.lhs, SUM, tildes)} = {self.show(proof.rhs, SUM, tildes)}]"
                return f"conv {self.show(s, ARROW, tildes)} at {self.show(t, EXPR, marks)}", EXPR
            case Case(scrut=s, eq_name=y, branches=brs, ret=ret):
                head = f"case {self.show(s, ARROW, tildes)} as [{y}]"
                if ret is not None:
                    head += f" return {self.show(ret, ARROW, tildes)}"
                arms = []
                for br in brs:
                    inner = self.drop(tildes, [y] + [x.name for x in br.tele])
                    pats = [br.con]
                    for k, ent in enumerate(br.tele):
                        scope = self.drop(tildes, [x.name for x in br.tele[:k]])
                        if ent.type is None:
                            pats.append(f"[{ent.name}]" if ent.irrelevant else ent.name)
                        elif ent.irrelevant:
                            pats.append(f"[{ent.name}:{self.show(ent.type, EXPR, scope)}]")
                        else:
                            pats.append(f"({ent.name}:{self.show(ent.type, EXPR, scope)})")
                    arms.append(f"{' '.join(pats)} => {self.show(br.body, EXPR, inner)}")
                return f"{head} of {{ {'; '.join(arms)} }}" if arms else f"{head} of {{}}", EXPR
            case UCase(scrut=s, branches=brs):
                arms = [
                    f"{' '.join((br.con,) + br.vars)} => {self.show(br.body, EXPR, tildes)}" for br in brs
                ]
                return f"case {self.show(s, ARROW, tildes)} of {{ {'; '.join(arms)} }}" if arms else f"case {self.show(s, ARROW, tildes)} of {{}}", EXPR
        raise TypeError(f"cannot print {type(e).__name__}")

    @staticmethod
    def drop(tildes: dict, names) -> dict:
        if not tildes:
            return {}
        return {k: v for k, v in tildes.items() if k not in names}
