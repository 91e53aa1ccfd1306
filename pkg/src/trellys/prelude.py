"""Loading programs on top of the shipped prelude."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources
from typing import Optional

from .surface import parse_with_scope
from .typecheck import CheckedProgram, Signature, check_program


def prelude_source() -> str:
    return resources.files(__package__).joinpath("prelude.tre").read_text(encoding="utf-8")


@lru_cache(maxsize=1)
def _prelude() -> CheckedProgram:
    return load_program(prelude_source(), Signature())


def prelude_signature() -> Signature:
    """The checked prelude.  Callers must treat it as read-only."""
    return _prelude().signature


def load_program(text: str, base: Optional[Signature] = None) -> CheckedProgram:
    """Parse and check ``text`` in the scope of ``base``."""
    base = base if base is not None else Signature()
    program, _ = parse_with_scope(text, base.scope.copy())
    return check_program(program, base)


def load_with_prelude(text: str, use_prelude: bool = True) -> CheckedProgram:
    return load_program(text, prelude_signature() if use_prelude else Signature())
