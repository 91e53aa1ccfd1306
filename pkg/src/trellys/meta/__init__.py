"""Executable metatheory: term generators, derivation validation and
property suites."""

from .generate import (
    DEFAULT_WEIGHTS,
    GenConfig,
    GenerationError,
    gen_conv_term,
    gen_mutant,
    gen_uterm,
    gen_welltyped,
    numeral_type_pool,
)
from .suites import (
    SUITES,
    Counterexample,
    SuiteReport,
    canonical_forms_suite,
    diamond_suite,
    erasure_soundness_suite,
    progress_suite,
    shrink,
    subst_lemma_suite,
)
from .uderiv import UDerivation, Validation, erase_derivation, validate_uderivation

__all__ = [
    "DEFAULT_WEIGHTS",
    "GenConfig",
    "GenerationError",
    "gen_conv_term",
    "gen_mutant",
    "gen_uterm",
    "gen_welltyped",
    "numeral_type_pool",
    "SUITES",
    "Counterexample",
    "SuiteReport",
    "canonical_forms_suite",
    "diamond_suite",
    "erasure_soundness_suite",
    "progress_suite",
    "shrink",
    "subst_lemma_suite",
    "UDerivation",
    "Validation",
    "erase_derivation",
    "validate_uderivation",
]
