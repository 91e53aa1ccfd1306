"""Type checker, eraser, evaluator and metatheory harness for a core
dependently typed language with general recursion and irrelevance."""

import sys

# Numerals are unary and terms are walked recursively.
sys.setrecursionlimit(max(sys.getrecursionlimit(), 20000))

__version__ = "0.1.0"
