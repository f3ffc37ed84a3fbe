"""Probing harness for rare severe machine-translation errors.

Filters high-quality translations, exhaustively perturbs their sources by
deleting one character or one word, re-translates, and flags outlier BLEU
collapses as severe-error candidates for human triage.
"""

__version__ = "0.1.0"
