"""ruleweave: structured decomposition for rule-based reasoning over text.

Natural-language input is decomposed by LLM calls into ontology individuals
and boolean assertions, the assertions populate a per-instance ABox, and a
deterministic SWRL-subset forward chainer derives the final classification.
The package also ships the evaluation harness (six conditions, paired
statistics) and a CLI.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .ontology import ABox, Asserted, ClassAtom, Inferred, Iri, PropertyAtom, SwrlRule, TBox, Variable
from .reasoner import InferenceResult, check_consistency, classify, forward_chain, subclass_closure

__all__ = [
    "__version__",
    "ABox",
    "Asserted",
    "ClassAtom",
    "Inferred",
    "InferenceResult",
    "Iri",
    "PropertyAtom",
    "SwrlRule",
    "TBox",
    "Variable",
    "check_consistency",
    "classify",
    "forward_chain",
    "subclass_closure",
]
