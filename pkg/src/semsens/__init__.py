"""semsens: semantic-sensitivity evaluation for NLI classifiers.

Generates meaning-preserving hypothesis variations (accepted through a
symmetric-entailment check), re-classifies them, and reports fooling rates
plus predictive-distribution inconsistency statistics.
"""

from semsens.core import (
    Label,
    LabelDistribution,
    NLIRecord,
    Prediction,
    argmax_label,
    opposite_label,
)

__version__ = "0.1.0"

__all__ = [
    "Label",
    "LabelDistribution",
    "NLIRecord",
    "Prediction",
    "argmax_label",
    "opposite_label",
    "__version__",
]
