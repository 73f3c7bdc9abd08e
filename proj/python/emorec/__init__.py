"""Multimodal and multi-view emotion recognition at desk scale.

Thin python surface over the C++ core: corpus generation, view training,
evaluation and attention reports.
"""

try:
    from ._emorec import (
        ConfigError,
        DataError,
        NumericError,
        evaluate_checkpoint,
        generate_corpus,
        gradient_check_demo,
        report_attention,
        train_view,
        unweighted_accuracy,
    )
except ImportError:  # in-tree builds put _emorec next to the package dir
    from _emorec import (
        ConfigError,
        DataError,
        NumericError,
        evaluate_checkpoint,
        generate_corpus,
        gradient_check_demo,
        report_attention,
        train_view,
        unweighted_accuracy,
    )

__all__ = [
    "ConfigError",
    "DataError",
    "NumericError",
    "evaluate_checkpoint",
    "generate_corpus",
    "gradient_check_demo",
    "report_attention",
    "train_view",
    "unweighted_accuracy",
]

__version__ = "0.1.0"
