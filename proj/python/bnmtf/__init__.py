"""Bayesian nonnegative matrix factorisation and tri-factorisation."""

try:
    from ._bnmtf import (  # noqa: F401
        MaskedMatrix,
        SeededRng,
        digamma,
        fit,
        generate_synthetic,
        sample_exponential,
        sample_gamma,
        sample_truncated_normal,
        split_train_test,
        tn_moments,
    )
except ImportError:  # in-tree builds keep the extension next to the package
    from _bnmtf import (  # noqa: F401
        MaskedMatrix,
        SeededRng,
        digamma,
        fit,
        generate_synthetic,
        sample_exponential,
        sample_gamma,
        sample_truncated_normal,
        split_train_test,
        tn_moments,
    )

__all__ = [
    "MaskedMatrix",
    "SeededRng",
    "digamma",
    "fit",
    "generate_synthetic",
    "sample_exponential",
    "sample_gamma",
    "sample_truncated_normal",
    "split_train_test",
    "tn_moments",
]
