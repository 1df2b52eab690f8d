"""Python bindings for the patlm pattern-based subword language modeling toolkit."""

from ._core import (
    Automaton,
    ConfigError,
    InputError,
    NumericError,
    PatlmError,
    crf_expected_counts,
    crf_log_partition,
    evaluate,
    gate_means,
    mine,
    minimize_owlqn,
    param_count,
    synth,
    train_crf,
    wikitext_normalize,
)

__all__ = [
    "Automaton",
    "ConfigError",
    "InputError",
    "NumericError",
    "PatlmError",
    "crf_expected_counts",
    "crf_log_partition",
    "evaluate",
    "gate_means",
    "mine",
    "minimize_owlqn",
    "param_count",
    "synth",
    "train_crf",
    "wikitext_normalize",
]
