"""Motion scoring, fall prediction and reference adaptation for a simulated humanoid.

Thin wrapper over the compiled core. Tasks, sequences, scores and configs are
plain dicts in the same JSON schema the ``saw`` command-line tool uses.
"""

from ._core import (
    BoundsError,
    ConfigError,
    InputError,
    IoError,
    Model,
    NumericError,
    ParseError,
    SawError,
    ShapeError,
    adapt,
    baseline,
    compute_scores,
    default_config,
    evaluate,
    gen_data,
    generate_reference,
    quat_canonicalize,
    rank_candidates,
    rollout,
    sample_specs,
    scalarize,
    train,
)

__all__ = [name for name in dir() if not name.startswith("_")]
