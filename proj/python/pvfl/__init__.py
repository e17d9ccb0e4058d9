"""Client selection under partial visibility."""

from ._pvfl import (
    ConfigError,
    VisibilityProcess,
    gradient_suite,
    macro_f1,
    multistep_target,
    partition_dirichlet,
    partition_label_skew,
    random_project,
    read_metrics,
    reward_update,
    run_experiment,
    select_action,
    summarize,
)

__all__ = [
    "ConfigError",
    "VisibilityProcess",
    "gradient_suite",
    "macro_f1",
    "multistep_target",
    "partition_dirichlet",
    "partition_label_skew",
    "random_project",
    "read_metrics",
    "reward_update",
    "run_experiment",
    "select_action",
    "summarize",
]
