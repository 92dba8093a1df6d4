from .experiment import (
    ExperimentConfig,
    Protocol,
    ResultRow,
    default_protocols,
    emit_tables,
    run_experiment,
)

__all__ = [
    "ExperimentConfig",
    "Protocol",
    "ResultRow",
    "default_protocols",
    "emit_tables",
    "run_experiment",
]
