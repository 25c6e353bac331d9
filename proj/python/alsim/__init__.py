"""Active-learning simulator for 3D object detection."""

from ._alsim import (
    AlsimError,
    class_frequency_table,
    class_names,
    compare_reports,
    entropy_bits,
    evaluate_external,
    export_annotations,
    generate_dataset,
    least_confidence_score,
    margin_score,
    random_select,
    resume,
    round_scene_count,
    run_experiment,
    weeks_to_fraction,
)

__all__ = [
    "AlsimError",
    "class_frequency_table",
    "class_names",
    "compare_reports",
    "entropy_bits",
    "evaluate_external",
    "export_annotations",
    "generate_dataset",
    "least_confidence_score",
    "margin_score",
    "random_select",
    "resume",
    "round_scene_count",
    "run_experiment",
    "weeks_to_fraction",
]
