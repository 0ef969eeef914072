"""Length-generalization benchmark: formal-language transduction tasks,
memory-augmented sequence models on a from-scratch autodiff core, and the
training/evaluation harness.
"""

from .harness import (TrainConfig, build_batch, compute_score, evaluate,
                      load_checkpoint, save_checkpoint, sweep, train)
from .models import ModelConfig, build_model, run_model
from .tasks import TASK_IDS, TASKS, get_task

__version__ = "0.1.0"

__all__ = [
    "TASKS", "TASK_IDS", "get_task",
    "ModelConfig", "build_model", "run_model",
    "TrainConfig", "train", "evaluate", "sweep", "build_batch",
    "compute_score", "save_checkpoint", "load_checkpoint",
    "__version__",
]
