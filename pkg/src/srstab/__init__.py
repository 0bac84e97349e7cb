"""srstab: sub-Riemannian geodesics, value functions, loci, and SRS feedback."""

from .frames import (Frame, SubRiemannianSystem, builtin_system, eval_frame,
                     hamiltonian, load_system, normal_control)
from .flow import (Extremal, exp_differential, exp_map, integrate_extremal,
                   path_energy_and_length)
from .shooting import (MinimizerCandidate, MinimizerSet, shoot, shoot_batch,
                       value_function, gradient_from_shooting)
from .feedback import (FeedbackField, integrate_closed_loop, decay_check,
                       repulsion_check, martinet_modified_system)

__version__ = "0.1.0"

__all__ = [
    "Frame", "SubRiemannianSystem", "builtin_system", "eval_frame",
    "hamiltonian", "load_system", "normal_control",
    "Extremal", "exp_differential", "exp_map", "integrate_extremal",
    "path_energy_and_length",
    "MinimizerCandidate", "MinimizerSet", "shoot", "shoot_batch",
    "value_function", "gradient_from_shooting",
    "FeedbackField", "integrate_closed_loop", "decay_check",
    "repulsion_check", "martinet_modified_system",
    "__version__",
]
