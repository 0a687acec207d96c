"""Adversarial label learning from weak supervision signals and error bounds."""

from .baselines import (
    ConditionalReference,
    avg_pseudolabels,
    conditional_reference,
    ge_gradient,
    ge_objective,
    model_conditional,
    train_avg,
    train_ge,
)
from .core import (
    ContractError,
    Dataset,
    ModelState,
    WeakSignalSet,
    accuracy,
    constraint_value,
    constraint_values,
    expected_error,
    feasibility,
)
from .models import (
    DirectModel,
    FitConfig,
    SigmoidLinearModel,
    TrainingError,
    fit_supervised,
    jacobian_vector_product,
    load_model,
    predict,
    save_model,
)
from .oracle import InfeasibleError, OracleResult, is_feasible, primal_value, solve_exact
from .solver import (
    SolverConfig,
    TrainResult,
    TrainTrace,
    lagrangian,
    step_labels,
    step_multipliers,
    step_theta,
    train,
)
from .weak import fixed_bounds, make_weak_signal, true_error_bound

__version__ = "0.1.0"
