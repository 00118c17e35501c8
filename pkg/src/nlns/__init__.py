"""Large neighborhood search for finite-domain CSPs with a neural repair operator."""

from .csp import (
    Constraint,
    ConstraintKind,
    CspInstance,
    PenaltyReport,
    ProblemKind,
    assignment_report,
    constraint_penalty,
    cost,
    cut_size,
    eval_hard,
    one_hot,
    total_loss,
)
from .destroy import DESTROY_OPERATORS, DestroyContext, normalize_scores_to_rate
from .engine import LnsConfig, RunRecord, initialize, lns_run, lns_run_untrained_baseline
from .errors import (
    CapacityError,
    ConfigError,
    ModelFormatError,
    NlnsError,
    ParseError,
    TrainingFault,
    UnsupportedFeatureError,
)
from .gradients import (
    finite_diff_check,
    loss_grad_wrt_logits,
    loss_grad_wrt_q,
    variable_violation_scores,
)
from .instances import (
    DatasetSpec,
    Graph,
    build_instance,
    gen_dataset,
    gen_random_graph,
    gen_sudoku,
    load_dataset,
    load_instance_file,
    parse_dimacs_col,
    parse_gset,
    parse_sudoku,
    serialize_dimacs_col,
    serialize_gset,
    serialize_sudoku,
)
from .model import (
    ModelHyper,
    RepairModel,
    TrainConfig,
    forward,
    gumbel_softmax_sample,
    hyper_for_instance,
    init_model,
    load_model,
    save_model,
    train,
    train_step,
)
from .repair import REPAIR_OPERATORS, RepairProposal, repair_greedy, repair_sample

__version__ = "0.1.0"
