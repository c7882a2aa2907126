"""Updated lower and upper expectations for imprecise continuous-time hidden Markov chains."""

from icthmc.errors import (
    ConvergenceError,
    GuardExceededError,
    InputError,
    UndefinedUpdateError,
    ValidationError,
)
from icthmc.inference import (
    GbrProblem,
    GbrRegime,
    Model,
    Query,
    UpdatedExpectation,
    backward_product_transform,
    evaluate_G,
    merge_target,
    solve_gbr,
    updated_lower_expectation,
)
from icthmc.modelio import load_model, load_query, model_to_dict, query_to_dict
from icthmc.outputs import (
    Categorical,
    CategoricalEvent,
    GaussianDensity,
    IntervalEvent,
    Observation,
    ObservationSequence,
    Point,
    TabulatedDensity,
    event_shrink_sequence,
    likelihood_vector,
)
from icthmc.propagation import (
    CredalSet,
    PropagationConfig,
    conditional_lower_expectation,
    conditional_upper_expectation,
    unconditional_lower_expectation,
    unconditional_upper_expectation,
)
from icthmc.ratesets import (
    GeneratorRows,
    IntervalRows,
    RateMatrix,
    StateSpace,
    lower_rate_apply,
    norm_bound,
    upper_rate_apply,
)

__version__ = "0.1.0"
