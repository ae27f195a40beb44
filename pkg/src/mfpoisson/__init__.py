"""Particle-based two-layer network solver for the Neumann Poisson problem."""

from .activation import (
    DEFAULT_TAU,
    MollifiedActivation,
    get_activation,
    hat,
    hat_tau,
    h1_distance_hat,
    mollifier,
    mollifier_norm_const,
    relu,
    sigma_tau,
    sigma_tau_deriv,
)
from .spectral import (
    CosineSeries,
    barron_norm,
    eigenfunction,
    exact_solution,
    load_series,
    make_source,
    mixed_source,
    save_series,
    series_eval,
    series_l2_norm,
)
from .params import (
    ParamPoint,
    ParticleCloud,
    b_half_width,
    in_ball,
    init_cloud,
    retract,
    retract_cloud,
    tangent_project,
)
from .field import (
    SampleBatch,
    VelocityReport,
    empirical_loss,
    empirical_velocity,
    feature,
    feature_grad_theta,
    feature_grad_x,
    feature_grad_x_theta,
    network_eval,
    network_grad_x,
    quadrature_batch,
    quadrature_loss,
)
from .flow import (
    DivergenceError,
    EvalRow,
    RunRecord,
    TrainConfig,
    derive_seed,
    eval_l2_error,
    generate_dataset,
    sgd_step,
    summarize,
    train,
    train_repeats,
)
from .oracle import (
    analytic_energy,
    fd_gradient,
    fd_poisson_1d,
    hat_interpolant_1d,
)

__version__ = "0.1.0"
