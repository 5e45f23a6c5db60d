"""Spatio-temporal hypergraph neural ODE network for traffic forecasting."""

from .tensor import (
    DimensionError,
    Parameter,
    Tensor,
    dilated_causal_conv,
    hadamard,
    huber_loss,
    mode_product,
    outer,
    softmax_rows,
    squash01,
)
from .optim import Adam, AdamState, TrainingError, grad_check, grad_check_params
from .hypergraph import (
    AdaptiveIncidence,
    ConstructionError,
    GeoGraph,
    Hypergraph,
    adaptive_incidence,
    build_geo_adjacency,
    build_spatial_hyperedges,
    build_temporal_hypergraph,
    dtw_distance,
    normalized_transform,
)
from .ode import (
    IntegrationError,
    OracleError,
    SpatialOdeDynamics,
    TemporalOdeDynamics,
    analytic_oracle,
    integrate,
    matrix_fractional_power,
)
from .data import SensorDistances, TrafficDataset, load_signals, synth_generate
from .metrics import MetricReport, mae, mape, report, rmse
from .model import (
    ModelConfig,
    SthodeNetwork,
    evaluate,
    load_checkpoint,
    naive_last_value,
    predict,
    save_checkpoint,
    train_epoch,
)

__version__ = "0.1.0"
