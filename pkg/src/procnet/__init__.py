"""Sensing-policy learning for smart-sensor processing networks.

Simulates sensors that either stream raw samples quickly or process them
locally into slower but more accurate measurements, tracks the exact Kalman
predictor covariance under the resulting delayed and out-of-order arrivals,
and learns with tabular Q-learning how many sensors should process.
"""
from .config import ConfigError, ExperimentConfig, load_config, loads_config, write_config
from .env import (
    Discretizer,
    EpisodeResult,
    Scenario,
    SensingEnv,
    brute_force_best,
    calibrate_discretizer,
    run_episode,
    static_policy,
)
from .estimator import CovarianceTrace, DelayedPredictor, EventLog, covariance_at, run_trace
from .kernel import BACKEND
from .model import (
    K0,
    NoiseCovariance,
    NumericalError,
    SystemModel,
    make_double_integrator_2d,
    predict_cov,
    update_cov,
)
from .qlearning import LearningParams, QTable, TrainingResult, q_update, select_action, td_error, train
from .sensing import (
    DecisionSchedule,
    HomogeneousDecision,
    MeasurementEvent,
    Mode,
    SensingMode,
    SensorSpec,
    assign_modes,
    homogeneous_sensors,
    next_sample_time,
    simulate_sensor_streams,
)

__version__ = "0.1.0"
