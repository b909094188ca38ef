"""Cooperative underwater data-collection simulator.

Subsystems: shallow-water + vortex sea disturbance (``sea_env``), acoustic
phase-difference positioning (``usbl``), information-matrix waypoint planning
(``fim_planner``), the data-collection mission environment (``mission_env``),
a self-contained TD3 learner (``td3``), and the run harness/CLI
(``config``, ``harness``, ``cli``).
"""

from .errors import (
    CheckpointError,
    ConfigError,
    DegenerateGeometryError,
    DomainError,
    SimulationFault,
    TrainingFault,
)
from .sea_env import (
    SeaSample,
    VortexSpec,
    WaveGrid,
    advance_to,
    cfl_limit,
    default_vortices,
    make_grid,
    sample_sea,
    step_wave,
    vortex_velocity,
)
from .usbl import (
    DEFAULT_FREQS,
    AuvTruth,
    PositionEstimate,
    UsblConfig,
    UsblMeasurement,
    UsvState,
    default_configs,
    localize,
    measure,
    positioning_error,
    true_phases,
)
from .fim_planner import (
    FimMatrix,
    GeometryTerms,
    PlannerConfig,
    SymmetricCase,
    det_fim,
    det_fim_batch,
    det_symmetric,
    fim,
    fix_rms_error,
    geometry_terms,
    grid_search_waypoint,
    optimal_radius,
    phase_jacobian,
    plan_waypoint,
)
from .mission_env import (
    AuvAgentState,
    EpisodeMetrics,
    MissionConfig,
    MissionEnv,
    RewardWeights,
    SeaConfig,
    SensorNode,
    collect_metrics,
    link_rate,
    map_action,
    reward_terms,
    thorp_absorption_db_per_km,
)
from .td3 import (
    Mlp,
    ReplayBuffer,
    Td3Agent,
    Td3Hyper,
    TrainResult,
    Transition,
    convergence_episode,
    greedy_rollout,
    load_checkpoint,
    moving_average,
    random_rollout,
    restore_agent,
    save_checkpoint,
    soft_update,
    train,
)
from .config import (
    RunConfig,
    TIDAL_OMEGA,
    make_env,
    parse_config,
    parse_config_text,
    parse_usv_mode,
    render_resolved,
)

__version__ = "0.1.0"
