"""Decentralized multi-robot box-lifting lab: DQN and CE-DQN controllers.

The heavy lifting lives in the compiled extension; this package re-exports
its public surface.
"""

from cedqn._core import (  # noqa: F401
    AUG_DIM,
    MSG_DIM,
    NUM_ACTIONS,
    OBS_DIM,
    Action,
    AggregatedMessage,
    AlgoKind,
    ComparisonRow,
    ComparisonSpec,
    CompletionResult,
    Crate,
    DoneReason,
    DqnAgent,
    EnvConfig,
    EpisodeStats,
    EpsilonSchedule,
    GridWorld,
    HyperParams,
    Message,
    MessageBus,
    MetricsLog,
    Mlp,
    OutputActivation,
    Robot,
    Rng,
    RunConfig,
    StepOutcome,
    TeamSpec,
    TrainResult,
    Transition,
    algo_name,
    augment,
    bellman_target,
    comparison_csv,
    copy_weights,
    discounted_return,
    epsilon_at,
    load_mlp,
    message_payload,
    metrics_csv,
    mlp_init,
    moving_average,
    optimal_steps_oracle,
    reset,
    run_comparison,
    save_mlp,
    sigmoid,
    team_from_counts,
    team_from_id,
    train_run,
    train_run_with_agents,
)

__version__ = "0.1.0"
