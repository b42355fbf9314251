//! Gradient descent with extrapolation for smooth non-convex minimization,
//! its stochastic and stagewise variants, and numerical checks of the
//! accompanying convergence bounds.

pub mod error;
pub mod harness;
pub mod numkit;
pub mod optimizers;
pub mod problems;
pub mod theory;

pub use error::{Error, Result};
pub use harness::{
    parse_config, parse_config_str, run_experiment, summarize, ExperimentConfig, RunOptions, RunRecord,
};
pub use numkit::{bregman_euclid, finite_diff_grad, project_ball, RngStream, SampleStats, Vector};
pub use optimizers::{
    run_gd, run_gde, run_minibatch_sgde, run_sgd, run_sgde_avg, run_stagewise, sample_stage_index,
    G0Mode, GdConfig, GdeConfig, InnerSolver, SgdeConfig, StageRecord, StagewiseConfig, Trajectory,
};
pub use problems::{build_problem, check_grad, NoiseModel, ObjectiveSpec, StochasticOracle};
pub use theory::{
    bound_thm1, bound_thm2, bound_thm3, check_lemma31, check_moreau_relations, prox_moreau,
    BoundReport, MoreauConfig,
};
