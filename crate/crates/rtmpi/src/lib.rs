//! Executable-behaviour workbench core: labelled transition systems with
//! bounded exploration, reactive Turing machines, a π-calculus engine, a
//! machine-to-π compiler, and (divergence-preserving) branching-bisimilarity
//! checking.

pub mod compile;
pub mod equiv;
pub mod lts;
pub mod pi;
pub mod rtm;

pub use compile::{compile, config_snapshot, tape_snapshot, CompilationOutput};
pub use equiv::{
    branching_bisim, branching_degree, check_relation, divergence_classes, dp_branching_bisim,
    oracle, self_partition, EquivResult, Partition, Verdict,
};
pub use lts::{
    explore, read_aut, restrict, write_aut, write_aut_acknowledged, ActionLabel, Lts,
    RestrictedGenerator, StepGenerator,
};
pub use pi::{
    alpha_eq, normalize, parse_pi, pi_generator, pi_out, NameUniverse, PiParseError, PiTerm,
};
pub use rtm::{
    initial_config, parse_rtm, rtm_generator, Configuration, Move, Rtm, Rule, TapeInstance,
    TapeSym,
};
