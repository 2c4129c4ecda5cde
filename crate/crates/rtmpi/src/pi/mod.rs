//! π-calculus engine: terms, surface syntax, canonical forms, and the
//! operational semantics exposed as a step generator.

pub mod normal;
pub mod parse;
pub mod step;
pub mod term;

pub use normal::{alpha_eq, normalize};
pub use parse::{parse_pi, PiParseError};
pub use step::{pi_generator, pi_out, pi_steps, PiGenerator, Step};
pub use term::{
    bound_names, expand_polyadic, free_names, pick_fresh, substitute, NameUniverse, PiTerm,
    FRESH_PREFIX,
};
