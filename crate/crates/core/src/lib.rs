//! Imprecise probability trees: local credal models, global upper
//! expectations by backward recursion, limits of finitary approximants,
//! supermartingale certificates and an enumeration oracle over compatible
//! precise trees.

pub mod checks;
pub mod cli;
pub mod error;
pub mod extended;
pub mod gambles;
pub mod game;
pub mod io;
pub mod local;
pub mod oracle;
pub mod query;
pub mod random;
pub mod supermartingale;
pub mod tree;

pub use error::{Error, Result};
pub use extended::ExtendedReal;
pub use gambles::{Direction, FinitaryGamble, HitKind, HittingGamble, LimitVariable, SequentialGamble};
pub use game::{finitary_lower, finitary_upper, limit_lower, limit_upper, ApproxPolicy, ApproxResult};
pub use local::{CredalSet, LocalGamble, MassFunction, StateSpace};
pub use supermartingale::{canonical_supermartingale, certified_upper_bound, TailConstantProcess};
pub use tree::{Assignment, ImpreciseTree, PreciseTree, Situation, Tree};
