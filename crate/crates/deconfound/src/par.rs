//! Execution-mode switch for the data-parallel loops.
//!
//! Replication loops and grid enumerations are index-driven and
//! embarrassingly parallel. [`Execution::map_indexed`] maps a function
//! over `0..count` either on the rayon pool (`parallel` feature, default)
//! or sequentially, preserving index order in the output so results are
//! bit-identical in both modes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    /// Use the rayon thread pool when the `parallel` feature is enabled;
    /// silently degrades to sequential otherwise.
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    /// True when the crate was built with the rayon backend.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }

    /// Maps `f` over `0..count`, returning results in index order.
    pub fn map_indexed<R, F>(self, count: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        {
            if self == Execution::Parallel {
                use rayon::prelude::*;
                return (0..count).into_par_iter().map(f).collect();
            }
        }
        (0..count).map(f).collect()
    }
}

impl fmt::Display for Execution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Execution::Parallel => f.write_str("parallel"),
            Execution::Sequential => f.write_str("sequential"),
        }
    }
}

impl FromStr for Execution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "parallel" => Ok(Execution::Parallel),
            "sequential" => Ok(Execution::Sequential),
            other => Err(Error::Config(format!("unknown execution mode {other:?}"))),
        }
    }
}
