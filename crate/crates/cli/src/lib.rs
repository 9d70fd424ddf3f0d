//! Command-line front end, trace formats and result writers for
//! `cache-regret-core`.

pub mod cli;
pub mod experiment;
pub mod output;
pub mod trace_io;

use std::fmt;

/// Marks an error as a usage error (exit code 2).
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

macro_rules! usage_bail {
    ($($arg:tt)*) => {
        return Err($crate::usage(format!($($arg)*)))
    };
}
pub(crate) use usage_bail;

/// 2 for usage errors and rejected parameters, 1 for everything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use cache_regret_core::Error as Core;
    let is_usage = err.chain().any(|e| {
        e.is::<Usage>()
            || matches!(
                e.downcast_ref::<Core>(),
                Some(Core::InvalidParameter(_) | Core::Unsupported(_))
            )
    });
    if is_usage {
        2
    } else {
        1
    }
}
