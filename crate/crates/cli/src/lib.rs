//! Experiment harness: `prep`, `train`, `eval`, `sweep` and `compare`.

pub mod compare;
pub mod config;
pub mod evaluate;
pub mod prep;
pub mod prepared;
pub mod sweep;
pub mod train;

use hyperrec_core::HyperError;

/// Process exit status for a failed command: 2 for numerical failures inside
/// the library, 1 for everything caused by inputs or configuration.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    let internal = err.chain().any(|e| {
        matches!(
            e.downcast_ref::<HyperError>(),
            Some(HyperError::NonFinite(_) | HyperError::NonFiniteGradient { .. })
        )
    });
    if internal {
        2
    } else {
        1
    }
}

/// Error category printed in the one-line stderr summary.
pub fn error_kind(code: u8) -> &'static str {
    if code == 2 {
        "internal"
    } else {
        "user"
    }
}
