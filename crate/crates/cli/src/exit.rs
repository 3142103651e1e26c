use std::fmt;

pub const EXIT_OK: i32 = 0;
/// A computation failed after its inputs were validated.
pub const EXIT_FAILURE: i32 = 1;
/// Bad flags, configuration or input values.
pub const EXIT_USAGE: i32 = 2;

/// An error the user can fix by changing the invocation or configuration.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// A check ran to completion and found values outside tolerance.
#[derive(Debug)]
pub struct CheckFailed(pub String);

impl fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CheckFailed {}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    use hdqkd::Error as E;
    if err.downcast_ref::<UsageError>().is_some() || err.downcast_ref::<toml::de::Error>().is_some() {
        return EXIT_USAGE;
    }
    if err.downcast_ref::<CheckFailed>().is_some() {
        return EXIT_FAILURE;
    }
    match err.downcast_ref::<E>() {
        Some(
            E::InvalidDimension(_)
            | E::InvalidBasisIndex { .. }
            | E::InvalidInput(_)
            | E::Geometry(_)
            | E::Sampling { .. }
            | E::InvalidModeSet(_)
            | E::InvalidConfig(_)
            | E::InvalidNoise(_)
            | E::Domain(_)
            | E::Format(_)
            | E::Json(_)
            | E::Csv(_),
        ) => EXIT_USAGE,
        Some(E::Io(e)) if e.kind() == std::io::ErrorKind::NotFound => EXIT_USAGE,
        _ => match err.downcast_ref::<std::io::Error>() {
            Some(e) if e.kind() == std::io::ErrorKind::NotFound => EXIT_USAGE,
            _ => EXIT_FAILURE,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes() {
        assert_eq!(exit_code(&usage("x")), EXIT_USAGE);
        assert_eq!(exit_code(&CheckFailed("x".into()).into()), EXIT_FAILURE);
        assert_eq!(exit_code(&hdqkd::Error::Geometry("x".into()).into()), EXIT_USAGE);
        assert_eq!(exit_code(&hdqkd::Error::NoThreshold("x".into()).into()), EXIT_FAILURE);
        let wrapped = anyhow::Error::from(hdqkd::Error::InsufficientData { b: 1, k: 1, l: 1 }).context("reading");
        assert_eq!(exit_code(&wrapped), EXIT_FAILURE);
        let wrapped = anyhow::Error::from(hdqkd::Error::Domain("x".into())).context("rate");
        assert_eq!(exit_code(&wrapped), EXIT_USAGE);
    }
}
