use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Tensor extents do not fit the operation.
    Shape { op: &'static str, detail: String },
    /// A class label falls outside `[0, classes)`.
    LabelOutOfRange { label: usize, classes: usize },
    /// A parameter value is outside its domain (negative slope, ε > 1, ...).
    InvalidArgument { what: &'static str, detail: String },
    /// `backward` was asked to start from a non-scalar.
    NotScalar { shape: Vec<usize> },
    /// A variable handle was used with a tape that did not create it.
    ForeignVar,
    /// Activation name not recognised.
    UnknownActivation(String),
    /// Attack name not recognised.
    UnknownAttack(String),
    /// Architecture name not recognised.
    UnknownArchitecture(String),
    /// Parameter set does not line up with an architecture.
    ParamMismatch { tensor: String, detail: String },
    /// An operation needs at least one image.
    EmptySet,
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape { op, detail: detail.into() }
    }

    pub(crate) fn invalid(what: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidArgument { what, detail: detail.into() }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape { op, detail } => write!(f, "{op}: dimension error: {detail}"),
            Error::LabelOutOfRange { label, classes } => {
                write!(f, "label {label} out of range for {classes} classes")
            }
            Error::InvalidArgument { what, detail } => write!(f, "invalid {what}: {detail}"),
            Error::NotScalar { shape } => {
                write!(f, "backward needs a scalar loss, got shape {shape:?}")
            }
            Error::ForeignVar => f.write_str("variable does not belong to this tape"),
            Error::UnknownActivation(name) => write!(f, "unknown activation kind `{name}`"),
            Error::UnknownAttack(name) => write!(f, "unknown attack kind `{name}`"),
            Error::UnknownArchitecture(name) => write!(f, "unknown architecture `{name}`"),
            Error::ParamMismatch { tensor, detail } => {
                write!(f, "parameter `{tensor}`: {detail}")
            }
            Error::EmptySet => f.write_str("operation needs a non-empty image set"),
        }
    }
}

impl core::error::Error for Error {}
