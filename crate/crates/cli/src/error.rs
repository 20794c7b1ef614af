use neqresponse_core::fluctuations::FluctuationError;
use neqresponse_core::markov::MarkovError;
use neqresponse_core::models::ModelError;
use neqresponse_core::pathspace::PathError;
use neqresponse_core::perturbation::PerturbationError;
use neqresponse_core::response::ResponseError;

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// A failure carrying its exit code and the module it came from.
#[derive(Debug)]
pub struct CliError {
    pub module: &'static str,
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            module: "cli",
            code: EXIT_VALIDATION,
            message: format!("UsageError: {}", message.into()),
        }
    }

    pub fn io(path: &str, err: std::io::Error) -> Self {
        let kind = if err.kind() == std::io::ErrorKind::NotFound {
            "FileNotFound"
        } else {
            "IoError"
        };
        Self {
            module: "cli",
            code: EXIT_IO,
            message: format!("{kind}: {path}: {err}"),
        }
    }

    /// One machine-readable line: `module: Reason: detail`.
    pub fn reason(&self) -> String {
        format!("{}: {}", self.module, self.message.replace('\n', " "))
    }
}

fn markov_code(e: &MarkovError) -> i32 {
    match e {
        MarkovError::SolverFailure(_) => EXIT_NUMERICAL,
        _ => EXIT_VALIDATION,
    }
}

fn perturbation_code(e: &PerturbationError) -> i32 {
    match e {
        PerturbationError::Markov(m) => markov_code(m),
        PerturbationError::Quadrature(_) | PerturbationError::RateOverflow { .. } => EXIT_NUMERICAL,
        _ => EXIT_VALIDATION,
    }
}

fn response_code(e: &ResponseError) -> i32 {
    match e {
        ResponseError::Markov(m) => markov_code(m),
        ResponseError::Perturbation(p) => perturbation_code(p),
        ResponseError::InvalidTimes(_) => EXIT_VALIDATION,
        ResponseError::NotStationary { .. } | ResponseError::StepSizeUnderflow(_) | ResponseError::Quadrature(_) => {
            EXIT_NUMERICAL
        }
    }
}

impl From<MarkovError> for CliError {
    fn from(e: MarkovError) -> Self {
        Self {
            module: "markov",
            code: markov_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<PerturbationError> for CliError {
    fn from(e: PerturbationError) -> Self {
        Self {
            module: "perturbation",
            code: perturbation_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<ResponseError> for CliError {
    fn from(e: ResponseError) -> Self {
        Self {
            module: "response",
            code: response_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<PathError> for CliError {
    fn from(e: PathError) -> Self {
        let code = match &e {
            PathError::Io(_) => EXIT_IO,
            PathError::Quadrature(_) | PathError::ThinningBound { .. } => EXIT_NUMERICAL,
            PathError::Markov(m) => markov_code(m),
            PathError::Perturbation(p) => perturbation_code(p),
            _ => EXIT_VALIDATION,
        };
        Self {
            module: "pathspace",
            code,
            message: e.to_string(),
        }
    }
}

impl From<FluctuationError> for CliError {
    fn from(e: FluctuationError) -> Self {
        let code = match &e {
            FluctuationError::MaxIterations { .. } | FluctuationError::Singular => EXIT_NUMERICAL,
            FluctuationError::Markov(m) => markov_code(m),
            FluctuationError::Perturbation(p) => perturbation_code(p),
            FluctuationError::InvalidParameter(_) => EXIT_VALIDATION,
        };
        Self {
            module: "fluctuations",
            code,
            message: e.to_string(),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        let code = match &e {
            ModelError::Io(_) => EXIT_IO,
            ModelError::Markov(m) => markov_code(m),
            ModelError::Perturbation(p) => perturbation_code(p),
            ModelError::Response(r) => response_code(r),
            _ => EXIT_VALIDATION,
        };
        Self {
            module: "models",
            code,
            message: e.to_string(),
        }
    }
}
