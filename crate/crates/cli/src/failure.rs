use normsol::branch::BranchError;
use normsol::identities::IdentityError;
use normsol::io::IoError;
use normsol::model::ModelError;
use normsol::quadrature::QuadError;
use normsol::variational::VariationalError;

pub const EXIT_MATH: u8 = 2;
pub const EXIT_CONFIG: u8 = 3;

/// A failed run: either the inputs were unusable or the mathematics said no.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Math(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Math(_) => EXIT_MATH,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Math(m) => m,
        }
    }
}

impl From<QuadError> for Failure {
    fn from(e: QuadError) -> Self {
        match e {
            QuadError::InvalidConfig(_) => Failure::Config(e.to_string()),
            _ => Failure::Math(e.to_string()),
        }
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Invalid(_) => Failure::Config(e.to_string()),
            ModelError::Quad(q) => q.into(),
            _ => Failure::Math(e.to_string()),
        }
    }
}

impl From<BranchError> for Failure {
    fn from(e: BranchError) -> Self {
        match e {
            BranchError::InvalidInput(_) => Failure::Config(e.to_string()),
            BranchError::Model(m) => m.into(),
            BranchError::Quad(q) => q.into(),
            BranchError::AllPointsDegenerate { ref lambdas } => {
                let list: Vec<String> = lambdas.iter().map(|l| l.to_string()).collect();
                Failure::Math(format!("{e}; degenerate lambda: {}", list.join(", ")))
            }
            _ => Failure::Math(e.to_string()),
        }
    }
}

impl From<VariationalError> for Failure {
    fn from(e: VariationalError) -> Self {
        match e {
            VariationalError::InvalidOptions(_) | VariationalError::InvalidField(_) => Failure::Config(e.to_string()),
            VariationalError::NotConverged(ref r) => {
                let mut msg = e.to_string();
                for n in &r.notes {
                    msg.push_str("\n  ");
                    msg.push_str(n);
                }
                Failure::Math(msg)
            }
            _ => Failure::Math(e.to_string()),
        }
    }
}

impl From<IdentityError> for Failure {
    fn from(e: IdentityError) -> Self {
        match e {
            IdentityError::NotApplicable(_) => Failure::Config(e.to_string()),
            IdentityError::ZeroField => Failure::Math(e.to_string()),
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Config(e.to_string())
    }
}
