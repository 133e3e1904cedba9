use std::fmt;
use std::process::ExitCode;

use polyspec::assembly::AssemblyError;
use polyspec::deform::DeformError;
use polyspec::eigensolve::EigenError;
use polyspec::geometry::GeometryError;
use polyspec::io::IoError;
use polyspec::metric::MetricError;

pub const VALIDATION_FAILED: u8 = 1;
pub const INVALID_INPUT: u8 = 2;
pub const NUMERICAL: u8 = 3;

/// Error on its way to an exit code. `kind` names the violated condition.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    pub fn invalid(kind: &'static str, message: impl Into<String>) -> Self {
        Failure {
            code: INVALID_INPUT,
            kind,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let class = match self.code {
            INVALID_INPUT => "invalid input",
            NUMERICAL => "numerical failure",
            _ => "failure",
        };
        write!(f, "{class}: {}: {}", self.kind, self.message)
    }
}

fn geometry_kind(e: &GeometryError) -> (u8, &'static str) {
    use GeometryError::*;
    match e {
        TooFewVertices(_) => (INVALID_INPUT, "TooFewVertices"),
        SelfIntersecting(..) => (INVALID_INPUT, "SelfIntersecting"),
        DuplicateVertex(..) => (INVALID_INPUT, "DuplicateVertex"),
        NonFinite(_) => (INVALID_INPUT, "NonFinite"),
        DegenerateGeometry(_) => (INVALID_INPUT, "DegenerateGeometry"),
        MeshingFailed(_) => (NUMERICAL, "MeshingFailed"),
        InvalidMesh(_) => (INVALID_INPUT, "InvalidMesh"),
        NotStructuralMesh(_) => (INVALID_INPUT, "NotStructuralMesh"),
        VertexCountMismatch(..) => (INVALID_INPUT, "VertexCountMismatch"),
        DegeneratesAlongPath { .. } => (INVALID_INPUT, "DegeneratesAlongPath"),
        ParameterOutOfRange(_) => (INVALID_INPUT, "ParameterOutOfRange"),
        PathDegenerate(_) => (NUMERICAL, "PathDegenerate"),
    }
}

fn metric_kind(e: &MetricError) -> &'static str {
    match e {
        MetricError::OutsideDomain { .. } => "OutsideDomain",
        MetricError::StepTooLarge(_) => "StepTooLarge",
        MetricError::InvalidScale(_) => "InvalidScale",
        MetricError::InvalidKappa(_) => "InvalidKappa",
    }
}

fn eigen_kind(e: &EigenError) -> (u8, &'static str) {
    match e {
        EigenError::DimensionTooSmall { .. } => (INVALID_INPUT, "DimensionTooSmall"),
        EigenError::NoConvergence { .. } => (NUMERICAL, "NoConvergence"),
        EigenError::NotPositiveDefinite(_) => (NUMERICAL, "NotPositiveDefinite"),
    }
}

fn assembly_kind(e: &AssemblyError) -> (u8, &'static str) {
    match e {
        AssemblyError::Metric(m) => (INVALID_INPUT, metric_kind(m)),
        AssemblyError::Geometry(g) => geometry_kind(g),
        AssemblyError::DegenerateTriangle(_) => (NUMERICAL, "DegenerateTriangle"),
        AssemblyError::InvalidRescale(_) => (INVALID_INPUT, "InvalidRescale"),
    }
}

fn deform_kind(e: &DeformError) -> (u8, &'static str) {
    use DeformError::*;
    match e {
        Assembly(a) => assembly_kind(a),
        Eigen(x) => eigen_kind(x),
        Geometry(g) => geometry_kind(g),
        SampleFailed { source, .. } => deform_kind(source),
        KappaOutOfRange { .. } => (INVALID_INPUT, "KappaOutOfRange"),
        TooFewSamples(_) => (INVALID_INPUT, "TooFewSamples"),
        TooFewEigenvalues { .. } => (INVALID_INPUT, "TooFewEigenvalues"),
        ResidualsTooLarge { .. } => (NUMERICAL, "ResidualsTooLarge"),
        NoMinimumInBracket(..) => (NUMERICAL, "NoMinimumInBracket"),
        SamplingFailed(_) => (NUMERICAL, "SamplingFailed"),
        InvalidArgument(_) => (INVALID_INPUT, "InvalidArgument"),
    }
}

macro_rules! from_error {
    ($t:ty, $f:expr) => {
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                let (code, kind) = $f(&e);
                Failure {
                    code,
                    kind,
                    message: e.to_string(),
                }
            }
        }
    };
}

from_error!(GeometryError, geometry_kind);
from_error!(MetricError, |e| (INVALID_INPUT, metric_kind(e)));
from_error!(EigenError, eigen_kind);
from_error!(AssemblyError, assembly_kind);
from_error!(DeformError, deform_kind);
from_error!(IoError, |e: &IoError| match e {
    IoError::File { .. } => (INVALID_INPUT, "FileAccess"),
    IoError::Json(_) => (INVALID_INPUT, "MalformedJson"),
    IoError::Geometry(g) => geometry_kind(g),
});
