pub mod array;
pub mod error;
pub mod hash;
pub mod iaa;
pub mod io;
pub mod latency;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod scene;
pub mod specnet;

pub use array::{AngularGrid, ArrayGeometry, SteeringMatrix};
pub use error::{Error, Result};
pub use iaa::{IaaConfig, IaaResult};
pub use metrics::{FrameMetrics, MetricReport};
pub use pipeline::{
    adc_to_rdc, assemble_rda, rda_to_ra, DbfEstimator, IaaEstimator, RaMap, RdaCube, RdcCube,
    SpectrumEstimator, WindowKind,
};
pub use scene::{AdcCube, SceneSpec, ScenePolicy, TargetSpec};
pub use specnet::{InferenceMode, MlpModel, NetworkEstimator};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
