//! Compact-model design and analysis of nA-range constant-with-temperature
//! current references built from a self-cascode MOSFET biased by a
//! four-transistor voltage reference.
//!
//! Every model is generic over [`Real`] (`f32` or `f64`). The aliases at the
//! crate root fix the scalar to `f64`, which is what the CLI uses.
//!
//! ```
//! use scmref::{presets, refsim, series};
//!
//! let design = presets::gf22_design();
//! let ts = refsim::default_temperature_grid();
//! let iref = refsim::simulate_iref(&design, &refsim::Corner::identity(), &ts).unwrap();
//! let tc = series::tc_box(&iref).unwrap();
//! assert!(tc > 0.0);
//! ```

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod devmodel;
pub mod error;
pub mod fom;
pub mod presets;
pub mod real;
pub mod refsim;
pub mod roots;
pub mod scm;
pub mod series;
pub mod sizing;
pub mod vref4t;

pub use error::{Error, Result};
pub use real::Real;

pub type Technology = devmodel::TechnologyParams<f64>;
pub type Flavor = devmodel::FlavorParams<f64>;
pub type Body = devmodel::BodyModel<f64>;
pub type Scm = scm::ScmDesign<f64>;
pub type ScmSolution = scm::ScmBiasSolution<f64>;
pub type Vref = vref4t::Vref4tDesign<f64>;
pub type Calibration = vref4t::CalibrationConfig<f64>;
pub type Vx = vref4t::VxModel<f64>;
pub type Design = refsim::CurrentReferenceDesign<f64>;
pub type Corner = refsim::Corner<f64>;
pub type Series = series::TempSeries<f64>;
pub type Record = fom::ReferenceRecord<f64>;
pub type Sizing = sizing::SizingInputs<f64>;
pub type Report = sizing::SizingReport<f64>;

pub type Technology32 = devmodel::TechnologyParams<f32>;
pub type Design32 = refsim::CurrentReferenceDesign<f32>;
pub type Series32 = series::TempSeries<f32>;
