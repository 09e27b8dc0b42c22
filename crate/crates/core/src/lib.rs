//! Panel econometrics for bilateral trade and FDI gravity models.
//!
//! The crate covers the whole estimation pipeline for a reporter country's
//! bilateral panel: CSV ingestion with gap repair, construction of the gravity
//! regressors, cross-sectional dependence tests, first- and second-generation
//! panel unit-root tests, fixed/random effects with the Hausman test, 2SLS with
//! lagged instruments and its diagnostic battery, a seeded Monte Carlo harness,
//! and a report generator driven by the `gravpanel` CLI.
//!
//! Rows of every stacked panel are ordered entity-major, time-minor.

pub mod dgp;
pub mod error;
pub mod estimators;
pub mod gravity;
pub mod ingest;
pub mod ivdiag;
mod linalg;
pub mod montecarlo;
pub mod panel;
pub mod report;
pub mod stats;
pub mod unitroot;
pub mod xsdep;

pub use error::{Error, Result};
pub use estimators::{EstimationResult, IvSpec, Method};
pub use gravity::{GravityDataset, Relation};
pub use ingest::BilateralPanel;
pub use panel::{DesignMatrix, PanelIndex, PanelSeries};
pub use stats::{Reference, TestResult};
