//! Library side of the `hearhere` command: pipeline steps, gradient audits
//! and the offline study report.

pub mod audit;
pub mod pipeline;
pub mod report;
