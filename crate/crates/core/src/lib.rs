//! Moving-object detection and tracking for a camera mounted on a walking
//! hexapod.
//!
//! The pipeline runs per frame: feature matching between consecutive frames
//! ([`features`]), background motion estimation and compensation ([`motion`]),
//! frame differencing and region merging ([`regions`], [`pipeline`]). A chosen
//! region is then followed with a correlation-filter tracker ([`kcf`]) whose
//! output drives the body and camera gimbal ([`control`], [`gait`]) through a
//! 3-byte command word ([`rcp`]).
//!
//! [`scene`] renders synthetic sequences with ground truth for all of the above.

pub mod control;
pub mod features;
pub mod fft;
pub mod gait;
pub mod geometry;
pub mod imgproc;
pub mod kcf;
pub mod motion;
pub mod pipeline;
pub mod rcp;
pub mod regions;
pub mod scene;
mod unionfind;

pub use geometry::{BoundingBox, Point};
