#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod cli;
pub mod curvature;
pub mod error;
pub mod geometry;
pub mod gram;
pub mod integration;
pub mod laughlin;
pub mod report;
pub mod sum;
pub mod theta;
pub mod verify;
pub mod wen;
