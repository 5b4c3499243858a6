mod conv;
mod elementwise;
mod loss;
mod norm;
mod sample;
mod shape;

pub use norm::{NormMode, RunningStats, BATCH_NORM_EPSILON, BATCH_NORM_MOMENTUM};
