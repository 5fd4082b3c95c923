pub mod analysis;
pub mod experiments;
pub mod functions;
pub mod geometry;
pub mod kernels;
pub mod kriging;
pub mod linalg;
