pub mod harness;
pub mod kernels;
pub mod koopman;
pub mod linalg;
pub mod ovkr;
pub mod sampling;
