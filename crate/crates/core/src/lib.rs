pub mod analytic;
pub mod autodiff;
pub mod experiment;
pub mod network;
pub mod physics;
pub mod sampler;
pub mod trainer;
