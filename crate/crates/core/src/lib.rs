pub mod error;
pub mod approx;
pub mod compiler;
pub mod framework;
pub mod gadgets;
pub mod geom;
pub mod kinematics;
pub mod poly;
pub mod program;
pub mod render;
pub mod trigpoly;
