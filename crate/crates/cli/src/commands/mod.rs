pub mod gen;
pub mod policy;
pub mod render;
pub mod score;
pub mod study;
