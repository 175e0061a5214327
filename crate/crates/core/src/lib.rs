pub mod error;
pub mod modlinalg;
pub mod ring;
pub mod symplectic;
pub mod exec;
pub mod states;
pub mod protocol;
pub mod montecarlo;
