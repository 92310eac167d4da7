pub mod agent;
pub mod canonical;
pub mod clock;
pub mod structure;
pub mod toolkit;
pub mod xrd;
