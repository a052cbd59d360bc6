pub mod frame;
pub mod stats;
pub mod map;
pub mod generator;

pub use frame::*;
pub use stats::*;
pub use map::*;
pub use generator::*;
