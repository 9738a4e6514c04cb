//! Concrete control problems.

mod inventory;
mod quadratic;
mod witsenhausen;
mod zero_delay;

pub use inventory::{Inventory, InventoryParams, StageCost};
pub use quadratic::{Quadratic, QuadraticParams};
pub use witsenhausen::{Witsenhausen, WitsenhausenParams};
pub use zero_delay::{ZeroDelay, ZeroDelayParams};
