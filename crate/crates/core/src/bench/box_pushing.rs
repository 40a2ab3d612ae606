//! Cooperative Box Pushing, loaded from the bundled model file.

use crate::error::Result;
use crate::model::{parse_model, DecPomdp};

/// The bundled model document. `examples/gen_box_pushing.rs` regenerates it.
pub const BOX_PUSHING_MODEL: &str = include_str!("data/box_pushing.dpomdp");

pub fn build() -> Result<DecPomdp> {
    Ok(parse_model(BOX_PUSHING_MODEL)?.with_default_horizon(20))
}
