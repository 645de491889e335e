//! Small ReLU networks and the derivatives the manifold learner needs.
//!
//! The model is a fixed two-part MLP, so every derivative is written as a
//! hand-rolled layer rule instead of going through a general tape:
//!
//! * input Jacobian of the encoder (one reverse pass per latent coordinate),
//! * input gradient of the composed model (one reverse pass),
//! * directional derivative (one tangent pass),
//! * parameter gradient of the directional derivative (reverse mode over the
//!   tangent computation).

mod checkpoint;
mod mlp;
mod model;
mod pass;

pub use checkpoint::{checkpoint_from_json, checkpoint_to_json, load_checkpoint, ModelSpec};
pub use mlp::{Activation, Mlp, MlpSpec};
pub use model::{chain_rule_gradient, ManifoldModel};
pub(crate) use pass::PassScratch;
