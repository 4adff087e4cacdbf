//! Forward and explicit backward implementations of every network layer.

pub mod act;
pub mod bn;
pub mod conv;
pub mod dropout;
pub mod linear;
pub mod pool;

pub use act::{gelu_bwd, gelu_fwd, relu_bwd, relu_fwd};
pub use bn::{BnCache, BnParams};
pub use conv::ConvParams;
pub use dropout::{dropout_bwd, dropout_fwd, dropout_mask};
pub use linear::LinearParams;
