//! Layers of the forecaster.

mod attention;
mod datetime;
mod dynamic;
mod linear;
mod params;
mod positional;
mod resl;

pub use attention::{AttentionAxis, SpatialAttention};
pub use datetime::{minmax_normalize, DateTimeEmbedding, EMBED_DIM};
pub use dynamic::{DynamicCoder, GATE_INIT};
pub use linear::LinearLayer;
pub use params::{Bound, Param, ParamId, ParamStore};
pub use positional::positional_encoding;
pub use resl::{Activation, ResLBlock, LEAKY_SLOPE};
