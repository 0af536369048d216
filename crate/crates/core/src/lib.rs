pub mod channel;
pub mod cli;
pub mod diamond;
pub mod linalg;
pub mod random;
pub mod sdp;
pub mod witness;
