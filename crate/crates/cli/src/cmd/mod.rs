pub mod compare;
pub mod lens;
pub mod plot;
pub mod train;
