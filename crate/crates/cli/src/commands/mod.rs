pub mod cdf;
pub mod dominance;
pub mod exact;
pub mod gw;
pub mod rates;
pub mod simulate;
