//! Frequency-side analysis on sampled grids.

mod grid;
mod maximal;
mod pair;

pub use grid::{fft_nd, lp_norm, Grid, GridFunction, GridFunctionJson};
pub(crate) use grid::REDUCE_CHUNK;
pub use maximal::{
    admissible_exponents, ball_offsets, hl_maximal, hl_maximal_strided, peetre_from_abs, peetre_maximal,
};
pub use pair::{
    build_analyzing_pair, chi_hat, modulated_bump, pair_scales, r_norm_defect, scale_component, smoothstep_down, tl_aggregate,
    tl_norm, AnalyzingPair, TlParams,
};
