//! Futures prices from the fictitious spot, Monte Carlo vanillas and Black-76 inversion.

mod black;
mod futures;
mod mc;
mod smile;

pub use black::{band_side, black_price, black_vega, implied_vol, BandSide, MAX_VOL, MIN_VOL};
pub use futures::{futures_from_spot, futures_price, FuturesCurve};
pub use mc::{mc_vanilla, mc_vanilla_with, McOptions, McPrice, VanillaSpec};
pub(crate) use mc::{mean_stderr, price_from_spots};
pub(crate) use smile::smile_point;
pub use smile::{atm_term_structure, model_smile, SimSettings, SmilePoint, TermStructure};
