//! Instances shared by the benchmarks.

use robustmv_core::{AmbiguitySpec, GammaBox, MarketParams};

pub fn two_asset() -> (AmbiguitySpec, MarketParams) {
    let p = MarketParams::new(vec![1.0, 1.0], 1.0, 0.5, 1.0).expect("valid market");
    let spec = AmbiguitySpec::ellipsoidal(vec![0.4, 0.2], 0.1, GammaBox::new(vec![-0.5], vec![0.8]));
    (spec, p)
}

pub fn three_asset() -> (AmbiguitySpec, MarketParams) {
    let p = MarketParams::new(vec![0.2, 0.25, 0.3], 1.0, 1.0, 1.0).expect("valid market");
    let spec = AmbiguitySpec::ellipsoidal(
        vec![0.08, 0.06, 0.05],
        0.05,
        GammaBox::new(vec![0.0, -0.2, 0.1], vec![0.4, 0.3, 0.5]),
    );
    (spec, p)
}

pub fn four_asset_product() -> (AmbiguitySpec, MarketParams) {
    let p = MarketParams::new(vec![0.2, 0.25, 0.3, 0.35], 1.0, 1.0, 1.0).expect("valid market");
    let spec = AmbiguitySpec::product(
        vec![0.03, 0.02, 0.04, 0.01],
        vec![0.08, 0.07, 0.09, 0.06],
        GammaBox::new(vec![-0.1; 6], vec![0.3; 6]),
    );
    (spec, p)
}
