//! Deterministic synthetic worlds used by tests and demos.
//!
//! Bundled fixture files live in `crates/core/fixtures/`, see the README there.

use crate::eval::{Marginal, Regime, SyntheticSpec};
use crate::numerics::RngSeed;

/// Mean shift, in null standard deviations, of the informative score in each regime.
pub const REGIME_SHIFT: f64 = 3.0;

/// Two informative scores and two pure-noise scores.
///
/// Regime A alternatives shift `score-a` by three standard deviations and
/// leave the rest null-distributed; regime B does the same for `score-b`.
/// Alternatives are pooled half and half.
pub fn build_two_regime_fixture(seed: RngSeed) -> SyntheticSpec {
    build_two_regime_fixture_with_mix(seed, 0.5)
}

/// Same world with a fraction `share_a` of alternatives from regime A.
pub fn build_two_regime_fixture_with_mix(seed: RngSeed, share_a: f64) -> SyntheticSpec {
    let null = Marginal::standard();
    let shifted = Marginal::Normal {
        mean: REGIME_SHIFT,
        sd: 1.0,
    };
    SyntheticSpec {
        score_names: vec![
            "score-a".into(),
            "score-b".into(),
            "noise-1".into(),
            "noise-2".into(),
        ],
        dependence: 0.0,
        null: vec![null.clone(); 4],
        alternatives: vec![
            Regime {
                weight: share_a,
                marginals: vec![shifted.clone(), null.clone(), null.clone(), null.clone()],
            },
            Regime {
                weight: 1.0 - share_a,
                marginals: vec![null.clone(), shifted, null.clone(), null],
            },
        ],
        n_null: 3000,
        n_alt: 2000,
        seed,
    }
}
