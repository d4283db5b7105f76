mod common;

use aoi_mec::fedavg::{aggregate, MixMatrix};
use aoi_mec::learn::ParamSet;
use proptest::prelude::*;

#[test]
fn mixing_rule_properties() {
    let rep = common::fedavg_properties(5);
    assert!(rep.stochastic_err <= 1e-15, "{rep:?}");
    assert!(rep.mean_ulps <= 1, "{rep:?}");
    assert!(rep.contraction_err <= 1e-12, "{rep:?}");
    assert!(rep.identity_ok);
}

proptest! {
    #[test]
    fn aggregation_stays_in_hull(
        values in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 4), 2..8),
        w in 0.0f64..=1.0,
    ) {
        let params: Vec<ParamSet> = values
            .iter()
            .map(|v| ParamSet { shapes: vec![vec![4]], values: v.clone() })
            .collect();
        let out = aggregate(&params, &MixMatrix::new(params.len(), w).unwrap()).unwrap();
        for c in 0..4 {
            let lo = values.iter().map(|v| v[c]).fold(f64::INFINITY, f64::min);
            let hi = values.iter().map(|v| v[c]).fold(f64::NEG_INFINITY, f64::max);
            for p in &out {
                prop_assert!(p.values[c] >= lo - 1e-12 && p.values[c] <= hi + 1e-12);
            }
        }
    }
}
