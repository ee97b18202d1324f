//! Small distributions shared by unit tests.

use crate::distribution::DiscreteJointDistribution;

/// Two support points, two groups; masses listed as (x, s, y).
pub(crate) fn d1() -> DiscreteJointDistribution {
    DiscreteJointDistribution::new(
        2,
        2,
        vec![
            0.15, 0.10, // x0, s1
            0.20, 0.05, // x0, s2
            0.05, 0.20, // x1, s1
            0.10, 0.15, // x1, s2
        ],
    )
    .unwrap()
}

/// Normalizes positive weights into a valid table.
pub(crate) fn from_weights(n: usize, groups: usize, weights: &[f64]) -> DiscreteJointDistribution {
    let total: f64 = weights.iter().sum();
    let mut mass: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let drift: f64 = 1.0 - mass.iter().sum::<f64>();
    mass[0] += drift;
    DiscreteJointDistribution::new(n, groups, mass).unwrap()
}

/// Random tables with `1..=max_n` points and `2..=max_groups` groups.
pub(crate) fn arb_distribution(
    max_n: usize,
    max_groups: usize,
) -> impl proptest::strategy::Strategy<Value = DiscreteJointDistribution> {
    use proptest::prelude::*;
    (1..=max_n, 2..=max_groups).prop_flat_map(|(n, g)| {
        prop::collection::vec(0.01f64..1.0, n * g * 2).prop_map(move |w| from_weights(n, g, &w))
    })
}
