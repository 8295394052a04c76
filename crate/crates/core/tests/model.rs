use dsa_core::instances;
use dsa_core::model::{mix, parse_problem, sample_outcome, serialize_problem, SeededStream};

/// Upper 0.1% points of χ² with 1..=5 degrees of freedom.
const CHI2_999: [f64; 5] = [10.828, 13.816, 16.266, 18.467, 20.515];

fn chi_square(counts: &[usize], probs: &[f64]) -> f64 {
    let total: usize = counts.iter().sum();
    counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| {
            let e = p * total as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum()
}

#[test]
fn bundled_instances_round_trip() {
    for name in instances::NAMES {
        let p = instances::bundled(name).unwrap();
        let text = serialize_problem(&p).unwrap();
        assert_eq!(parse_problem(text.as_bytes()).unwrap(), p, "{name}");
    }
}

#[test]
fn sampled_marginals_match_declared_probabilities() {
    const DRAWS: usize = 100_000;
    for name in instances::NAMES {
        let p = instances::bundled(name).unwrap();
        for (offset, table) in p.distribution.tables.iter().enumerate() {
            let stage = offset + 2;
            for (parent, support) in table.iter().enumerate() {
                let probs: Vec<f64> = support.iter().map(|o| o.prob).collect();
                if probs.len() < 2 {
                    continue;
                }
                let mut counts = vec![0; probs.len()];
                for i in 0..DRAWS {
                    let s = SeededStream::new(mix(stage as u64 * 7919 + parent as u64, i as u64));
                    counts[sample_outcome(&p.distribution, stage, Some(parent), &s).unwrap().0] += 1;
                }
                let stat = chi_square(&counts, &probs);
                assert!(stat < CHI2_999[probs.len() - 2], "{name} stage {stage} parent {parent}: χ² = {stat}");
            }
        }
    }
}

#[test]
fn conditional_sampling_follows_the_parent_table() {
    const PATHS: usize = 100_000;
    let p = instances::bundled("tiny4").unwrap();
    let dist = &p.distribution;
    let table = &dist.tables[1];
    assert!(table.len() > 1, "tiny4 stage 3 is conditional");
    let mut counts = vec![vec![0usize; table[0].len()]; table.len()];
    for i in 0..PATHS {
        let root = SeededStream::new(i as u64);
        let (j2, _) = sample_outcome(dist, 2, Some(0), &root.child(2, 1)).unwrap();
        let (j3, _) = sample_outcome(dist, 3, Some(j2), &root.child(2, 1).child(3, 1)).unwrap();
        counts[j2][j3] += 1;
    }
    for (parent, row) in counts.iter().enumerate() {
        let n: usize = row.iter().sum();
        assert!(n > 0);
        for (j, &c) in row.iter().enumerate() {
            let prob = table[parent][j].prob;
            let freq = c as f64 / n as f64;
            let sigma = (prob * (1.0 - prob) / n as f64).sqrt();
            assert!((freq - prob).abs() <= 3.0 * sigma.max(1e-12), "parent {parent} outcome {j}: {freq} vs {prob}");
        }
    }
}
