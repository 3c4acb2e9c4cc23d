#![allow(dead_code)]

use noon_core::detection::{ClickPattern, DetectorSpec};

/// Enumerates every assignment of `n` photons to the detectors or to loss
/// and sums the probability of those in which each detector of `pattern`
/// receives at least one photon.
pub fn brute_force_click_probability(n: u32, spec: &DetectorSpec, pattern: &ClickPattern) -> f64 {
    let k = spec.detectors().len();
    let hit: Vec<f64> = (0..k).map(|i| spec.hit_probability(i)).collect();
    let miss = 1.0 - hit.iter().sum::<f64>();
    let wanted: Vec<usize> = pattern.indices().collect();
    let outcomes = k + 1;
    let total = outcomes.pow(n);
    let mut p_sum = 0.0;
    for code in 0..total {
        let mut c = code;
        let mut got = vec![0u32; k];
        let mut p = 1.0;
        for _ in 0..n {
            let o = c % outcomes;
            c /= outcomes;
            if o == k {
                p *= miss;
            } else {
                got[o] += 1;
                p *= hit[o];
            }
        }
        if wanted.iter().all(|&i| got[i] > 0) {
            p_sum += p;
        }
    }
    p_sum
}

/// Every subset of the detectors as a click pattern.
pub fn all_patterns(spec: &DetectorSpec) -> Vec<ClickPattern> {
    let ids: Vec<String> = spec.detectors().iter().map(|d| d.id.clone()).collect();
    (0u32..(1 << ids.len()))
        .map(|mask| {
            let chosen: Vec<&str> = ids
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, s)| s.as_str())
                .collect();
            spec.pattern(&chosen).unwrap()
        })
        .collect()
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}
