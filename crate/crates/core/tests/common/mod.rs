//! Oracles shared by the integration tests. Nothing here calls into the
//! statistics code under test.

#![allow(dead_code)]

use num_rational::Ratio;

/// Expected number of maximal runs of each exact length (index q − 1) for the
/// stationary two-state chain, by summing over all 2ⁿ outcome strings.
pub fn enumerate_expected_runs(n: usize, p0: f64, p1: f64) -> (Vec<f64>, Vec<f64>) {
    assert!((1..=20).contains(&n));
    let pi_on = if (1.0 - p0) + (1.0 - p1) == 0.0 {
        1.0
    } else {
        (1.0 - p1) / ((1.0 - p0) + (1.0 - p1))
    };
    let mut on = vec![0.0; n];
    let mut off = vec![0.0; n];
    for bits in 0u32..(1 << n) {
        // bit set = "off"
        let state = |k: usize| (bits >> k) & 1 == 1;
        let mut weight = if state(0) { 1.0 - pi_on } else { pi_on };
        for k in 1..n {
            let stay = if state(k - 1) { p1 } else { p0 };
            weight *= if state(k) == state(k - 1) {
                stay
            } else {
                1.0 - stay
            };
        }
        if weight == 0.0 {
            continue;
        }
        let mut start = 0;
        for k in 1..=n {
            if k == n || state(k) != state(start) {
                let len = k - start;
                if state(start) {
                    off[len - 1] += weight;
                } else {
                    on[len - 1] += weight;
                }
                start = k;
            }
        }
    }
    (on, off)
}

pub type Q = Ratio<i128>;

/// Expected run counts of "on" runs in exact rational arithmetic, from the
/// closed form Σ_s P(run starts at s)·p₀^{q−1}·P(run ends after q).
/// Returns (exactly q, at least q), index q − 1.
pub fn rational_on_runs(n: usize, p0: Q, p1: Q) -> (Vec<Q>, Vec<Q>) {
    let one = Q::from_integer(1);
    let zero = Q::from_integer(0);
    let pi_on = (one - p1) / ((one - p0) + (one - p1));
    let pi_off = one - pi_on;
    let mut exact = vec![zero; n];
    for s in 0..n {
        let start = if s == 0 { pi_on } else { pi_off * (one - p1) };
        for q in 1..=(n - s) {
            let body = (1..q).fold(one, |acc, _| acc * p0);
            let end = if s + q == n { one } else { one - p0 };
            exact[q - 1] += start * body * end;
        }
    }
    let mut at_least = vec![zero; n];
    let mut tail = zero;
    for q in (1..=n).rev() {
        tail += exact[q - 1];
        at_least[q - 1] = tail;
    }
    (exact, at_least)
}

pub fn q_abs(x: Q) -> Q {
    if x < Q::from_integer(0) {
        -x
    } else {
        x
    }
}

/// Mean and variance of the number of maximal runs of each exact length
/// (index q − 1), per outcome ("on", "off"), by exhaustive enumeration.
pub struct RunMoments {
    pub mean: [Vec<f64>; 2],
    pub variance: [Vec<f64>; 2],
}

pub fn enumerate_run_moments(n: usize, p0: f64, p1: f64) -> RunMoments {
    assert!((1..=20).contains(&n));
    let pi_on = (1.0 - p1) / ((1.0 - p0) + (1.0 - p1));
    let mut first = [vec![0.0; n], vec![0.0; n]];
    let mut second = [vec![0.0; n], vec![0.0; n]];
    let mut counts = [vec![0u32; n], vec![0u32; n]];
    for bits in 0u32..(1 << n) {
        let state = |k: usize| ((bits >> k) & 1) as usize;
        let mut weight = if state(0) == 1 { 1.0 - pi_on } else { pi_on };
        for k in 1..n {
            let stay = if state(k - 1) == 1 { p1 } else { p0 };
            weight *= if state(k) == state(k - 1) {
                stay
            } else {
                1.0 - stay
            };
        }
        if weight == 0.0 {
            continue;
        }
        counts.iter_mut().for_each(|c| c.fill(0));
        let mut start = 0;
        for k in 1..=n {
            if k == n || state(k) != state(start) {
                counts[state(start)][k - start - 1] += 1;
                start = k;
            }
        }
        for side in 0..2 {
            for q in 0..n {
                let c = counts[side][q] as f64;
                first[side][q] += weight * c;
                second[side][q] += weight * c * c;
            }
        }
    }
    let variance = [0, 1].map(|side| {
        (0..n)
            .map(|q| (second[side][q] - first[side][q] * first[side][q]).max(0.0))
            .collect()
    });
    RunMoments {
        mean: first,
        variance,
    }
}
