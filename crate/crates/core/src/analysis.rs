//! Comparison of identified models with ground truth.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::Complex;
use num_traits::Float;

use crate::error::{Error, Result};
use crate::lti::{frequency_response, StateSpaceModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigPair {
    pub estimated: Complex<f64>,
    pub truth: Complex<f64>,
    /// Index of `truth` in the reference list.
    pub truth_index: usize,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EigMatch {
    /// Sorted by `truth_index`.
    pub pairs: Vec<EigPair>,
    pub unmatched_estimated: Vec<Complex<f64>>,
    pub unmatched_truth: Vec<Complex<f64>>,
}

impl EigMatch {
    pub fn total_error(&self) -> f64 {
        self.pairs.iter().map(|p| p.error).sum()
    }

    pub fn max_error(&self) -> f64 {
        self.pairs.iter().map(|p| p.error).fold(0.0, f64::max)
    }
}

fn cmod(z: Complex<f64>) -> f64 {
    Float::hypot(z.re, z.im)
}

/// Minimum-cost assignment of every row to a distinct column
/// (`rows <= cols`), by the Hungarian method with potentials.
fn hungarian(cost: &[Vec<f64>], cols: usize) -> Vec<usize> {
    let n = cost.len();
    let m = cols;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=m {
        if p[j] != 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Pairs estimated and true eigenvalues by minimum total `|λ̂ - λ|`; when
/// the lists differ in length the surplus is reported as unmatched.
///
/// Among equal-cost assignments, pairs that stay in the same half-plane are
/// preferred, which keeps conjugate pairs matched to conjugate pairs.
pub fn match_eigenvalues(estimated: &[Complex<f64>], truth: &[Complex<f64>]) -> EigMatch {
    const HALF_PLANE_PENALTY: f64 = 1e-12;
    let pair_cost = |e: Complex<f64>, t: Complex<f64>| {
        let d = cmod(e - t);
        if !d.is_finite() {
            return 1e300;
        }
        let crossed = e.im * t.im < 0.0;
        d + if crossed { HALF_PLANE_PENALTY * (1.0 + cmod(t)) } else { 0.0 }
    };

    let truth_rows = truth.len() <= estimated.len();
    let (rows, cols): (&[Complex<f64>], &[Complex<f64>]) = if truth_rows {
        (truth, estimated)
    } else {
        (estimated, truth)
    };
    let cost: Vec<Vec<f64>> = rows
        .iter()
        .map(|&r| {
            cols.iter()
                .map(|&c| if truth_rows { pair_cost(c, r) } else { pair_cost(r, c) })
                .collect()
        })
        .collect();
    let assignment = if rows.is_empty() {
        Vec::new()
    } else {
        hungarian(&cost, cols.len())
    };

    let mut taken = vec![false; cols.len()];
    let mut pairs = Vec::with_capacity(rows.len());
    for (i, &j) in assignment.iter().enumerate() {
        taken[j] = true;
        let (est, ti) = if truth_rows { (cols[j], i) } else { (rows[i], j) };
        pairs.push(EigPair {
            estimated: est,
            truth: truth[ti],
            truth_index: ti,
            error: cmod(est - truth[ti]),
        });
    }
    pairs.sort_by_key(|p| p.truth_index);
    let leftovers: Vec<Complex<f64>> = cols
        .iter()
        .zip(&taken)
        .filter(|(_, &t)| !t)
        .map(|(&c, _)| c)
        .collect();
    let (unmatched_estimated, unmatched_truth) = if truth_rows {
        (leftovers, Vec::new())
    } else {
        (Vec::new(), leftovers)
    };
    EigMatch {
        pairs,
        unmatched_estimated,
        unmatched_truth,
    }
}

/// Statistics of one reference eigenvalue across trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigStats {
    pub truth: Complex<f64>,
    pub mean: Complex<f64>,
    /// `|mean(λ̂) - λ|`.
    pub bias: f64,
    /// `sqrt(Σ |λ̂ - mean|² / (N - 1))`; zero when only one sample exists.
    pub std: f64,
    pub std_defined: bool,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McStats {
    pub per_eigenvalue: Vec<EigStats>,
    pub trial_count: usize,
    /// Trials that errored or returned a spectrum of the wrong size.
    pub failures: usize,
}

/// Bias and standard deviation of each reference eigenvalue over Monte Carlo
/// trials. `None` marks a trial that errored.
///
/// Trials whose spectrum has the wrong size count as failures; with
/// `include_failures` their matched eigenvalues still enter the statistics.
pub fn mc_statistics(
    trials: &[Option<Vec<Complex<f64>>>],
    truth: &[Complex<f64>],
    include_failures: bool,
) -> Result<McStats> {
    let mut samples: Vec<Vec<Complex<f64>>> = vec![Vec::new(); truth.len()];
    let mut failures = 0;
    for trial in trials {
        let Some(est) = trial else {
            failures += 1;
            continue;
        };
        let complete = est.len() == truth.len() && est.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        if !complete {
            failures += 1;
            if !include_failures {
                continue;
            }
        }
        for pair in match_eigenvalues(est, truth).pairs {
            if pair.error.is_finite() {
                samples[pair.truth_index].push(pair.estimated);
            }
        }
    }
    if trials.len() == failures && !include_failures {
        return Err(Error::NoSuccessfulTrials);
    }
    if samples.iter().all(|s| s.is_empty()) && !truth.is_empty() {
        return Err(Error::NoSuccessfulTrials);
    }

    let per_eigenvalue = truth
        .iter()
        .zip(&samples)
        .map(|(&t, s)| {
            let n = s.len();
            if n == 0 {
                return EigStats {
                    truth: t,
                    mean: Complex::new(f64::NAN, f64::NAN),
                    bias: f64::NAN,
                    std: f64::NAN,
                    std_defined: false,
                    samples: 0,
                };
            }
            let mean = s.iter().fold(Complex::new(0.0, 0.0), |a, &z| a + z) / n as f64;
            let (std, std_defined) = if n > 1 {
                let ss: f64 = s.iter().map(|&z| (z - mean).norm_sqr()).sum();
                (Float::sqrt(ss / (n - 1) as f64), true)
            } else {
                (0.0, false)
            };
            EigStats {
                truth: t,
                mean,
                bias: cmod(mean - t),
                std,
                std_defined,
                samples: n,
            }
        })
        .collect();
    Ok(McStats {
        per_eigenvalue,
        trial_count: trials.len(),
        failures,
    })
}

/// `max |G_a - G_b| / max(|G_b|, 1e-12)` over channels and frequencies.
pub fn frf_discrepancy(
    model_a: &StateSpaceModel,
    model_b: &StateSpaceModel,
    freqs_hz: &[f64],
) -> Result<f64> {
    if model_a.n_y() != model_b.n_y() {
        return Err(Error::DimensionMismatch {
            context: "model outputs",
            expected: model_b.n_y(),
            got: model_a.n_y(),
        });
    }
    if model_a.n_u() != model_b.n_u() {
        return Err(Error::DimensionMismatch {
            context: "model inputs",
            expected: model_b.n_u(),
            got: model_a.n_u(),
        });
    }
    let ga = frequency_response(model_a, freqs_hz)?;
    let gb = frequency_response(model_b, freqs_hz)?;
    let mut worst: f64 = 0.0;
    for (a, b) in ga.values.iter().zip(&gb.values) {
        for (za, zb) in a.iter().zip(b.iter()) {
            let rel = cmod(za - zb) / cmod(*zb).max(1e-12);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

/// `n` log-spaced frequencies from `f_lo` to `f_hi` inclusive.
pub fn log_grid(f_lo: f64, f_hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![f_lo],
        _ => {
            let (a, b) = (Float::log10(f_lo), Float::log10(f_hi));
            (0..n)
                .map(|k| Float::powf(10.0, a + (b - a) * k as f64 / (n - 1) as f64))
                .collect()
        }
    }
}
