//! Truncated orthonormal Hermite basis: evaluation, sampling, projection and
//! reconstruction of multichannel signals.
//!
//! Signals are projected on the scaled time axis `t' = (t - t_mid) / alpha`,
//! which maps the recorded window onto the effective support
//! `[-sqrt(2 n_max + 1), +sqrt(2 n_max + 1)]` of the basis.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;
use num_traits::Float;

use crate::error::{Error, Result};

/// Absolute tolerance on scaled time when checking that a signal lies in the
/// effective support.
pub const SUPPORT_TOLERANCE: f64 = 1e-9;

/// Truncated basis `{h_0, ..., h_n_max}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisSpec {
    n_max: usize,
}

impl BasisSpec {
    pub fn new(n_max: usize) -> Self {
        Self { n_max }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Number of basis functions, `n_max + 1`.
    pub fn n_c(&self) -> usize {
        self.n_max + 1
    }

    /// Half-width of the effective support, `sqrt(2 n_max + 1)`.
    pub fn half_width(&self) -> f64 {
        Float::sqrt((2 * self.n_max + 1) as f64)
    }
}

/// Multichannel signal on a strictly increasing time grid.
///
/// `values` has one row per channel and one column per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    times: Vec<f64>,
    values: DMatrix<f64>,
}

impl SampledSignal {
    pub fn new(times: Vec<f64>, values: DMatrix<f64>) -> Result<Self> {
        if values.ncols() != times.len() {
            return Err(Error::DimensionMismatch {
                context: "signal samples",
                expected: times.len(),
                got: values.ncols(),
            });
        }
        for (i, t) in times.iter().enumerate() {
            if !t.is_finite() || (i > 0 && *t <= times[i - 1]) {
                return Err(Error::BadTimeGrid { index: i });
            }
        }
        Ok(Self { times, values })
    }

    /// Single-channel signal from a closure evaluated on `times`.
    pub fn from_fn(times: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = DMatrix::from_iterator(1, times.len(), times.iter().map(|&t| f(t)));
        Self::new(times, values)
    }

    /// Grid and values are taken as given; used where the grid is derived from
    /// an already validated one.
    pub(crate) fn from_parts(times: Vec<f64>, values: DMatrix<f64>) -> Self {
        debug_assert_eq!(times.len(), values.ncols());
        Self { times, values }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_channels(&self) -> usize {
        self.values.nrows()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn first_time(&self) -> Option<f64> {
        self.times.first().copied()
    }

    pub fn last_time(&self) -> Option<f64> {
        self.times.last().copied()
    }

    pub fn into_parts(self) -> (Vec<f64>, DMatrix<f64>) {
        (self.times, self.values)
    }
}

/// Hermite-domain representation: rows are channels, columns are orders
/// `0..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    coeffs: DMatrix<f64>,
    basis: BasisSpec,
}

impl CoefficientMatrix {
    pub fn new(coeffs: DMatrix<f64>, basis: BasisSpec) -> Result<Self> {
        if coeffs.ncols() != basis.n_c() {
            return Err(Error::DimensionMismatch {
                context: "coefficient columns",
                expected: basis.n_c(),
                got: coeffs.ncols(),
            });
        }
        Ok(Self { coeffs, basis })
    }

    pub fn zeros(n_channels: usize, basis: BasisSpec) -> Self {
        Self {
            coeffs: DMatrix::zeros(n_channels, basis.n_c()),
            basis,
        }
    }

    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    pub fn basis(&self) -> BasisSpec {
        self.basis
    }

    pub fn n_channels(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.coeffs
    }
}

/// Affine map from recorded time to scaled basis time, `t' = (t - center) / alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeScaling {
    /// Half-duration of the recorded window, seconds.
    pub tau: f64,
    /// `tau / sqrt(2 n_max + 1)`, seconds per unit of scaled time.
    pub alpha: f64,
    /// Midpoint of the recorded window, seconds.
    pub center: f64,
}

impl TimeScaling {
    pub fn for_window(first: f64, last: f64, spec: BasisSpec) -> Result<Self> {
        let tau = 0.5 * (last - first);
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::ZeroLengthExperiment);
        }
        Ok(Self {
            tau,
            alpha: tau / spec.half_width(),
            center: 0.5 * (first + last),
        })
    }

    pub fn to_scaled(&self, t: f64) -> f64 {
        (t - self.center) / self.alpha
    }

    pub fn to_physical(&self, t_scaled: f64) -> f64 {
        t_scaled * self.alpha + self.center
    }
}

/// Writes `[h_0(t), ..., h_{out.len()-1}(t)]` into `out`.
///
/// The three-term recurrence is run on rescaled values with the Gaussian
/// envelope carried as a separate logarithm, so neither the envelope nor the
/// recurrence overflow or underflow inside the oscillatory region.
pub fn eval_basis_into(t: f64, out: &mut [f64]) {
    const RESCALE: f64 = 4.149_515_568_880_993e180; // 2^600
    const LN_RESCALE: f64 = 600.0 * core::f64::consts::LN_2;

    if out.is_empty() {
        return;
    }
    let mut log_scale = -0.5 * t * t - 0.25 * Float::ln(PI);
    let mut factor = Float::exp(log_scale);
    let emit = |v: f64, factor: f64, log_scale: f64| -> f64 {
        if factor > 1e-290 {
            v * factor
        } else if v == 0.0 {
            0.0
        } else {
            let mag = Float::exp(Float::ln(Float::abs(v)) + log_scale);
            if v < 0.0 {
                -mag
            } else {
                mag
            }
        }
    };

    let mut prev = 0.0;
    let mut cur = 1.0;
    out[0] = emit(cur, factor, log_scale);
    for n in 0..out.len() - 1 {
        let nf = n as f64;
        let next = t * Float::sqrt(2.0 / (nf + 1.0)) * cur - Float::sqrt(nf / (nf + 1.0)) * prev;
        prev = cur;
        cur = next;
        if Float::abs(cur) > RESCALE {
            cur /= RESCALE;
            prev /= RESCALE;
            log_scale += LN_RESCALE;
            factor = Float::exp(log_scale);
        }
        out[n + 1] = emit(cur, factor, log_scale);
    }
}

/// Evaluates `[h_0(t), ..., h_n_max(t)]`.
pub fn eval_basis(spec: BasisSpec, t: f64) -> Vec<f64> {
    let mut out = vec![0.0; spec.n_c()];
    eval_basis_into(t, &mut out);
    out
}

/// Sampled basis matrix with entry `(n, k) = h_n(times[k])`.
pub fn sampled_basis_matrix(spec: BasisSpec, times: &[f64]) -> DMatrix<f64> {
    let n_c = spec.n_c();
    let mut h = DMatrix::zeros(n_c, times.len());
    // column-major storage: each column is one contiguous basis vector
    for (col, &t) in h.as_mut_slice().chunks_exact_mut(n_c).zip(times) {
        eval_basis_into(t, col);
    }
    h
}

/// Shifts the window to be symmetric about zero and scales it onto the
/// effective support of `spec`. Values are unchanged.
pub fn shift_and_scale(
    signal: &SampledSignal,
    spec: BasisSpec,
) -> Result<(SampledSignal, TimeScaling)> {
    if signal.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: signal.len(),
        });
    }
    let first = signal.times[0];
    let last = signal.times[signal.len() - 1];
    let scaling = TimeScaling::for_window(first, last, spec)?;
    let mut times: Vec<f64> = signal.times.iter().map(|&t| scaling.to_scaled(t)).collect();
    let edge = spec.half_width();
    let n = times.len();
    times[0] = -edge;
    times[n - 1] = edge;
    Ok((
        SampledSignal::from_parts(times, signal.values.clone()),
        scaling,
    ))
}

/// Composite trapezoid weights on a (possibly non-uniform) grid.
pub fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let n = times.len();
    let mut w = vec![0.0; n];
    for k in 0..n.saturating_sub(1) {
        let half = 0.5 * (times[k + 1] - times[k]);
        w[k] += half;
        w[k + 1] += half;
    }
    w
}

fn check_scaled(signal: &SampledSignal, spec: BasisSpec) -> Result<()> {
    if signal.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: signal.len(),
        });
    }
    let edge = spec.half_width();
    for &t in [signal.times[0], signal.times[signal.len() - 1]].iter() {
        if Float::abs(t) > edge + SUPPORT_TOLERANCE {
            return Err(Error::SignalNotScaled {
                time: t,
                half_width: edge,
            });
        }
    }
    Ok(())
}

fn weighted_inner_products(signal: &SampledSignal, basis: &DMatrix<f64>) -> DMatrix<f64> {
    let w = trapezoid_weights(&signal.times);
    let mut weighted = signal.values.clone();
    for (mut col, wk) in weighted.column_iter_mut().zip(w) {
        col *= wk;
    }
    weighted * basis.transpose()
}

/// Projects a scaled signal onto the basis by trapezoidal quadrature on the
/// signal's own grid. The signal is taken as zero outside its recorded window.
pub fn project(signal: &SampledSignal, spec: BasisSpec) -> Result<CoefficientMatrix> {
    check_scaled(signal, spec)?;
    let h = sampled_basis_matrix(spec, &signal.times);
    Ok(CoefficientMatrix {
        coeffs: weighted_inner_products(signal, &h),
        basis: spec,
    })
}

/// Result of [`reconstruct`].
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub signal: SampledSignal,
    /// Set when some requested time lies outside the effective support.
    pub extrapolated: bool,
}

/// Evaluates the truncated expansion `coeffs · H` on `times` (scaled axis).
pub fn reconstruct(coeffs: &CoefficientMatrix, times: &[f64]) -> Reconstruction {
    let h = sampled_basis_matrix(coeffs.basis, times);
    let edge = coeffs.basis.half_width() + SUPPORT_TOLERANCE;
    let extrapolated = times.iter().any(|t| Float::abs(*t) > edge);
    Reconstruction {
        signal: SampledSignal::from_parts(times.to_vec(), &coeffs.coeffs * h),
        extrapolated,
    }
}

/// Raw convolutions `[h_n * f](t_i) = ∫ h_n(t_i - s) f(s) ds` for all orders,
/// by trapezoidal quadrature on the signal grid.
pub fn convolution_at(
    signal: &SampledSignal,
    spec: BasisSpec,
    t_i: f64,
) -> Result<CoefficientMatrix> {
    check_scaled(signal, spec)?;
    let shifted: Vec<f64> = signal.times.iter().map(|&s| t_i - s).collect();
    let h = sampled_basis_matrix(spec, &shifted);
    Ok(CoefficientMatrix {
        coeffs: weighted_inner_products(signal, &h),
        basis: spec,
    })
}

/// Expansion coefficients obtained from convolutions evaluated at zero,
/// with the `(-1)^n` sign of odd orders removed.
pub fn convolution_coefficients(
    signal: &SampledSignal,
    spec: BasisSpec,
) -> Result<CoefficientMatrix> {
    let mut raw = convolution_at(signal, spec, 0.0)?;
    for (n, mut col) in raw.coeffs.column_iter_mut().enumerate() {
        if n % 2 == 1 {
            col.neg_mut();
        }
    }
    Ok(raw)
}
