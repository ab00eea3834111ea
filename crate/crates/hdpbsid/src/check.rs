//! Reconstruction error against expansion order, for picking `n_max`.

use hdpbsid_core::hermite::{project, reconstruct, shift_and_scale, trapezoid_weights, BasisSpec, SampledSignal};

/// Relative L2 error of each channel after projecting at one order.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionError {
    pub n_max: usize,
    pub per_channel: Vec<f64>,
}

/// Trapezoid-weighted `‖f̂ − f‖ / ‖f‖` per channel; zero when `f` vanishes.
pub fn reconstruction_errors(
    signal: &SampledSignal,
    orders: &[usize],
) -> hdpbsid_core::Result<Vec<ReconstructionError>> {
    let mut out = Vec::with_capacity(orders.len());
    for &n_max in orders {
        let spec = BasisSpec::new(n_max);
        let (scaled, _) = shift_and_scale(signal, spec)?;
        let coeffs = project(&scaled, spec)?;
        let rec = reconstruct(&coeffs, scaled.times()).signal;
        let w = trapezoid_weights(scaled.times());
        let (x, xh) = (scaled.values(), rec.values());
        let per_channel = (0..x.nrows())
            .map(|i| {
                let (mut num, mut den) = (0.0, 0.0);
                for (k, wk) in w.iter().enumerate() {
                    let d = xh[(i, k)] - x[(i, k)];
                    num += wk * d * d;
                    den += wk * x[(i, k)] * x[(i, k)];
                }
                if den == 0.0 {
                    num.sqrt()
                } else {
                    (num / den).sqrt()
                }
            })
            .collect();
        out.push(ReconstructionError { n_max, per_channel });
    }
    Ok(out)
}
