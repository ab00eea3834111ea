//! Continuous-time LTI models, excitation signals and simulation.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{Complex, DMatrix, DVector};
use num_traits::Float;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::hermite::{project, reconstruct, shift_and_scale, BasisSpec, SampledSignal};
use crate::linalg;

/// Continuous-time innovation-form model `(A, B, C, D, K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub k: DMatrix<f64>,
}

fn check_shape(
    context: &'static str,
    m: &DMatrix<f64>,
    rows: usize,
    cols: usize,
) -> Result<()> {
    if m.nrows() != rows {
        return Err(Error::DimensionMismatch {
            context,
            expected: rows,
            got: m.nrows(),
        });
    }
    if m.ncols() != cols {
        return Err(Error::DimensionMismatch {
            context,
            expected: cols,
            got: m.ncols(),
        });
    }
    Ok(())
}

impl StateSpaceModel {
    /// Dimensions are inferred from `A` (states), `B` (inputs) and `C`
    /// (outputs); a missing `K` is taken as zero.
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        k: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let n_x = a.nrows();
        check_shape("A", &a, n_x, n_x)?;
        let n_u = b.ncols();
        check_shape("B", &b, n_x, n_u)?;
        let n_y = c.nrows();
        check_shape("C", &c, n_y, n_x)?;
        check_shape("D", &d, n_y, n_u)?;
        let k = k.unwrap_or_else(|| DMatrix::zeros(n_x, n_y));
        check_shape("K", &k, n_x, n_y)?;
        Ok(Self { a, b, c, d, k })
    }

    pub fn n_x(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_u(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_y(&self) -> usize {
        self.c.nrows()
    }

    /// `A - K C`.
    pub fn a_bar(&self) -> DMatrix<f64> {
        &self.a - &self.k * &self.c
    }

    /// `[B - K D, K]`.
    pub fn b_bar(&self) -> DMatrix<f64> {
        let left = &self.b - &self.k * &self.d;
        let mut out = DMatrix::zeros(self.n_x(), self.n_u() + self.n_y());
        out.view_mut((0, 0), (self.n_x(), self.n_u())).copy_from(&left);
        out.view_mut((0, self.n_u()), (self.n_x(), self.n_y()))
            .copy_from(&self.k);
        out
    }

    /// State coordinates `x = T x'`: `(T^-1 A T, T^-1 B, C T, D, T^-1 K)`.
    pub fn similarity_transform(&self, t: &DMatrix<f64>) -> Result<Self> {
        check_shape("T", t, self.n_x(), self.n_x())?;
        let t_inv = t
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidParameter("singular similarity transform".into()))?;
        Ok(Self {
            a: &t_inv * &self.a * t,
            b: &t_inv * &self.b,
            c: &self.c * t,
            d: self.d.clone(),
            k: &t_inv * &self.k,
        })
    }

    /// Rank test of `(A, C)` observability and `(A, B)` controllability.
    pub fn rank_diagnostics(&self) -> RankDiagnostics {
        let n = self.n_x();
        let mut obs = DMatrix::zeros(n * self.n_y(), n);
        let mut ctrb = DMatrix::zeros(n, n * self.n_u());
        let mut ca = self.c.clone();
        let mut ab = self.b.clone();
        for i in 0..n {
            obs.view_mut((i * self.n_y(), 0), (self.n_y(), n))
                .copy_from(&ca);
            ctrb.view_mut((0, i * self.n_u()), (n, self.n_u()))
                .copy_from(&ab);
            ca = &ca * &self.a;
            ab = &self.a * &ab;
        }
        RankDiagnostics {
            observable: linalg::numerical_rank(&obs) == n,
            controllable: linalg::numerical_rank(&ctrb) == n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankDiagnostics {
    pub observable: bool,
    pub controllable: bool,
}

/// Measurement-noise model.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseMode {
    None,
    /// White Gaussian output noise at this per-channel SNR (dB).
    SnrDb(f64),
    /// Incremental covariance blocks `[Q S; S^T R]`; not simulated.
    Covariance {
        q: DMatrix<f64>,
        s: DMatrix<f64>,
        r: DMatrix<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub mode: NoiseMode,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn noise_free() -> Self {
        Self {
            mode: NoiseMode::None,
            seed: 0,
        }
    }

    pub fn snr_db(snr_db: f64, seed: u64) -> Self {
        Self {
            mode: NoiseMode::SnrDb(snr_db),
            seed,
        }
    }
}

/// Linear sine sweep `sin(2π (f1 t + (f2 - f1) t² / (2T)))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub duration: f64,
    pub f_start: f64,
    pub f_end: f64,
}

impl SweepSpec {
    pub fn new(duration: f64, f_start: f64, f_end: f64) -> Result<Self> {
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sweep duration must be > 0, got {duration}"
            )));
        }
        if !(f_start >= 0.0) || !(f_end >= f_start) || !f_end.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sweep needs 0 <= f1 <= f2, got f1 = {f_start}, f2 = {f_end}"
            )));
        }
        Ok(Self {
            duration,
            f_start,
            f_end,
        })
    }

    pub fn value(&self, t: f64) -> f64 {
        let phase = self.f_start * t + (self.f_end - self.f_start) / (2.0 * self.duration) * t * t;
        Float::sin(2.0 * PI * phase)
    }
}

/// `n` equally spaced instants covering `[0, duration]`.
pub fn uniform_grid(duration: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![0.0],
        _ => (0..n)
            .map(|k| duration * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

pub fn sine_sweep(spec: &SweepSpec, times: &[f64]) -> Result<SampledSignal> {
    SampledSignal::from_fn(times.to_vec(), |t| spec.value(t))
}

/// Truncates a signal to its Hermite expansion of order `eta` and evaluates
/// it back on the original grid.
pub fn bandlimit_via_hermite(signal: &SampledSignal, eta: usize) -> Result<SampledSignal> {
    let spec = BasisSpec::new(eta);
    let (scaled, _) = shift_and_scale(signal, spec)?;
    let coeffs = project(&scaled, spec)?;
    let rec = reconstruct(&coeffs, scaled.times());
    let (_, values) = rec.signal.into_parts();
    SampledSignal::new(signal.times().to_vec(), values)
}

/// Noise-free response from `x(0) = 0`, propagated with the exact
/// first-order-hold discretization on each sampling interval.
pub fn simulate_noise_free(model: &StateSpaceModel, input: &SampledSignal) -> Result<SampledSignal> {
    if input.n_channels() != model.n_u() {
        return Err(Error::DimensionMismatch {
            context: "input channels",
            expected: model.n_u(),
            got: input.n_channels(),
        });
    }
    let n_x = model.n_x();
    let times = input.times();
    let u = input.values();
    let n = times.len();
    let mut y = DMatrix::zeros(model.n_y(), n);
    let mut x = DVector::<f64>::zeros(n_x);

    let mut cached: Option<(f64, FohStep)> = None;
    for k in 0..n {
        let uk = u.column(k);
        let yk = &model.c * &x + &model.d * uk;
        y.set_column(k, &yk);
        if k + 1 == n {
            break;
        }
        let h = times[k + 1] - times[k];
        let reuse = matches!(&cached, Some((hc, _)) if Float::abs(h - hc) <= 1e-12 * hc);
        if !reuse {
            cached = Some((h, FohStep::new(model, h)));
        }
        let step = &cached.as_ref().expect("set above").1;
        let slope = (u.column(k + 1) - uk) / h;
        x = &step.phi * &x + &step.gamma0 * uk + &step.gamma1 * slope;
    }
    Ok(SampledSignal::from_parts(times.to_vec(), y))
}

/// Blocks of `exp([[A, B, 0], [0, 0, I], [0, 0, 0]] h)`.
struct FohStep {
    phi: DMatrix<f64>,
    gamma0: DMatrix<f64>,
    gamma1: DMatrix<f64>,
}

impl FohStep {
    fn new(model: &StateSpaceModel, h: f64) -> Self {
        let n_x = model.n_x();
        let n_u = model.n_u();
        let dim = n_x + 2 * n_u;
        let mut m = DMatrix::zeros(dim, dim);
        m.view_mut((0, 0), (n_x, n_x)).copy_from(&(&model.a * h));
        m.view_mut((0, n_x), (n_x, n_u)).copy_from(&(&model.b * h));
        for i in 0..n_u {
            m[(n_x + i, n_x + n_u + i)] = h;
        }
        let e = linalg::expm(&m);
        Self {
            phi: e.view((0, 0), (n_x, n_x)).into_owned(),
            gamma0: e.view((0, n_x), (n_x, n_u)).into_owned(),
            gamma1: e.view((0, n_x + n_u), (n_x, n_u)).into_owned(),
        }
    }
}

/// Adds zero-mean white Gaussian noise to every channel, with variance set
/// from that channel's mean-square power and the requested SNR.
pub fn add_output_noise(clean: &SampledSignal, noise: &NoiseSpec) -> Result<SampledSignal> {
    let snr_db = match &noise.mode {
        NoiseMode::None => return Ok(clean.clone()),
        NoiseMode::SnrDb(db) if db.is_finite() => *db,
        NoiseMode::SnrDb(db) => {
            return Err(Error::InvalidParameter(format!("SNR must be finite, got {db}")))
        }
        NoiseMode::Covariance { .. } => {
            return Err(Error::Unsupported("covariance noise mode"))
        }
    };
    let values = clean.values();
    let n = values.ncols().max(1) as f64;
    let ratio = Float::powf(10.0, snr_db / 10.0);
    let sigmas: Vec<f64> = values
        .row_iter()
        .map(|row| Float::sqrt(row.norm_squared() / n / ratio))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let mut noisy = values.clone();
    for k in 0..noisy.ncols() {
        for (i, sigma) in sigmas.iter().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            noisy[(i, k)] += sigma * z;
        }
    }
    Ok(SampledSignal::from_parts(clean.times().to_vec(), noisy))
}

/// Simulates the output and adds measurement noise per `noise`.
pub fn simulate(
    model: &StateSpaceModel,
    input: &SampledSignal,
    noise: &NoiseSpec,
) -> Result<SampledSignal> {
    let clean = simulate_noise_free(model, input)?;
    add_output_noise(&clean, noise)
}

/// Eigenvalues of `A`, sorted by real then imaginary part.
pub fn eigenvalues(model: &StateSpaceModel) -> Vec<Complex<f64>> {
    linalg::eigenvalues(&model.a)
}

/// `G(j 2π f)` for each requested frequency, each entry `n_y × n_u`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    pub freqs_hz: Vec<f64>,
    pub values: Vec<DMatrix<Complex<f64>>>,
}

pub fn frequency_response(model: &StateSpaceModel, freqs_hz: &[f64]) -> Result<FrequencyResponse> {
    let n_x = model.n_x();
    let eig = eigenvalues(model);
    let to_c = |m: &DMatrix<f64>| m.map(|v| Complex::new(v, 0.0));
    let a = to_c(&model.a);
    let b = to_c(&model.b);
    let c = to_c(&model.c);
    let d = to_c(&model.d);

    let mut values = Vec::with_capacity(freqs_hz.len());
    for &f in freqs_hz {
        let w = 2.0 * PI * f;
        let near_axis = eig
            .iter()
            .any(|z| Float::hypot(z.re, z.im - w) < 1e-9);
        if near_axis {
            return Err(Error::SingularResolvent { freq_hz: f });
        }
        let g = if n_x == 0 {
            d.clone()
        } else {
            let mut resolvent = -a.clone();
            for i in 0..n_x {
                resolvent[(i, i)] += Complex::new(0.0, w);
            }
            let x = resolvent
                .lu()
                .solve(&b)
                .ok_or(Error::SingularResolvent { freq_hz: f })?;
            &c * x + &d
        };
        values.push(g);
    }
    Ok(FrequencyResponse {
        freqs_hz: freqs_hz.to_vec(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::ComplexField;
    use alloc::vec;

    fn second_order() -> StateSpaceModel {
        StateSpaceModel::new(
            DMatrix::from_row_slice(2, 2, &[-2.0, 1.0, 0.0, -4.0]),
            DMatrix::from_row_slice(2, 1, &[0.5, 1.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 4.0, 2.0, 1.0]),
            DMatrix::zeros(2, 1),
            None,
        )
        .unwrap()
    }

    fn third_order() -> StateSpaceModel {
        StateSpaceModel::new(
            DMatrix::from_row_slice(
                3,
                3,
                &[
                    -0.2588, 0.2115, -9.5751, 0.7629, -6.7412, -10.4169, 0.0, 1.0, 0.0,
                ],
            ),
            DMatrix::from_row_slice(3, 1, &[-10.1647, 450.71, 0.0]),
            DMatrix::from_row_slice(
                4,
                3,
                &[
                    1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, -0.1068, 0.1192, 0.0,
                ],
            ),
            DMatrix::from_row_slice(4, 1, &[0.0, 0.0, 0.0, -10.1647]),
            None,
        )
        .unwrap()
    }

    /// `-C A^{-1} B + D` by explicit inversion.
    fn dc_gain(m: &StateSpaceModel) -> DMatrix<f64> {
        -&m.c * m.a.clone().try_inverse().unwrap() * &m.b + &m.d
    }

    #[test]
    fn model_dimension_checks() {
        let m = second_order();
        assert_eq!((m.n_x(), m.n_u(), m.n_y()), (2, 1, 2));
        assert_eq!(m.k, DMatrix::zeros(2, 2));
        let bad = StateSpaceModel::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(2, 2),
            DMatrix::zeros(1, 2),
            None,
        );
        assert!(matches!(bad, Err(Error::DimensionMismatch { context: "D", .. })));
        let diag = m.rank_diagnostics();
        assert!(diag.observable && diag.controllable);
    }

    #[test]
    fn a_bar_and_b_bar() {
        let mut m = second_order();
        m.k = DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, 0.2]);
        m.d = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let ab = m.a_bar();
        assert!((ab - (&m.a - &m.k * &m.c)).amax() == 0.0);
        let bb = m.b_bar();
        assert_eq!(bb.shape(), (2, 3));
        assert!((bb[(0, 0)] - (0.5 - 0.1)).abs() < 1e-15);
        assert!((bb[(1, 0)] - (1.0 + 0.2)).abs() < 1e-15);
        assert_eq!(bb[(1, 2)], 0.2);
    }

    #[test]
    fn sweep_values() {
        let s = SweepSpec::new(10.0, 0.0, 8.0).unwrap();
        assert_eq!(s.value(0.0), 0.0);
        assert!((s.value(0.5) - Float::sin(0.2 * PI)).abs() < 1e-15);
        assert!((s.value(0.5) - 0.587_785).abs() < 1e-6);
        let tone = SweepSpec::new(10.0, 1.0, 1.0).unwrap();
        assert!((tone.value(0.25) - 1.0).abs() < 1e-15);
        assert!(SweepSpec::new(0.0, 0.0, 1.0).is_err());
        assert!(SweepSpec::new(1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn zero_input_zero_output() {
        let m = second_order();
        let u = SampledSignal::new(uniform_grid(5.0, 101), DMatrix::zeros(1, 101)).unwrap();
        let y = simulate(&m, &u, &NoiseSpec::noise_free()).unwrap();
        assert_eq!(y.values(), &DMatrix::zeros(2, 101));
    }

    #[test]
    fn step_response_settles_to_dc_gain() {
        let m = second_order();
        let gain = dc_gain(&m);
        assert!((gain[(0, 0)] - 1.375).abs() < 1e-12);
        assert!((gain[(1, 0)] - 1.0).abs() < 1e-12);
        let u = SampledSignal::from_fn(uniform_grid(12.0, 1201), |_| 1.0).unwrap();
        let y = simulate_noise_free(&m, &u).unwrap();
        let last = y.values().column(1200);
        assert!((last[0] - gain[(0, 0)]).abs() < 1e-8);
        assert!((last[1] - gain[(1, 0)]).abs() < 1e-8);
    }

    #[test]
    fn first_order_hold_is_exact_for_ramps() {
        // x' = -x + t, x(0) = 0  =>  x = t - 1 + e^{-t}
        let m = StateSpaceModel::new(
            DMatrix::from_element(1, 1, -1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
            None,
        )
        .unwrap();
        let times = vec![0.0, 0.3, 0.35, 1.0, 2.7, 4.0];
        let u = SampledSignal::from_fn(times.clone(), |t| t).unwrap();
        let y = simulate_noise_free(&m, &u).unwrap();
        for (k, t) in times.iter().enumerate() {
            let exact = t - 1.0 + Float::exp(-t);
            assert!((y.values()[(0, k)] - exact).abs() < 1e-13, "t={t}");
        }
    }

    #[test]
    fn second_order_convergence_on_sweep() {
        let m = second_order();
        let sweep = SweepSpec::new(10.0, 0.0, 8.0).unwrap();
        let run = |n: usize| {
            let u = sine_sweep(&sweep, &uniform_grid(10.0, n)).unwrap();
            simulate_noise_free(&m, &u).unwrap()
        };
        let coarse = run(501);
        let mid = run(1001);
        let fine = run(2001);
        let mut e1: f64 = 0.0;
        let mut e2: f64 = 0.0;
        for k in 0..501 {
            for ch in 0..2 {
                e1 = e1.max((coarse.values()[(ch, k)] - mid.values()[(ch, 2 * k)]).abs());
                e2 = e2.max((mid.values()[(ch, 2 * k)] - fine.values()[(ch, 4 * k)]).abs());
            }
        }
        let order = Float::log2(e1 / e2);
        assert!(order >= 1.8, "observed order {order}");
    }

    #[test]
    fn noise_free_simulation_is_linear() {
        let m = third_order();
        let times = uniform_grid(3.0, 301);
        let f = SampledSignal::from_fn(times.clone(), |t| Float::sin(3.0 * t)).unwrap();
        let g = SampledSignal::from_fn(times.clone(), |t| t * t - 1.0).unwrap();
        let combo = SampledSignal::from_fn(times, |t| {
            2.0 * Float::sin(3.0 * t) - 0.5 * (t * t - 1.0)
        })
        .unwrap();
        let yf = simulate_noise_free(&m, &f).unwrap();
        let yg = simulate_noise_free(&m, &g).unwrap();
        let yc = simulate_noise_free(&m, &combo).unwrap();
        let lin = yf.values() * 2.0 - yg.values() * 0.5;
        assert!((lin - yc.values()).amax() <= 1e-10 * yc.values().amax());
    }

    #[test]
    fn noise_has_requested_snr_and_is_reproducible() {
        let m = second_order();
        let sweep = SweepSpec::new(10.0, 0.0, 8.0).unwrap();
        let u = sine_sweep(&sweep, &uniform_grid(10.0, 10_000)).unwrap();
        let clean = simulate_noise_free(&m, &u).unwrap();
        let noisy = add_output_noise(&clean, &NoiseSpec::snr_db(50.0, 7)).unwrap();
        for ch in 0..2 {
            let p_sig = clean.values().row(ch).norm_squared();
            let p_noise = (noisy.values().row(ch) - clean.values().row(ch)).norm_squared();
            let snr = 10.0 * Float::log10(p_sig / p_noise);
            assert!((snr - 50.0).abs() < 0.5, "channel {ch}: {snr} dB");
        }
        let again = simulate(&m, &u, &NoiseSpec::snr_db(50.0, 7)).unwrap();
        assert_eq!(again.values(), noisy.values());
        let other = simulate(&m, &u, &NoiseSpec::snr_db(50.0, 8)).unwrap();
        assert_ne!(other.values(), noisy.values());
    }

    #[test]
    fn covariance_mode_is_reserved() {
        let m = second_order();
        let u = SampledSignal::from_fn(uniform_grid(1.0, 3), |_| 1.0).unwrap();
        let spec = NoiseSpec {
            mode: NoiseMode::Covariance {
                q: DMatrix::zeros(2, 2),
                s: DMatrix::zeros(2, 2),
                r: DMatrix::zeros(2, 2),
            },
            seed: 1,
        };
        assert!(matches!(simulate(&m, &u, &spec), Err(Error::Unsupported(_))));
    }

    #[test]
    fn simulate_rejects_wrong_input_width() {
        let m = second_order();
        let u = SampledSignal::new(uniform_grid(1.0, 3), DMatrix::zeros(2, 3)).unwrap();
        assert!(matches!(
            simulate(&m, &u, &NoiseSpec::noise_free()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn benchmark_eigenvalues() {
        let e = eigenvalues(&second_order());
        assert!((e[0] - Complex::new(-4.0, 0.0)).modulus() < 1e-12);
        assert!((e[1] - Complex::new(-2.0, 0.0)).modulus() < 1e-12);

        let e = eigenvalues(&third_order());
        let expect = [
            Complex::new(-5.0, 0.0),
            Complex::new(-1.0, -1.0),
            Complex::new(-1.0, 1.0),
        ];
        for (got, want) in e.iter().zip(expect.iter()) {
            assert!((got - want).modulus() < 1e-3, "{got} vs {want}");
        }

        let id = StateSpaceModel::new(
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(1, 2),
            DMatrix::zeros(1, 1),
            None,
        )
        .unwrap();
        let e = eigenvalues(&id);
        assert!(e.iter().all(|z| (z - Complex::new(1.0, 0.0)).modulus() < 1e-15));
    }

    #[test]
    fn frequency_response_reference_points() {
        let m = second_order();
        let g = frequency_response(&m, &[0.0, 1e6]).unwrap();
        let gain = dc_gain(&m);
        for i in 0..2 {
            assert!((g.values[0][(i, 0)] - Complex::new(gain[(i, 0)], 0.0)).modulus() < 1e-12);
            assert!(g.values[1][(i, 0)].modulus() < 1e-4);
        }

        let d_only = StateSpaceModel::new(
            -DMatrix::<f64>::identity(2, 2),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(3, 2),
            DMatrix::from_row_slice(3, 1, &[1.0, -2.0, 0.5]),
            None,
        )
        .unwrap();
        let g = frequency_response(&d_only, &[0.0, 0.3, 40.0]).unwrap();
        for gf in &g.values {
            assert_eq!(gf[(1, 0)], Complex::new(-2.0, 0.0));
        }

        let integrator = StateSpaceModel::new(
            DMatrix::zeros(1, 1),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
            None,
        )
        .unwrap();
        assert_eq!(
            frequency_response(&integrator, &[1.0, 0.0]),
            Err(Error::SingularResolvent { freq_hz: 0.0 })
        );
    }

    #[test]
    fn similarity_preserves_io_map() {
        let m = second_order();
        let t = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -0.5, 3.0]);
        let mt = m.similarity_transform(&t).unwrap();
        let f = [0.0, 0.5, 3.0, 20.0];
        let g1 = frequency_response(&m, &f).unwrap();
        let g2 = frequency_response(&mt, &f).unwrap();
        for (a, b) in g1.values.iter().zip(&g2.values) {
            assert!((a - b).iter().all(|z| z.modulus() < 1e-12));
        }
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(m.similarity_transform(&singular).is_err());
    }

    #[test]
    fn bandlimit_is_idempotent_on_low_order_content() {
        let eta = 5;
        let spec = BasisSpec::new(eta);
        let e = spec.half_width();
        let times: Vec<f64> = (0..2001).map(|k| -e + 2.0 * e * k as f64 / 2000.0).collect();
        let h0 = |t: f64| crate::hermite::eval_basis(BasisSpec::new(0), t)[0];
        let sig = SampledSignal::from_fn(times, h0).unwrap();
        let out = bandlimit_via_hermite(&sig, eta).unwrap();
        assert_eq!(out.times(), sig.times());
        // the window ends at the effective support, so h_0's tail leaks
        let dev = (out.values() - sig.values()).amax();
        assert!((dev - 1.531_069_706_255e-4).abs() < 1e-10, "deviation {dev}");
    }

    #[test]
    fn bandlimit_order_zero_is_gaussian_bell() {
        let times = uniform_grid(10.0, 501);
        let sig = SampledSignal::from_fn(times.clone(), |_| 1.0).unwrap();
        let out = bandlimit_via_hermite(&sig, 0).unwrap();
        // single term c h_0((t - 5) / 5)
        let c = out.values()[(0, 250)] / crate::hermite::eval_basis(BasisSpec::new(0), 0.0)[0];
        for (k, t) in times.iter().enumerate() {
            let bell = c * crate::hermite::eval_basis(BasisSpec::new(0), (t - 5.0) / 5.0)[0];
            assert!((out.values()[(0, k)] - bell).abs() < 1e-12);
        }
    }

    #[test]
    fn bandlimited_sweep_stays_close() {
        let sweep = SweepSpec::new(10.0, 0.0, 8.0).unwrap();
        let u = sine_sweep(&sweep, &uniform_grid(10.0, 2000)).unwrap();
        let out = bandlimit_via_hermite(&u, 250).unwrap();
        let rel = (out.values() - u.values()).norm() / u.values().norm();
        assert!((rel - 0.246_153_778_768_82).abs() < 1e-9, "relative deviation {rel}");
        assert!(rel < 0.25);
    }
}
