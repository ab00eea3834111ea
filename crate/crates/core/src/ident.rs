//! Hermite-domain predictor-based subspace identification.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{Complex, DMatrix};
use num_traits::Float;

use crate::error::{Error, Result};
use crate::hermite::{project, shift_and_scale, BasisSpec, CoefficientMatrix, SampledSignal};
use crate::linalg::{self, LeastSquares};
use crate::lti::StateSpaceModel;
use crate::operators::{
    derivative_operator, modified_operator, predictor_map, ModifiedOperator, OperatorFactorization,
};

pub const DEFAULT_WINDOW: usize = 10;
pub const DEFAULT_SV_GAP: f64 = 10.0;

/// Model order: fixed, or picked from the largest singular-value gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderSelection {
    Fixed(usize),
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentConfig {
    pub n_max: usize,
    pub beta: f64,
    pub gamma: f64,
    /// Past window length.
    pub p: usize,
    /// Future window length.
    pub f: usize,
    pub order: OrderSelection,
    pub sv_gap_threshold: f64,
}

impl IdentConfig {
    /// Windows default to `p = f = 10`, the gap threshold to 10.
    pub fn new(n_max: usize, beta: f64, gamma: f64, order: OrderSelection) -> Self {
        Self {
            n_max,
            beta,
            gamma,
            p: DEFAULT_WINDOW,
            f: DEFAULT_WINDOW,
            order,
            sv_gap_threshold: DEFAULT_SV_GAP,
        }
    }

    pub fn with_windows(mut self, p: usize, f: usize) -> Self {
        self.p = p;
        self.f = f;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::InvalidParameter(msg));
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return bad(format!("gamma must be > 0, got {}", self.gamma));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return bad(format!("beta must be >= 0, got {}", self.beta));
        }
        if self.f < 1 || self.p < self.f {
            return bad(format!("need p >= f >= 1, got p = {}, f = {}", self.p, self.f));
        }
        if self.n_max < self.p {
            return bad(format!("need n_max >= p, got n_max = {}, p = {}", self.n_max, self.p));
        }
        if let OrderSelection::Fixed(0) = self.order {
            return bad("model order must be >= 1".into());
        }
        if !(self.sv_gap_threshold > 1.0) {
            return bad(format!(
                "singular-value gap threshold must be > 1, got {}",
                self.sv_gap_threshold
            ));
        }
        Ok(())
    }
}

/// Summary of one least-squares stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsDiagnostics {
    pub condition: f64,
    pub residual_norm: f64,
    pub rank: usize,
    pub regressors: usize,
}

impl LsDiagnostics {
    fn from_ls(ls: &LeastSquares, regressors: usize) -> Self {
        Self {
            condition: ls.condition,
            residual_norm: ls.residual_norm,
            rank: ls.rank,
            regressors,
        }
    }

    pub fn full_rank(&self) -> bool {
        self.rank == self.regressors
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub markov: LsDiagnostics,
    pub output: LsDiagnostics,
    pub system: LsDiagnostics,
    pub alpha: f64,
    /// 1-norm condition number of `D'`.
    pub operator_condition: f64,
    /// Eigenvalues of `(Â - K̂Ĉ + βI) / γ`.
    pub predictor_eigenvalues: Vec<Complex<f64>>,
    pub predictor_stable: bool,
    /// Spectral norm of `((Â - K̂Ĉ + βI) / γ)^p`.
    pub truncation_bias: f64,
    /// False when the innovation regressor carries no information and `K̂`
    /// is only the minimum-norm choice.
    pub innovation_identifiable: bool,
    /// `‖ê‖_F / ‖y‖_F` in the coefficient domain.
    pub innovation_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentResult {
    pub model: StateSpaceModel,
    pub singular_values: Vec<f64>,
    pub x_hat: CoefficientMatrix,
    pub e_hat: CoefficientMatrix,
    /// Estimate of `C K^p`.
    pub markov: DMatrix<f64>,
    pub diagnostics: Diagnostics,
}

fn check_columns(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            got,
        });
    }
    Ok(())
}

fn vstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(*b);
        r += b.nrows();
    }
    out
}

/// `z = [u; y]`.
pub fn build_predictor_data(u: &CoefficientMatrix, y: &CoefficientMatrix) -> Result<CoefficientMatrix> {
    check_columns("predictor data coefficients", u.basis().n_c(), y.basis().n_c())?;
    CoefficientMatrix::new(vstack(&[u.coeffs(), y.coeffs()]), u.basis())
}

/// `[z D'^{-p}; ...; z D'^{-2}; z D'^{-1}]`.
pub fn build_z(z: &CoefficientMatrix, dp: &ModifiedOperator, p: usize) -> Result<DMatrix<f64>> {
    let fact = dp.factorize()?;
    build_z_factored(z.coeffs(), &fact, p)
}

fn build_z_factored(z: &DMatrix<f64>, fact: &OperatorFactorization, p: usize) -> Result<DMatrix<f64>> {
    if p == 0 {
        return Err(Error::InvalidParameter("past window must be >= 1".into()));
    }
    let n_z = z.nrows();
    let mut out = DMatrix::zeros(p * n_z, z.ncols());
    let mut current = z.clone();
    for k in 1..=p {
        current = fact.integrate_rows(&current);
        out.view_mut(((p - k) * n_z, 0), (n_z, z.ncols()))
            .copy_from(&current);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovFit {
    /// `C K^p`, `n_y × p (n_u + n_y)`.
    pub ck_p: DMatrix<f64>,
    pub d_hat: DMatrix<f64>,
    pub diagnostics: LsDiagnostics,
}

/// `min ‖y - CK^p Z - D u‖_F` jointly over `CK^p` and `D`.
pub fn solve_markov(y: &DMatrix<f64>, z_stack: &DMatrix<f64>, u: &DMatrix<f64>) -> Result<MarkovFit> {
    check_columns("Z columns", y.ncols(), z_stack.ncols())?;
    check_columns("input coefficient columns", y.ncols(), u.ncols())?;
    let phi = vstack(&[z_stack, u]);
    if phi.iter().all(|&v| v == 0.0) {
        return Err(Error::Unexcited { stage: "Markov" });
    }
    let ls = linalg::lstsq_rows(y, &phi);
    let n_zp = z_stack.nrows();
    Ok(MarkovFit {
        ck_p: ls.solution.columns(0, n_zp).into_owned(),
        d_hat: ls.solution.columns(n_zp, u.nrows()).into_owned(),
        diagnostics: LsDiagnostics::from_ls(&ls, phi.nrows()),
    })
}

/// Block upper-triangular `Γ^f K^p` read off `CK^p`; block `(i, j)`, `j ≥ i`,
/// is block `j - i` of `CK^p`.
pub fn assemble_gamma_k(
    ck_p: &DMatrix<f64>,
    p: usize,
    f: usize,
    n_u: usize,
    n_y: usize,
) -> Result<DMatrix<f64>> {
    if f == 0 || f > p {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= f <= p, got p = {p}, f = {f}"
        )));
    }
    let n_z = n_u + n_y;
    if ck_p.nrows() != n_y {
        return Err(Error::DimensionMismatch {
            context: "CK^p rows",
            expected: n_y,
            got: ck_p.nrows(),
        });
    }
    check_columns("CK^p columns", p * n_z, ck_p.ncols())?;
    let mut out = DMatrix::zeros(f * n_y, p * n_z);
    for i in 0..f {
        for j in i..p {
            let block = ck_p.columns((j - i) * n_z, n_z);
            out.view_mut((i * n_y, j * n_z), (n_y, n_z)).copy_from(&block);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateEstimate {
    /// `Σ_n^{1/2} V_n^T`.
    pub x_hat: DMatrix<f64>,
    pub singular_values: Vec<f64>,
}

/// Picks the order from the largest ratio `σ_i / σ_{i+1}` above `threshold`.
pub fn select_order(singular_values: &[f64], threshold: f64) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, w) in singular_values.windows(2).enumerate() {
        if w[0] <= 0.0 {
            break;
        }
        let ratio = if w[1] > 0.0 { w[0] / w[1] } else { f64::INFINITY };
        if ratio > threshold && best.map_or(true, |(_, r)| ratio > r) {
            best = Some((i + 1, ratio));
        }
    }
    best.map(|(n, _)| n).ok_or_else(|| Error::OrderUndetermined {
        threshold,
        singular_values: singular_values.to_vec(),
    })
}

pub fn estimate_states(
    gamma_k: &DMatrix<f64>,
    z_stack: &DMatrix<f64>,
    order: OrderSelection,
    sv_gap_threshold: f64,
) -> Result<StateEstimate> {
    check_columns("Z rows", gamma_k.ncols(), z_stack.nrows())?;
    let svd = linalg::ordered_svd(&(gamma_k * z_stack));
    let sv = svd.singular_values;
    let n = match order {
        OrderSelection::Fixed(n) if n == 0 || n > sv.len() => {
            return Err(Error::InvalidParameter(format!(
                "order {n} outside 1..={}",
                sv.len()
            )))
        }
        OrderSelection::Fixed(n) => n,
        OrderSelection::Auto => select_order(&sv, sv_gap_threshold)?,
    };
    let mut x_hat = svd.v_t.rows(0, n).into_owned();
    for (i, mut row) in x_hat.row_iter_mut().enumerate() {
        row *= Float::sqrt(sv[i]);
    }
    Ok(StateEstimate {
        x_hat,
        singular_values: sv,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputFit {
    pub c_hat: DMatrix<f64>,
    pub diagnostics: LsDiagnostics,
}

/// `min ‖y - C x̂ - D̂ u‖_F` over `C`, with `D̂` held fixed.
pub fn solve_output(
    y: &DMatrix<f64>,
    x_hat: &DMatrix<f64>,
    d_hat: &DMatrix<f64>,
    u: &DMatrix<f64>,
) -> Result<OutputFit> {
    check_columns("state columns", y.ncols(), x_hat.ncols())?;
    check_columns("input coefficient columns", y.ncols(), u.ncols())?;
    let target = y - d_hat * u;
    let ls = linalg::lstsq_rows(&target, x_hat);
    Ok(OutputFit {
        c_hat: ls.solution.clone(),
        diagnostics: LsDiagnostics::from_ls(&ls, x_hat.nrows()),
    })
}

/// `ê = y - Ĉ x̂ - D̂ u`.
pub fn innovation_estimate(
    y: &DMatrix<f64>,
    c_hat: &DMatrix<f64>,
    x_hat: &DMatrix<f64>,
    d_hat: &DMatrix<f64>,
    u: &DMatrix<f64>,
) -> DMatrix<f64> {
    y - c_hat * x_hat - d_hat * u
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemFit {
    pub a_hat: DMatrix<f64>,
    pub b_hat: DMatrix<f64>,
    pub k_hat: DMatrix<f64>,
    pub diagnostics: LsDiagnostics,
    pub innovation_identifiable: bool,
}

fn rank_of_rows(m: &DMatrix<f64>) -> usize {
    linalg::numerical_rank(&m.transpose())
}

/// `min ‖γ x̂ D' - β x̂ - A x̂ - B u - K ê‖_F`, giving continuous-time
/// `(Â, B̂, K̂)`.
pub fn solve_system_matrices(
    x_hat: &DMatrix<f64>,
    dp: &ModifiedOperator,
    u: &DMatrix<f64>,
    e_hat: &DMatrix<f64>,
) -> Result<SystemFit> {
    let n_c = dp.n_c();
    check_columns("state columns", n_c, x_hat.ncols())?;
    check_columns("input coefficient columns", n_c, u.ncols())?;
    check_columns("innovation columns", n_c, e_hat.ncols())?;
    let (n_x, n_u, n_y) = (x_hat.nrows(), u.nrows(), e_hat.nrows());
    const STAGE: &str = "system matrices";

    let rank_x = rank_of_rows(x_hat);
    if rank_x < n_x {
        return Err(Error::RankDeficient {
            stage: STAGE,
            block: "state",
            rank: rank_x,
            expected: n_x,
        });
    }
    let rank_u = rank_of_rows(u);
    if rank_u < n_u {
        return Err(Error::RankDeficient {
            stage: STAGE,
            block: "input",
            rank: rank_u,
            expected: n_u,
        });
    }
    let xu = vstack(&[x_hat, u]);
    let rank_xu = rank_of_rows(&xu);
    if rank_xu < n_x + n_u {
        return Err(Error::RankDeficient {
            stage: STAGE,
            block: "state and input",
            rank: rank_xu,
            expected: n_x + n_u,
        });
    }

    let phi = vstack(&[x_hat, u, e_hat]);
    let target = dp.apply_right(x_hat) * dp.gamma - x_hat * dp.beta;
    let ls = linalg::lstsq_rows(&target, &phi);
    let theta = &ls.solution;
    Ok(SystemFit {
        a_hat: theta.columns(0, n_x).into_owned(),
        b_hat: theta.columns(n_x, n_u).into_owned(),
        k_hat: theta.columns(n_x + n_u, n_y).into_owned(),
        diagnostics: LsDiagnostics::from_ls(&ls, phi.nrows()),
        innovation_identifiable: ls.rank == phi.nrows(),
    })
}

/// Scales both records onto the effective support and projects them.
pub fn project_pair(
    u: &SampledSignal,
    y: &SampledSignal,
    spec: BasisSpec,
) -> Result<(CoefficientMatrix, CoefficientMatrix, f64)> {
    let (Some(u0), Some(u1), Some(y0), Some(y1)) =
        (u.first_time(), u.last_time(), y.first_time(), y.last_time())
    else {
        return Err(Error::TooFewSamples { needed: 2, got: 0 });
    };
    let scale = Float::abs(u0).max(Float::abs(u1)).max(1.0);
    if Float::abs(u0 - y0) > 1e-12 * scale || Float::abs(u1 - y1) > 1e-12 * scale {
        return Err(Error::MismatchedWindows);
    }
    let (us, scaling) = shift_and_scale(u, spec)?;
    let (ys, _) = shift_and_scale(y, spec)?;
    Ok((project(&us, spec)?, project(&ys, spec)?, scaling.alpha))
}

/// Identifies `(Â, B̂, Ĉ, D̂, K̂)` from sampled input and output records.
pub fn identify(u: &SampledSignal, y: &SampledSignal, cfg: &IdentConfig) -> Result<IdentResult> {
    cfg.validate()?;
    let spec = BasisSpec::new(cfg.n_max);
    let (uc, yc, alpha) = project_pair(u, y, spec)?;
    identify_coefficients(&uc, &yc, alpha, cfg)
}

/// The pipeline from projected coefficients onward.
pub fn identify_coefficients(
    uc: &CoefficientMatrix,
    yc: &CoefficientMatrix,
    alpha: f64,
    cfg: &IdentConfig,
) -> Result<IdentResult> {
    cfg.validate()?;
    let spec = uc.basis();
    let (n_u, n_y) = (uc.n_channels(), yc.n_channels());
    let z = build_predictor_data(uc, yc)?;
    let dp = modified_operator(&derivative_operator(spec.n_c())?, alpha, cfg.beta, cfg.gamma)?;
    let fact = dp.factorize()?;
    let z_stack = build_z_factored(z.coeffs(), &fact, cfg.p)?;

    let (u, y) = (uc.coeffs(), yc.coeffs());
    let markov = solve_markov(y, &z_stack, u)?;
    let gamma_k = assemble_gamma_k(&markov.ck_p, cfg.p, cfg.f, n_u, n_y)?;
    let states = estimate_states(&gamma_k, &z_stack, cfg.order, cfg.sv_gap_threshold)?;
    let x_hat = states.x_hat;
    let output = solve_output(y, &x_hat, &markov.d_hat, u)?;
    let e_hat = innovation_estimate(y, &output.c_hat, &x_hat, &markov.d_hat, u);
    let system = solve_system_matrices(&x_hat, &dp, u, &e_hat)?;

    let model = StateSpaceModel::new(
        system.a_hat,
        system.b_hat,
        output.c_hat,
        markov.d_hat,
        Some(system.k_hat),
    )?;
    let a_prime = predictor_map(&model.a_bar(), cfg.beta, cfg.gamma);
    let predictor_eigenvalues = linalg::eigenvalues(&a_prime);
    let predictor_stable = predictor_eigenvalues
        .iter()
        .all(|z| Float::hypot(z.re, z.im) < 1.0);
    let a_prime_p = (1..cfg.p).fold(a_prime.clone(), |acc, _| &acc * &a_prime);
    let truncation_bias = linalg::ordered_svd(&a_prime_p)
        .singular_values
        .first()
        .copied()
        .unwrap_or(0.0);
    let y_norm = y.norm();
    let innovation_ratio = if y_norm > 0.0 { e_hat.norm() / y_norm } else { 0.0 };

    let diagnostics = Diagnostics {
        markov: markov.diagnostics,
        output: output.diagnostics,
        system: system.diagnostics,
        alpha,
        operator_condition: fact.condition(),
        predictor_eigenvalues,
        predictor_stable,
        truncation_bias,
        innovation_identifiable: system.innovation_identifiable,
        innovation_ratio,
    };
    Ok(IdentResult {
        model,
        singular_values: states.singular_values,
        x_hat: CoefficientMatrix::new(x_hat, spec)?,
        e_hat: CoefficientMatrix::new(e_hat, spec)?,
        markov: markov.ck_p,
        diagnostics,
    })
}
