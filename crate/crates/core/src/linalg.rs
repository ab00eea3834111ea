//! Dense linear-algebra helpers on top of nalgebra.

use alloc::vec::Vec;

use nalgebra::{Complex, DMatrix, DVector};
use num_traits::Float;

/// Solution of `min ||A X - B||_F`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub solution: DMatrix<f64>,
    /// Numerical rank of `A` from the pivoted QR.
    pub rank: usize,
    /// Ratio of the largest to the smallest pivot of the pivoted QR; infinite
    /// when `A` has a zero column after pivoting.
    pub condition: f64,
    pub residual_norm: f64,
}

/// Householder QR with column pivoting, `A P = Q R`.
struct PivotedQr {
    /// R on and above the diagonal.
    r: DMatrix<f64>,
    /// `Q^T B`.
    qtb: DMatrix<f64>,
    perm: Vec<usize>,
}

fn pivoted_qr(a: &DMatrix<f64>, b: &DMatrix<f64>) -> PivotedQr {
    let (m, n) = a.shape();
    let mut r = a.clone();
    let mut qtb = b.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let steps = m.min(n);

    for j in 0..steps {
        let mut best = j;
        let mut best_norm = -1.0;
        for c in j..n {
            let nrm = r.view((j, c), (m - j, 1)).norm_squared();
            if nrm > best_norm {
                best_norm = nrm;
                best = c;
            }
        }
        if best != j {
            r.swap_columns(j, best);
            perm.swap(j, best);
        }

        let x_norm = Float::sqrt(best_norm);
        if x_norm == 0.0 {
            continue;
        }
        let x0 = r[(j, j)];
        let alpha = if x0 >= 0.0 { -x_norm } else { x_norm };
        let mut v: DVector<f64> = r.view((j, j), (m - j, 1)).column(0).into_owned();
        v[0] -= alpha;
        let v_norm2 = v.norm_squared();
        if v_norm2 == 0.0 {
            continue;
        }
        let scale = 2.0 / v_norm2;
        reflect(&mut r, j, j..n, &v, scale);
        let nrhs = qtb.ncols();
        reflect(&mut qtb, j, 0..nrhs, &v, scale);
        r[(j, j)] = alpha;
        for i in j + 1..m {
            r[(i, j)] = 0.0;
        }
    }
    PivotedQr { r, qtb, perm }
}

/// Applies `I - scale v v^T` to rows `row0..` of the given columns.
fn reflect(
    m: &mut DMatrix<f64>,
    row0: usize,
    cols: core::ops::Range<usize>,
    v: &DVector<f64>,
    scale: f64,
) {
    for c in cols {
        let mut col = m.view_mut((row0, c), (v.len(), 1));
        let dot = col.dot(v);
        for (x, vi) in col.iter_mut().zip(v.iter()) {
            *x -= scale * dot * vi;
        }
    }
}

fn rank_from_r(r: &DMatrix<f64>) -> usize {
    let (m, n) = r.shape();
    let k = m.min(n);
    if k == 0 {
        return 0;
    }
    let r00 = Float::abs(r[(0, 0)]);
    if r00 == 0.0 {
        return 0;
    }
    let tol = (m.max(n) as f64) * f64::EPSILON * r00;
    (0..k).take_while(|&i| Float::abs(r[(i, i)]) > tol).count()
}

/// Numerical rank by column-pivoted QR.
pub fn numerical_rank(a: &DMatrix<f64>) -> usize {
    let qr = pivoted_qr(a, &DMatrix::zeros(a.nrows(), 0));
    rank_from_r(&qr.r)
}

/// Minimum-norm least squares by column-pivoted QR, followed by a complete
/// orthogonal decomposition when `A` is rank deficient.
pub fn lstsq(a: &DMatrix<f64>, b: &DMatrix<f64>) -> LeastSquares {
    assert_eq!(a.nrows(), b.nrows(), "lstsq: row mismatch");
    let (_, n) = a.shape();
    let nrhs = b.ncols();
    let qr = pivoted_qr(a, b);
    let rank = rank_from_r(&qr.r);
    let k = a.nrows().min(n);

    let condition = if k == 0 {
        1.0
    } else {
        let first = Float::abs(qr.r[(0, 0)]);
        let last = Float::abs(qr.r[(k - 1, k - 1)]);
        if k < n || last == 0.0 {
            f64::INFINITY
        } else {
            first / last
        }
    };

    let mut y = DMatrix::zeros(n, nrhs);
    if rank > 0 {
        let c = qr.qtb.rows(0, rank).into_owned();
        if rank == n {
            let r11 = qr.r.view((0, 0), (n, n)).upper_triangle();
            y = r11
                .solve_upper_triangular(&c)
                .expect("nonzero pivots up to the numerical rank");
        } else {
            // T = [R11 R12] is rank x n; with T^T = Q2 R2 the minimum-norm
            // solution of T y = c is y = Q2 R2^{-T} c.
            let t = qr.r.view((0, 0), (rank, n)).upper_triangle();
            let lq = t.transpose().qr();
            let q2 = lq.q();
            let r2 = lq.r();
            let w = r2
                .transpose()
                .solve_lower_triangular(&c)
                .expect("nonzero pivots up to the numerical rank");
            y = q2 * w;
        }
    }

    let mut solution = DMatrix::zeros(n, nrhs);
    for (j, &p) in qr.perm.iter().enumerate() {
        solution.set_row(p, &y.row(j));
    }
    let residual_norm = (a * &solution - b).norm();
    LeastSquares {
        solution,
        rank,
        condition,
        residual_norm,
    }
}

/// Solves `min ||Y - Θ Φ||_F` for `Θ` with regressors stacked as rows of `Φ`.
pub fn lstsq_rows(target: &DMatrix<f64>, regressors: &DMatrix<f64>) -> LeastSquares {
    let mut ls = lstsq(&regressors.transpose(), &target.transpose());
    ls.solution = ls.solution.transpose();
    ls
}

/// Matrix exponential by scaling and squaring with a degree-13 Padé
/// approximant.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    const B: [f64; 14] = [
        64_764_752_532_480_000.0,
        32_382_376_266_240_000.0,
        7_771_770_303_897_600.0,
        1_187_353_796_428_800.0,
        129_060_195_264_000.0,
        10_559_470_521_600.0,
        670_442_572_800.0,
        33_522_128_640.0,
        1_323_241_920.0,
        40_840_800.0,
        960_960.0,
        16_380.0,
        182.0,
        1.0,
    ];
    const THETA_13: f64 = 5.371_920_351_148_152;

    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm: square matrix required");
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let norm1 = a
        .column_iter()
        .map(|c| c.iter().map(|v| Float::abs(*v)).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm1 > THETA_13 {
        Float::ceil(Float::log2(norm1 / THETA_13)) as i32
    } else {
        0
    };
    let a = a / Float::powi(2.0, squarings);
    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * (&a6 * B[13] + &a4 * B[11] + &a2 * B[9])
        + &a6 * B[7]
        + &a4 * B[5]
        + &a2 * B[3]
        + &ident * B[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * B[12] + &a4 * B[10] + &a2 * B[8])
        + &a6 * B[6]
        + &a4 * B[4]
        + &a2 * B[2]
        + &ident * B[0];

    let mut x = (&v - &u)
        .lu()
        .solve(&(&v + &u))
        .expect("Padé denominator is nonsingular after scaling");
    for _ in 0..squarings {
        x = &x * &x;
    }
    x
}

/// Thin SVD with singular values in non-increasing order and each right
/// singular vector signed so that its largest-magnitude entry is positive.
#[derive(Debug, Clone)]
pub struct OrderedSvd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v_t: DMatrix<f64>,
}

pub fn ordered_svd(a: &DMatrix<f64>) -> OrderedSvd {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]).then(i.cmp(&j)));

    let k = order.len();
    let mut u_out = DMatrix::zeros(u.nrows(), k);
    let mut vt_out = DMatrix::zeros(k, v_t.ncols());
    let mut values = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        let row = v_t.row(src);
        let mut pivot = 0.0;
        for &val in row.iter() {
            if Float::abs(val) > Float::abs(pivot) {
                pivot = val;
            }
        }
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        vt_out.set_row(dst, &(row * sign));
        u_out.set_column(dst, &(u.column(src) * sign));
        values.push(sv[src]);
    }
    OrderedSvd {
        u: u_out,
        singular_values: values,
        v_t: vt_out,
    }
}

/// Eigenvalues of a real square matrix sorted by (real, imaginary) part.
pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let n = a.nrows();
    let mut eig: Vec<Complex<f64>> = match n {
        0 => Vec::new(),
        1 => alloc::vec![Complex::new(a[(0, 0)], 0.0)],
        _ => a.clone().schur().complex_eigenvalues().iter().copied().collect(),
    };
    sort_complex(&mut eig);
    eig
}

pub(crate) fn sort_complex(v: &mut [Complex<f64>]) {
    v.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
}

/// Spectral radius.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    eigenvalues(a)
        .iter()
        .map(|z| Float::hypot(z.re, z.im))
        .fold(0.0, f64::max)
}
