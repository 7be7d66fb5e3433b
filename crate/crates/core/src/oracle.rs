//! Brute-force reference routines.
//!
//! These deliberately avoid the Cholesky, special-function and closed-form
//! paths used by the bound computations, so they can serve as independent
//! checks in tests and in the `validate` suite.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::ComplexMatrix;

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant_lu(a: &ComplexMatrix) -> Complex64 {
    assert!(a.is_square());
    let n = a.rows();
    let mut m: Vec<Vec<Complex64>> = (0..n).map(|r| a.row(r).to_vec()).collect();
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| m[x][col].norm().total_cmp(&m[y][col].norm()))
            .unwrap();
        if m[pivot][col].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        let p = m[col][col];
        det *= p;
        for r in col + 1..n {
            let f = m[r][col] / p;
            for c in col..n {
                let v = m[col][c];
                m[r][c] -= f * v;
            }
        }
    }
    det
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
pub fn inverse_gauss_jordan(a: &ComplexMatrix) -> ComplexMatrix {
    assert!(a.is_square());
    let n = a.rows();
    let mut m: Vec<Vec<Complex64>> = (0..n)
        .map(|r| {
            let mut row = a.row(r).to_vec();
            row.extend((0..n).map(|c| Complex64::new(if c == r { 1.0 } else { 0.0 }, 0.0)));
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| m[x][col].norm().total_cmp(&m[y][col].norm()))
            .unwrap();
        m.swap(pivot, col);
        let p = m[col][col];
        for c in 0..2 * n {
            m[col][c] /= p;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                for c in 0..2 * n {
                    let v = m[col][c];
                    m[r][c] -= f * v;
                }
            }
        }
    }
    ComplexMatrix::from_fn(n, n, |r, c| m[r][n + c])
}

/// `tr(A·A)` by an explicit product and double loop.
pub fn naive_trace_square(a: &ComplexMatrix) -> Complex64 {
    let n = a.rows();
    let mut prod = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                prod[i][j] += a[(i, k)] * a[(k, j)];
            }
        }
    }
    (0..n).map(|i| prod[i][i]).sum()
}

fn cn(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| cn(rng))
}

/// Random Hermitian positive-definite matrix `G G†/n + 0.1·I`.
pub fn random_hpd(n: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let g = random_matrix(n, n, rng);
    (&g * &g.adjoint()).scale(1.0 / n as f64).hermitian_part().add_diagonal(0.1)
}

/// Adaptive Simpson quadrature on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Standard normal tail by quadrature of the density.
pub fn gaussian_tail_quadrature(z: f64) -> f64 {
    let density = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if z >= 0.0 {
        // integrate beyond z on a finite window; the tail past z + 40 is < 1e-300
        adaptive_simpson(&density, z, z + 40.0, 1e-15)
    } else {
        1.0 - gaussian_tail_quadrature(-z)
    }
}

/// Lower regularized incomplete gamma with shape 3/2 by quadrature.
///
/// Substituting `t = s²` removes the square-root endpoint singularity:
/// `∫₀ᵘ t^{1/2} e^{−t} dt = ∫₀^{√u} 2 s² e^{−s²} ds`.
pub fn gamma_32_quadrature(u: f64) -> f64 {
    let gamma_three_halves = std::f64::consts::PI.sqrt() / 2.0;
    let integrand = |s: f64| 2.0 * s * s * (-s * s).exp();
    adaptive_simpson(&integrand, 0.0, u.sqrt(), 1e-15) / gamma_three_halves
}

/// Central difference `(f(x+h) − f(x−h)) / 2h`.
pub fn central_difference(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Richardson-extrapolated second central difference.
pub fn second_difference(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let d = |h: f64| (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
    let coarse = d(h);
    let fine = d(0.5 * h);
    (4.0 * fine - coarse) / 3.0
}
