//! Gaussian tail and the shape-3/2 regularized incomplete gamma function.
//!
//! Both reduce to regularized incomplete gamma functions:
//! `Q(z) = ½·Γ_upper(½, z²/2)` for `z ≥ 0` (the `erfc` relation) and
//! `Γ_{3/2}(u) = P(3/2, u)`. The lower function is summed as a power
//! series, the upper one as a Lentz continued fraction, and the two are
//! never formed by subtracting nearly equal numbers.

const LN_GAMMA_HALF: f64 = 0.572_364_942_924_700_1; // ln √π
const LN_GAMMA_THREE_HALVES: f64 = -0.120_782_237_635_245_2; // ln(√π/2)
const GAMMA_32_SERIES_CUTOFF: f64 = 10.0;
const ERFC_SERIES_CUTOFF: f64 = 1.5;
const MAX_TERMS: usize = 1000;

/// Shape parameter together with `ln Γ(a)`.
#[derive(Clone, Copy)]
struct Shape {
    a: f64,
    ln_gamma: f64,
}

const HALF: Shape = Shape {
    a: 0.5,
    ln_gamma: LN_GAMMA_HALF,
};
const THREE_HALVES: Shape = Shape {
    a: 1.5,
    ln_gamma: LN_GAMMA_THREE_HALVES,
};

// ln P(a, x) = a ln x − x − ln Γ(a+1) + ln Σ_n xⁿ/((a+1)…(a+n))
fn ln_lower_series(shape: Shape, x: f64) -> f64 {
    let a = shape.a;
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..MAX_TERMS {
        term *= x / (a + n as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    a * x.ln() - x - (shape.ln_gamma + a.ln()) + sum.ln()
}

// ln Q(a, x) via 1/(x+1−a− 1·(1−a)/(x+3−a− 2·(2−a)/(x+5−a− …)))
fn ln_upper_continued_fraction(shape: Shape, x: f64) -> f64 {
    let a = shape.a;
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_TERMS {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let step = d * c;
        h *= step;
        if (step - 1.0).abs() < 1e-16 {
            break;
        }
    }
    a * x.ln() - x - shape.ln_gamma + h.ln()
}

/// `ln erfc(x)` for `x ≥ 0`.
fn ln_erfc_nonneg(x: f64) -> f64 {
    let x2 = x * x;
    if x2 < ERFC_SERIES_CUTOFF {
        (-ln_lower_series(HALF, x2).exp()).ln_1p()
    } else {
        ln_upper_continued_fraction(HALF, x2)
    }
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == 0.0 {
        return 1.0;
    }
    if x > 0.0 {
        ln_erfc_nonneg(x).exp()
    } else {
        2.0 - ln_erfc_nonneg(-x).exp()
    }
}

/// Standard normal tail `Q(z) = P(N(0,1) > z) = ½ erfc(z/√2)`.
///
/// Underflows to zero beyond `z ≈ 38`; use [`ln_q_function`] there.
pub fn q_function(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z == f64::INFINITY {
        return 0.0;
    }
    if z == f64::NEG_INFINITY {
        return 1.0;
    }
    if z >= 0.0 {
        ln_q_function(z).exp()
    } else {
        1.0 - ln_q_function(-z).exp()
    }
}

/// `ln Q(z)`, finite for every finite `z`.
pub fn ln_q_function(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z < 0.0 {
        return (-q_function(-z)).ln_1p();
    }
    if z == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    std::f64::consts::LN_2.mul_add(-1.0, ln_erfc_nonneg(z / std::f64::consts::SQRT_2))
}

/// Lower regularized incomplete gamma function with shape 3/2,
/// `Γ_{3/2}(u) = (1/Γ(3/2)) ∫₀ᵘ t^{1/2} e^{−t} dt`.
///
/// Series below `u = 10`, continued fraction for the complement above.
pub fn gamma_32(u: f64) -> f64 {
    if u.is_nan() {
        return f64::NAN;
    }
    if u <= 0.0 {
        return 0.0;
    }
    if u == f64::INFINITY {
        return 1.0;
    }
    let p = if u < GAMMA_32_SERIES_CUTOFF {
        ln_lower_series(THREE_HALVES, u).exp()
    } else {
        -(ln_upper_continued_fraction(THREE_HALVES, u).exp_m1())
    };
    p.clamp(0.0, 1.0)
}
