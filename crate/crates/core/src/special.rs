//! Scalar special functions: log-gamma, the Beta distribution, the standard
//! normal distribution, and the zero-mean unit-variance multivariate normal.
//!
//! Everything here works in log space. Pseudo-counts as small as 1e-12 are
//! expected inputs, so the Beta routines must stay finite there.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::CholeskyFactor;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Parameters of a Beta distribution; both pseudo-counts strictly positive and finite.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BetaParams {
    a: f64,
    b: f64,
}

impl BetaParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite() && b > 0.0 && b.is_finite()) {
            return Err(Error::domain(format!(
                "Beta parameters must be positive and finite, got a={a}, b={b}"
            )));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }
}

/// Result of evaluating a log density where the density itself may be zero or unbounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogDensity {
    Finite(f64),
    /// Density is exactly zero (log would be −∞).
    Zero,
    /// Density diverges at an endpoint (log would be +∞).
    Infinite,
}

impl LogDensity {
    pub fn finite(self) -> Option<f64> {
        match self {
            LogDensity::Finite(v) => Some(v),
            _ => None,
        }
    }
}

/// ln Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < 0.5 {
        // Γ(x) = Γ(1 + x) / x keeps full relative accuracy for tiny x
        return ln_gamma(1.0 + x) - x.ln();
    }
    let x = x - 1.0;
    let mut series = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        series += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (x + 0.5) * t.ln() - t + series.ln()
}

/// ln B(a, b) = ln Γ(a) + ln Γ(b) − ln Γ(a + b).
pub fn log_beta_function(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::domain(format!(
            "Beta function needs positive finite arguments, got ({a}, {b})"
        )));
    }
    Ok(ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b))
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::domain(format!("probability outside [0, 1]: {p}")))
    }
}

/// ln of the Beta(a, b) density at `p`.
///
/// At `p = 0` or `p = 1` the density is zero, finite or unbounded depending on the
/// sign of the matching exponent; those cases come back as [`LogDensity::Zero`] or
/// [`LogDensity::Infinite`] instead of a non-finite float.
pub fn beta_log_pdf(p: f64, params: BetaParams) -> Result<LogDensity> {
    check_probability(p)?;
    let (a, b) = (params.a, params.b);
    let norm = log_beta_function(a, b)?;
    // at an endpoint the opposite factor is 1^(k-1) = 1
    let endpoint = |exponent: f64| {
        if exponent > 0.0 {
            LogDensity::Zero
        } else if exponent < 0.0 {
            LogDensity::Infinite
        } else {
            LogDensity::Finite(-norm)
        }
    };
    if p == 0.0 {
        return Ok(endpoint(a - 1.0));
    }
    if p == 1.0 {
        return Ok(endpoint(b - 1.0));
    }
    Ok(LogDensity::Finite(
        (a - 1.0) * p.ln() + (b - 1.0) * (-p).ln_1p() - norm,
    ))
}

/// Beta(a, b) density at an interior point. Used by Newton steps.
fn beta_pdf_interior(p: f64, a: f64, b: f64, log_norm: f64) -> f64 {
    ((a - 1.0) * p.ln() + (b - 1.0) * (-p).ln_1p() - log_norm).exp()
}

/// Regularized incomplete beta I_p(a, b), the Beta cdf.
pub fn beta_cdf(p: f64, params: BetaParams) -> Result<f64> {
    check_probability(p)?;
    Ok(regularized_incomplete_beta(p, params.a, params.b))
}

fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let log_norm = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    let log_front = a * x.ln() + b * (-x).ln_1p() - log_norm;
    // the continued fraction converges quickly on this side of the mean
    if x < (a + 1.0) / (a + b + 2.0) {
        (log_front.exp() * beta_continued_fraction(x, a, b) / a).clamp(0.0, 1.0)
    } else {
        let tail = log_front.exp() * beta_continued_fraction(1.0 - x, b, a) / b;
        (1.0 - tail).clamp(0.0, 1.0)
    }
}

/// Continued fraction for the incomplete beta, modified Lentz evaluation.
fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    const MAX_ITER: usize = 20_000;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Inverse Beta cdf by safeguarded Newton iteration inside a shrinking bracket.
pub fn beta_inv_cdf(q: f64, params: BetaParams) -> Result<f64> {
    check_probability(q)?;
    if q == 0.0 {
        return Ok(0.0);
    }
    if q == 1.0 {
        return Ok(1.0);
    }
    let (a, b) = (params.a, params.b);
    let log_norm = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut x = if a == b { 0.5 } else { params.mean() };
    for _ in 0..2_000 {
        let f = regularized_incomplete_beta(x, a, b) - q;
        if f == 0.0 {
            return Ok(x);
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= f64::EPSILON * hi.max(f64::MIN_POSITIVE) {
            break;
        }
        let pdf = beta_pdf_interior(x, a, b, log_norm);
        let newton = x - f / pdf;
        let next = if pdf.is_finite() && pdf > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == x {
            break;
        }
        x = next;
    }
    Ok(x)
}

/// Φ(z).
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// ln φ(z).
pub fn std_normal_log_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

/// Φ⁻¹(q) for q in (0, 1), Wichura's AS 241 (PPND16).
pub fn std_normal_inv_cdf(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!(
            "normal quantile needs q in (0, 1), got {q}"
        )));
    }
    let r_central = q - 0.5;
    if r_central.abs() <= 0.425 {
        let r = 0.180_625 - r_central * r_central;
        let num = (((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_813e4) * r
            + 6.726_577_092_700_87e4)
            * r
            + 4.592_195_393_154_987e4)
            * r
            + 1.373_169_376_550_946e4)
            * r
            + 1.971_590_950_306_551_3e3)
            * r
            + 1.331_416_678_917_843_8e2)
            * r
            + 3.387_132_872_796_366_5)
            * r_central;
        let den = ((((((5.226_495_278_852_545e3 * r + 2.872_908_573_572_194_3e4) * r
            + 3.930_789_580_009_271e4)
            * r
            + 2.121_379_430_158_659_7e4)
            * r
            + 5.394_196_021_424_751e3)
            * r
            + 6.871_870_074_920_579e2)
            * r
            + 4.231_333_070_160_091e1)
            * r
            + 1.0;
        return Ok(num / den);
    }
    let tail = if r_central < 0.0 { q } else { 1.0 - q };
    let mut r = (-tail.ln()).sqrt();
    let value = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
            + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_800_7e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_759)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_048_7e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358e-1)
            * r
            + 5.998_322_065_558_88e-1)
            * r
            + 1.0;
        num / den
    };
    Ok(if r_central < 0.0 { -value } else { value })
}

/// ln φ_s(z; R) for a zero-mean normal with correlation matrix `r`.
pub fn mvn_log_pdf(z: &[f64], r: &DMatrix<f64>) -> Result<f64> {
    if r.nrows() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: r.nrows(),
            got: z.len(),
        });
    }
    let factor = CholeskyFactor::new(r, "correlation")?;
    Ok(mvn_log_pdf_factored(z, &factor))
}

/// Same as [`mvn_log_pdf`] with a precomputed factor.
pub fn mvn_log_pdf_factored(z: &[f64], factor: &CholeskyFactor) -> f64 {
    let y = factor.solve_lower(z);
    let s = z.len() as f64;
    -0.5 * (s * 2.0 * LN_SQRT_2PI + factor.log_det() + y.dot(&y))
}
