//! Nataf-Beta joint distribution: Beta marginals tied together by a Gaussian copula.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::CholeskyFactor;
use crate::special::{
    beta_cdf, beta_inv_cdf, beta_log_pdf, mvn_log_pdf_factored, std_normal_cdf,
    std_normal_inv_cdf, std_normal_log_pdf, BetaParams, LogDensity,
};

/// Lower clamp applied to Beta cdf values before mapping to normal space.
pub const CDF_CLAMP: f64 = 1e-14;

/// Joint distribution of class probabilities over a query set.
#[derive(Debug, Clone, PartialEq)]
pub struct NatafBetaField {
    a: Vec<f64>,
    b: Vec<f64>,
    r_p: DMatrix<f64>,
}

impl NatafBetaField {
    pub fn new(a: Vec<f64>, b: Vec<f64>, r_p: DMatrix<f64>) -> Result<Self> {
        let s = a.len();
        if b.len() != s {
            return Err(Error::DimensionMismatch {
                expected: s,
                got: b.len(),
            });
        }
        if r_p.nrows() != s || r_p.ncols() != s {
            return Err(Error::DimensionMismatch {
                expected: s,
                got: r_p.nrows(),
            });
        }
        for (&ai, &bi) in a.iter().zip(&b) {
            BetaParams::new(ai, bi)?;
        }
        for i in 0..s {
            if r_p[(i, i)] != 1.0 {
                return Err(Error::domain("copula correlation needs a unit diagonal"));
            }
            for j in 0..i {
                if r_p[(i, j)] != r_p[(j, i)] {
                    return Err(Error::domain("copula correlation must be symmetric"));
                }
            }
        }
        Ok(Self { a, b, r_p })
    }

    /// Independent marginals (identity copula correlation).
    pub fn independent(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let s = a.len();
        Self::new(a, b, DMatrix::identity(s, s))
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn r_p(&self) -> &DMatrix<f64> {
        &self.r_p
    }

    pub fn marginal(&self, j: usize) -> BetaParams {
        BetaParams::new(self.a[j], self.b[j]).expect("validated on construction")
    }

    /// Marginal means a / (a + b).
    pub fn means(&self) -> Vec<f64> {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(a, b)| a / (a + b))
            .collect()
    }

    pub fn factor(&self) -> Result<CholeskyFactor> {
        CholeskyFactor::new(&self.r_p, "R_p")
    }
}

/// z(p) = Φ⁻¹(F(p)) with F clamped into [1e-14, 1 − 1e-14].
pub fn to_normal_space(p: f64, params: BetaParams) -> Result<f64> {
    let u = beta_cdf(p, params)?.clamp(CDF_CLAMP, 1.0 - CDF_CLAMP);
    let z = std_normal_inv_cdf(u)?;
    if z.is_finite() {
        Ok(z)
    } else {
        Err(Error::NumericRange(format!("z({p}) is not finite")))
    }
}

/// ln NBeta(p; a, b, R_p).
pub fn nataf_beta_log_pdf(p: &[f64], field: &NatafBetaField) -> Result<f64> {
    let factor = field.factor()?;
    nataf_beta_log_pdf_factored(p, field, &factor)
}

/// [`nataf_beta_log_pdf`] with the copula factor computed once by the caller.
pub fn nataf_beta_log_pdf_factored(
    p: &[f64],
    field: &NatafBetaField,
    factor: &CholeskyFactor,
) -> Result<f64> {
    if p.len() != field.len() {
        return Err(Error::DimensionMismatch {
            expected: field.len(),
            got: p.len(),
        });
    }
    let mut z = Vec::with_capacity(p.len());
    let mut marginal_sum = 0.0;
    for (j, &pj) in p.iter().enumerate() {
        if !(pj > 0.0 && pj < 1.0) {
            return Err(Error::domain(format!("p[{j}] = {pj} is not inside (0, 1)")));
        }
        let params = field.marginal(j);
        let zj = to_normal_space(pj, params)?;
        let log_beta = match beta_log_pdf(pj, params)? {
            LogDensity::Finite(v) => v,
            _ => unreachable!("interior points have finite density"),
        };
        if field.len() == 1 {
            // the copula factor is exactly φ(z) / φ(z)
            return Ok(log_beta);
        }
        marginal_sum += log_beta - std_normal_log_pdf(zj);
        z.push(zj);
    }
    Ok(mvn_log_pdf_factored(&z, factor) + marginal_sum)
}

/// Draws `n` joint realizations; row `k` of the result is one sample of p(S).
pub fn sample_field<R: Rng + ?Sized>(
    field: &NatafBetaField,
    n: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let factor = field.factor()?;
    let s = field.len();
    let mut out = DMatrix::zeros(n, s);
    let mut w = vec![0.0; s];
    for k in 0..n {
        for wj in w.iter_mut() {
            *wj = rng.sample(StandardNormal);
        }
        let z = factor.correlate(&w);
        for j in 0..s {
            out[(k, j)] = beta_inv_cdf(std_normal_cdf(z[j]), field.marginal(j))?;
        }
    }
    Ok(out)
}

/// Per-point marginal quantiles: `result[j][k]` is the `levels[k]` quantile at point `j`.
pub fn credible_band(field: &NatafBetaField, levels: &[f64]) -> Result<Vec<Vec<f64>>> {
    if let Some(bad) = levels.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
        return Err(Error::domain(format!(
            "credible levels must be inside (0, 1), got {bad}"
        )));
    }
    (0..field.len())
        .map(|j| {
            let params = field.marginal(j);
            levels.iter().map(|&q| beta_inv_cdf(q, params)).collect()
        })
        .collect()
}
