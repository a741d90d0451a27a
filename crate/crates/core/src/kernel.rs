//! RBF correlation and the random-field machinery that spreads class counts
//! across attribute space.
//!
//! Length scales follow the `exp(−½ Δ diag(l)⁻¹ Δᵀ)` convention: each entry of `l`
//! divides a *squared* coordinate difference, so it carries squared attribute units.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default prior mean of the propagated pseudo-counts E[A′(x)] = E[B′(x)].
pub const DEFAULT_PRIOR_MEAN: f64 = 1e-10;

/// Per-dimension RBF length scales, all positive and finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LengthScales(Vec<f64>);

impl LengthScales {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("length scales must have at least one entry"));
        }
        if let Some(bad) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::domain(format!(
                "length scales must be positive and finite, got {bad}"
            )));
        }
        Ok(Self(values))
    }

    /// Same scale in every one of `dim` dimensions.
    pub fn isotropic(value: f64, dim: usize) -> Result<Self> {
        Self::new(vec![value; dim])
    }

    /// Builds scales from log-space coordinates.
    pub fn from_log(log_values: &[f64]) -> Result<Self> {
        Self::new(log_values.iter().map(|v| v.exp()).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn to_log(&self) -> Vec<f64> {
        self.0.iter().map(|v| v.ln()).collect()
    }

    fn inverse(&self) -> Vec<f64> {
        self.0.iter().map(|v| 1.0 / v).collect()
    }
}

impl TryFrom<Vec<f64>> for LengthScales {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<LengthScales> for Vec<f64> {
    fn from(l: LengthScales) -> Self {
        l.0
    }
}

/// Ordered list of attribute vectors sharing one dimensionality, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySet {
    dim: usize,
    coords: Vec<f64>,
}

impl QuerySet {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("attribute vectors need at least one coordinate"));
        }
        if coords.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: coords.len() % dim,
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("attribute coordinates must be finite"));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_points<P: AsRef<[f64]>>(points: &[P]) -> Result<Self> {
        let dim = points.first().map(|p| p.as_ref().len()).unwrap_or(0);
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            coords.extend_from_slice(p);
        }
        Self::new(dim.max(1), coords)
    }

    /// A 1-D query set from scalar coordinates.
    pub fn from_scalars(xs: &[f64]) -> Result<Self> {
        Self::new(1, xs.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.coords[j * self.dim..(j + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Appends every point of `other` not already present (bitwise) in `self`.
    pub fn union(&self, other: &QuerySet) -> Result<QuerySet> {
        check_dim(self.dim, other.dim)?;
        let index = PointIndex::build(self);
        let mut coords = self.coords.clone();
        let mut seen = index.map;
        for p in other.iter() {
            let key = point_key(p);
            if !seen.contains_key(&key) {
                seen.insert(key, coords.len() / self.dim);
                coords.extend_from_slice(p);
            }
        }
        QuerySet::new(self.dim, coords)
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Bitwise key of an attribute vector; `-0.0` folds onto `0.0`.
pub(crate) fn point_key(p: &[f64]) -> Vec<u64> {
    p.iter()
        .map(|&v| if v == 0.0 { 0u64 } else { v.to_bits() })
        .collect()
}

/// Exact-match lookup from attribute vector to position in a query set.
pub(crate) struct PointIndex {
    map: HashMap<Vec<u64>, usize>,
}

impl PointIndex {
    pub(crate) fn build(points: &QuerySet) -> Self {
        let mut map = HashMap::with_capacity(points.len());
        for (j, p) in points.iter().enumerate() {
            map.entry(point_key(p)).or_insert(j);
        }
        Self { map }
    }

    pub(crate) fn get(&self, p: &[f64]) -> Option<usize> {
        self.map.get(&point_key(p)).copied()
    }
}

/// Scaled squared distance `Δ diag(l)⁻¹ Δᵀ`.
#[inline]
fn scaled_sq_dist(x: &[f64], y: &[f64], inv_scales: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .zip(inv_scales)
        .map(|((a, b), w)| {
            let d = a - b;
            d * d * w
        })
        .sum()
}

/// Single RBF kernel value.
pub fn rbf(x: &[f64], y: &[f64], scales: &LengthScales) -> f64 {
    (-0.5 * scaled_sq_dist(x, y, &scales.inverse())).exp()
}

/// Symmetric s×s correlation matrix of `points`.
pub fn rbf_correlation(points: &QuerySet, scales: &LengthScales) -> Result<DMatrix<f64>> {
    check_dim(points.dim(), scales.dim())?;
    let inv = scales.inverse();
    let s = points.len();
    let mut r = DMatrix::identity(s, s);
    for i in 0..s {
        for j in 0..i {
            let v = (-0.5 * scaled_sq_dist(points.point(i), points.point(j), &inv)).exp();
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    Ok(r)
}

/// Rectangular s×d kernel between `query` and `observed`.
pub fn cross_correlation(
    query: &QuerySet,
    observed: &QuerySet,
    scales: &LengthScales,
) -> Result<DMatrix<f64>> {
    check_dim(query.dim(), scales.dim())?;
    check_dim(observed.dim(), scales.dim())?;
    let inv = scales.inverse();
    Ok(DMatrix::from_fn(query.len(), observed.len(), |j, i| {
        (-0.5 * scaled_sq_dist(query.point(j), observed.point(i), &inv)).exp()
    }))
}

/// Direct class counts per query point.
///
/// `points[i]` is observation `i`'s attribute vector and `is_class1[i]` its label.
/// Every observation must coincide bitwise with a query point.
pub fn count_observations<P: AsRef<[f64]>>(
    points: &[P],
    is_class1: &[bool],
    query: &QuerySet,
) -> Result<(Vec<u64>, Vec<u64>)> {
    if points.len() != is_class1.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            got: is_class1.len(),
        });
    }
    let index = PointIndex::build(query);
    let mut a_hat = vec![0u64; query.len()];
    let mut b_hat = vec![0u64; query.len()];
    for (row, (p, &c)) in points.iter().zip(is_class1).enumerate() {
        let p = p.as_ref();
        check_dim(query.dim(), p.len())?;
        let j = index.get(p).ok_or(Error::Consistency { row })?;
        if c {
            a_hat[j] += 1;
        } else {
            b_hat[j] += 1;
        }
    }
    Ok((a_hat, b_hat))
}

/// Direct and propagated pseudo-counts over a query set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountField {
    /// â(S)
    pub a_hat: Vec<u64>,
    /// b̂(S)
    pub b_hat: Vec<u64>,
    /// E[A″(S)]
    pub a_post: Vec<f64>,
    /// E[B″(S)]
    pub b_post: Vec<f64>,
    /// E[A′(S)], the part of E[A″] that came from other locations plus the prior
    pub a_prior_prop: Vec<f64>,
    /// E[B′(S)]
    pub b_prior_prop: Vec<f64>,
}

impl CountField {
    pub fn len(&self) -> usize {
        self.a_post.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a_post.is_empty()
    }

    /// E[A″] / (E[A″] + E[B″]) per query point.
    pub fn predictive(&self) -> Vec<f64> {
        self.a_post
            .iter()
            .zip(&self.b_post)
            .map(|(a, b)| a / (a + b))
            .collect()
    }
}

/// Spreads direct counts at `observed` to every point of `query` by kernel-weighted sums.
///
/// E[A″(q_j)] = prior_mean + Σ_i k_a(q_j, o_i) â(o_i), and likewise for B with `l_b`.
/// Direct counts at observed points that coincide bitwise with a query point are
/// excluded when forming E[A′], so E[A″] = E[A′] + â holds by construction.
pub fn propagate_counts(
    a_hat: &[u64],
    b_hat: &[u64],
    observed: &QuerySet,
    query: &QuerySet,
    l_a: &LengthScales,
    l_b: &LengthScales,
    prior_mean: f64,
) -> Result<CountField> {
    if !(prior_mean >= 0.0 && prior_mean.is_finite()) {
        return Err(Error::domain(format!(
            "prior mean must be non-negative, got {prior_mean}"
        )));
    }
    check_dim(observed.len(), a_hat.len())?;
    check_dim(observed.len(), b_hat.len())?;
    check_dim(query.dim(), observed.dim())?;
    check_dim(query.dim(), l_a.dim())?;
    check_dim(query.dim(), l_b.dim())?;

    let inv_a = l_a.inverse();
    let inv_b = l_b.inverse();
    let same_scales = l_a == l_b;
    let obs_keys: Vec<Vec<u64>> = observed.iter().map(point_key).collect();
    let s = query.len();

    let mut field = CountField {
        a_hat: vec![0; s],
        b_hat: vec![0; s],
        a_post: vec![0.0; s],
        b_post: vec![0.0; s],
        a_prior_prop: vec![0.0; s],
        b_prior_prop: vec![0.0; s],
    };
    for j in 0..s {
        let q = query.point(j);
        let q_key = point_key(q);
        let mut a_prop = prior_mean;
        let mut b_prop = prior_mean;
        let (mut a_direct, mut b_direct) = (0u64, 0u64);
        for i in 0..observed.len() {
            if a_hat[i] == 0 && b_hat[i] == 0 {
                continue;
            }
            if obs_keys[i] == q_key {
                a_direct += a_hat[i];
                b_direct += b_hat[i];
                continue;
            }
            let o = observed.point(i);
            let ka = (-0.5 * scaled_sq_dist(q, o, &inv_a)).exp();
            let kb = if same_scales {
                ka
            } else {
                (-0.5 * scaled_sq_dist(q, o, &inv_b)).exp()
            };
            a_prop += ka * a_hat[i] as f64;
            b_prop += kb * b_hat[i] as f64;
        }
        field.a_hat[j] = a_direct;
        field.b_hat[j] = b_direct;
        field.a_prior_prop[j] = a_prop;
        field.b_prior_prop[j] = b_prop;
        field.a_post[j] = a_prop + a_direct as f64;
        field.b_post[j] = b_prop + b_direct as f64;
    }
    Ok(field)
}

/// Leave-own-count-out propagated counts at each observation.
///
/// For observation `i`, returns E[A′(x_i)] = prior_mean + Σ_{j≠i} k(x_i, x_j) 1[c_j = 1]
/// and the analogue for class 0. Duplicated observations contribute to one another
/// with kernel value 1.
pub fn leave_one_out_counts<P: AsRef<[f64]>>(
    points: &[P],
    is_class1: &[bool],
    scales: &LengthScales,
    prior_mean: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dim(points.len(), is_class1.len())?;
    for p in points {
        check_dim(scales.dim(), p.as_ref().len())?;
    }
    let inv = scales.inverse();
    let n = points.len();
    let mut a = vec![prior_mean; n];
    let mut b = vec![prior_mean; n];
    for i in 0..n {
        let xi = points[i].as_ref();
        for j in 0..i {
            let k = (-0.5 * scaled_sq_dist(xi, points[j].as_ref(), &inv)).exp();
            if is_class1[j] {
                a[i] += k;
            } else {
                b[i] += k;
            }
            if is_class1[i] {
                a[j] += k;
            } else {
                b[j] += k;
            }
        }
    }
    Ok((a, b))
}

/// Log-space mean, standard deviation and correlation of a lognormal random field.
#[derive(Debug, Clone, PartialEq)]
pub struct LognormalFieldParams {
    pub lambda: DVector<f64>,
    pub zeta: DVector<f64>,
    pub correlation: DMatrix<f64>,
}

impl LognormalFieldParams {
    pub fn new(lambda: DVector<f64>, zeta: DVector<f64>, correlation: DMatrix<f64>) -> Result<Self> {
        let s = lambda.len();
        check_dim(s, zeta.len())?;
        check_dim(s, correlation.nrows())?;
        check_dim(s, correlation.ncols())?;
        if zeta.iter().any(|z| !(*z >= 0.0 && z.is_finite())) {
            return Err(Error::domain("log-space standard deviations must be non-negative"));
        }
        Ok(Self {
            lambda,
            zeta,
            correlation,
        })
    }

    /// Σ = diag(ζ) R diag(ζ).
    pub fn covariance(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&self.zeta);
        &d * &self.correlation * &d
    }

    fn from_covariance(lambda: DVector<f64>, cov: &DMatrix<f64>) -> Self {
        let s = lambda.len();
        let zeta = DVector::from_fn(s, |i, _| cov[(i, i)].max(0.0).sqrt());
        let correlation = DMatrix::from_fn(s, s, |i, j| {
            if i == j {
                1.0
            } else if zeta[i] > 0.0 && zeta[j] > 0.0 {
                cov[(i, j)] / (zeta[i] * zeta[j])
            } else {
                0.0
            }
        });
        Self {
            lambda,
            zeta,
            correlation,
        }
    }

    /// Expected value of the field in natural space, exp(λ + ζ²/2).
    pub fn mean(&self) -> DVector<f64> {
        self.lambda
            .zip_map(&self.zeta, |l, z| (l + 0.5 * z * z).exp())
    }
}

/// Conditions a lognormal field on one exact observation `ln(observed_count)` at `index`.
///
/// λ″ = λ′ + Σ′[:, i] (ζ′ᵢ²)⁻¹ (ln count − λ′ᵢ),  Σ″ = Σ′ − Σ′[:, i] (ζ′ᵢ²)⁻¹ Σ′[i, :].
pub fn condition_lognormal_single(
    prior: &LognormalFieldParams,
    index: usize,
    observed_count: f64,
) -> Result<LognormalFieldParams> {
    let s = prior.lambda.len();
    if index >= s {
        return Err(Error::domain(format!("index {index} outside field of size {s}")));
    }
    if !(observed_count > 0.0 && observed_count.is_finite()) {
        return Err(Error::domain(format!(
            "observed count must be positive, got {observed_count}"
        )));
    }
    let var_i = prior.zeta[index] * prior.zeta[index];
    if var_i <= 0.0 {
        return Err(Error::domain(format!(
            "coordinate {index} has zero prior variance"
        )));
    }
    let cov = prior.covariance();
    let column = cov.column(index).into_owned();
    let innovation = observed_count.ln() - prior.lambda[index];
    let lambda = &prior.lambda + &column * (innovation / var_i);
    let mut post = &cov - (&column * column.transpose()) / var_i;
    // the conditioned coordinate is known exactly
    for k in 0..s {
        post[(index, k)] = 0.0;
        post[(k, index)] = 0.0;
    }
    let mut lambda = lambda;
    lambda[index] = observed_count.ln();
    Ok(LognormalFieldParams::from_covariance(lambda, &post))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Scalar kernel written out longhand, independent of the matrix builders.
    fn kernel_oracle(x: &[f64], y: &[f64], l: &[f64]) -> f64 {
        let mut e = 0.0;
        for k in 0..x.len() {
            e += (x[k] - y[k]).powi(2) / l[k];
        }
        (-e / 2.0).exp()
    }

    #[test]
    fn rbf_examples() {
        let l = LengthScales::new(vec![3.0]).unwrap();
        let pts = QuerySet::from_scalars(&[0.7, 0.7]).unwrap();
        assert_eq!(rbf_correlation(&pts, &l).unwrap()[(0, 1)], 1.0);

        // (Δx)² = 2l gives exponent −1
        let l = LengthScales::new(vec![2.0]).unwrap();
        let pts = QuerySet::from_scalars(&[0.0, 2.0]).unwrap();
        assert_abs_diff_eq!(
            rbf_correlation(&pts, &l).unwrap()[(0, 1)],
            (-1.0f64).exp(),
            epsilon = 1e-15
        );

        let l = LengthScales::new(vec![1.0, 4.0]).unwrap();
        let pts = QuerySet::from_points(&[[0.0, 0.0], [1.0, 2.0]]).unwrap();
        let r = rbf_correlation(&pts, &l).unwrap();
        assert_abs_diff_eq!(r[(0, 1)], kernel_oracle(&[0.0, 0.0], &[1.0, 2.0], &[1.0, 4.0]), epsilon = 1e-15);
        assert_abs_diff_eq!(r[(0, 1)], (-1.0f64).exp(), epsilon = 1e-15);
        assert!(rbf_correlation(&pts, &LengthScales::new(vec![1.0]).unwrap()).is_err());
        assert!(LengthScales::new(vec![1.0, 0.0]).is_err());
        assert!(LengthScales::new(vec![-1.0]).is_err());
    }

    #[test]
    fn cross_correlation_examples() {
        let l = LengthScales::new(vec![2.0]).unwrap();
        let q = QuerySet::from_scalars(&[0.0]).unwrap();
        let o = QuerySet::from_scalars(&[1.0, 2.0]).unwrap();
        let k = cross_correlation(&q, &o, &l).unwrap();
        assert_abs_diff_eq!(k[(0, 0)], (-0.25f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(k[(0, 1)], (-1.0f64).exp(), epsilon = 1e-15);

        let pts = QuerySet::from_scalars(&[0.0, 0.3, 5.0]).unwrap();
        assert_eq!(
            cross_correlation(&pts, &pts, &l).unwrap(),
            rbf_correlation(&pts, &l).unwrap()
        );
        let far = QuerySet::from_scalars(&[1e6]).unwrap();
        assert_eq!(cross_correlation(&q, &far, &l).unwrap()[(0, 0)], 0.0);
        let q2 = QuerySet::from_points(&[[0.0, 1.0]]).unwrap();
        assert!(cross_correlation(&q2, &o, &l).is_err());
    }

    #[test]
    fn count_examples() {
        let q = QuerySet::from_scalars(&[1.5]).unwrap();
        let pts = vec![[1.5], [1.5], [1.5]];
        assert_eq!(
            count_observations(&pts, &[true, true, true], &q).unwrap(),
            (vec![3], vec![0])
        );
        assert_eq!(
            count_observations(&pts, &[true, false, true], &q).unwrap(),
            (vec![2], vec![1])
        );
        let empty: Vec<[f64; 1]> = vec![];
        assert_eq!(count_observations(&empty, &[], &q).unwrap(), (vec![0], vec![0]));
        let stray = vec![[2.0]];
        assert!(matches!(
            count_observations(&stray, &[true], &q),
            Err(Error::Consistency { row: 0 })
        ));
        // -0.0 and 0.0 are the same attribute value
        let q0 = QuerySet::from_scalars(&[0.0]).unwrap();
        assert_eq!(
            count_observations(&[[-0.0]], &[false], &q0).unwrap(),
            (vec![0], vec![1])
        );
    }

    #[test]
    fn propagate_scalar_example() {
        let obs = QuerySet::from_scalars(&[0.0]).unwrap();
        let q = QuerySet::from_scalars(&[1.0]).unwrap();
        let l = LengthScales::new(vec![2.0]).unwrap();
        let f = propagate_counts(&[1], &[0], &obs, &q, &l, &l, 1e-10).unwrap();
        assert_abs_diff_eq!(f.a_post[0], (-0.25f64).exp() + 1e-10, epsilon = 1e-15);
        assert_abs_diff_eq!(f.b_post[0], 1e-10, epsilon = 1e-20);
        assert_eq!(f.a_hat, vec![0]);
    }

    #[test]
    fn propagate_limits() {
        let obs = QuerySet::from_scalars(&[0.0, 1.0, 2.5]).unwrap();
        let a = [2, 0, 1];
        let b = [1, 3, 0];
        let tiny = LengthScales::new(vec![1e-5]).unwrap();
        let f = propagate_counts(&a, &b, &obs, &obs, &tiny, &tiny, 1e-10).unwrap();
        for j in 0..3 {
            assert_abs_diff_eq!(f.a_prior_prop[j], 1e-10, epsilon = 1e-12);
            assert_abs_diff_eq!(f.a_post[j], a[j] as f64 + 1e-10, epsilon = 1e-12);
        }
        let huge = LengthScales::new(vec![1e14]).unwrap();
        let f = propagate_counts(&a, &b, &obs, &obs, &huge, &huge, 1e-10).unwrap();
        for j in 0..3 {
            assert_abs_diff_eq!(f.a_prior_prop[j], (3 - a[j]) as f64, epsilon = 1e-9);
            assert_abs_diff_eq!(f.b_prior_prop[j], (4 - b[j]) as f64, epsilon = 1e-9);
        }
    }

    #[test]
    fn propagation_is_linear_in_counts() {
        let obs = QuerySet::from_points(&[[0.0, 1.0], [0.5, -1.0], [2.0, 2.0]]).unwrap();
        let q = QuerySet::from_points(&[[0.1, 0.9], [0.5, -1.0], [3.0, 0.0]]).unwrap();
        let l = LengthScales::new(vec![0.8, 2.5]).unwrap();
        let eps = 0.125;
        let a1 = [1, 0, 2];
        let a2 = [0, 4, 1];
        let sum: Vec<u64> = a1.iter().zip(&a2).map(|(x, y)| x + y).collect();
        let zeros = [0, 0, 0];
        let f1 = propagate_counts(&a1, &zeros, &obs, &q, &l, &l, eps).unwrap();
        let f2 = propagate_counts(&a2, &zeros, &obs, &q, &l, &l, eps).unwrap();
        let f = propagate_counts(&sum, &zeros, &obs, &q, &l, &l, eps).unwrap();
        for j in 0..3 {
            assert_abs_diff_eq!(f.a_post[j], f1.a_post[j] + f2.a_post[j] - eps, epsilon = 1e-12);
        }
    }

    #[test]
    fn conditioning_two_by_two() {
        let prior = LognormalFieldParams::new(
            DVector::from_vec(vec![0.0, 0.0]),
            DVector::from_vec(vec![1.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]),
        )
        .unwrap();
        let post = condition_lognormal_single(&prior, 0, std::f64::consts::E).unwrap();
        assert_abs_diff_eq!(post.lambda[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(post.lambda[1], 0.5, epsilon = 1e-15);
        assert_eq!(post.zeta[0], 0.0);
        assert_abs_diff_eq!(post.covariance()[(1, 1)], 0.75, epsilon = 1e-15);
        assert!(condition_lognormal_single(&prior, 0, 0.0).is_err());
        assert!(condition_lognormal_single(&prior, 2, 1.0).is_err());
    }

    #[test]
    fn conditioning_leaves_uncorrelated_coordinates() {
        let prior = LognormalFieldParams::new(
            DVector::from_vec(vec![0.3, -1.0, 2.0]),
            DVector::from_vec(vec![0.5, 4.0, 1e3]),
            DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.2, 0.0, 0.2, 1.0]),
        )
        .unwrap();
        let post = condition_lognormal_single(&prior, 0, 7.5).unwrap();
        assert_eq!(post.lambda[1], prior.lambda[1]);
        assert_eq!(post.lambda[2], prior.lambda[2]);
        assert_eq!(post.zeta[1], prior.zeta[1]);
        assert_eq!(post.zeta[2], prior.zeta[2]);
        assert_abs_diff_eq!(post.correlation[(1, 2)], 0.2, epsilon = 1e-15);
        // observing exactly the prior log-mean moves nothing
        let post = condition_lognormal_single(&prior, 1, (-1.0f64).exp()).unwrap();
        assert_abs_diff_eq!(post.lambda[2], prior.lambda[2], epsilon = 1e-12);
    }

    #[test]
    fn leave_one_out_matches_propagation() {
        let pts = vec![[0.0], [0.4], [0.4], [3.0]];
        let labels = [true, false, true, true];
        let l = LengthScales::new(vec![0.7]).unwrap();
        let (a, b) = leave_one_out_counts(&pts, &labels, &l, 1e-10).unwrap();
        for i in 0..4 {
            let mut ea = 1e-10;
            let mut eb = 1e-10;
            for j in 0..4 {
                if j != i {
                    let k = kernel_oracle(&pts[i], &pts[j], &[0.7]);
                    if labels[j] {
                        ea += k;
                    } else {
                        eb += k;
                    }
                }
            }
            assert_abs_diff_eq!(a[i], ea, epsilon = 1e-14);
            assert_abs_diff_eq!(b[i], eb, epsilon = 1e-14);
        }
    }

    proptest! {
        #[test]
        fn correlation_entries_in_unit_interval(
            xs in proptest::collection::vec(-20.0f64..20.0, 2..30),
            l in 0.01f64..50.0,
        ) {
            let pts = QuerySet::from_scalars(&xs).unwrap();
            let r = rbf_correlation(&pts, &LengthScales::new(vec![l]).unwrap()).unwrap();
            prop_assert_eq!(&r, &r.transpose());
            for v in r.iter() {
                prop_assert!(*v >= 0.0 && *v <= 1.0);
            }
        }

        #[test]
        fn propagation_permutation_equivariant(
            xs in proptest::collection::vec(-5.0f64..5.0, 3..12),
            seed in 0u64..1000,
        ) {
            let n = xs.len();
            let obs = QuerySet::from_scalars(&xs).unwrap();
            let a: Vec<u64> = (0..n as u64).map(|i| (i * 7 + seed) % 3).collect();
            let b: Vec<u64> = (0..n as u64).map(|i| (i * 5 + seed) % 2).collect();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.rotate_left((seed as usize) % n);
            perm.swap(0, n - 1);
            let q_perm = QuerySet::from_scalars(&perm.iter().map(|&i| xs[i]).collect::<Vec<_>>()).unwrap();
            let l = LengthScales::new(vec![1.3]).unwrap();
            let f = propagate_counts(&a, &b, &obs, &obs, &l, &l, 1e-10).unwrap();
            let g = propagate_counts(&a, &b, &obs, &q_perm, &l, &l, 1e-10).unwrap();
            for (k, &i) in perm.iter().enumerate() {
                // duplicated coordinates share one count bucket, so compare values only
                prop_assert!((g.a_post[k] - f.a_post[i]).abs() < 1e-12);
                prop_assert!((g.b_post[k] - f.b_post[i]).abs() < 1e-12);
            }
        }

        #[test]
        fn small_scale_keeps_knowledge_local(
            xs in proptest::collection::vec(-5.0f64..5.0, 1..10),
        ) {
            let obs = QuerySet::from_scalars(&xs).unwrap();
            let n = obs.len();
            let a: Vec<u64> = (0..n as u64).map(|i| i % 4).collect();
            let b = vec![1u64; n];
            let l = LengthScales::new(vec![1e-300]).unwrap();
            let f = propagate_counts(&a, &b, &obs, &obs, &l, &l, 1e-10).unwrap();
            for j in 0..n {
                prop_assert!(f.a_post[j] - f.a_hat[j] as f64 <= 1e-10 + n as f64 * 1e-12);
                prop_assert!(f.a_post[j] >= f.a_hat[j] as f64 - 1e-12);
            }
        }
    }
}
