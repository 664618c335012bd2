//! Conditional-mean and centering operators, their singular value
//! decomposition, and closed-form variance-reduction predictions.
//!
//! For a normalized measure `P` with positive marginals, the conditional
//! mean operators `mu_X` and `mu_Y` map a test function to its conditional
//! expectation given one coordinate. Restricted between the two marginal
//! function spaces they are adjoint under the weighted inner products, so
//! they share a singular system `(s_j, alpha_j, beta_j)` with `s_1 = 1` and
//! the constant functions as leading pair. The decay of `s_j` governs how
//! fast alternating centering shrinks the variance of a test function, which
//! is exactly the first-order MSE of the balanced estimator.

use crate::balancing::Axis;
use crate::measure::{JointMeasure, TestFunction};
use crate::{Error, Real, Result};
use ndarray::Array2;

/// Singular values `s_1 >= s_2 >= ...` with bases of the two marginal
/// function spaces.
///
/// `alpha` is `m x r` (column `j` is the function `alpha_j` on `X`), `beta`
/// is `l x r`, with `r = min(m, l)`. Columns are orthonormal under the
/// marginal-weighted inner products.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition<T> {
    singular_values: Vec<T>,
    alpha: Array2<T>,
    beta: Array2<T>,
    p_x: Vec<T>,
    p_y: Vec<T>,
}

impl<T: Real> SpectralDecomposition<T> {
    pub fn singular_values(&self) -> &[T] {
        &self.singular_values
    }

    /// `m x r` matrix of left singular functions on `X`.
    pub fn alpha(&self) -> &Array2<T> {
        &self.alpha
    }

    /// `l x r` matrix of right singular functions on `Y`.
    pub fn beta(&self) -> &Array2<T> {
        &self.beta
    }

    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// The contraction rate `s_2`, or zero for rank-one spaces.
    pub fn spectral_gap_rate(&self) -> T {
        self.singular_values.get(1).copied().unwrap_or(T::zero())
    }

    pub fn marginal_x(&self) -> &[T] {
        &self.p_x
    }

    pub fn marginal_y(&self) -> &[T] {
        &self.p_y
    }
}

/// Coordinates of the centered conditional means on the singular bases:
/// `mu_X h_bar = sum u_j alpha_j`, `mu_Y h_bar = sum v_j beta_j`.
#[derive(Debug, Clone)]
pub struct FunctionCoordinates<T> {
    pub u: Vec<T>,
    pub v: Vec<T>,
}

fn marginal_or_zero_error<T: Real>(p: &JointMeasure<T>, axis: Axis) -> Result<Vec<T>> {
    let marginal = p.marginal(axis);
    for (i, &w) in marginal.iter().enumerate() {
        if w <= T::zero() {
            return Err(Error::ZeroMarginal { axis, index: i });
        }
    }
    Ok(marginal)
}

/// `[mu_X h](x) = E[h(X, Y) | X = x]`: row-wise conditional means.
pub fn conditional_mean_x<T: Real>(p: &JointMeasure<T>, h: &TestFunction<T>) -> Result<Vec<T>> {
    check_shapes(p, h)?;
    let p_x = marginal_or_zero_error(p, Axis::X)?;
    let (m, l) = p.shape();
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let mut acc = T::zero();
        for j in 0..l {
            acc += h.values()[(i, j)] * p.weights()[(i, j)];
        }
        out.push(acc / p_x[i]);
    }
    Ok(out)
}

/// `[mu_Y h](y) = E[h(X, Y) | Y = y]`: column-wise conditional means.
pub fn conditional_mean_y<T: Real>(p: &JointMeasure<T>, h: &TestFunction<T>) -> Result<Vec<T>> {
    check_shapes(p, h)?;
    let p_y = marginal_or_zero_error(p, Axis::Y)?;
    let (m, l) = p.shape();
    let mut out = Vec::with_capacity(l);
    for j in 0..l {
        let mut acc = T::zero();
        for i in 0..m {
            acc += h.values()[(i, j)] * p.weights()[(i, j)];
        }
        out.push(acc / p_y[j]);
    }
    Ok(out)
}

fn check_shapes<T: Real>(p: &JointMeasure<T>, h: &TestFunction<T>) -> Result<()> {
    if p.shape() != h.shape() {
        return Err(Error::ShapeMismatch {
            expected: p.shape(),
            got: h.shape(),
        });
    }
    Ok(())
}

/// The centering operator `C_X = I - mu_X`: subtracts the conditional mean
/// given `X` from every row.
pub fn center_x<T: Real>(p: &JointMeasure<T>, h: &TestFunction<T>) -> Result<TestFunction<T>> {
    let mu = conditional_mean_x(p, h)?;
    let values = Array2::from_shape_fn(h.shape(), |(i, j)| h.values()[(i, j)] - mu[i]);
    TestFunction::new(values)
}

/// The centering operator `C_Y = I - mu_Y`.
pub fn center_y<T: Real>(p: &JointMeasure<T>, h: &TestFunction<T>) -> Result<TestFunction<T>> {
    let mu = conditional_mean_y(p, h)?;
    let values = Array2::from_shape_fn(h.shape(), |(i, j)| h.values()[(i, j)] - mu[j]);
    TestFunction::new(values)
}

pub fn center<T: Real>(
    p: &JointMeasure<T>,
    h: &TestFunction<T>,
    axis: Axis,
) -> Result<TestFunction<T>> {
    match axis {
        Axis::X => center_x(p, h),
        Axis::Y => center_y(p, h),
    }
}

// One-sided Jacobi SVD of a tall matrix (rows >= cols), in place on `b`.
// Returns sweeps used; columns of `b` end up orthogonal, `v` accumulates the
// right rotations.
fn jacobi_orthogonalize<T: Real>(b: &mut Array2<T>, v: &mut Array2<T>) {
    let (_, l) = b.dim();
    let tol = T::epsilon() * T::of(4.0);
    for _sweep in 0..64 {
        let mut rotated = false;
        for p in 0..l {
            for q in (p + 1)..l {
                let mut app = T::zero();
                let mut aqq = T::zero();
                let mut apq = T::zero();
                for i in 0..b.nrows() {
                    let bp = b[(i, p)];
                    let bq = b[(i, q)];
                    app += bp * bp;
                    aqq += bq * bq;
                    apq += bp * bq;
                }
                if apq.abs() <= tol * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (aqq - app) / (T::of(2.0) * apq);
                let t = {
                    let sign = if zeta >= T::zero() { T::one() } else { -T::one() };
                    sign / (zeta.abs() + (T::one() + zeta * zeta).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for i in 0..b.nrows() {
                    let bp = b[(i, p)];
                    let bq = b[(i, q)];
                    b[(i, p)] = c * bp - s * bq;
                    b[(i, q)] = s * bp + c * bq;
                }
                for i in 0..v.nrows() {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
}

// Thin SVD `a = u diag(sigma) v^T` with `u: m x r`, `v: l x r`,
// `r = min(m, l)`, singular values sorted descending. Columns of `u` for
// (numerically) zero singular values are completed to an orthonormal set.
fn svd_thin<T: Real>(a: &Array2<T>) -> (Array2<T>, Vec<T>, Array2<T>) {
    let (m, l) = a.dim();
    if m < l {
        let at = a.t().to_owned();
        let (u, sigma, v) = svd_thin(&at);
        return (v, sigma, u);
    }
    let mut b = a.clone();
    let mut v = Array2::from_shape_fn((l, l), |(i, j)| {
        if i == j {
            T::one()
        } else {
            T::zero()
        }
    });
    jacobi_orthogonalize(&mut b, &mut v);

    let mut order: Vec<usize> = (0..l).collect();
    let norms: Vec<T> = (0..l)
        .map(|j| {
            (0..m)
                .map(|i| b[(i, j)] * b[(i, j)])
                .fold(T::zero(), |acc, x| acc + x)
                .sqrt()
        })
        .collect();
    order.sort_by(|&a_idx, &b_idx| {
        norms[b_idx]
            .partial_cmp(&norms[a_idx])
            .expect("singular values are finite")
    });

    let mut sigma = Vec::with_capacity(l);
    let mut u = Array2::from_elem((m, l), T::zero());
    let mut v_sorted = Array2::from_elem((l, l), T::zero());
    let cutoff = norms[order[0]].max(T::epsilon()) * T::epsilon() * T::of(64.0);
    let mut zero_cols = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        sigma.push(norms[src]);
        for i in 0..l {
            v_sorted[(i, dst)] = v[(i, src)];
        }
        if norms[src] > cutoff {
            for i in 0..m {
                u[(i, dst)] = b[(i, src)] / norms[src];
            }
        } else {
            zero_cols.push(dst);
        }
    }
    // complete the left basis on the null space by Gram-Schmidt from
    // canonical vectors
    for &col in &zero_cols {
        let mut filled = false;
        for cand in 0..m {
            let mut w = vec![T::zero(); m];
            w[cand] = T::one();
            for j in 0..l {
                if zero_cols.contains(&j) && j >= col {
                    continue;
                }
                let dot: T = (0..m).map(|i| w[i] * u[(i, j)]).sum();
                for (i, wi) in w.iter_mut().enumerate() {
                    *wi -= dot * u[(i, j)];
                }
            }
            let norm: T = (0..m).map(|i| w[i] * w[i]).sum::<T>().sqrt();
            if norm > T::of(1e-3) {
                for i in 0..m {
                    u[(i, col)] = w[i] / norm;
                }
                filled = true;
                break;
            }
        }
        debug_assert!(filled, "null-space completion found a basis vector");
    }
    (u, sigma, v_sorted)
}

// Re-orthonormalize (in place) a set of near-null columns against all
// earlier columns, falling back to canonical directions when a column
// collapses.
fn fix_null_columns<T: Real>(mat: &mut Array2<T>, cols: &[usize]) {
    let rows = mat.nrows();
    for &col in cols {
        let mut candidates: Vec<Vec<T>> = Vec::with_capacity(rows + 1);
        candidates.push((0..rows).map(|i| mat[(i, col)]).collect());
        for c in 0..rows {
            let mut e = vec![T::zero(); rows];
            e[c] = T::one();
            candidates.push(e);
        }
        let mut placed = false;
        for mut w in candidates {
            for j in 0..col {
                let dot: T = (0..rows).map(|i| w[i] * mat[(i, j)]).sum();
                for (i, wi) in w.iter_mut().enumerate() {
                    *wi -= dot * mat[(i, j)];
                }
            }
            let norm = (0..rows).map(|i| w[i] * w[i]).sum::<T>().sqrt();
            if norm > T::of(1e-3) {
                for i in 0..rows {
                    mat[(i, col)] = w[i] / norm;
                }
                placed = true;
                break;
            }
        }
        debug_assert!(placed, "null-space completion exhausted candidates");
    }
}

/// Decompose the conditional-mean operators of a normalized measure with
/// strictly positive marginals.
///
/// Forms `A[i][j] = P(i, j) / sqrt(P_X(i) P_Y(j))`, whose leading singular
/// triple is exactly `(sqrt(P_X), 1, sqrt(P_Y))`. That triple is deflated
/// out, the remainder is decomposed by one-sided Jacobi, and the singular
/// vectors are de-weighted: `alpha_j = U_j / sqrt(P_X)`,
/// `beta_j = V_j / sqrt(P_Y)`. The leading pair is therefore the all-ones
/// functions exactly, even when further singular values tie with 1; every
/// later `alpha_j` has its largest-magnitude entry pinned positive.
pub fn decompose<T: Real>(p: &JointMeasure<T>) -> Result<SpectralDecomposition<T>> {
    if !p.is_normalized() {
        return Err(Error::NotNormalized {
            mass: p.total_mass().as_f64(),
        });
    }
    let p_x = marginal_or_zero_error(p, Axis::X)?;
    let p_y = marginal_or_zero_error(p, Axis::Y)?;
    let (m, l) = p.shape();
    let r = m.min(l);
    let sqrt_px: Vec<T> = p_x.iter().map(|&w| w.sqrt()).collect();
    let sqrt_py: Vec<T> = p_y.iter().map(|&w| w.sqrt()).collect();
    let deflated = Array2::from_shape_fn((m, l), |(i, j)| {
        p.weights()[(i, j)] / (sqrt_px[i] * sqrt_py[j]) - sqrt_px[i] * sqrt_py[j]
    });

    let mut u = Array2::from_elem((m, r), T::zero());
    let mut v = Array2::from_elem((l, r), T::zero());
    let mut sigma = vec![T::one()];
    for i in 0..m {
        u[(i, 0)] = sqrt_px[i];
    }
    for i in 0..l {
        v[(i, 0)] = sqrt_py[i];
    }
    if r > 1 {
        // the deflated matrix has rank at most r - 1; its smallest singular
        // value is the removed leading direction
        let (ud, sd, vd) = svd_thin(&deflated);
        for j in 0..r - 1 {
            sigma.push(sd[j].min(T::one()));
            for i in 0..m {
                u[(i, j + 1)] = ud[(i, j)];
            }
            for i in 0..l {
                v[(i, j + 1)] = vd[(i, j)];
            }
        }
        let cutoff = T::epsilon() * T::of(64.0);
        // scrub the rounding-level leading-direction component out of the
        // deflated singular vectors, then rebuild any null columns
        for j in 1..r {
            if sigma[j] <= cutoff {
                continue;
            }
            for (mat, lead, rows) in [(&mut u, &sqrt_px, m), (&mut v, &sqrt_py, l)] {
                let dot: T = (0..rows).map(|i| mat[(i, j)] * lead[i]).sum();
                let mut norm = T::zero();
                for i in 0..rows {
                    mat[(i, j)] -= dot * lead[i];
                    norm += mat[(i, j)] * mat[(i, j)];
                }
                let norm = norm.sqrt();
                for i in 0..rows {
                    mat[(i, j)] /= norm;
                }
            }
        }
        let null_cols: Vec<usize> = (1..r).filter(|&j| sigma[j] <= cutoff).collect();
        fix_null_columns(&mut u, &null_cols);
        fix_null_columns(&mut v, &null_cols);
    }

    let mut alpha = Array2::from_shape_fn((m, r), |(i, j)| u[(i, j)] / p_x[i].sqrt());
    let mut beta = Array2::from_shape_fn((l, r), |(i, j)| v[(i, j)] / p_y[i].sqrt());

    for j in 0..r {
        let flip = if j == 0 {
            // pin the leading pair to the positive constant
            let dot: T = (0..m).map(|i| alpha[(i, 0)] * p_x[i]).sum();
            dot < T::zero()
        } else {
            let mut best = 0usize;
            let mut best_mag = T::zero();
            for i in 0..m {
                let mag = alpha[(i, j)].abs();
                if mag > best_mag {
                    best_mag = mag;
                    best = i;
                }
            }
            alpha[(best, j)] < T::zero()
        };
        if flip {
            for i in 0..m {
                alpha[(i, j)] = -alpha[(i, j)];
            }
            for i in 0..l {
                beta[(i, j)] = -beta[(i, j)];
            }
        }
    }

    Ok(SpectralDecomposition {
        singular_values: sigma,
        alpha,
        beta,
        p_x,
        p_y,
    })
}

/// Coordinates of `h` on the singular bases after centering:
/// `u_j = <mu_X h_bar, alpha_j>` under `P_X`, `v_j` likewise under `P_Y`.
pub fn coordinates<T: Real>(
    p: &JointMeasure<T>,
    h: &TestFunction<T>,
    decomp: &SpectralDecomposition<T>,
) -> Result<FunctionCoordinates<T>> {
    check_shapes(p, h)?;
    let mean = p.expectation(h)?;
    let centered = TestFunction::new(h.values().mapv(|x| x - mean))?;
    let mu_x = conditional_mean_x(p, &centered)?;
    let mu_y = conditional_mean_y(p, &centered)?;
    let r = decomp.rank();
    let (m, l) = p.shape();
    let mut u = Vec::with_capacity(r);
    let mut v = Vec::with_capacity(r);
    for j in 0..r {
        let mut uj = T::zero();
        for i in 0..m {
            uj += mu_x[i] * decomp.alpha()[(i, j)] * decomp.marginal_x()[i];
        }
        u.push(uj);
        let mut vj = T::zero();
        for i in 0..l {
            vj += mu_y[i] * decomp.beta()[(i, j)] * decomp.marginal_y()[i];
        }
        v.push(vj);
    }
    Ok(FunctionCoordinates { u, v })
}

/// `sigma_k^2`: variance of the k-fold alternately-centered test function,
/// by literal operator application.
///
/// Step 1 centers on `X`, step 2 on `Y`, and so on; `k = 0` is `Var(h)`.
pub fn sigma_k_direct<T: Real>(p: &JointMeasure<T>, h: &TestFunction<T>, k: usize) -> Result<T> {
    check_shapes(p, h)?;
    let mean = p.expectation(h)?;
    let mut g = TestFunction::new(h.values().mapv(|x| x - mean))?;
    for step in 1..=k {
        let axis = if step % 2 == 1 { Axis::X } else { Axis::Y };
        g = center(p, &g, axis)?;
    }
    // mean-zero after centering, so the variance is the raw second moment
    Ok(p
        .weights()
        .iter()
        .zip(g.values().iter())
        .map(|(&w, &x)| w * x * x)
        .sum())
}

const GAP_TOL: f64 = 1e-9;

// (1 - s^(2(k-1))) / (1 - s^2), with its k-1 limit at s = 1.
fn reduction_factor<T: Real>(s: T, k: usize) -> T {
    if s > T::of(1.0 - GAP_TOL) {
        return T::from_usize(k - 1).unwrap();
    }
    let s2 = s * s;
    (T::one() - s2.powi((k - 1) as i32)) / (T::one() - s2)
}

/// Closed-form variance reduction `sigma_0^2 - sigma_k^2` after `k >= 1`
/// balancing steps:
/// `sum_{j >= 2} [ u_j^2 + (1 - s_j^(2(k-1))) (v_j - s_j u_j)^2 / (1 - s_j^2) ]`.
///
/// Degenerate `s_j = 1` directions force `v_j = u_j`, so their factor enters
/// through its `k - 1` limit; a degenerate direction with a non-vanishing
/// numerator is reported as [`Error::SpectralGapViolation`] rather than
/// silently patched.
pub fn predicted_reduction<T: Real>(
    decomp: &SpectralDecomposition<T>,
    coords: &FunctionCoordinates<T>,
    k: usize,
) -> Result<T> {
    if k == 0 {
        return Ok(T::zero());
    }
    let mut total = T::zero();
    for j in 1..decomp.rank() {
        let s = decomp.singular_values()[j];
        let u = coords.u[j];
        let v = coords.v[j];
        let w = v - s * u;
        if s > T::of(1.0 - GAP_TOL) && w.abs() > T::of(1e-6) {
            return Err(Error::SpectralGapViolation {
                index: j + 1,
                value: s.as_f64(),
            });
        }
        total += u * u + reduction_factor(s, k) * w * w;
    }
    Ok(total)
}

/// The limiting reduction `sigma_gap^2 = sum_{j>=2} [u_j^2 + (v_j - s_j u_j)^2 / (1 - s_j^2)]`.
///
/// Requires a positive spectral gap (`s_j < 1` for `j >= 2`).
pub fn sigma_gap<T: Real>(
    decomp: &SpectralDecomposition<T>,
    coords: &FunctionCoordinates<T>,
) -> Result<T> {
    let mut total = T::zero();
    for j in 1..decomp.rank() {
        let s = decomp.singular_values()[j];
        if s > T::of(1.0 - GAP_TOL) {
            return Err(Error::SpectralGapViolation {
                index: j + 1,
                value: s.as_f64(),
            });
        }
        let u = coords.u[j];
        let w = coords.v[j] - s * u;
        total += u * u + w * w / (T::one() - s * s);
    }
    Ok(total)
}

/// Full variance table for one measure and test function.
#[derive(Debug, Clone)]
pub struct VariancePrediction<T> {
    pub sigma0_sq: T,
    /// `sigma_k^2` for `k = 1..=k_max`.
    pub sigma_k_sq: Vec<T>,
    pub sigma_gap_sq: T,
    pub sigma_limit_sq: T,
}

/// Predict `sigma_k^2` for `k = 0..=k_max` from the spectral decomposition.
pub fn predict_variances<T: Real>(
    p: &JointMeasure<T>,
    h: &TestFunction<T>,
    k_max: usize,
) -> Result<VariancePrediction<T>> {
    let decomp = decompose(p)?;
    let coords = coordinates(p, h, &decomp)?;
    let sigma0 = p.variance(h)?;
    let mut sigma_k = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        sigma_k.push(sigma0 - predicted_reduction(&decomp, &coords, k)?);
    }
    let gap = sigma_gap(&decomp, &coords)?;
    Ok(VariancePrediction {
        sigma0_sq: sigma0,
        sigma_k_sq: sigma_k,
        sigma_gap_sq: gap,
        sigma_limit_sq: sigma0 - gap,
    })
}
