//! Covariance operators, eigendecompositions, projections, and the
//! generalized eigenproblem.
//!
//! All operators live in basis coordinates as symmetric `p×p` matrices.
//! Two covariance constructions are provided:
//!
//! - [`sample_cov`], the normalized contemporaneous operator
//!   `Ĉ = T⁻¹ Σ_t Z_t ⊗ Z_t`;
//! - [`bartlett_lrcov`], the Bartlett-kernel long-run operator
//!   `Λ̂ = Σ_{|s|<h} (1 − |s|/h) Ĉ_s` built from *unnormalized* lag sums
//!   `Ĉ_s = Σ_t Z_{t−s} ⊗ Z_t` (no `1/T`). Downstream inference uses only
//!   eigenvalue ratios of `Λ̂`, so the normalization convention is harmless,
//!   but it is fixed here once and recorded on the returned operator.
//!
//! Eigenvectors carry a deterministic sign: the entry of largest magnitude
//! (first such index on ties) is made positive, so decompositions are
//! reproducible across runs and platforms.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::series::FunctionalSeries;

/// Which covariance construction produced an operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CovKind {
    Contemporaneous,
    LongRun,
}

/// A symmetric operator in basis coordinates with its provenance.
#[derive(Clone, Debug)]
pub struct CovarianceOperator {
    matrix: DMatrix<f64>,
    kind: CovKind,
    t_len: usize,
    bandwidth: Option<usize>,
}

impl CovarianceOperator {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn kind(&self) -> CovKind {
        self.kind
    }

    /// Sample size `T` behind the operator.
    pub fn t_len(&self) -> usize {
        self.t_len
    }

    /// Bartlett bandwidth `h` for long-run operators, `None` otherwise.
    pub fn bandwidth(&self) -> Option<usize> {
        self.bandwidth
    }

    /// Human-readable normalization note for reports.
    pub fn convention(&self) -> &'static str {
        match self.kind {
            CovKind::Contemporaneous => "C_hat = T^-1 sum_t Z_t (x) Z_t",
            CovKind::LongRun => {
                "Lambda_hat = sum_{|s|<h} (1-|s|/h) C_s with unnormalized C_s = sum_t Z_{t-s} (x) Z_t"
            }
        }
    }
}

/// Contemporaneous sample covariance `T⁻¹ Σ_t Z_t ⊗ Z_t`, optionally after
/// centering the series.
pub fn sample_cov(series: &FunctionalSeries, centered: bool) -> CovarianceOperator {
    let centered_series;
    let x = if centered {
        centered_series = series.center();
        centered_series.coeffs()
    } else {
        series.coeffs()
    };
    let t_len = x.nrows();
    let mut matrix = x.transpose() * x / t_len as f64;
    symmetrize(&mut matrix);
    CovarianceOperator {
        matrix,
        kind: CovKind::Contemporaneous,
        t_len,
        bandwidth: None,
    }
}

/// Bartlett long-run covariance of a (pre-centered) series.
///
/// `Λ̂ = Ĉ_0 + Σ_{s=1}^{h−1} (1 − s/h)(Ĉ_s + Ĉ_sᵀ)` with unnormalized
/// `Ĉ_s = Σ_{t=s+1}^{T} Z_{t−s} ⊗ Z_t`; negative lags enter through the
/// transpose (`Ĉ_{−s} = Ĉ_sᵀ`), both sums running over the valid index
/// range. With `h = 1` the result is exactly `Ĉ_0`.
pub fn bartlett_lrcov(series: &FunctionalSeries, h: usize) -> Result<CovarianceOperator> {
    if h < 1 {
        return Err(Error::invalid("h", "Bartlett bandwidth must be at least 1"));
    }
    let x = series.coeffs();
    let t_len = x.nrows();
    let mut matrix = x.transpose() * x;
    let max_lag = (h - 1).min(t_len - 1);
    for s in 1..=max_lag {
        let weight = 1.0 - s as f64 / h as f64;
        // C_s = (rows 1..T−s)ᵀ (rows s+1..T) in 1-based series terms.
        let head = x.rows(0, t_len - s);
        let tail = x.rows(s, t_len - s);
        let c_s = head.transpose() * tail;
        matrix += weight * (&c_s + c_s.transpose());
    }
    symmetrize(&mut matrix);
    Ok(CovarianceOperator {
        matrix,
        kind: CovKind::LongRun,
        t_len,
        bandwidth: Some(h),
    })
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let p = m.nrows();
    for i in 0..p {
        for j in i + 1..p {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Full spectrum of a symmetric operator, eigenvalues descending.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    values: DVector<f64>,
    vectors: DMatrix<f64>,
}

impl EigenSystem {
    /// Descending eigenvalues `μ̂_1 ≥ … ≥ μ̂_p`.
    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    /// Orthonormal eigenvectors, column `j` paired with `values[j]`.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// The leading `k` eigenvectors as a `p×k` frame.
    pub fn leading(&self, k: usize) -> DMatrix<f64> {
        self.vectors.columns(0, k).clone_owned()
    }
}

/// Eigendecomposition of a covariance operator.
pub fn eigen(op: &CovarianceOperator) -> Result<EigenSystem> {
    eigen_sym_matrix(&op.matrix)
}

/// Eigendecomposition of an explicitly symmetric matrix (asymmetry beyond
/// `1e-8` relative is rejected), eigenvalues descending, signs fixed.
pub fn eigen_sym_matrix(m: &DMatrix<f64>) -> Result<EigenSystem> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            context: "eigen_sym_matrix",
            expected: m.nrows(),
            actual: m.ncols(),
        });
    }
    let scale = m.amax().max(1e-300);
    let asym = (m - m.transpose()).amax();
    if asym > 1e-8 * scale {
        return Err(Error::invalid("matrix", format!("not symmetric: max asymmetry {asym:.3e}")));
    }
    let p = m.nrows();
    let se = m.clone().symmetric_eigen();
    // Sort descending and fix signs.
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| se.eigenvalues[b].partial_cmp(&se.eigenvalues[a]).unwrap());
    let mut values = DVector::zeros(p);
    let mut vectors = DMatrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = se.eigenvalues[src];
        vectors.column_mut(dst).copy_from(&se.eigenvectors.column(src));
    }
    fix_signs(&mut vectors);
    Ok(EigenSystem { values, vectors })
}

/// Make the largest-magnitude entry of each column positive (first index on
/// ties), for reproducible eigenvector output.
pub(crate) fn fix_signs(vectors: &mut DMatrix<f64>) {
    for mut col in vectors.column_iter_mut() {
        let mut best = 0;
        let mut best_abs = col[0].abs();
        for (i, &v) in col.iter().enumerate().skip(1) {
            if v.abs() > best_abs {
                best = i;
                best_abs = v.abs();
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// An orthogonal projection stored with an explicit orthonormal frame of its
/// range (the frame is what the generalized eigenproblem compresses onto).
#[derive(Clone, Debug)]
pub struct Projection {
    matrix: DMatrix<f64>,
    frame: DMatrix<f64>,
    rank: usize,
}

impl Projection {
    /// Projection onto the span of orthonormal columns `frame` (`p×k`).
    pub fn from_frame(frame: DMatrix<f64>) -> Result<Self> {
        let k = frame.ncols();
        let gram = frame.transpose() * &frame;
        let mut worst = 0.0f64;
        for i in 0..k {
            for j in 0..k {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        if worst > 1e-8 {
            return Err(Error::invalid("frame", format!("columns not orthonormal: error {worst:.3e}")));
        }
        let matrix = &frame * frame.transpose();
        Ok(Projection { matrix, frame, rank: k })
    }

    /// Projection onto the column span of an arbitrary full-rank matrix,
    /// orthonormalizing by QR first.
    pub fn from_span(span: &DMatrix<f64>) -> Result<Self> {
        let k = span.ncols();
        let qr = span.clone().qr();
        let q = qr.q();
        let r = qr.r();
        let scale = r.amax().max(1e-300);
        for j in 0..k {
            if r[(j, j)].abs() < 1e-10 * scale {
                return Err(Error::numerical(
                    "Projection::from_span",
                    format!("span is rank-deficient (R[{j},{j}] ≈ 0)"),
                ));
            }
        }
        Projection::from_frame(q.columns(0, k).clone_owned())
    }

    /// Zero projection of rank 0 in dimension `p`.
    pub fn zero(p: usize) -> Self {
        Projection {
            matrix: DMatrix::zeros(p, p),
            frame: DMatrix::zeros(p, 0),
            rank: 0,
        }
    }

    /// Identity projection (rank `p`).
    pub fn identity(p: usize) -> Self {
        Projection {
            matrix: DMatrix::identity(p, p),
            frame: DMatrix::identity(p, p),
            rank: p,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Orthonormal `p×rank` frame spanning the range.
    pub fn frame(&self) -> &DMatrix<f64> {
        &self.frame
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Orthogonal complement `I − P`.
    pub fn complement(&self) -> Projection {
        let p = self.dim();
        let comp = DMatrix::identity(p, p) - &self.matrix;
        let eig = eigen_sym_matrix(&comp).expect("I - P is symmetric");
        let k = p - self.rank;
        Projection::from_frame(eig.leading(k)).expect("eigenvectors are orthonormal")
    }

    /// Apply the projection to every observation of a series.
    pub fn apply(&self, series: &FunctionalSeries) -> FunctionalSeries {
        let coeffs = series.coeffs() * &self.matrix;
        FunctionalSeries::from_valid(coeffs, *series.basis(), series.label().to_string())
    }
}

/// Solve the generalized eigenproblem `ν B w = A w` restricted to a subspace.
///
/// The pencil is compressed onto the subspace's orthonormal frame `F`:
/// `A_K = FᵀAF`, `B_K = FᵀBF`; `B_K` must be positive definite (smallest
/// eigenvalue above `1e-12` of the largest, else a singular-pencil error).
/// Returns eigenvalues ascending with full-space vectors `w_j = F·L⁻ᵀy_j`
/// (B-orthonormal, signs fixed).
pub fn gen_eigen(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    subspace: &Projection,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let p = a.nrows();
    if b.nrows() != p || a.ncols() != p || b.ncols() != p || subspace.dim() != p {
        return Err(Error::DimensionMismatch {
            context: "gen_eigen",
            expected: p,
            actual: b.nrows().max(subspace.dim()),
        });
    }
    let k = subspace.rank();
    if k == 0 {
        return Err(Error::invalid("subspace", "cannot solve a pencil on a rank-0 subspace"));
    }
    let f = subspace.frame();
    let mut a_k = f.transpose() * a * f;
    let mut b_k = f.transpose() * b * f;
    symmetrize(&mut a_k);
    symmetrize(&mut b_k);

    let b_eigs = eigen_sym_matrix(&b_k)?;
    let b_max = b_eigs.values()[0];
    let b_min = b_eigs.values()[k - 1];
    if !(b_max > 0.0) || b_min <= 1e-12 * b_max {
        return Err(Error::numerical(
            "gen_eigen",
            format!("restricted B is numerically singular (λ_min/λ_max = {:.3e})", b_min / b_max),
        ));
    }
    let chol = b_k.clone().cholesky().ok_or_else(|| {
        Error::numerical("gen_eigen", "Cholesky of restricted B failed despite positive spectrum")
    })?;
    // C = L⁻¹ A_K L⁻ᵀ shares the pencil's eigenvalues.
    let l = chol.l();
    let linv_a = l
        .clone()
        .solve_lower_triangular(&a_k)
        .ok_or_else(|| Error::numerical("gen_eigen", "forward substitution failed"))?;
    let mut c = l
        .clone()
        .solve_lower_triangular(&linv_a.transpose())
        .ok_or_else(|| Error::numerical("gen_eigen", "forward substitution failed"))?;
    symmetrize(&mut c);
    let eig = eigen_sym_matrix(&c)?;

    // eigen_sym_matrix sorts descending; the pencil contract is ascending.
    let mut values = DVector::zeros(k);
    let mut y = DMatrix::zeros(k, k);
    for j in 0..k {
        values[j] = eig.values()[k - 1 - j];
        y.column_mut(j).copy_from(&eig.vectors().column(k - 1 - j));
    }
    let w_sub = l
        .transpose()
        .solve_upper_triangular(&y)
        .ok_or_else(|| Error::numerical("gen_eigen", "back substitution failed"))?;
    let mut w = f * w_sub;
    fix_signs(&mut w);
    Ok((values, w))
}
