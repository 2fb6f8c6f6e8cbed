//! Containers for curves and curve-valued time series.
//!
//! A [`FunctionalSeries`] stores `T` curves as a `T×p` matrix of coefficients
//! in an orthonormal [`Basis`]; row `t` holds the coordinates of the curve
//! `Z_t`. Because the basis is orthonormal, the `L²` inner product of two
//! curves is the Euclidean dot product of their coefficient rows, and every
//! downstream operator works directly on the coefficient matrix.

use nalgebra::{DMatrix, DVector};

use crate::basis::Basis;
use crate::error::{Error, Result};

/// A single curve in basis coordinates.
#[derive(Clone, Debug)]
pub struct Curve {
    coeffs: DVector<f64>,
    basis: Basis,
}

impl Curve {
    pub fn new(coeffs: DVector<f64>, basis: Basis) -> Result<Self> {
        if coeffs.len() != basis.size() {
            return Err(Error::DimensionMismatch {
                context: "Curve::new",
                expected: basis.size(),
                actual: coeffs.len(),
            });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("coeffs", "curve coefficients must be finite"));
        }
        Ok(Curve { coeffs, basis })
    }

    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    /// `L²` norm (equals the Euclidean norm of the coefficients).
    pub fn norm(&self) -> f64 {
        self.coeffs.norm()
    }

    /// Evaluate the curve at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        (1..=self.basis.size())
            .map(|j| self.coeffs[j - 1] * self.basis.eval(j, x))
            .sum()
    }
}

/// A functional time series `Z_1, …, Z_T` in basis coordinates.
#[derive(Clone, Debug)]
pub struct FunctionalSeries {
    coeffs: DMatrix<f64>,
    basis: Basis,
    label: String,
}

impl FunctionalSeries {
    /// Wrap a `T×p` coefficient matrix; requires `T ≥ 2`, finite entries and
    /// `p` matching the basis size.
    pub fn new(coeffs: DMatrix<f64>, basis: Basis, label: impl Into<String>) -> Result<Self> {
        if coeffs.nrows() < 2 {
            return Err(Error::invalid("coeffs", "a series needs at least two observations"));
        }
        if coeffs.ncols() != basis.size() {
            return Err(Error::DimensionMismatch {
                context: "FunctionalSeries::new",
                expected: basis.size(),
                actual: coeffs.ncols(),
            });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("coeffs", "coefficients must be finite"));
        }
        Ok(FunctionalSeries {
            coeffs,
            basis,
            label: label.into(),
        })
    }

    /// Internal constructor for outputs of transforms whose inputs were
    /// already validated (permits `T = 1`, e.g. differencing a 2-row series).
    pub(crate) fn from_valid(coeffs: DMatrix<f64>, basis: Basis, label: String) -> Self {
        FunctionalSeries { coeffs, basis, label }
    }

    /// Number of observations `T`.
    pub fn len(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.nrows() == 0
    }

    /// Basis dimension `p`.
    pub fn dim(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Replace the label, keeping data and basis.
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Inner product `⟨Z_s, Z_t⟩` (1-based indices).
    pub fn inner(&self, s: usize, t: usize) -> f64 {
        self.coeffs.row(s - 1).dot(&self.coeffs.row(t - 1))
    }

    /// Score series `⟨Z_t, v⟩` for a fixed direction `v`.
    pub fn scores(&self, v: &DVector<f64>) -> Vec<f64> {
        assert_eq!(v.len(), self.dim(), "direction dimension mismatch");
        (0..self.len())
            .map(|t| self.coeffs.row(t).transpose().dot(v))
            .collect()
    }

    /// Centered series `Z̄_t = Z_t − T^{−1}Σ_s Z_s`.
    pub fn center(&self) -> FunctionalSeries {
        let t = self.len() as f64;
        let mean = self.coeffs.row_sum() / t;
        let mut out = self.coeffs.clone();
        for mut row in out.row_iter_mut() {
            row -= &mean;
        }
        FunctionalSeries::from_valid(out, self.basis, format!("{}:centered", self.label))
    }

    /// Initialized series `Z_t^0 = Z_t − Z_1`: the first observation serves
    /// as the starting value and is dropped, leaving `T − 1` rows.
    pub fn initialize(&self) -> FunctionalSeries {
        let first = self.coeffs.row(0).clone_owned();
        let mut out = DMatrix::zeros(self.len() - 1, self.dim());
        for t in 1..self.len() {
            out.row_mut(t - 1).copy_from(&(self.coeffs.row(t) - &first));
        }
        FunctionalSeries::from_valid(out, self.basis, format!("{}:initialized", self.label))
    }

    /// First differences `ΔZ_t = Z_t − Z_{t−1}`, `T − 1` rows.
    pub fn first_difference(&self) -> FunctionalSeries {
        let mut out = DMatrix::zeros(self.len() - 1, self.dim());
        for t in 1..self.len() {
            out.row_mut(t - 1)
                .copy_from(&(self.coeffs.row(t) - self.coeffs.row(t - 1)));
        }
        FunctionalSeries::from_valid(out, self.basis, format!("{}:diff", self.label))
    }

    /// Curve values on a grid: entry `(t, g)` is `Z_t(x_g)`.
    pub fn reconstruct(&self, grid: &[f64]) -> DMatrix<f64> {
        &self.coeffs * self.basis.eval_matrix(grid).transpose()
    }

    /// Extract observation `t` (1-based) as a [`Curve`].
    pub fn curve(&self, t: usize) -> Curve {
        Curve {
            coeffs: self.coeffs.row(t - 1).transpose(),
            basis: self.basis,
        }
    }
}

/// Least-squares projection of raw curve values onto a basis.
///
/// `raw` holds curve `t` in row `t`, sampled at the `G` grid points; the
/// returned series stores, per curve, the coefficients minimizing the
/// trapezoid-weighted squared error `Σ_g w_g (raw_{tg} − Σ_j c_j φ_j(x_g))²`.
/// Requires `G ≥ p` and a strictly increasing grid inside `[0, 1]`.
pub fn project_curves(
    raw: &DMatrix<f64>,
    grid: &[f64],
    basis: Basis,
    label: impl Into<String>,
) -> Result<FunctionalSeries> {
    let p = basis.size();
    let g_len = grid.len();
    if raw.ncols() != g_len {
        return Err(Error::DimensionMismatch {
            context: "project_curves raw vs grid",
            expected: g_len,
            actual: raw.ncols(),
        });
    }
    if g_len < p {
        return Err(Error::invalid(
            "grid",
            format!("least-squares projection needs at least p={p} grid points, got {g_len}"),
        ));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] < 0.0 || grid[g_len - 1] > 1.0 {
        return Err(Error::invalid("grid", "grid must be strictly increasing within [0, 1]"));
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("raw", "curve values must be finite"));
    }

    let weights = trapezoid_weights(grid);
    let phi = basis.eval_matrix(grid);
    let mut wphi = phi.clone();
    for g in 0..g_len {
        wphi.row_mut(g).scale_mut(weights[g]);
    }
    // Normal equations (ΦᵀWΦ)c = ΦᵀWy, solved once for all curves.
    let gram = phi.transpose() * &wphi;
    let rhs = wphi.transpose() * raw.transpose(); // p×T
    let chol = gram.cholesky().ok_or_else(|| {
        Error::numerical(
            "project_curves",
            "normal equations are singular; grid too coarse for the basis",
        )
    })?;
    let coeffs = chol.solve(&rhs).transpose();
    FunctionalSeries::new(coeffs, basis, label)
}

fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let g_len = grid.len();
    let mut w = vec![0.0; g_len];
    for g in 0..g_len - 1 {
        let h = grid[g + 1] - grid[g];
        w[g] += 0.5 * h;
        w[g + 1] += 0.5 * h;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisKind;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn legendre(p: usize) -> Basis {
        Basis::new(BasisKind::ShiftedLegendre, p).unwrap()
    }

    fn uniform_grid(g: usize) -> Vec<f64> {
        (0..g).map(|i| i as f64 / (g - 1) as f64).collect()
    }

    #[test]
    fn constant_curve_projects_to_first_coordinate() {
        let grid = uniform_grid(51);
        let raw = DMatrix::from_element(3, 51, 2.5);
        let s = project_curves(&raw, &grid, legendre(4), "const").unwrap();
        for t in 0..3 {
            assert_abs_diff_eq!(s.coeffs()[(t, 0)], 2.5, epsilon = 1e-10);
            for j in 1..4 {
                assert_abs_diff_eq!(s.coeffs()[(t, j)], 0.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn second_basis_function_recovered() {
        let grid = uniform_grid(101);
        let vals: Vec<f64> = grid.iter().map(|&x| 3.0f64.sqrt() * (2.0 * x - 1.0)).collect();
        let mut raw = DMatrix::zeros(2, 101);
        for t in 0..2 {
            for (g, &v) in vals.iter().enumerate() {
                raw[(t, g)] = v;
            }
        }
        let s = project_curves(&raw, &grid, legendre(2), "phi2").unwrap();
        assert_abs_diff_eq!(s.coeffs()[(0, 0)], 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(s.coeffs()[(0, 1)], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn projection_round_trip() {
        let mut rng = crate::rng::substream(7, &[0]);
        let basis = legendre(5);
        let grid = uniform_grid(201);
        let coeffs = DMatrix::from_fn(4, 5, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let series = FunctionalSeries::new(coeffs.clone(), basis, "rt").unwrap();
        let raw = series.reconstruct(&grid);
        let back = project_curves(&raw, &grid, basis, "rt2").unwrap();
        for t in 0..4 {
            for j in 0..5 {
                assert_abs_diff_eq!(back.coeffs()[(t, j)], coeffs[(t, j)], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn grid_shorter_than_basis_rejected() {
        let grid = uniform_grid(3);
        let raw = DMatrix::zeros(2, 3);
        assert!(project_curves(&raw, &grid, legendre(4), "bad").is_err());
    }

    #[test]
    fn center_zeroes_column_means() {
        let mut rng = crate::rng::substream(8, &[0]);
        let coeffs = DMatrix::from_fn(9, 3, |_, _| rng.random::<f64>());
        let s = FunctionalSeries::new(coeffs, legendre(3), "c").unwrap();
        let centered = s.center();
        let means = centered.coeffs().row_sum() / 9.0;
        for j in 0..3 {
            assert_abs_diff_eq!(means[j], 0.0, epsilon = 1e-12);
        }
        // Idempotence.
        let twice = centered.center();
        assert_abs_diff_eq!(
            (twice.coeffs() - centered.coeffs()).norm(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn center_of_constant_series_is_zero() {
        let s = FunctionalSeries::new(DMatrix::from_element(5, 2, 3.0), legendre(2), "k").unwrap();
        assert_eq!(s.center().coeffs().amax(), 0.0);
    }

    #[test]
    fn initialize_drops_first_observation() {
        let coeffs = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let s = FunctionalSeries::new(coeffs, legendre(1), "i").unwrap();
        let init = s.initialize();
        assert_eq!(init.len(), 2);
        assert_eq!(init.coeffs()[(0, 0)], 1.0);
        assert_eq!(init.coeffs()[(1, 0)], 2.0);
    }

    #[test]
    fn first_difference_example() {
        let coeffs = DMatrix::from_column_slice(3, 1, &[1.0, 4.0, 9.0]);
        let s = FunctionalSeries::new(coeffs, legendre(1), "d").unwrap();
        let d = s.first_difference();
        assert_eq!(d.len(), 2);
        assert_eq!(d.coeffs()[(0, 0)], 3.0);
        assert_eq!(d.coeffs()[(1, 0)], 5.0);
    }

    #[test]
    fn difference_commutes_with_centering() {
        let mut rng = crate::rng::substream(9, &[0]);
        let coeffs = DMatrix::from_fn(20, 2, |_, _| rng.random::<f64>());
        let s = FunctionalSeries::new(coeffs, legendre(2), "dc").unwrap();
        let a = s.center().first_difference();
        let b = s.first_difference();
        assert!((a.coeffs() - b.coeffs()).amax() < 1e-12);
    }

    #[test]
    fn inner_product_is_row_dot() {
        let coeffs = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, -1.0]);
        let s = FunctionalSeries::new(coeffs, legendre(2), "ip").unwrap();
        assert_abs_diff_eq!(s.inner(1, 2), 1.0, epsilon = 1e-14);
        let v = DVector::from_column_slice(&[1.0, 1.0]);
        assert_eq!(s.scores(&v), vec![3.0, 2.0]);
    }
}
