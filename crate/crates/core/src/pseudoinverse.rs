//! Moore-Penrose pseudo-inverse of a coefficient matrix and the projectors
//! built from it.
//!
//! For `C` of shape `m x n` with pseudo-inverse `C_P` (`n x m`):
//!
//! * `Pi = C_P C` projects `R^n` orthogonally onto the row space `V = im(C^T)`,
//!   with kernel `N = ker(C)`, so every `xi` splits as `xi_N + xi_V`;
//! * `Q_perp = I_m - C C_P` projects `R^m` onto `im(C)^perp`, so every target
//!   splits as `eta = C xi_eta + eta_perp` with `xi_eta = C_P eta` the
//!   minimum-norm representative.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{ensure_dim, Error, Result};
use crate::report::CheckReport;

/// Everything derived from `C(x)` at a single point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointLinearData {
    #[serde(serialize_with = "ser_matrix")]
    pub c: DMatrix<f64>,
    #[serde(serialize_with = "ser_matrix")]
    pub c_p: DMatrix<f64>,
    pub rank: usize,
    #[serde(serialize_with = "ser_matrix")]
    pub pi: DMatrix<f64>,
    #[serde(serialize_with = "ser_matrix")]
    pub q_perp: DMatrix<f64>,
    /// Singular-value cutoff used for the rank decision.
    pub tol: f64,
    pub singular_values: Vec<f64>,
    /// Set when some singular value is within a factor 10 of the cutoff.
    pub near_rank_transition: bool,
}

/// Row-major nested arrays.
pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    if r == 0 {
        return Err(Error::InvalidParam("matrix must have at least one row".into()));
    }
    let c = rows[0].len();
    if c == 0 {
        return Err(Error::InvalidParam("matrix must have at least one column".into()));
    }
    for row in rows {
        ensure_dim(c, row.len(), "matrix row length")?;
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub(crate) fn ser_matrix<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    matrix_rows(m).serialize(s)
}

fn check_finite(c: &DMatrix<f64>) -> Result<()> {
    if c.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("matrix has non-finite entries".into()))
    }
}

/// Default cutoff `max(m, n) * eps * sigma_max`.
pub fn default_tolerance(m: usize, n: usize, sigma_max: f64) -> f64 {
    m.max(n) as f64 * f64::EPSILON * sigma_max
}

/// Pseudo-inverse by singular value decomposition with the default cutoff.
pub fn pinv(c: &DMatrix<f64>) -> Result<PointLinearData> {
    pinv_with_tol(c, None)
}

/// Pseudo-inverse with an explicit singular-value cutoff (`None` for the default).
pub fn pinv_with_tol(c: &DMatrix<f64>, tol: Option<f64>) -> Result<PointLinearData> {
    check_finite(c)?;
    let (m, n) = c.shape();
    if m == 0 || n == 0 {
        return Err(Error::InvalidParam("matrix must be non-empty".into()));
    }
    if let Some(t) = tol {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidParam(format!("cutoff must be finite and >= 0, got {t}")));
        }
    }
    let svd = Svd::new(c);
    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let tol = tol.unwrap_or_else(|| default_tolerance(m, n, sigma_max));

    let mut c_p = DMatrix::zeros(n, m);
    let mut rank = 0;
    let mut near = false;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > tol {
            rank += 1;
            // C_P += v_k u_k^T / s_k
            c_p += (svd.v.column(k) / s) * svd.u.column(k).transpose();
        }
        if s > 0.0 && tol > 0.0 && s >= tol / 10.0 && s <= tol * 10.0 {
            near = true;
        }
    }
    let pi = &c_p * c;
    let q_perp = DMatrix::identity(m, m) - c * &c_p;
    let singular_values = svd.singular_values;
    Ok(PointLinearData {
        c: c.clone(),
        c_p,
        rank,
        pi,
        q_perp,
        tol,
        singular_values,
        near_rank_transition: near,
    })
}

/// Thin singular value decomposition `C = U diag(s) V^T`, singular values
/// in non-increasing order.
#[derive(Debug, Clone)]
pub struct Svd {
    /// `m x k` with `k = min(m, n)`.
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    /// `n x k`.
    pub v: DMatrix<f64>,
}

impl Svd {
    /// One-sided (Hestenes) Jacobi iteration. Singular vectors paired with
    /// zero singular values may be zero columns.
    pub fn new(c: &DMatrix<f64>) -> Self {
        let (m, n) = c.shape();
        if m < n {
            let t = Svd::new(&c.transpose());
            return Svd {
                u: t.v,
                singular_values: t.singular_values,
                v: t.u,
            };
        }
        let mut w = c.clone();
        let mut v = DMatrix::<f64>::identity(n, n);
        for _sweep in 0..80 {
            let mut rotated = false;
            for p in 0..n {
                for q in p + 1..n {
                    let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                    for i in 0..m {
                        alpha += w[(i, p)] * w[(i, p)];
                        beta += w[(i, q)] * w[(i, q)];
                        gamma += w[(i, p)] * w[(i, q)];
                    }
                    if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let cs = 1.0 / (1.0 + t * t).sqrt();
                    let sn = cs * t;
                    for i in 0..m {
                        let (a, b) = (w[(i, p)], w[(i, q)]);
                        w[(i, p)] = cs * a - sn * b;
                        w[(i, q)] = sn * a + cs * b;
                    }
                    for i in 0..n {
                        let (a, b) = (v[(i, p)], v[(i, q)]);
                        v[(i, p)] = cs * a - sn * b;
                        v[(i, q)] = sn * a + cs * b;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let mut order: Vec<(usize, f64)> = (0..n).map(|j| (j, w.column(j).norm())).collect();
        order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut u = DMatrix::zeros(m, n);
        let mut vs = DMatrix::zeros(n, n);
        let mut singular_values = Vec::with_capacity(n);
        for (k, &(j, s)) in order.iter().enumerate() {
            if s > 0.0 {
                u.set_column(k, &(w.column(j) / s));
            }
            vs.set_column(k, &v.column(j));
            singular_values.push(s);
        }
        Svd {
            u,
            singular_values,
            v: vs,
        }
    }
}

/// `(C^T C + I/h)^{-1} C^T`, which tends to `C_P` as `h -> infinity`.
///
/// Solved by a Cholesky factorization of the (symmetric positive definite)
/// regularized normal matrix, independently of the SVD route in [`pinv`].
pub fn pinv_regularized(c: &DMatrix<f64>, h: f64) -> Result<DMatrix<f64>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParam(format!("h must be positive and finite, got {h}")));
    }
    check_finite(c)?;
    let n = c.ncols();
    let mut a = c.transpose() * c;
    for i in 0..n {
        a[(i, i)] += 1.0 / h;
    }
    let l = cholesky_lower(&a)?;
    let mut rhs = c.transpose();
    for col in 0..rhs.ncols() {
        let mut y = rhs.column(col).clone_owned();
        // L y = b
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[(i, k)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        // L^T z = y
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[(k, i)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        rhs.set_column(col, &y);
    }
    Ok(rhs)
}

fn cholesky_lower(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 {
            return Err(Error::NonFinite("regularized normal matrix lost definiteness".into()));
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

impl PointLinearData {
    pub fn m(&self) -> usize {
        self.c.nrows()
    }

    pub fn n(&self) -> usize {
        self.c.ncols()
    }

    /// `xi = xi_N + xi_V` with `xi_V = Pi xi` in the row space and `C xi_N = 0`.
    pub fn decompose_source(&self, xi: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        ensure_dim(self.n(), xi.len(), "source vector")?;
        let xi = DVector::from_column_slice(xi);
        let xi_v = &self.pi * &xi;
        let xi_n = &xi - &xi_v;
        Ok((xi_n.as_slice().to_vec(), xi_v.as_slice().to_vec()))
    }

    /// `eta = C xi_eta + eta_perp` with `xi_eta = C_P eta`.
    pub fn decompose_target(&self, eta: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        ensure_dim(self.m(), eta.len(), "target vector")?;
        let eta = DVector::from_column_slice(eta);
        let xi_eta = &self.c_p * &eta;
        let eta_perp = &eta - &self.c * &xi_eta;
        Ok((xi_eta.as_slice().to_vec(), eta_perp.as_slice().to_vec()))
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Residuals of the four Penrose identities for a candidate `W` of `C`.
///
/// Each residual is the max-entry norm of the defect divided by
/// `1 + |reference|_max`; the check passes when all four are `<= tol`.
pub fn verify_penrose(c: &DMatrix<f64>, w: &DMatrix<f64>, tol: f64) -> Result<CheckReport> {
    let (m, n) = c.shape();
    if w.shape() != (n, m) {
        return Err(Error::InvalidParam(format!(
            "candidate has shape {:?}, expected ({n}, {m})",
            w.shape()
        )));
    }
    let cw = c * w;
    let wc = w * c;
    let entries = [
        ("wcw_eq_w", max_abs(&(&wc * w - w)) / (1.0 + max_abs(w))),
        ("cwc_eq_c", max_abs(&(&cw * c - c)) / (1.0 + max_abs(c))),
        ("wc_symmetric", max_abs(&(wc.transpose() - &wc)) / (1.0 + max_abs(&wc))),
        ("cw_symmetric", max_abs(&(cw.transpose() - &cw)) / (1.0 + max_abs(&cw))),
    ];
    let mut report = CheckReport::new("penrose", 0);
    report.samples = 1;
    for (name, r) in entries {
        report.residuals.insert(name.to_owned(), r);
        report.max_residual = report.max_residual.max(r);
        if !(r <= tol) {
            report.pass = false;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> DMatrix<f64> {
        matrix_from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        max_abs(&(a - b))
    }

    #[test]
    fn duplicate_row_pinv() {
        let c = mat(&[&[1.0, 0.0], &[1.0, 0.0]]);
        let pl = pinv(&c).unwrap();
        assert!(max_diff(&pl.c_p, &mat(&[&[0.5, 0.5], &[0.0, 0.0]])) <= 1e-12);
        assert_eq!(pl.rank, 1);
        assert!(max_diff(&pl.pi, &mat(&[&[1.0, 0.0], &[0.0, 0.0]])) <= 1e-12);
        assert!(max_diff(&pl.q_perp, &mat(&[&[0.5, -0.5], &[-0.5, 0.5]])) <= 1e-12);
    }

    #[test]
    fn identity_and_heisenberg_origin() {
        let pl = pinv(&DMatrix::identity(3, 3)).unwrap();
        assert!(max_diff(&pl.c_p, &DMatrix::identity(3, 3)) <= 1e-15);
        assert_eq!(pl.rank, 3);

        let c = mat(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        let pl = pinv(&c).unwrap();
        let want = mat(&[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0]]);
        assert!(max_diff(&pl.c_p, &want) <= 1e-15);
        assert!(verify_penrose(&c, &want, 1e-15).unwrap().pass);
        assert_eq!(pl.rank, 2);
    }

    #[test]
    fn zero_matrix() {
        let pl = pinv(&DMatrix::zeros(2, 3)).unwrap();
        assert_eq!(pl.rank, 0);
        assert_eq!(pl.c_p, DMatrix::zeros(3, 2));
        assert_eq!(pl.q_perp, DMatrix::identity(2, 2));
        assert_eq!(pinv_regularized(&DMatrix::zeros(2, 3), 10.0).unwrap(), DMatrix::zeros(3, 2));
    }

    #[test]
    fn non_finite_rejected() {
        let c = mat(&[&[1.0, f64::NAN]]);
        assert!(matches!(pinv(&c), Err(Error::NonFinite(_))));
        assert!(pinv_regularized(&c, 1.0).is_err());
    }

    #[test]
    fn regularized_examples() {
        let c = mat(&[&[1.0, 0.0], &[1.0, 0.0]]);
        let r = pinv_regularized(&c, 1e6).unwrap();
        assert!(max_diff(&r, &mat(&[&[0.5, 0.5], &[0.0, 0.0]])) <= 1e-5);
        for h in [0.5, 1.0, 7.0, 1e4] {
            let r = pinv_regularized(&DMatrix::identity(2, 2), h).unwrap();
            assert!(max_diff(&r, &(DMatrix::identity(2, 2) * (h / (h + 1.0)))) <= 1e-14);
        }
        assert!(pinv_regularized(&c, 0.0).is_err());
        assert!(pinv_regularized(&c, -1.0).is_err());
    }

    #[test]
    fn decompositions() {
        let c = mat(&[&[1.0, 0.0], &[1.0, 0.0]]);
        let pl = pinv(&c).unwrap();
        let (n, v) = pl.decompose_source(&[3.0, 7.0]).unwrap();
        assert!((v[0] - 3.0).abs() < 1e-12 && v[1].abs() < 1e-12);
        assert!(n[0].abs() < 1e-12 && (n[1] - 7.0).abs() < 1e-12);
        assert_eq!(pl.decompose_source(&[0.0, 0.0]).unwrap(), (vec![0.0, 0.0], vec![0.0, 0.0]));

        let (xe, perp) = pl.decompose_target(&[1.0, -1.0]).unwrap();
        assert!(xe.iter().all(|v| v.abs() < 1e-12));
        assert!((perp[0] - 1.0).abs() < 1e-12 && (perp[1] + 1.0).abs() < 1e-12);
        let (xe, perp) = pl.decompose_target(&[1.0, 1.0]).unwrap();
        assert!((xe[0] - 1.0).abs() < 1e-12 && xe[1].abs() < 1e-12);
        assert!(perp.iter().all(|v| v.abs() < 1e-12));

        assert!(pl.decompose_source(&[1.0]).is_err());
        assert!(pl.decompose_target(&[1.0, 2.0, 3.0]).is_err());

        let full = pinv(&mat(&[&[2.0, 1.0], &[-1.0, 3.0]])).unwrap();
        let (n, _) = full.decompose_source(&[5.0, -2.0]).unwrap();
        assert!(n.iter().all(|v| v.abs() < 1e-12));
        let (_, perp) = full.decompose_target(&[5.0, -2.0]).unwrap();
        assert!(perp.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn penrose_examples() {
        let c = mat(&[&[1.0, 0.0], &[1.0, 0.0]]);
        let cp = mat(&[&[0.5, 0.5], &[0.0, 0.0]]);
        assert!(verify_penrose(&c, &cp, 1e-12).unwrap().pass);
        let id = DMatrix::identity(2, 2);
        assert!(verify_penrose(&id, &id, 1e-12).unwrap().pass);

        let bad = verify_penrose(&c, &mat(&[&[1.0, 0.0], &[0.0, 0.0]]), 1e-12).unwrap();
        assert!(!bad.pass);
        assert!(bad.residuals["cw_symmetric"] > 0.1);
        assert_eq!(bad.residuals["cwc_eq_c"], 0.0);
        assert_eq!(bad.residuals["wcw_eq_w"], 0.0);
        assert_eq!(bad.residuals["wc_symmetric"], 0.0);

        assert!(verify_penrose(&c, &DMatrix::zeros(3, 2), 1e-12).is_err());
    }

    #[test]
    fn svd_reconstructs_rank_deficient_products() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..2000 {
            let m = rng.gen_range(1..=6);
            let n = rng.gen_range(1..=6);
            let k = rng.gen_range(1..=m.min(n));
            let a = DMatrix::from_fn(m, k, |_, _| rng.gen_range(-5.0..5.0));
            let b = DMatrix::from_fn(k, n, |_, _| rng.gen_range(-5.0..5.0));
            let c = a * b;
            let svd = Svd::new(&c);
            let rec = &svd.u * DMatrix::from_diagonal(&DVector::from_vec(svd.singular_values.clone())) * svd.v.transpose();
            assert!(max_diff(&rec, &c) <= 1e-12 * (1.0 + max_abs(&c)));
            assert!(svd.singular_values.windows(2).all(|w| w[0] >= w[1]));
            let r = svd.singular_values.iter().filter(|&&s| s > 1e-10).count();
            for basis in [&svd.u, &svd.v] {
                let b = basis.columns(0, r);
                let g = b.transpose() * b;
                assert!(max_diff(&g, &DMatrix::identity(r, r)) <= 1e-12);
            }
        }
    }

    #[test]
    fn custom_cutoff_and_warning() {
        let c = mat(&[&[1.0, 0.0], &[0.0, 1e-9]]);
        assert_eq!(pinv(&c).unwrap().rank, 2);
        let coarse = pinv_with_tol(&c, Some(1e-8)).unwrap();
        assert_eq!(coarse.rank, 1);
        assert!(coarse.near_rank_transition);
        assert!(!pinv(&DMatrix::identity(2, 2)).unwrap().near_rank_transition);
        assert!(pinv_with_tol(&c, Some(-1.0)).is_err());
    }
}
