//! L2-regularized least squares with an unpenalized intercept.
//!
//! Data are centered, so the intercept drops out of the penalized system.
//! When there are at most as many features as rows the `p × p` primal system
//! `(XcᵀXc + λI) w = Xcᵀyc` is solved; otherwise the `n × n` dual
//! `(XcXcᵀ + λI) α = yc`, `w = Xcᵀα`, which is what makes sparse n-gram
//! designs with tens of thousands of columns tractable.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seed;
use crate::text::SparseVec;

/// Regularization strengths searched by default: 10⁻⁴ … 10⁴ by decades.
pub const LAMBDA_GRID: [f64; 9] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3, 1e4];

const INNER_FOLDS: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub enum FeatureMatrix {
    Dense { rows: Vec<Vec<f64>>, n_cols: usize },
    Sparse { rows: Vec<SparseVec>, n_cols: usize },
}

impl FeatureMatrix {
    pub fn dense(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::invalid("dense feature rows differ in length"));
        }
        Ok(FeatureMatrix::Dense { rows, n_cols })
    }

    pub fn sparse(rows: Vec<SparseVec>, n_cols: usize) -> Result<Self> {
        for r in &rows {
            let ordered = r.entries.windows(2).all(|w| w[0].0 < w[1].0);
            if !ordered || r.entries.last().is_some_and(|e| e.0 >= n_cols) {
                return Err(Error::invalid("sparse row indices must increase and stay below n_cols"));
            }
        }
        Ok(FeatureMatrix::Sparse { rows, n_cols })
    }

    pub fn n_rows(&self) -> usize {
        match self {
            FeatureMatrix::Dense { rows, .. } => rows.len(),
            FeatureMatrix::Sparse { rows, .. } => rows.len(),
        }
    }

    pub fn n_cols(&self) -> usize {
        match self {
            FeatureMatrix::Dense { n_cols, .. } | FeatureMatrix::Sparse { n_cols, .. } => *n_cols,
        }
    }

    fn dot_rows(&self, i: usize, j: usize) -> f64 {
        match self {
            FeatureMatrix::Dense { rows, .. } => rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum(),
            FeatureMatrix::Sparse { rows, .. } => rows[i].dot(&rows[j]),
        }
    }

    pub fn row_dot(&self, i: usize, w: &[f64]) -> f64 {
        match self {
            FeatureMatrix::Dense { rows, .. } => rows[i].iter().zip(w).map(|(a, b)| a * b).sum(),
            FeatureMatrix::Sparse { rows, .. } => rows[i].dot_dense(w),
        }
    }

    /// `out += scale · row_i`.
    fn axpy_row(&self, i: usize, scale: f64, out: &mut [f64]) {
        match self {
            FeatureMatrix::Dense { rows, .. } => {
                for (o, x) in out.iter_mut().zip(&rows[i]) {
                    *o += scale * x;
                }
            }
            FeatureMatrix::Sparse { rows, .. } => {
                for &(j, x) in &rows[i].entries {
                    out[j] += scale * x;
                }
            }
        }
    }

    /// Adds `row_i row_iᵀ` to the dense `p × p` matrix `out`.
    fn outer_acc(&self, i: usize, out: &mut [f64]) {
        let p = self.n_cols();
        match self {
            FeatureMatrix::Dense { rows, .. } => {
                let r = &rows[i];
                for (a, &xa) in r.iter().enumerate() {
                    if xa == 0.0 {
                        continue;
                    }
                    for (o, &xb) in out[a * p..(a + 1) * p].iter_mut().zip(r) {
                        *o += xa * xb;
                    }
                }
            }
            FeatureMatrix::Sparse { rows, .. } => {
                let e = &rows[i].entries;
                for &(a, xa) in e {
                    for &(b, xb) in e {
                        out[a * p + b] += xa * xb;
                    }
                }
            }
        }
    }
}

/// Per-target linear model `ŷ_k = x·w_k + b_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct RidgeModel {
    pub weights: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
    /// Regularization strength used for each target.
    pub lambdas: Vec<f64>,
}

impl RidgeModel {
    pub fn n_targets(&self) -> usize {
        self.intercepts.len()
    }

    pub fn predict_row(&self, x: &FeatureMatrix, i: usize) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.intercepts)
            .map(|(w, b)| x.row_dot(i, w) + b)
            .collect()
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Vec<Vec<f64>> {
        (0..x.n_rows()).map(|i| self.predict_row(x, i)).collect()
    }

    /// Fits every target with its own strength picked by inner
    /// cross-validation over `grid`.
    pub fn fit_auto(x: &FeatureMatrix, targets: &[Vec<f64>], grid: &[f64], seed: u64) -> Result<Self> {
        let rows: Vec<usize> = (0..x.n_rows()).collect();
        let lambdas = select_lambdas(x, &rows, targets, grid, seed)?;
        let gram = Gram::maybe(x, rows.len());
        let prepared = Prepared::new(x, &rows, targets, gram.as_ref())?;
        let k = targets.first().map_or(0, Vec::len);
        let mut weights = vec![Vec::new(); k];
        let mut intercepts = vec![0.0; k];
        let mut distinct = lambdas.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        for lam in distinct {
            let (w, b) = prepared.solve(lam)?;
            for t in (0..k).filter(|&t| lambdas[t] == lam) {
                weights[t] = w[t].clone();
                intercepts[t] = b[t];
            }
        }
        Ok(Self {
            weights,
            intercepts,
            lambdas,
        })
    }

    /// Fits every target with the same fixed strength.
    pub fn fit(x: &FeatureMatrix, targets: &[Vec<f64>], lambda: f64) -> Result<Self> {
        let rows: Vec<usize> = (0..x.n_rows()).collect();
        let gram = Gram::maybe(x, rows.len());
        let (weights, intercepts) = Prepared::new(x, &rows, targets, gram.as_ref())?.solve(lambda)?;
        let lambdas = vec![lambda; intercepts.len()];
        Ok(Self {
            weights,
            intercepts,
            lambdas,
        })
    }
}

/// Single-target ridge fit with a fixed `lambda`.
pub fn ridge_fit(x: &FeatureMatrix, y: &[f64], lambda: f64) -> Result<RidgeModel> {
    if y.len() != x.n_rows() {
        return Err(Error::Shape {
            op: "ridge_fit",
            left: vec![x.n_rows(), x.n_cols()],
            right: vec![y.len()],
        });
    }
    let targets: Vec<Vec<f64>> = y.iter().map(|&v| vec![v]).collect();
    RidgeModel::fit(x, &targets, lambda)
}

/// Strength from `grid` with the lowest inner-CV squared error for a single
/// target.
pub fn ridge_select_lambda(x: &FeatureMatrix, y: &[f64], grid: &[f64], seed: u64) -> Result<f64> {
    let targets: Vec<Vec<f64>> = y.iter().map(|&v| vec![v]).collect();
    let rows: Vec<usize> = (0..x.n_rows()).collect();
    Ok(select_lambdas(x, &rows, &targets, grid, seed)?[0])
}

/// Inner 5-fold CV (leave-one-out below five rows) over `rows`, choosing a
/// strength per target by mean squared error; ties go to the smaller value.
pub fn select_lambdas(
    x: &FeatureMatrix,
    rows: &[usize],
    targets: &[Vec<f64>],
    grid: &[f64],
    seed: u64,
) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::invalid("lambda grid is empty"));
    }
    if targets.len() != x.n_rows() {
        return Err(Error::Shape {
            op: "select_lambdas",
            left: vec![x.n_rows()],
            right: vec![targets.len()],
        });
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let k = targets.first().map_or(0, Vec::len);
    if grid.len() == 1 || rows.len() < 2 {
        return Ok(vec![grid[0]; k]);
    }
    let n_folds = if rows.len() < INNER_FOLDS { rows.len() } else { INNER_FOLDS };
    let mut shuffled = rows.to_vec();
    shuffled.shuffle(&mut seed::rng_for(seed, &[0x1a4b_da]));
    let gram = Gram::maybe(x, rows.len());

    let mut sse = vec![vec![0.0; k]; grid.len()];
    for fold in 0..n_folds {
        let (held, train): (Vec<(usize, usize)>, Vec<(usize, usize)>) =
            shuffled.iter().copied().enumerate().partition(|(pos, _)| pos % n_folds == fold);
        let train: Vec<usize> = train.into_iter().map(|(_, r)| r).collect();
        let prepared = Prepared::new(x, &train, targets, gram.as_ref())?;
        for (li, &lam) in grid.iter().enumerate() {
            match prepared.solve(lam) {
                Ok((w, b)) => {
                    for &(_, r) in &held {
                        for t in 0..k {
                            let e = x.row_dot(r, &w[t]) + b[t] - targets[r][t];
                            sse[li][t] += e * e;
                        }
                    }
                }
                Err(Error::Singular(_)) => sse[li].iter_mut().for_each(|s| *s = f64::INFINITY),
                Err(e) => return Err(e),
            }
        }
    }
    Ok((0..k)
        .map(|t| {
            let mut best = 0;
            for li in 1..grid.len() {
                if sse[li][t] < sse[best][t] {
                    best = li;
                }
            }
            grid[best]
        })
        .collect())
}

/// Full `n × n` inner-product matrix, computed once for the dual route.
struct Gram {
    n: usize,
    k: Vec<f64>,
}

impl Gram {
    fn maybe(x: &FeatureMatrix, rows: usize) -> Option<Self> {
        (x.n_cols() > rows).then(|| {
            let n = x.n_rows();
            let mut k = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..=i {
                    let v = x.dot_rows(i, j);
                    k[i * n + j] = v;
                    k[j * n + i] = v;
                }
            }
            Self { n, k }
        })
    }
}

enum System {
    /// `XcᵀXc` and `Xcᵀyc` per target.
    Primal { a: Vec<f64>, rhs: Vec<Vec<f64>> },
    /// `XcXcᵀ` and `yc` per target.
    Dual { kc: Vec<f64>, yc: Vec<Vec<f64>> },
}

/// Centered normal equations for one row subset, reusable across strengths.
struct Prepared<'x> {
    x: &'x FeatureMatrix,
    rows: Vec<usize>,
    mu: Vec<f64>,
    ybar: Vec<f64>,
    system: System,
}

impl<'x> Prepared<'x> {
    fn new(x: &'x FeatureMatrix, rows: &[usize], targets: &[Vec<f64>], gram: Option<&Gram>) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::invalid("ridge fit on zero rows"));
        }
        let p = x.n_cols();
        let k = targets[rows[0]].len();
        let mf = m as f64;
        let mut mu = vec![0.0; p];
        let mut ybar = vec![0.0; k];
        for &r in rows {
            x.axpy_row(r, 1.0 / mf, &mut mu);
            for (y, t) in ybar.iter_mut().zip(&targets[r]) {
                *y += t / mf;
            }
        }
        let system = if p <= m {
            let mut a = vec![0.0; p * p];
            let mut rhs = vec![vec![0.0; p]; k];
            for &r in rows {
                x.outer_acc(r, &mut a);
                for t in 0..k {
                    x.axpy_row(r, targets[r][t], &mut rhs[t]);
                }
            }
            for i in 0..p {
                for j in 0..p {
                    a[i * p + j] -= mf * mu[i] * mu[j];
                }
            }
            for t in 0..k {
                for (v, &mi) in rhs[t].iter_mut().zip(&mu) {
                    *v -= mf * mi * ybar[t];
                }
            }
            System::Primal { a, rhs }
        } else {
            let fresh;
            let gram = match gram {
                Some(g) => g,
                None => {
                    fresh = Gram::maybe(x, 0).expect("p > 0");
                    &fresh
                }
            };
            let g = |i: usize, j: usize| gram.k[rows[i] * gram.n + rows[j]];
            let row_mean: Vec<f64> = (0..m).map(|i| (0..m).map(|j| g(i, j)).sum::<f64>() / mf).collect();
            let grand = row_mean.iter().sum::<f64>() / mf;
            let mut kc = vec![0.0; m * m];
            for i in 0..m {
                for j in 0..m {
                    kc[i * m + j] = g(i, j) - row_mean[i] - row_mean[j] + grand;
                }
            }
            let yc = (0..k)
                .map(|t| rows.iter().map(|&r| targets[r][t] - ybar[t]).collect())
                .collect();
            System::Dual { kc, yc }
        };
        Ok(Self {
            x,
            rows: rows.to_vec(),
            mu,
            ybar,
            system,
        })
    }

    fn solve(&self, lambda: f64) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        if !(lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda must be non-negative, got {lambda}")));
        }
        let weights: Vec<Vec<f64>> = match &self.system {
            System::Primal { a, rhs } => {
                let p = self.mu.len();
                let mut l = a.clone();
                for i in 0..p {
                    l[i * p + i] += lambda;
                }
                cholesky(&mut l, p)?;
                rhs.iter().map(|b| cholesky_solve(&l, p, b)).collect()
            }
            System::Dual { kc, yc } => {
                let m = self.rows.len();
                let mut l = kc.clone();
                for i in 0..m {
                    l[i * m + i] += lambda;
                }
                cholesky(&mut l, m)?;
                yc.iter()
                    .map(|y| {
                        let alpha = cholesky_solve(&l, m, y);
                        let mut w = vec![0.0; self.mu.len()];
                        for (&r, &a) in self.rows.iter().zip(&alpha) {
                            self.x.axpy_row(r, a, &mut w);
                        }
                        let total: f64 = alpha.iter().sum();
                        for (wi, mi) in w.iter_mut().zip(&self.mu) {
                            *wi -= total * mi;
                        }
                        w
                    })
                    .collect()
            }
        };
        let intercepts = weights
            .iter()
            .zip(&self.ybar)
            .map(|(w, yb)| yb - w.iter().zip(&self.mu).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        Ok((weights, intercepts))
    }
}

/// In-place lower Cholesky factor of the symmetric `n × n` matrix `a`.
fn cholesky(a: &mut [f64], n: usize) -> Result<()> {
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > scale * 1e-12) {
            return Err(Error::Singular(format!(
                "normal equations are not positive definite (pivot {j} = {d:e}); use lambda > 0"
            )));
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
        for i in 0..j {
            a[i * n + j] = 0.0;
        }
    }
    Ok(())
}

fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> FeatureMatrix {
        FeatureMatrix::dense(v.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    #[test]
    fn exact_fit_without_penalty() {
        let m = ridge_fit(&col(&[1.0, 2.0]), &[1.0, 2.0], 0.0).unwrap();
        assert!((m.weights[0][0] - 1.0).abs() < 1e-12);
        assert!(m.intercepts[0].abs() < 1e-12);
    }

    #[test]
    fn centered_normal_equations_by_hand() {
        // centered x = [-0.5, 0.5], y = [-0.5, 0.5]: w = 0.5 / (0.5 + 1)
        let m = ridge_fit(&col(&[1.0, 2.0]), &[1.0, 2.0], 1.0).unwrap();
        assert!((m.weights[0][0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((m.intercepts[0] - (1.5 - 1.5 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn singular_without_penalty_is_reported() {
        let x = FeatureMatrix::dense(vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]]).unwrap();
        assert!(matches!(ridge_fit(&x, &[1.0, 2.0, 3.0], 0.0), Err(Error::Singular(_))));
        assert!(ridge_fit(&x, &[1.0, 2.0, 3.0], 1e-3).is_ok());
    }

    #[test]
    fn primal_and_dual_routes_agree() {
        // 4 rows × 6 sparse columns forces the dual route; the dense copy
        // with a duplicated row set forces the primal one on the same data.
        let sparse_rows = vec![
            SparseVec { entries: vec![(0, 1.0), (3, 0.5)] },
            SparseVec { entries: vec![(1, 2.0), (5, -1.0)] },
            SparseVec { entries: vec![(0, -0.3), (2, 1.0), (4, 0.7)] },
            SparseVec { entries: vec![(3, 1.5)] },
        ];
        let y = [0.3, -1.2, 2.0, 0.1];
        let xs = FeatureMatrix::sparse(sparse_rows.clone(), 6).unwrap();
        let dual = ridge_fit(&xs, &y, 0.5).unwrap();

        let dense: Vec<Vec<f64>> = sparse_rows
            .iter()
            .map(|r| {
                let mut v = vec![0.0; 6];
                r.entries.iter().for_each(|&(i, x)| v[i] = x);
                v
            })
            .collect();
        let targets: Vec<Vec<f64>> = y.iter().map(|&v| vec![v]).collect();
        let rows: Vec<usize> = (0..4).collect();
        let xd = FeatureMatrix::dense(dense).unwrap();
        let (w, b) = Prepared::new(&xd, &rows, &targets, None).unwrap().solve(0.5).unwrap();
        // `Prepared` picked the dual route here too; rebuild the primal one
        let primal = {
            let mut a = vec![0.0; 36];
            let mut rhs = vec![0.0; 6];
            let mu: Vec<f64> = (0..6).map(|j| (0..4).map(|i| xd_row(&xd, i)[j]).sum::<f64>() / 4.0).collect();
            let ybar = y.iter().sum::<f64>() / 4.0;
            for i in 0..4 {
                let r = xd_row(&xd, i);
                for a_i in 0..6 {
                    rhs[a_i] += (r[a_i] - mu[a_i]) * (y[i] - ybar);
                    for b_i in 0..6 {
                        a[a_i * 6 + b_i] += (r[a_i] - mu[a_i]) * (r[b_i] - mu[b_i]);
                    }
                }
            }
            for i in 0..6 {
                a[i * 6 + i] += 0.5;
            }
            cholesky(&mut a, 6).unwrap();
            cholesky_solve(&a, 6, &rhs)
        };
        for j in 0..6 {
            assert!((dual.weights[0][j] - primal[j]).abs() < 1e-10);
            assert!((w[0][j] - primal[j]).abs() < 1e-10);
        }
        assert!((dual.intercepts[0] - b[0]).abs() < 1e-10);
    }

    fn xd_row(x: &FeatureMatrix, i: usize) -> Vec<f64> {
        match x {
            FeatureMatrix::Dense { rows, .. } => rows[i].clone(),
            _ => unreachable!(),
        }
    }

    #[test]
    fn single_element_grid_is_forced() {
        let x = col(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let y = [1.0, 3.0, 2.0, 5.0, 4.0, 6.0];
        assert_eq!(ridge_select_lambda(&x, &y, &[7.0], 0).unwrap(), 7.0);
    }

    #[test]
    fn tiny_training_sets_use_leave_one_out() {
        let x = col(&[1.0, 2.0, 3.0]);
        let lam = ridge_select_lambda(&x, &[1.0, 2.0, 3.0], &LAMBDA_GRID, 0).unwrap();
        assert_eq!(lam, 1e-4);
        let x = col(&[1.0]);
        assert_eq!(ridge_select_lambda(&x, &[1.0], &LAMBDA_GRID, 0).unwrap(), 1e-4);
    }

    #[test]
    fn sparse_rows_must_be_ordered() {
        let bad = SparseVec { entries: vec![(2, 1.0), (1, 1.0)] };
        assert!(FeatureMatrix::sparse(vec![bad], 3).is_err());
        let oob = SparseVec { entries: vec![(3, 1.0)] };
        assert!(FeatureMatrix::sparse(vec![oob], 3).is_err());
    }
}
