//! Dense-free linear solvers used across the crate.
//!
//! [`gmres`] is a restarted GMRES for complex operators given as closures,
//! with modified Gram–Schmidt orthogonalization and Givens-rotation updates
//! of the Hessenberg least-squares problem. The periodic cell solver drives
//! it with a spectral operator and a mean-coefficient preconditioner.
//!
//! [`BandedMatrix`] is a real banded LU with partial pivoting for the
//! space–time finite element marches, where each implicit step solves the
//! same narrow band repeatedly.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Tuning knobs for restarted GMRES.
#[derive(Clone, Copy, Debug)]
pub struct GmresConfig {
    /// Relative residual target ‖b − Ax‖ / ‖b‖.
    pub tol: f64,
    /// Krylov dimension per restart cycle.
    pub restart: usize,
    /// Total iteration cap across all cycles.
    pub max_iter: usize,
}

impl Default for GmresConfig {
    fn default() -> Self {
        GmresConfig {
            tol: 1e-12,
            restart: 60,
            max_iter: 2000,
        }
    }
}

/// Convergence report for a GMRES run.
#[derive(Clone, Debug)]
pub struct GmresOutcome {
    /// Solution estimate.
    pub x: Vec<Complex64>,
    /// Relative residual of the returned iterate.
    pub residual: f64,
    /// Iterations spent.
    pub iterations: usize,
    /// Whether the target was met.
    pub converged: bool,
    /// Relative residual after each iteration (for diagnostics on failure).
    pub history: Vec<f64>,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Solve `A x = b` with right-preconditioned restarted GMRES.
///
/// `apply` computes `out = A v`; `precond` computes `out = M⁻¹ v` (use the
/// identity copy for unpreconditioned solves). Starts from `x = 0`.
pub fn gmres(
    apply: &mut dyn FnMut(&[Complex64], &mut [Complex64]),
    precond: &mut dyn FnMut(&[Complex64], &mut [Complex64]),
    b: &[Complex64],
    cfg: &GmresConfig,
) -> GmresOutcome {
    let n = b.len();
    let mut x = vec![Complex64::ZERO; n];
    let b_norm = norm(b);
    let mut history = Vec::new();
    if b_norm == 0.0 {
        return GmresOutcome {
            x,
            residual: 0.0,
            iterations: 0,
            converged: true,
            history,
        };
    }
    let mut scratch = vec![Complex64::ZERO; n];
    let mut precond_out = vec![Complex64::ZERO; n];
    let mut iterations = 0usize;
    let mut residual = f64::INFINITY;

    'cycles: while iterations < cfg.max_iter {
        // r = b − A x
        apply(&x, &mut scratch);
        let mut r: Vec<Complex64> = b
            .iter()
            .zip(&scratch)
            .map(|(bi, ai)| bi - ai)
            .collect();
        let r_norm = norm(&r);
        residual = r_norm / b_norm;
        if residual <= cfg.tol {
            break;
        }
        let inv = Complex64::new(1.0 / r_norm, 0.0);
        for v in &mut r {
            *v *= inv;
        }
        let mut basis: Vec<Vec<Complex64>> = vec![r];
        let m = cfg.restart;
        // Column-major Hessenberg, h[j] holds column j (length j+2).
        let mut h: Vec<Vec<Complex64>> = Vec::with_capacity(m);
        let mut cs: Vec<Complex64> = Vec::with_capacity(m);
        let mut sn: Vec<Complex64> = Vec::with_capacity(m);
        let mut g = vec![Complex64::ZERO; m + 1];
        g[0] = Complex64::new(r_norm, 0.0);

        for j in 0..m {
            if iterations >= cfg.max_iter {
                break;
            }
            iterations += 1;
            precond(&basis[j], &mut precond_out);
            apply(&precond_out, &mut scratch);
            let mut column = vec![Complex64::ZERO; j + 2];
            let mut w = scratch.clone();
            for (i, vi) in basis.iter().enumerate() {
                let hij = dot(vi, &w);
                column[i] = hij;
                for (wk, vk) in w.iter_mut().zip(vi) {
                    *wk -= hij * vk;
                }
            }
            let w_norm = norm(&w);
            column[j + 1] = Complex64::new(w_norm, 0.0);
            // Apply accumulated rotations to the new column.
            for i in 0..j {
                let t = cs[i].conj() * column[i] + sn[i].conj() * column[i + 1];
                column[i + 1] = -sn[i] * column[i] + cs[i] * column[i + 1];
                column[i] = t;
            }
            // New rotation zeroing the subdiagonal.
            let (c_rot, s_rot) = givens(column[j], column[j + 1]);
            let t = c_rot.conj() * column[j] + s_rot.conj() * column[j + 1];
            column[j] = t;
            column[j + 1] = Complex64::ZERO;
            cs.push(c_rot);
            sn.push(s_rot);
            let gt = c_rot.conj() * g[j] + s_rot.conj() * g[j + 1];
            g[j + 1] = -s_rot * g[j] + c_rot * g[j + 1];
            g[j] = gt;
            h.push(column);
            residual = g[j + 1].norm() / b_norm;
            history.push(residual);

            let happy = w_norm < 1e-14 * b_norm;
            if residual <= cfg.tol || happy || j + 1 == m || iterations >= cfg.max_iter {
                // Back-substitute y from the triangular system, update x.
                let cols = j + 1;
                let mut y = vec![Complex64::ZERO; cols];
                for row in (0..cols).rev() {
                    let mut acc = g[row];
                    for col in row + 1..cols {
                        acc -= h[col][row] * y[col];
                    }
                    y[row] = acc / h[row][row];
                }
                let mut update = vec![Complex64::ZERO; n];
                for (col, yi) in y.iter().enumerate() {
                    for (uk, vk) in update.iter_mut().zip(&basis[col]) {
                        *uk += yi * vk;
                    }
                }
                precond(&update, &mut precond_out);
                for (xi, ui) in x.iter_mut().zip(&precond_out) {
                    *xi += ui;
                }
                if residual <= cfg.tol || happy || iterations >= cfg.max_iter {
                    // Recompute the true residual on exit.
                    apply(&x, &mut scratch);
                    let true_res = b
                        .iter()
                        .zip(&scratch)
                        .map(|(bi, ai)| (bi - ai).norm_sqr())
                        .sum::<f64>()
                        .sqrt()
                        / b_norm;
                    residual = true_res;
                    if residual <= cfg.tol || iterations >= cfg.max_iter {
                        break 'cycles;
                    }
                }
                continue 'cycles;
            }
            let inv = Complex64::new(1.0 / w_norm, 0.0);
            for wk in &mut w {
                *wk *= inv;
            }
            basis.push(w);
        }
    }

    GmresOutcome {
        converged: residual <= cfg.tol,
        x,
        residual,
        iterations,
        history,
    }
}

/// Complex Givens rotation `(c, s)` with `c ∈ ℝ₊` and `|c|² + |s|² = 1`.
///
/// Applied as `x' = c̄x + s̄y`, `y' = −sx + cy`, it zeroes `y` in `[a; b]`.
fn givens(a: Complex64, b: Complex64) -> (Complex64, Complex64) {
    let an = a.norm();
    let bn = b.norm();
    if bn == 0.0 {
        return (Complex64::new(1.0, 0.0), Complex64::ZERO);
    }
    if an == 0.0 {
        return (Complex64::ZERO, b / bn);
    }
    let r = an.hypot(bn);
    let c = Complex64::new(an / r, 0.0);
    let s = (a.conj() / an) * (b / r);
    (c, s)
}

/// Real banded matrix in LAPACK-style band storage with partial-pivot LU.
///
/// Stores `kl` subdiagonals and `ku` superdiagonals of an `n×n` matrix; the
/// factorization needs `kl` extra superdiagonals of fill.
#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row-major band storage: `ab[row][col]` holds entry `(row, col)` with
    /// `col` a global column index; `row` ranges over `2kl+ku+1` band rows.
    data: Vec<f64>,
    width: usize,
    factored: bool,
    pivots: Vec<usize>,
}

impl BandedMatrix {
    /// Zero matrix with the given bandwidths.
    pub fn zeros(n: usize, kl: usize, ku: usize) -> BandedMatrix {
        let width = 2 * kl + ku + 1;
        BandedMatrix {
            n,
            kl,
            ku,
            data: vec![0.0; width * n],
            width,
            factored: false,
            pivots: vec![0; n],
        }
    }

    /// Matrix order.
    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, row: usize, col: usize) -> Option<usize> {
        let (r, c) = (row as i64, col as i64);
        let band = r - c + (self.kl + self.ku) as i64;
        if band < 0 || band >= self.width as i64 || col >= self.n || row >= self.n {
            return None;
        }
        Some(band as usize * self.n + col)
    }

    /// Read an entry (zero outside the band).
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.slot(row, col).map_or(0.0, |s| self.data[s])
    }

    /// Add into an entry; panics outside the stored band.
    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        assert!(!self.factored, "matrix already factored");
        let (r, c) = (row as i64, col as i64);
        assert!(
            c - r <= self.ku as i64 && r - c <= self.kl as i64,
            "entry ({row},{col}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let s = self.slot(row, col).unwrap();
        self.data[s] += value;
    }

    /// Dense matrix–vector product `y = A x` (pre-factorization only).
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert!(!self.factored, "matvec requires unfactored matrix");
        let mut y = vec![0.0; self.n];
        for row in 0..self.n {
            let lo = row.saturating_sub(self.kl);
            let hi = (row + self.ku).min(self.n - 1);
            let mut acc = 0.0;
            for col in lo..=hi {
                acc += self.get(row, col) * x[col];
            }
            y[row] = acc;
        }
        y
    }

    /// LU-factor in place with partial pivoting.
    pub fn factor(&mut self) -> Result<()> {
        assert!(!self.factored, "matrix already factored");
        let n = self.n;
        let kl = self.kl;
        let ku = self.ku;
        for k in 0..n {
            // Pivot search within the subdiagonal band of column k.
            let last = (k + kl).min(n - 1);
            let mut piv = k;
            let mut piv_val = self.get(k, k).abs();
            for row in k + 1..=last {
                let v = self.get(row, k).abs();
                if v > piv_val {
                    piv = row;
                    piv_val = v;
                }
            }
            if piv_val == 0.0 {
                return Err(Error::SingularSystem(format!(
                    "banded LU pivot vanished at column {k} of {n}"
                )));
            }
            self.pivots[k] = piv;
            if piv != k {
                // Swap rows k and piv across their shared column range.
                let hi = (k + kl + ku).min(n - 1);
                for col in k..=hi {
                    let a = self.get(k, col);
                    let b = self.get(piv, col);
                    if let Some(s) = self.slot(k, col) {
                        self.data[s] = b;
                    }
                    if let Some(s) = self.slot(piv, col) {
                        self.data[s] = a;
                    }
                }
            }
            let diag = self.get(k, k);
            for row in k + 1..=last {
                let factor = self.get(row, k) / diag;
                if factor != 0.0 {
                    let s = self.slot(row, k).unwrap();
                    self.data[s] = factor;
                    let hi = (k + kl + ku).min(n - 1);
                    for col in k + 1..=hi {
                        let contrib = factor * self.get(k, col);
                        if contrib != 0.0 {
                            let s = self.slot(row, col).expect("fill within widened band");
                            self.data[s] -= contrib;
                        }
                    }
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Solve `A x = rhs` after [`BandedMatrix::factor`]; `rhs` is overwritten
    /// with the solution.
    pub fn solve(&self, rhs: &mut [f64]) {
        assert!(self.factored, "call factor() before solve()");
        let n = self.n;
        // Forward substitution with pivoting.
        for k in 0..n {
            let piv = self.pivots[k];
            if piv != k {
                rhs.swap(k, piv);
            }
            let last = (k + self.kl).min(n - 1);
            let xk = rhs[k];
            if xk != 0.0 {
                for row in k + 1..=last {
                    rhs[row] -= self.get(row, k) * xk;
                }
            }
        }
        // Back substitution.
        for k in (0..n).rev() {
            let hi = (k + self.kl + self.ku).min(n - 1);
            let mut acc = rhs[k];
            for col in k + 1..=hi {
                acc -= self.get(k, col) * rhs[col];
            }
            rhs[k] = acc / self.get(k, k);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn gmres_solves_small_dense_system() {
        // 4×4 complex system applied densely.
        let a = [
            [Complex64::new(4.0, 0.0), Complex64::new(1.0, 0.5), Complex64::ZERO, Complex64::ZERO],
            [Complex64::new(1.0, -0.5), Complex64::new(5.0, 0.0), Complex64::new(0.5, 0.0), Complex64::ZERO],
            [Complex64::ZERO, Complex64::new(0.5, 0.0), Complex64::new(3.0, 1.0), Complex64::new(0.2, -0.1)],
            [Complex64::ZERO, Complex64::ZERO, Complex64::new(0.2, 0.1), Complex64::new(6.0, -1.0)],
        ];
        let x_true = [
            Complex64::new(1.0, 1.0),
            Complex64::new(-2.0, 0.5),
            Complex64::new(0.0, -1.0),
            Complex64::new(3.0, 0.0),
        ];
        let mut b = vec![Complex64::ZERO; 4];
        for i in 0..4 {
            for j in 0..4 {
                b[i] += a[i][j] * x_true[j];
            }
        }
        let mut apply = |v: &[Complex64], out: &mut [Complex64]| {
            for i in 0..4 {
                out[i] = (0..4).map(|j| a[i][j] * v[j]).sum();
            }
        };
        let mut ident = |v: &[Complex64], out: &mut [Complex64]| out.copy_from_slice(v);
        let cfg = GmresConfig { tol: 1e-13, restart: 4, max_iter: 50 };
        let out = gmres(&mut apply, &mut ident, &b, &cfg);
        assert!(out.converged, "residual {}", out.residual);
        for (xi, ti) in out.x.iter().zip(&x_true) {
            assert!((xi - ti).norm() < 1e-10);
        }
    }

    #[test]
    fn gmres_restart_matches_direct_on_shifted_laplacian() {
        // 1-D periodic shifted Laplacian: diagonally dominant, restart < n.
        let n = 64;
        let mut apply = |v: &[Complex64], out: &mut [Complex64]| {
            for i in 0..n {
                let left = v[(i + n - 1) % n];
                let right = v[(i + 1) % n];
                out[i] = Complex64::new(2.5, 0.3) * v[i] - left - right;
            }
        };
        let mut ident = |v: &[Complex64], out: &mut [Complex64]| out.copy_from_slice(v);
        let mut rng = StdRng::seed_from_u64(7);
        let b: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let cfg = GmresConfig { tol: 1e-12, restart: 12, max_iter: 4000 };
        let out = gmres(&mut apply, &mut ident, &b, &cfg);
        assert!(out.converged, "residual {} after {} iters", out.residual, out.iterations);
        // Verify the residual claim independently.
        let mut ax = vec![Complex64::ZERO; n];
        apply(&out.x, &mut ax);
        let res: f64 = b.iter().zip(&ax).map(|(bi, ai)| (bi - ai).norm_sqr()).sum::<f64>().sqrt();
        let bn: f64 = b.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        assert!(res / bn <= 1e-11);
    }

    #[test]
    fn gmres_zero_rhs_returns_zero() {
        let mut apply = |v: &[Complex64], out: &mut [Complex64]| out.copy_from_slice(v);
        let mut ident = |v: &[Complex64], out: &mut [Complex64]| out.copy_from_slice(v);
        let b = vec![Complex64::ZERO; 5];
        let out = gmres(&mut apply, &mut ident, &b, &GmresConfig::default());
        assert!(out.converged);
        assert!(out.x.iter().all(|c| *c == Complex64::ZERO));
    }

    #[test]
    fn banded_lu_matches_matvec() {
        let n = 40;
        let (kl, ku) = (3, 2);
        let mut rng = StdRng::seed_from_u64(11);
        let mut a = BandedMatrix::zeros(n, kl, ku);
        for row in 0..n {
            for col in row.saturating_sub(kl)..=(row + ku).min(n - 1) {
                a.add(row, col, rng.gen_range(-1.0..1.0));
            }
            // Diagonal dominance keeps the test system comfortably regular.
            a.add(row, row, 8.0);
        }
        let x_true: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b = a.matvec(&x_true);
        let mut fac = a.clone();
        fac.factor().unwrap();
        let mut x = b;
        fac.solve(&mut x);
        for (xi, ti) in x.iter().zip(&x_true) {
            assert!((xi - ti).abs() < 1e-10, "{xi} vs {ti}");
        }
    }

    #[test]
    fn banded_lu_pivots_on_weak_diagonal() {
        // Zero diagonal forces pivoting: [[0,1],[1,0]] swaps rows.
        let mut a = BandedMatrix::zeros(2, 1, 1);
        a.add(0, 1, 1.0);
        a.add(1, 0, 1.0);
        let mut fac = a.clone();
        fac.factor().unwrap();
        let mut rhs = vec![3.0, -4.0];
        fac.solve(&mut rhs);
        assert!((rhs[0] + 4.0).abs() < 1e-14);
        assert!((rhs[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn banded_lu_reports_singular() {
        let mut a = BandedMatrix::zeros(3, 1, 1);
        // Column of zeros → singular.
        a.add(0, 0, 1.0);
        a.add(2, 2, 1.0);
        let err = a.factor().unwrap_err();
        assert!(matches!(err, Error::SingularSystem(_)));
    }
}
