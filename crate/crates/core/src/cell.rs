//! Periodic cell problems on `Y = [−1/2, 1/2)^{d+1}`.
//!
//! For each multi-index `γ` of degree `m` and column `j`, the corrector
//! `χ^γ_j` is the zero-mean periodic solution of
//!
//! ```text
//! ∂_s χ + (−1)^m Σ_{|α|=|β|=m} D^α(A^{αβ} D^β χ) = (−1)^{m+1} Σ_{|α|=m} D^α A^{αγ}_{·j}
//! ```
//!
//! discretized by a full (d+1)-dimensional Fourier–Galerkin method: the
//! temporal derivative is diagonal (`2πi k_s`), the 2m-order spatial term is
//! applied as transform → pointwise multiply on a 2× zero-padded grid →
//! transform back (alias-free for band-limited coefficients). The resulting
//! nonsymmetric system is solved per `(γ, j)` with restarted GMRES,
//! right-preconditioned by the constant-coefficient operator built from the
//! mean tensor (diagonal per Fourier mode). Constants span the kernel of the
//! periodic operator; uniqueness is restored by keeping the zero mode at
//! exactly zero throughout the Krylov iteration.
//!
//! The adjoint flag solves the backward-in-time analogue (`−∂_s` and the
//! transposed tensor), whose solutions pair with the primal correctors in
//! [`corrector_pair_identity`]. The reverse-time flag reflects the
//! coefficient's temporal modes first (`s ↦ −s`), which is what boundary
//! dual problems need once their horizon is an integer number of periods.

use crate::error::{Error, Result};
use crate::fourier::{for_each_mode, Field, TorusGrid};
use crate::linalg::{gmres, GmresConfig, GmresOutcome};
use crate::tensor::{CoefficientField, IndexSet, MultiIndex};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

/// Solver controls for the cell problems.
#[derive(Clone, Copy, Debug)]
pub struct CellConfig {
    /// Relative residual target for each `(γ, j)` system.
    pub tol: f64,
    /// GMRES restart length.
    pub restart: usize,
    /// GMRES total iteration cap per system.
    pub max_iter: usize,
    /// Solve the independent `(γ, j)` systems on the rayon pool. Results are
    /// bitwise identical either way: every system is assembled and reduced
    /// in a fixed sequential order internally; this switch only controls
    /// whether distinct systems run on different threads.
    pub parallel: bool,
}

impl Default for CellConfig {
    fn default() -> Self {
        CellConfig {
            tol: crate::tol::CELL_TOL,
            restart: 80,
            max_iter: 8000,
            parallel: true,
        }
    }
}

/// Solved correctors for every `(γ, j)`: vector-valued periodic fields with
/// exactly zero mean, real up to roundoff, with certified residuals.
#[derive(Clone, Debug)]
pub struct CorrectorSet {
    grid: TorusGrid,
    d: usize,
    m: usize,
    n: usize,
    index_set: IndexSet,
    /// Component fields, laid out `((γ_pos · n + j) · n + ℓ)`.
    components: Vec<Field>,
    adjoint: bool,
    reversed_time: bool,
    /// Worst relative residual across the solved systems (certified by
    /// re-applying the discrete operator after GMRES).
    residual_norm: f64,
}

impl CorrectorSet {
    /// Grid the correctors live on.
    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    /// Spatial dimension.
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Half-order `m`.
    pub fn half_order(&self) -> usize {
        self.m
    }

    /// System size `n`.
    pub fn system_size(&self) -> usize {
        self.n
    }

    /// The degree-`m` multi-index family labelling the correctors.
    pub fn index_set(&self) -> &IndexSet {
        &self.index_set
    }

    /// Whether this set solves the backward-in-time (adjoint) problem.
    pub fn is_adjoint(&self) -> bool {
        self.adjoint
    }

    /// Whether the coefficient's temporal modes were reflected first.
    pub fn is_time_reversed(&self) -> bool {
        self.reversed_time
    }

    /// Worst certified relative residual.
    pub fn residual_norm(&self) -> f64 {
        self.residual_norm
    }

    /// Component `ℓ` of the corrector labelled `(γ_pos, j)` (0-based).
    pub fn component(&self, gamma_pos: usize, j: usize, l: usize) -> &Field {
        &self.components[(gamma_pos * self.n + j) * self.n + l]
    }

    /// All `n` components of the corrector labelled `(γ_pos, j)`.
    pub fn corrector(&self, gamma_pos: usize, j: usize) -> &[Field] {
        let base = (gamma_pos * self.n + j) * self.n;
        &self.components[base..base + self.n]
    }

    /// Save as a binary dump of row-major real node samples (f64 little
    /// endian, components in storage order) plus a JSON sidecar describing
    /// the layout. `prefix.bin` / `prefix.json` are written.
    pub fn save(&self, prefix: &Path) -> Result<()> {
        let mut raw = Vec::with_capacity(self.components.len() * self.grid.len() * 8);
        for field in &self.components {
            for value in field.to_physical() {
                raw.extend_from_slice(&value.re.to_le_bytes());
            }
        }
        std::fs::write(prefix.with_extension("bin"), &raw)?;
        let sidecar = CorrectorSidecar {
            d: self.d,
            m: self.m,
            n: self.n,
            n_space: self.grid.n_space(),
            n_time: self.grid.n_time(),
            ordering: ORDERING.to_string(),
            adjoint: self.adjoint,
            reversed_time: self.reversed_time,
            residual_norm: self.residual_norm,
        };
        let text = serde_json::to_string_pretty(&sidecar)?;
        std::fs::write(prefix.with_extension("json"), text)?;
        Ok(())
    }

    /// Load a set written by [`CorrectorSet::save`].
    pub fn load(prefix: &Path) -> Result<CorrectorSet> {
        let text = std::fs::read_to_string(prefix.with_extension("json"))?;
        let sidecar: CorrectorSidecar = serde_json::from_str(&text)?;
        if sidecar.ordering != ORDERING {
            return Err(Error::parse(format!(
                "unsupported corrector ordering '{}'",
                sidecar.ordering
            )));
        }
        let grid = TorusGrid::new(sidecar.d, sidecar.n_space, sidecar.n_time)?;
        let index_set = crate::tensor::enumerate_multiindices(sidecar.d, sidecar.m)?;
        let count = index_set.len() * sidecar.n * sidecar.n;
        let raw = std::fs::read(prefix.with_extension("bin"))?;
        if raw.len() != count * grid.len() * 8 {
            return Err(Error::parse(format!(
                "corrector dump holds {} bytes, layout needs {}",
                raw.len(),
                count * grid.len() * 8
            )));
        }
        let mut components = Vec::with_capacity(count);
        for c in 0..count {
            let samples: Vec<Complex64> = (0..grid.len())
                .map(|node| {
                    let at = (c * grid.len() + node) * 8;
                    let bytes: [u8; 8] = raw[at..at + 8].try_into().unwrap();
                    Complex64::new(f64::from_le_bytes(bytes), 0.0)
                })
                .collect();
            let mut field = Field::from_physical(grid, samples);
            field.project_zero_mean();
            components.push(field);
        }
        Ok(CorrectorSet {
            grid,
            d: sidecar.d,
            m: sidecar.m,
            n: sidecar.n,
            index_set,
            components,
            adjoint: sidecar.adjoint,
            reversed_time: sidecar.reversed_time,
            residual_norm: sidecar.residual_norm,
        })
    }
}

const ORDERING: &str = "gamma-major, then column j, then component, row-major nodes (temporal axis fastest)";

#[derive(Serialize, Deserialize)]
struct CorrectorSidecar {
    d: usize,
    m: usize,
    n: usize,
    n_space: usize,
    n_time: usize,
    ordering: String,
    adjoint: bool,
    reversed_time: bool,
    residual_norm: f64,
}

/// Right-hand side of the cell problem for label `(γ, j)`: the `n` component
/// fields of `(−1)^{m+1} Σ_{|α|=m} D^α A^{αγ}_{·j}` (zero mean by
/// construction, since every term is a derivative).
pub fn assemble_cell_rhs(
    a: &CoefficientField,
    gamma: &MultiIndex,
    j: usize,
    grid: TorusGrid,
) -> Result<Vec<Field>> {
    if gamma.degree() != a.half_order() || gamma.dim() != a.dim() {
        return Err(Error::invalid(format!(
            "cell RHS label {gamma} must have degree {} in dimension {}",
            a.half_order(),
            a.dim()
        )));
    }
    if j >= a.system_size() {
        return Err(Error::invalid(format!(
            "cell RHS column {j} out of range for system size {}",
            a.system_size()
        )));
    }
    let index_set = a.index_set().clone();
    let gamma_pos = index_set
        .position(gamma)
        .ok_or_else(|| Error::invalid(format!("label {gamma} not in the degree-m family")))?;
    let sign = if a.half_order() % 2 == 0 { -1.0 } else { 1.0 }; // (−1)^{m+1}
    let n = a.system_size();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc = Field::zeros(grid);
        for (a_pos, alpha) in index_set.iter() {
            let modes = a.entry_modes(a_pos, gamma_pos, i, j);
            if modes.is_empty() {
                continue;
            }
            let entry = Field::from_modes(grid, modes)?;
            acc.axpy(Complex64::new(1.0, 0.0), &entry.derivative(&alpha.0, 0));
        }
        for c in &mut acc.coeffs {
            *c *= sign;
        }
        acc.project_zero_mean();
        out.push(acc);
    }
    Ok(out)
}

/// Discrete periodic parabolic operator and its mean-coefficient
/// preconditioner, shared by all `(γ, j)` solves for one coefficient field.
struct CellOperator {
    grid: TorusGrid,
    padded: TorusGrid,
    n: usize,
    index_set: IndexSet,
    /// `+1` forward in time, `−1` for the adjoint problem.
    time_sign: f64,
    /// `(−1)^m` prefactor of the spatial term.
    sign_m: f64,
    /// Real node samples of each tensor entry on the padded grid, laid out
    /// `((a_pos·L + b_pos)·n + i)·n + ℓ`.
    a_phys: Vec<Vec<f64>>,
    /// Per-label derivative symbols `(2πik)^α` on the unpadded grid.
    symbols: Vec<Vec<Complex64>>,
    /// Temporal symbol `2πi k_s` on the unpadded grid.
    time_symbol: Vec<Complex64>,
    /// Inverse preconditioner blocks per mode (`n×n`, zero at the zero mode
    /// and on Nyquist planes).
    inv_precond: Vec<Complex64>,
}

impl CellOperator {
    fn build(a: &CoefficientField, grid: TorusGrid, time_sign: f64) -> Result<CellOperator> {
        let d = a.dim();
        let m = a.half_order();
        let n = a.system_size();
        let index_set = a.index_set().clone();
        let bl = index_set.len();
        // The grid must resolve the coefficient exactly (below Nyquist).
        let bw = a.bandwidth();
        let dims = grid.dims();
        for axis in 0..=d {
            if 2 * bw[axis].unsigned_abs() as usize >= dims[axis] {
                return Err(Error::invalid(format!(
                    "grid {}×{} cannot resolve coefficient bandwidth {:?}",
                    grid.n_space(),
                    grid.n_time(),
                    bw
                )));
            }
        }
        let padded = grid.doubled();
        let pdims = padded.dims();

        // Tensor samples on the padded physical grid.
        let plen = padded.len();
        let mut a_phys = vec![vec![0.0f64; plen]; bl * bl * n * n];
        let mut node = vec![0usize; d + 1];
        let mut y = vec![0.0f64; d];
        for flat in 0..plen {
            let mut rem = flat;
            for axis in (0..=d).rev() {
                node[axis] = rem % pdims[axis];
                rem /= pdims[axis];
            }
            for axis in 0..d {
                y[axis] = node[axis] as f64 / pdims[axis] as f64;
            }
            let s = node[d] as f64 / pdims[d] as f64;
            for a_pos in 0..bl {
                for b_pos in 0..bl {
                    for i in 0..n {
                        for l in 0..n {
                            let v = a.eval_entry(a_pos, b_pos, i, l, &y, s);
                            a_phys[((a_pos * bl + b_pos) * n + i) * n + l][flat] = v;
                        }
                    }
                }
            }
        }

        // Derivative symbols on the unpadded grid (zero on Nyquist planes).
        let len = grid.len();
        let mut symbols = vec![vec![Complex64::ZERO; len]; bl];
        let mut time_symbol = vec![Complex64::ZERO; len];
        for_each_mode(&dims, |flat, freqs| {
            let mut nyquist = false;
            for axis in 0..=d {
                if freqs[axis].unsigned_abs() as usize >= dims[axis] / 2 {
                    nyquist = true;
                }
            }
            if nyquist {
                return;
            }
            time_symbol[flat] = Complex64::new(0.0, 2.0 * PI * freqs[d] as f64);
            for (pos, alpha) in index_set.iter() {
                let mut factor = Complex64::new(1.0, 0.0);
                for axis in 0..d {
                    let ik = Complex64::new(0.0, 2.0 * PI * freqs[axis] as f64);
                    for _ in 0..alpha.0[axis] {
                        factor *= ik;
                    }
                }
                symbols[pos][flat] = factor;
            }
        });

        // Mean tensor → per-mode preconditioner blocks, inverted up front.
        let mut mean = vec![0.0f64; bl * bl * n * n];
        for a_pos in 0..bl {
            for b_pos in 0..bl {
                for i in 0..n {
                    for l in 0..n {
                        let modes = a.entry_modes(a_pos, b_pos, i, l);
                        let zero = modes
                            .iter()
                            .find(|(k, _)| k.iter().all(|&c| c == 0))
                            .map_or(0.0, |(_, c)| c.re);
                        mean[((a_pos * bl + b_pos) * n + i) * n + l] = zero;
                    }
                }
            }
        }
        let twopi_2m = (2.0 * PI).powi(2 * m as i32);
        let mut inv_precond = vec![Complex64::ZERO; len * n * n];
        let mut block = vec![Complex64::ZERO; n * n];
        let mut failure: Option<Error> = None;
        for_each_mode(&dims, |flat, freqs| {
            if failure.is_some() {
                return;
            }
            let mut nyquist = freqs.iter().enumerate().any(|(axis, &k)| {
                k.unsigned_abs() as usize >= dims[axis] / 2
            });
            let is_zero_mode = freqs.iter().all(|&k| k == 0);
            if is_zero_mode {
                nyquist = true; // leave the block zero: projected out
            }
            if nyquist {
                return;
            }
            for slot in block.iter_mut() {
                *slot = Complex64::ZERO;
            }
            let it = Complex64::new(0.0, time_sign * 2.0 * PI * freqs[d] as f64);
            for i in 0..n {
                block[i * n + i] = it;
            }
            for (a_pos, alpha) in index_set.iter() {
                for (b_pos, beta) in index_set.iter() {
                    let mut kpow = 1.0f64;
                    for axis in 0..d {
                        let k = freqs[axis] as f64;
                        for _ in 0..alpha.0[axis] + beta.0[axis] {
                            kpow *= k;
                        }
                    }
                    if kpow == 0.0 {
                        continue;
                    }
                    let w = twopi_2m * kpow;
                    for i in 0..n {
                        for l in 0..n {
                            block[i * n + l] += Complex64::new(
                                w * mean[((a_pos * bl + b_pos) * n + i) * n + l],
                                0.0,
                            );
                        }
                    }
                }
            }
            match invert_small(&block, n) {
                Ok(inv) => {
                    inv_precond[flat * n * n..(flat + 1) * n * n].copy_from_slice(&inv);
                }
                Err(_) => {
                    failure = Some(Error::SingularSystem(format!(
                        "mean-coefficient preconditioner is singular at mode {freqs:?}"
                    )));
                }
            }
        });
        if let Some(err) = failure {
            return Err(err);
        }

        Ok(CellOperator {
            grid,
            padded,
            n,
            index_set,
            time_sign,
            sign_m: if m % 2 == 0 { 1.0 } else { -1.0 },
            a_phys,
            symbols,
            time_symbol,
            inv_precond,
        })
    }

    /// `out = (time_sign·∂_s + (−1)^m Σ D^α A^{αβ} D^β) x`, with the zero
    /// mode of every component projected to exactly zero.
    fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        let len = self.grid.len();
        let plen = self.padded.len();
        let n = self.n;
        let bl = self.index_set.len();
        debug_assert_eq!(x.len(), n * len);

        // Physical padded samples of every D^β x_ℓ.
        let mut dphys = vec![vec![Complex64::ZERO; plen]; bl * n];
        let mut spec = Field::zeros(self.grid);
        for b_pos in 0..bl {
            for l in 0..n {
                for flat in 0..len {
                    spec.coeffs[flat] = self.symbols[b_pos][flat] * x[l * len + flat];
                }
                let padded = spec.pad_to(self.padded).expect("padding own grid");
                dphys[b_pos * n + l] = padded.to_physical();
            }
        }

        out.iter_mut().for_each(|c| *c = Complex64::ZERO);
        let mut acc = vec![Complex64::ZERO; plen];
        for i in 0..n {
            for a_pos in 0..bl {
                acc.iter_mut().for_each(|c| *c = Complex64::ZERO);
                let mut touched = false;
                for b_pos in 0..bl {
                    for l in 0..n {
                        let coeff = &self.a_phys[((a_pos * bl + b_pos) * n + i) * n + l];
                        let d = &dphys[b_pos * n + l];
                        if coeff.iter().all(|&v| v == 0.0) {
                            continue;
                        }
                        touched = true;
                        for (slot, (&c, v)) in acc.iter_mut().zip(coeff.iter().zip(d)) {
                            *slot += c * v;
                        }
                    }
                }
                if !touched {
                    continue;
                }
                let flux = Field::from_physical(self.padded, acc.clone())
                    .truncate_to(self.grid)
                    .expect("truncating to own grid");
                for flat in 0..len {
                    out[i * len + flat] +=
                        self.sign_m * self.symbols[a_pos][flat] * flux.coeffs[flat];
                }
            }
            for flat in 0..len {
                out[i * len + flat] += self.time_sign * self.time_symbol[flat] * x[i * len + flat];
            }
            out[i * len] = Complex64::ZERO;
        }
    }

    /// Diagonal-in-mode preconditioner solve.
    fn precondition(&self, v: &[Complex64], out: &mut [Complex64]) {
        let len = self.grid.len();
        let n = self.n;
        if n == 1 {
            for flat in 0..len {
                out[flat] = self.inv_precond[flat] * v[flat];
            }
            return;
        }
        for flat in 0..len {
            let inv = &self.inv_precond[flat * n * n..(flat + 1) * n * n];
            for i in 0..n {
                let mut acc = Complex64::ZERO;
                for l in 0..n {
                    acc += inv[i * n + l] * v[l * len + flat];
                }
                out[i * len + flat] = acc;
            }
        }
    }
}

/// Invert a small dense complex matrix by Gauss–Jordan with partial pivoting.
fn invert_small(a: &[Complex64], n: usize) -> Result<Vec<Complex64>> {
    let mut work = a.to_vec();
    let mut inv = vec![Complex64::ZERO; n * n];
    for i in 0..n {
        inv[i * n + i] = Complex64::new(1.0, 0.0);
    }
    for col in 0..n {
        let mut piv = col;
        let mut best = work[col * n + col].norm();
        for row in col + 1..n {
            let v = work[row * n + col].norm();
            if v > best {
                piv = row;
                best = v;
            }
        }
        if best == 0.0 {
            return Err(Error::SingularSystem("small dense inverse".into()));
        }
        if piv != col {
            for k in 0..n {
                work.swap(col * n + k, piv * n + k);
                inv.swap(col * n + k, piv * n + k);
            }
        }
        let diag = work[col * n + col];
        for k in 0..n {
            work[col * n + k] /= diag;
            inv[col * n + k] /= diag;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = work[row * n + col];
            if f != Complex64::ZERO {
                for k in 0..n {
                    let w = work[col * n + k];
                    let v = inv[col * n + k];
                    work[row * n + k] -= f * w;
                    inv[row * n + k] -= f * v;
                }
            }
        }
    }
    Ok(inv)
}

/// Solve every `(γ, j)` cell problem for the coefficient `a` on `grid`.
///
/// `adjoint` solves the backward-in-time problem with the transposed tensor
/// (the pairing partner of the primal set); `reverse_time` reflects the
/// coefficient's temporal modes (`s ↦ −s`) before solving, as used by dual
/// problems posed on a reflected horizon. The two flags compose.
pub fn solve_corrector(
    a: &CoefficientField,
    grid: TorusGrid,
    cfg: &CellConfig,
    adjoint: bool,
    reverse_time: bool,
) -> Result<CorrectorSet> {
    if cfg.tol <= 0.0 {
        return Err(Error::invalid("cell solver tolerance must be positive"));
    }
    let mut tensor = a.clone();
    if reverse_time {
        tensor = tensor.reflect_time(0.0);
    }
    if adjoint {
        tensor = tensor.adjoint();
    }
    let time_sign = if adjoint { -1.0 } else { 1.0 };
    let op = CellOperator::build(&tensor, grid, time_sign)?;
    let n = tensor.system_size();
    let index_set = tensor.index_set().clone();
    let labels: Vec<(usize, usize)> = (0..index_set.len())
        .flat_map(|g| (0..n).map(move |j| (g, j)))
        .collect();

    let solve_one = |&(gamma_pos, j): &(usize, usize)| -> Result<(Vec<Field>, f64)> {
        let gamma = index_set.entry(gamma_pos).clone();
        let rhs_fields = assemble_cell_rhs(&tensor, &gamma, j, grid)?;
        let len = grid.len();
        let mut b = vec![Complex64::ZERO; n * len];
        for (l, f) in rhs_fields.iter().enumerate() {
            b[l * len..(l + 1) * len].copy_from_slice(&f.coeffs);
        }
        let gmres_cfg = GmresConfig {
            tol: cfg.tol,
            restart: cfg.restart,
            max_iter: cfg.max_iter,
        };
        let mut apply = |v: &[Complex64], out: &mut [Complex64]| op.apply(v, out);
        let mut precond = |v: &[Complex64], out: &mut [Complex64]| op.precondition(v, out);
        let outcome: GmresOutcome = gmres(&mut apply, &mut precond, &b, &gmres_cfg);
        if !outcome.converged {
            let tail: Vec<String> = outcome
                .history
                .iter()
                .rev()
                .take(6)
                .rev()
                .map(|r| format!("{r:.3e}"))
                .collect();
            return Err(Error::NoConvergence {
                context: format!(
                    "cell problem ({gamma}, column {j}); residual history tail [{}]",
                    tail.join(", ")
                ),
                residual: outcome.residual,
                iterations: outcome.iterations,
                tol: cfg.tol,
            });
        }
        let mut fields = Vec::with_capacity(n);
        for l in 0..n {
            let mut f = Field::zeros(grid);
            f.coeffs.copy_from_slice(&outcome.x[l * len..(l + 1) * len]);
            f.project_zero_mean();
            f.zero_nyquist();
            fields.push(f);
        }
        Ok((fields, outcome.residual))
    };

    let solved: Vec<Result<(Vec<Field>, f64)>> = if cfg.parallel {
        labels.par_iter().map(solve_one).collect()
    } else {
        labels.iter().map(solve_one).collect()
    };

    let mut components = Vec::with_capacity(labels.len() * n);
    let mut residual_norm = 0.0f64;
    for item in solved {
        let (fields, residual) = item?;
        residual_norm = residual_norm.max(residual);
        components.extend(fields);
    }
    Ok(CorrectorSet {
        grid,
        d: tensor.dim(),
        m: tensor.half_order(),
        n,
        index_set,
        components,
        adjoint,
        reversed_time: reverse_time,
        residual_norm,
    })
}

/// Mean of `A^{entry} · g` over the cell, computed exactly from the sparse
/// coefficient modes: `∫ A g = Σ_k Â(k) ĝ(−k)`.
pub fn mean_entry_times(
    a: &CoefficientField,
    a_pos: usize,
    b_pos: usize,
    i: usize,
    j: usize,
    g: &Field,
) -> Complex64 {
    let grid = g.grid();
    let dims = grid.dims();
    let mut acc = Complex64::ZERO;
    for (k, c) in a.entry_modes(a_pos, b_pos, i, j) {
        let mut raw = vec![0usize; dims.len()];
        let mut fits = true;
        for axis in 0..dims.len() {
            match TorusGrid::raw_of(-k[axis], dims[axis]) {
                Some(r) => raw[axis] = r,
                None => {
                    fits = false;
                    break;
                }
            }
        }
        if fits {
            acc += c * g.coeffs[grid.flat(&raw)];
        }
    }
    acc
}

/// Maximum absolute mismatch of the primal/adjoint corrector pairing
///
/// ```text
/// Σ_{η,ℓ} ∫_Y A^{αη}_{iℓ} D^η χ^γ_{ℓj}  =  Σ_{η,ℓ} ∫_Y A^{ηγ}_{ℓj} D^η χ*^α_{ℓi}
/// ```
///
/// over all `(α, i, γ, j)`. Both sides are exact spectral integrals of the
/// discrete solutions, so the mismatch is bounded by the solver residuals.
pub fn corrector_pair_identity(
    chi: &CorrectorSet,
    chi_star: &CorrectorSet,
    a: &CoefficientField,
) -> Result<f64> {
    if chi.grid != chi_star.grid {
        return Err(Error::invalid(
            "pair identity needs both corrector sets on the same grid",
        ));
    }
    if chi.adjoint || !chi_star.adjoint {
        return Err(Error::invalid(
            "pair identity expects (primal, adjoint) corrector sets in that order",
        ));
    }
    let n = a.system_size();
    let index_set = a.index_set();
    let bl = index_set.len();
    let mut worst = 0.0f64;
    for alpha_pos in 0..bl {
        for i in 0..n {
            for gamma_pos in 0..bl {
                for j in 0..n {
                    let mut lhs = Complex64::ZERO;
                    for (eta_pos, eta) in index_set.iter() {
                        for l in 0..n {
                            let d_chi = chi.component(gamma_pos, j, l).derivative(&eta.0, 0);
                            lhs += mean_entry_times(a, alpha_pos, eta_pos, i, l, &d_chi);
                        }
                    }
                    let mut rhs = Complex64::ZERO;
                    for (eta_pos, eta) in index_set.iter() {
                        for l in 0..n {
                            let d_star = chi_star.component(alpha_pos, i, l).derivative(&eta.0, 0);
                            rhs += mean_entry_times(a, eta_pos, gamma_pos, l, j, &d_star);
                        }
                    }
                    worst = worst.max((lhs - rhs).norm());
                }
            }
        }
    }
    Ok(worst)
}
