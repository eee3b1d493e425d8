//! Flux bundle derived from a corrector set.
//!
//! For each column multi-index β the bundle holds:
//! * the **discrepancy rows**: spatial rows `A^{αβ} + Σ_γ A^{αγ} D^γ χ^β − Ā^{αβ}`
//!   (the corrected flux minus its cell average) and a temporal row
//!   `(−1)^m χ^β`, which together are divergence-free in space-time;
//! * the **slice means**: the spatial average of each row per time slice;
//! * periodic **potentials** inverting `Σ_{|γ|=m} D^γ D^γ` spatially per
//!   slice on the mean-free rows;
//! * the antisymmetric **skew table** assembled from potential derivatives,
//!   whose space–time divergence reconstructs the mean-free rows;
//! * the **temporal primitive** of the spatial slice means, anchored at 0.
//!
//! All fields are spectral on the corrector grid; products of the (sparse)
//! coefficient modes with corrector derivatives are accumulated by exact
//! frequency shifts, so no quadrature error enters below the truncation tail.

use crate::cell::CorrectorSet;
use crate::effective::EffectiveTensor;
use crate::error::{Error, Result};
use crate::fourier::{fft_nd, for_each_mode, Field, TorusGrid};
use crate::tensor::{enumerate_multiindices, CoefficientField, IndexSet};
use crate::tol;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

/// Row label of the flux bundle: one of the degree-m spatial multi-indices
/// (by position in the index set) or the distinguished temporal row.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FluxRow {
    /// Spatial row, indexed by position in the degree-m multi-index set.
    Spatial(usize),
    /// The temporal row.
    Time,
}

/// Identity-check summary for a flux bundle; every quantity should be at the
/// rounding floor or bounded by the cell-solver tolerance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FluxReport {
    /// Spatial dimension.
    pub d: usize,
    /// Half-order m of the operator.
    pub m: usize,
    /// System size n.
    pub n: usize,
    /// Spatial nodes per axis.
    pub n_space: usize,
    /// Temporal nodes.
    pub n_time: usize,
    /// Max L²(cell) norm of the space-time divergence of the discrepancy rows.
    pub conservation_residual: f64,
    /// Max L²(cell) residual of the skew-table divergence reconstruction.
    pub divergence_abs_residual: f64,
    /// Same, relative to the largest mean-free row norm.
    pub divergence_rel_residual: f64,
    /// Max |𝔖^{r₁r₂} + 𝔖^{r₂r₁}| over all stored coefficients (0 bitwise).
    pub antisymmetry_defect: f64,
    /// Sup over time of the temporal-row slice means (vanishes structurally).
    pub slice_mean_time_row_sup: f64,
    /// Max |cell average| of the discrepancy rows.
    pub row_mean_sup: f64,
    /// Max |temporal mean| of the spatial slice means (periodicity
    /// obstruction of the primitive).
    pub primitive_obstruction: f64,
    /// Max |primitive at s = 0| (gauge anchor).
    pub primitive_gauge_defect: f64,
    /// Relative defect of re-applying the potential operator to the
    /// potentials.
    pub potential_roundtrip_defect: f64,
}

/// Flux bundle: discrepancy rows, slice means, potentials, skew table, and
/// temporal primitive for one coefficient field / corrector set pair.
pub struct FluxSet {
    grid: TorusGrid,
    d: usize,
    m: usize,
    n: usize,
    index_set: IndexSet,
    /// Rows, slot `((row·L + b)·n + i)·n + j` with `row == L` the temporal row.
    rows: Vec<Field>,
    /// Temporal spectra of the per-slice spatial means, same slot layout.
    slice_means: Vec<Vec<Complex64>>,
    /// Potentials, same slot layout as `rows`.
    potentials: Vec<Field>,
    /// Skew table, slot `(((r₁·(L+1) + r₂)·L + b)·n + i)·n + j`.
    skew: Vec<Field>,
    /// Temporal spectra of the slice-mean primitives, spatial pairs only:
    /// slot `((a·L + b)·n + i)·n + j`.
    primitives: Vec<Vec<Complex64>>,
}

impl FluxSet {
    /// Assemble the full bundle from a coefficient field, its forward
    /// corrector set, and the matching effective tensor. Fails if shapes
    /// disagree, if the corrector set was solved for the adjoint equation, or
    /// if the structural gates (vanishing row means, space–time conservation)
    /// detect that the three inputs do not describe the same problem.
    pub fn build(
        a: &CoefficientField,
        chi: &CorrectorSet,
        abar: &EffectiveTensor,
    ) -> Result<FluxSet> {
        if a.dim() != chi.dim() || a.half_order() != chi.half_order() || a.system_size() != chi.system_size() {
            return Err(Error::invalid(format!(
                "coefficient field (d={}, m={}, n={}) and corrector set (d={}, m={}, n={}) disagree",
                a.dim(), a.half_order(), a.system_size(),
                chi.dim(), chi.half_order(), chi.system_size(),
            )));
        }
        if a.dim() != abar.dim() || a.half_order() != abar.half_order() || a.system_size() != abar.system_size() {
            return Err(Error::invalid(
                "effective tensor shape does not match the coefficient field".to_string(),
            ));
        }
        if chi.is_adjoint() {
            return Err(Error::invalid(
                "flux assembly expects a forward corrector set; for the adjoint pipeline \
                 pass the adjoint coefficient tensor together with its forward correctors"
                    .to_string(),
            ));
        }
        let grid = chi.grid();
        let dims = grid.dims();
        for (ax, &b) in a.bandwidth().iter().enumerate() {
            if 2 * b >= dims[ax] as i64 {
                return Err(Error::invalid(format!(
                    "coefficient bandwidth {} on axis {} does not fit the {}-node grid",
                    b, ax, dims[ax]
                )));
            }
        }

        let d = a.dim();
        let m = a.half_order();
        let n = a.system_size();
        let index_set = enumerate_multiindices(d, m)?;
        let spatial = index_set.len();
        let slots = (spatial + 1) * spatial * n * n;
        let slot = |row: usize, b_pos: usize, i: usize, j: usize| {
            ((row * spatial + b_pos) * n + i) * n + j
        };

        // Derivatives D^γ χ^β_{ℓj}, cached per (b_pos, j, γ_pos, ℓ).
        let mut dchi = Vec::with_capacity(spatial * n * spatial * n);
        for b_pos in 0..spatial {
            for j in 0..n {
                for (_, gamma) in index_set.iter() {
                    for l in 0..n {
                        dchi.push(chi.component(b_pos, j, l).derivative(&gamma.0, 0));
                    }
                }
            }
        }
        let dchi_at = |b_pos: usize, j: usize, g_pos: usize, l: usize| {
            &dchi[((b_pos * n + j) * spatial + g_pos) * n + l]
        };

        // Discrepancy rows.
        let mut rows = vec![Field::zeros(grid); slots];
        let mut raw = vec![0usize; d + 1];
        for (a_pos, _) in index_set.iter() {
            for b_pos in 0..spatial {
                for i in 0..n {
                    for j in 0..n {
                        let field = &mut rows[slot(a_pos, b_pos, i, j)];
                        for (k, amp) in a.entry_modes(a_pos, b_pos, i, j) {
                            let mut ok = true;
                            for ax in 0..=d {
                                match TorusGrid::raw_of(k[ax], dims[ax]) {
                                    Some(r) => raw[ax] = r,
                                    None => {
                                        ok = false;
                                        break;
                                    }
                                }
                            }
                            if ok {
                                let at = grid.flat(&raw);
                                field.coeffs[at] += amp;
                            }
                        }
                        field.coeffs[0] -= abar.entry(a_pos, b_pos, i, j);
                        for g_pos in 0..spatial {
                            for l in 0..n {
                                let modes = a.entry_modes(a_pos, g_pos, i, l);
                                if modes.is_empty() {
                                    continue;
                                }
                                let source = dchi_at(b_pos, j, g_pos, l);
                                for (shift, amp) in modes {
                                    shift_accumulate(field, source, shift, *amp, &mut raw);
                                }
                            }
                        }
                    }
                }
            }
        }
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        for b_pos in 0..spatial {
            for j in 0..n {
                for i in 0..n {
                    let mut field = chi.component(b_pos, j, i).clone();
                    for c in field.coeffs.iter_mut() {
                        *c *= sign;
                    }
                    rows[slot(spatial, b_pos, i, j)] = field;
                }
            }
        }

        // Slice means: the spatial zero-mode plane is the leading n_time
        // coefficients (temporal axis fastest, all spatial indices zero).
        let n_time = grid.n_time();
        let slice_means: Vec<Vec<Complex64>> =
            rows.iter().map(|f| f.coeffs[..n_time].to_vec()).collect();

        let mut bundle = FluxSet {
            grid,
            d,
            m,
            n,
            index_set,
            rows,
            slice_means,
            potentials: Vec::new(),
            skew: Vec::new(),
            primitives: Vec::new(),
        };

        // Gate: every discrepancy row averages to zero over the cell; a
        // violation means the effective tensor does not belong to this
        // corrector set.
        let row_mean = bundle.row_mean_sup();
        if row_mean > tol::VANISHING_MEAN {
            return Err(Error::ConsistencyFailure {
                context: "discrepancy rows retain a nonzero cell average; the effective \
                          tensor is inconsistent with the corrector set"
                    .to_string(),
                value: row_mean,
                tol: tol::VANISHING_MEAN,
            });
        }

        // Gate: space-time conservation is the corrector equation restated,
        // so its residual tracks the Krylov residual. A gross violation means
        // the corrector set does not solve this coefficient field's problem.
        let conservation = bundle.conservation_residual();
        let gate = (1e4 * chi.residual_norm()).max(1e-4);
        if conservation > gate {
            return Err(Error::ConsistencyFailure {
                context: "space-time conservation of the discrepancy rows failed; the \
                          corrector set does not match the coefficient field"
                    .to_string(),
                value: conservation,
                tol: gate,
            });
        }

        // Potentials: invert the spatial operator on the mean-free rows.
        let potentials: Vec<Field> = bundle
            .rows
            .iter()
            .map(|row| {
                let mut rhs = row.clone();
                for c in rhs.coeffs[..n_time].iter_mut() {
                    *c = Complex64::new(0.0, 0.0);
                }
                invert_grad_m_divergence(&rhs, m)
            })
            .collect();
        bundle.potentials = potentials;

        bundle.assemble_skew();

        // Temporal primitives of the spatial slice means.
        let mut primitives = Vec::with_capacity(spatial * spatial * n * n);
        for a_pos in 0..spatial {
            for b_pos in 0..spatial {
                for i in 0..n {
                    for j in 0..n {
                        let mean = &bundle.slice_means[slot(a_pos, b_pos, i, j)];
                        let prim = temporal_primitive(mean).map_err(|err| match err {
                            Error::ConsistencyFailure { value, tol, .. } => {
                                Error::ConsistencyFailure {
                                    context: format!(
                                        "slice mean of spatial row ({a_pos},{b_pos}) component \
                                         ({i},{j}) has a nonzero temporal mean; the effective \
                                         tensor is inconsistent"
                                    ),
                                    value,
                                    tol,
                                }
                            }
                            other => other,
                        })?;
                        primitives.push(prim);
                    }
                }
            }
        }
        bundle.primitives = primitives;
        Ok(bundle)
    }

    fn spatial_count(&self) -> usize {
        self.index_set.len()
    }

    fn row_pos(&self, row: FluxRow) -> usize {
        match row {
            FluxRow::Spatial(pos) => {
                assert!(pos < self.spatial_count(), "spatial row {pos} out of range");
                pos
            }
            FluxRow::Time => self.spatial_count(),
        }
    }

    fn slot(&self, row: usize, b_pos: usize, i: usize, j: usize) -> usize {
        let spatial = self.spatial_count();
        assert!(b_pos < spatial && i < self.n && j < self.n);
        ((row * spatial + b_pos) * self.n + i) * self.n + j
    }

    fn skew_slot(&self, r1: usize, r2: usize, b_pos: usize, i: usize, j: usize) -> usize {
        let spatial = self.spatial_count();
        (((r1 * (spatial + 1) + r2) * spatial + b_pos) * self.n + i) * self.n + j
    }

    fn assemble_skew(&mut self) {
        let spatial = self.spatial_count();
        let rows = spatial + 1;
        let n = self.n;
        let mut skew = vec![Field::zeros(self.grid); rows * rows * spatial * n * n];
        let one = Complex64::new(1.0, 0.0);
        for b_pos in 0..spatial {
            for i in 0..n {
                for j in 0..n {
                    for r1 in 0..spatial {
                        let g1 = self.index_set.entry(r1).0.clone();
                        for r2 in (r1 + 1)..spatial {
                            let g2 = self.index_set.entry(r2).0.clone();
                            let mut field =
                                self.potentials[self.slot(r2, b_pos, i, j)].derivative(&g1, 0);
                            field.axpy(-one, &self.potentials[self.slot(r1, b_pos, i, j)].derivative(&g2, 0));
                            skew[self.skew_slot(r2, r1, b_pos, i, j)] = negated(&field);
                            skew[self.skew_slot(r1, r2, b_pos, i, j)] = field;
                        }
                        let field =
                            self.potentials[self.slot(spatial, b_pos, i, j)].derivative(&g1, 0);
                        skew[self.skew_slot(spatial, r1, b_pos, i, j)] = negated(&field);
                        skew[self.skew_slot(r1, spatial, b_pos, i, j)] = field;
                    }
                }
            }
        }
        self.skew = skew;
    }

    /// The grid everything lives on.
    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    /// Spatial dimension.
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Half-order m.
    pub fn half_order(&self) -> usize {
        self.m
    }

    /// System size n.
    pub fn system_size(&self) -> usize {
        self.n
    }

    /// Degree-m multi-index set labelling rows and columns.
    pub fn index_set(&self) -> &IndexSet {
        &self.index_set
    }

    /// Discrepancy row `(row, β)` entry `(i, j)`.
    pub fn discrepancy(&self, row: FluxRow, b_pos: usize, i: usize, j: usize) -> &Field {
        &self.rows[self.slot(self.row_pos(row), b_pos, i, j)]
    }

    /// Temporal spectrum of the per-slice spatial mean of one row entry.
    pub fn slice_mean(&self, row: FluxRow, b_pos: usize, i: usize, j: usize) -> &[Complex64] {
        &self.slice_means[self.slot(self.row_pos(row), b_pos, i, j)]
    }

    /// Potential for one row entry.
    pub fn potential(&self, row: FluxRow, b_pos: usize, i: usize, j: usize) -> &Field {
        &self.potentials[self.slot(self.row_pos(row), b_pos, i, j)]
    }

    /// Skew-table entry for the ordered row pair `(r1, r2)`.
    pub fn skew(&self, r1: FluxRow, r2: FluxRow, b_pos: usize, i: usize, j: usize) -> &Field {
        &self.skew[self.skew_slot(self.row_pos(r1), self.row_pos(r2), b_pos, i, j)]
    }

    /// Temporal spectrum of the slice-mean primitive for a spatial row pair.
    pub fn mean_primitive(&self, a_pos: usize, b_pos: usize, i: usize, j: usize) -> &[Complex64] {
        let spatial = self.spatial_count();
        assert!(a_pos < spatial);
        &self.primitives[((a_pos * spatial + b_pos) * self.n + i) * self.n + j]
    }

    /// Evaluate the slice-mean primitive at time `s`.
    pub fn primitive_at(&self, a_pos: usize, b_pos: usize, i: usize, j: usize, s: f64) -> f64 {
        let spectrum = self.mean_primitive(a_pos, b_pos, i, j);
        eval_temporal(spectrum, s).re
    }

    /// Sup over the temporal grid of the slice means of one row (max over all
    /// entries of that row).
    pub fn slice_mean_sup(&self, row: FluxRow) -> f64 {
        let spatial = self.spatial_count();
        let r = self.row_pos(row);
        let mut sup = 0.0f64;
        for b_pos in 0..spatial {
            for i in 0..self.n {
                for j in 0..self.n {
                    let mut values = self.slice_means[self.slot(r, b_pos, i, j)].clone();
                    let mlen = values.len();
                    fft_nd(&mut values, &[mlen], true);
                    for v in &values {
                        sup = sup.max(v.norm());
                    }
                }
            }
        }
        sup
    }

    /// Max over `(β, i, j)` of the L²(cell) norm of
    /// `Σ_α D^α (spatial row α) + ∂_s (temporal row)`; this restates the cell
    /// problem, so it tracks the Krylov residual.
    pub fn conservation_residual(&self) -> f64 {
        let spatial = self.spatial_count();
        let zero_alpha = vec![0usize; self.d];
        let one = Complex64::new(1.0, 0.0);
        let mut worst = 0.0f64;
        for b_pos in 0..spatial {
            for i in 0..self.n {
                for j in 0..self.n {
                    let mut acc = self.rows[self.slot(spatial, b_pos, i, j)]
                        .derivative(&zero_alpha, 1);
                    for (a_pos, alpha) in self.index_set.iter() {
                        acc.axpy(one, &self.rows[self.slot(a_pos, b_pos, i, j)].derivative(&alpha.0, 0));
                    }
                    worst = worst.max(acc.norm_l2());
                }
            }
        }
        worst
    }

    /// Residual of reconstructing the mean-free rows from the skew table:
    /// max L²(cell) norm of
    /// `Σ_γ D^γ 𝔖^{γ r} + ∂_s 𝔖^{time, r} − (row_r − slice mean)` and the same
    /// residual relative to the largest mean-free row norm.
    pub fn divergence_residual(&self) -> (f64, f64) {
        let spatial = self.spatial_count();
        let n_time = self.grid.n_time();
        let zero_alpha = vec![0usize; self.d];
        let one = Complex64::new(1.0, 0.0);
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for r2 in 0..=spatial {
            for b_pos in 0..spatial {
                for i in 0..self.n {
                    for j in 0..self.n {
                        let mut acc = self.skew
                            [self.skew_slot(spatial, r2, b_pos, i, j)]
                        .derivative(&zero_alpha, 1);
                        for (g_pos, gamma) in self.index_set.iter() {
                            acc.axpy(
                                one,
                                &self.skew[self.skew_slot(g_pos, r2, b_pos, i, j)]
                                    .derivative(&gamma.0, 0),
                            );
                        }
                        let mut rhs = self.rows[self.slot(r2, b_pos, i, j)].clone();
                        for c in rhs.coeffs[..n_time].iter_mut() {
                            *c = Complex64::new(0.0, 0.0);
                        }
                        acc.axpy(-one, &rhs);
                        worst = worst.max(acc.norm_l2());
                        scale = scale.max(rhs.norm_l2());
                    }
                }
            }
        }
        let rel = if scale > 0.0 { worst / scale } else { 0.0 };
        (worst, rel)
    }

    /// Max |𝔖^{r₁r₂} + 𝔖^{r₂r₁}| over all coefficients; zero bitwise because
    /// mirrored entries share negated arrays.
    pub fn antisymmetry_defect(&self) -> f64 {
        let spatial = self.spatial_count();
        let mut worst = 0.0f64;
        for r1 in 0..=spatial {
            for r2 in 0..=spatial {
                for b_pos in 0..spatial {
                    for i in 0..self.n {
                        for j in 0..self.n {
                            let fwd = &self.skew[self.skew_slot(r1, r2, b_pos, i, j)];
                            let bwd = &self.skew[self.skew_slot(r2, r1, b_pos, i, j)];
                            for (x, y) in fwd.coeffs.iter().zip(bwd.coeffs.iter()) {
                                worst = worst.max((*x + *y).norm());
                            }
                        }
                    }
                }
            }
        }
        worst
    }

    /// Relative defect of applying the potential operator back to the
    /// potentials (pure spectral round trip).
    pub fn potential_roundtrip_defect(&self) -> f64 {
        let spatial = self.spatial_count();
        let n_time = self.grid.n_time();
        let one = Complex64::new(1.0, 0.0);
        let mut worst = 0.0f64;
        for r in 0..=spatial {
            for b_pos in 0..spatial {
                for i in 0..self.n {
                    for j in 0..self.n {
                        let f = &self.potentials[self.slot(r, b_pos, i, j)];
                        let mut back = Field::zeros(self.grid);
                        for (_, gamma) in self.index_set.iter() {
                            let doubled: Vec<usize> = gamma.0.iter().map(|g| 2 * g).collect();
                            back.axpy(one, &f.derivative(&doubled, 0));
                        }
                        let mut rhs = self.rows[self.slot(r, b_pos, i, j)].clone();
                        for c in rhs.coeffs[..n_time].iter_mut() {
                            *c = Complex64::new(0.0, 0.0);
                        }
                        let denom = rhs.norm_l2();
                        if denom == 0.0 {
                            continue;
                        }
                        back.axpy(-one, &rhs);
                        worst = worst.max(back.norm_l2() / denom);
                    }
                }
            }
        }
        worst
    }

    /// Max |cell average| over all discrepancy rows.
    pub fn row_mean_sup(&self) -> f64 {
        self.rows
            .iter()
            .map(|f| f.zero_mode().norm())
            .fold(0.0, f64::max)
    }

    /// Max |temporal mean| of the spatial slice means: the obstruction to a
    /// periodic primitive.
    pub fn primitive_obstruction(&self) -> f64 {
        let spatial = self.spatial_count();
        let mut worst = 0.0f64;
        for a_pos in 0..spatial {
            for b_pos in 0..spatial {
                for i in 0..self.n {
                    for j in 0..self.n {
                        worst = worst
                            .max(self.slice_means[self.slot(a_pos, b_pos, i, j)][0].norm());
                    }
                }
            }
        }
        worst
    }

    /// Spatial Sobolev norm (L² in time, order-`order` in space, unweighted
    /// multi-index sum) of one skew entry.
    pub fn skew_spatial_sobolev(
        &self,
        r1: FluxRow,
        r2: FluxRow,
        b_pos: usize,
        i: usize,
        j: usize,
        order: usize,
    ) -> f64 {
        spatial_sobolev_norm(self.skew(r1, r2, b_pos, i, j), order)
    }

    /// Collect every identity check into a serializable report.
    pub fn report(&self) -> FluxReport {
        let (divergence_abs, divergence_rel) = self.divergence_residual();
        let spatial = self.spatial_count();
        let mut gauge = 0.0f64;
        for a_pos in 0..spatial {
            for b_pos in 0..spatial {
                for i in 0..self.n {
                    for j in 0..self.n {
                        gauge = gauge.max(self.primitive_at(a_pos, b_pos, i, j, 0.0).abs());
                    }
                }
            }
        }
        FluxReport {
            d: self.d,
            m: self.m,
            n: self.n,
            n_space: self.grid.n_space(),
            n_time: self.grid.n_time(),
            conservation_residual: self.conservation_residual(),
            divergence_abs_residual: divergence_abs,
            divergence_rel_residual: divergence_rel,
            antisymmetry_defect: self.antisymmetry_defect(),
            slice_mean_time_row_sup: self.slice_mean_sup(FluxRow::Time),
            row_mean_sup: self.row_mean_sup(),
            primitive_obstruction: self.primitive_obstruction(),
            primitive_gauge_defect: gauge,
            potential_roundtrip_defect: self.potential_roundtrip_defect(),
        }
    }

    /// Save the bundle: `prefix.bin` holds f64-LE real node samples of the
    /// discrepancy rows, then the skew table, then the primitives (temporal
    /// nodes), each in slot order; `prefix.json` describes the layout and
    /// embeds the identity report.
    pub fn save(&self, prefix: &Path) -> Result<()> {
        let mut raw = Vec::new();
        for field in &self.rows {
            for value in field.to_physical() {
                raw.extend_from_slice(&value.re.to_le_bytes());
            }
        }
        for field in &self.skew {
            for value in field.to_physical() {
                raw.extend_from_slice(&value.re.to_le_bytes());
            }
        }
        for spectrum in &self.primitives {
            let mut values = spectrum.clone();
            let mlen = values.len();
            fft_nd(&mut values, &[mlen], true);
            for value in values {
                raw.extend_from_slice(&value.re.to_le_bytes());
            }
        }
        std::fs::write(prefix.with_extension("bin"), &raw)?;
        let sidecar = FluxSidecar {
            d: self.d,
            m: self.m,
            n: self.n,
            n_space: self.grid.n_space(),
            n_time: self.grid.n_time(),
            ordering: FLUX_ORDERING.to_string(),
            report: self.report(),
        };
        let text = serde_json::to_string_pretty(&sidecar)?;
        std::fs::write(prefix.with_extension("json"), text)?;
        Ok(())
    }
}

const FLUX_ORDERING: &str = "discrepancy rows (row-major slots, temporal row last), then skew table \
     (row-pair major), then slice-mean primitives (temporal nodes); nodes row-major, temporal axis fastest";

#[derive(Serialize, Deserialize)]
struct FluxSidecar {
    d: usize,
    m: usize,
    n: usize,
    n_space: usize,
    n_time: usize,
    ordering: String,
    report: FluxReport,
}

fn negated(field: &Field) -> Field {
    let mut out = field.clone();
    for c in out.coeffs.iter_mut() {
        *c = -*c;
    }
    out
}

/// Add `amp · source` shifted by `shift` in frequency space into `dest`
/// (modes falling outside the grid or onto its Nyquist planes are dropped).
fn shift_accumulate(
    dest: &mut Field,
    source: &Field,
    shift: &[i64],
    amp: Complex64,
    raw: &mut [usize],
) {
    let grid = dest.grid();
    let dims = grid.dims();
    let coeffs = &mut dest.coeffs;
    for_each_mode(&dims, |flat, freqs| {
        let value = source.coeffs[flat];
        if value == Complex64::new(0.0, 0.0) {
            return;
        }
        for ax in 0..dims.len() {
            match TorusGrid::raw_of(freqs[ax] + shift[ax], dims[ax]) {
                Some(r) => raw[ax] = r,
                None => return,
            }
        }
        coeffs[grid.flat(raw)] += amp * value;
    });
}

/// Invert `Σ_{|γ|=m} D^γ D^γ` acting spatially, per temporal mode, with the
/// spatial-mean plane projected out (the gauge that fixes the kernel of the
/// periodic operator). The symbol is `(−1)^m (2π)^{2m} Σ_{|γ|=m} k^{2γ}`,
/// which is bounded below by `c |k|^{2m}` and so never vanishes off the
/// mean plane.
pub fn invert_grad_m_divergence(rhs: &Field, m: usize) -> Field {
    let grid = rhs.grid();
    let d = grid.dim();
    let gammas = enumerate_multiindices(d, m)
        .expect("multi-index enumeration overflow")
        .entries()
        .to_vec();
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    let scale = sign * (2.0 * PI).powi(2 * m as i32);
    let mut out = Field::zeros(grid);
    let dims = grid.dims();
    for_each_mode(&dims, |flat, freqs| {
        let ky = &freqs[..d];
        if ky.iter().all(|&k| k == 0) {
            return;
        }
        let value = rhs.coeffs[flat];
        if value == Complex64::new(0.0, 0.0) {
            return;
        }
        let sum: f64 = gammas
            .iter()
            .map(|g| {
                ky.iter()
                    .zip(g.0.iter())
                    .map(|(&k, &e)| (k as f64).powi(2 * e as i32))
                    .product::<f64>()
            })
            .sum();
        out.coeffs[flat] = value / (scale * sum);
    });
    out
}

/// Antiderivative of a 1-periodic function given by its temporal Fourier
/// spectrum, anchored so the primitive vanishes at 0. Fails if the temporal
/// mean (the obstruction to periodicity) is not negligible.
pub fn temporal_primitive(spectrum: &[Complex64]) -> Result<Vec<Complex64>> {
    let mlen = spectrum.len();
    if mlen < 2 {
        return Err(Error::invalid(
            "temporal primitive needs at least two temporal modes".to_string(),
        ));
    }
    let mean = spectrum[0].norm();
    if mean > tol::VANISHING_MEAN {
        return Err(Error::ConsistencyFailure {
            context: "temporal mean must vanish for the primitive to be periodic".to_string(),
            value: mean,
            tol: tol::VANISHING_MEAN,
        });
    }
    let nyquist = if mlen % 2 == 0 { mlen / 2 } else { usize::MAX };
    let mut out = vec![Complex64::new(0.0, 0.0); mlen];
    let mut at_zero = Complex64::new(0.0, 0.0);
    for idx in 1..mlen {
        if idx == nyquist {
            continue;
        }
        let k = TorusGrid::freq_of(idx, mlen) as f64;
        out[idx] = spectrum[idx] / Complex64::new(0.0, 2.0 * PI * k);
        at_zero += out[idx];
    }
    out[0] = -at_zero;
    Ok(out)
}

/// Evaluate a temporal Fourier spectrum at time `s`.
pub fn eval_temporal(spectrum: &[Complex64], s: f64) -> Complex64 {
    let mlen = spectrum.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for (idx, c) in spectrum.iter().enumerate() {
        if *c == Complex64::new(0.0, 0.0) {
            continue;
        }
        let k = TorusGrid::freq_of(idx, mlen) as f64;
        acc += *c * Complex64::new(0.0, 2.0 * PI * k * s).exp();
    }
    acc
}

/// Unweighted spatial Sobolev norm of order `order`: the Parseval sum with
/// weight `Σ_{|η| ≤ order} (2π k)^{2η}` over spatial multi-indices.
pub fn spatial_sobolev_norm(field: &Field, order: usize) -> f64 {
    let grid = field.grid();
    let d = grid.dim();
    let sets: Vec<IndexSet> = (1..=order)
        .map(|q| enumerate_multiindices(d, q).expect("multi-index enumeration overflow"))
        .collect();
    let dims = grid.dims();
    let mut total = 0.0f64;
    for_each_mode(&dims, |flat, freqs| {
        let c2 = field.coeffs[flat].norm_sqr();
        if c2 == 0.0 {
            return;
        }
        let ky = &freqs[..d];
        // The degree-0 term of the weight is the plain L² contribution.
        let mut weight = 1.0f64;
        for set in &sets {
            for eta in set.entries() {
                weight += ky
                    .iter()
                    .zip(eta.0.iter())
                    .map(|(&k, &e)| (2.0 * PI * k as f64).powi(2 * e as i32))
                    .product::<f64>();
            }
        }
        total += weight * c2;
    });
    total.sqrt()
}
