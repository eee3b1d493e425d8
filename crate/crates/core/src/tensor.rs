//! Multi-index combinatorics and coefficient-tensor representation.
//!
//! The operators handled by this crate have the divergence form
//! `∂_t u + (−1)^m Σ_{|α|=|β|=m} D^α( A^{αβ}(y,s) D^β u )` with an n×n block
//! `A^{αβ}_{ij}` per pair of degree-m multi-indices. This module provides
//!
//! * [`MultiIndex`] / [`IndexSet`]: deterministic enumeration of the degree-m
//!   index sets that drive every tensor contraction downstream,
//! * multi-binomial factors for Leibniz expansions,
//! * [`CoefficientField`]: band-limited trigonometric-polynomial coefficient
//!   tensors on the unit cell `Y = [−1/2, 1/2)^{d+1}` (spatial axes first,
//!   temporal axis last), with Hermitian-symmetric Fourier data so values are
//!   exactly real and exactly 1-periodic,
//! * pointwise ellipticity certification by dense sampling.

use crate::error::{Error, Result};
use crate::tol;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

/// A d-dimensional multi-index `α = (α_1, ..., α_d)` of nonnegative integers.
///
/// The canonical total order sorts *descending* in the first differing
/// component, so that e.g. the degree-2 indices in dimension 2 enumerate as
/// `(2,0), (1,1), (0,2)`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    /// Build from components.
    pub fn new(components: Vec<usize>) -> Self {
        MultiIndex(components)
    }

    /// Spatial dimension (number of components).
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Total degree `|α| = Σ_k α_k`.
    pub fn degree(&self) -> usize {
        self.0.iter().sum()
    }

    /// Componentwise `self ≤ other`.
    pub fn le(&self, other: &MultiIndex) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// Componentwise difference `self − other`; requires `other ≤ self`.
    pub fn sub(&self, other: &MultiIndex) -> Result<MultiIndex> {
        if !other.le(self) {
            return Err(Error::invalid(format!(
                "multi-index subtraction {self} − {other} has a negative component"
            )));
        }
        Ok(MultiIndex(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    /// Componentwise sum `self + other`.
    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Multi-factorial `α! = Π α_k!` as an exact integer.
    pub fn factorial(&self) -> u128 {
        self.0.iter().map(|&a| factorial(a)).product()
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (p, a) in self.0.iter().enumerate() {
            if p > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MultiIndex {
    /// Descending in the first differing component: larger leading components
    /// sort earlier.
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        for (a, b) in self.0.iter().zip(&other.0) {
            match b.cmp(a) {
                std::cmp::Ordering::Equal => continue,
                non_eq => return non_eq,
            }
        }
        self.0.len().cmp(&other.0.len())
    }
}

fn factorial(k: usize) -> u128 {
    (1..=k as u128).product()
}

/// Exact binomial coefficient C(n, k).
fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 0..k {
        acc = acc * (n - j) as u128 / (j + 1) as u128;
    }
    acc
}

/// Number of degree-m multi-indices in dimension d: C(m+d−1, d−1).
pub fn index_count(d: usize, m: usize) -> u128 {
    binomial(m + d - 1, d - 1)
}

/// Multi-binomial factor `γ!/(ζ!(γ−ζ)!) = Π_k C(γ_k, ζ_k)` as an exact
/// integer; requires `ζ ≤ γ` componentwise.
pub fn binomial_factor(gamma: &MultiIndex, zeta: &MultiIndex) -> Result<u128> {
    if !zeta.le(gamma) {
        return Err(Error::invalid(format!(
            "binomial factor requires ζ ≤ γ componentwise, got γ={gamma}, ζ={zeta}"
        )));
    }
    Ok(gamma
        .0
        .iter()
        .zip(&zeta.0)
        .map(|(&g, &z)| binomial(g, z))
        .product())
}

/// The complete, canonically ordered set of degree-m multi-indices in
/// dimension d. Contractions over `|α| = m` iterate this set, and tensors are
/// stored with one slot per entry, so the ordering fixes all array layouts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexSet {
    d: usize,
    m: usize,
    entries: Vec<MultiIndex>,
}

impl IndexSet {
    /// Number of entries.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// True when empty (never, for valid d, m ≥ 1).
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Spatial dimension.
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Common degree of the entries.
    pub fn degree(&self) -> usize {
        self.m
    }

    /// Entry at a position.
    pub fn entry(&self, pos: usize) -> &MultiIndex {
        &self.entries[pos]
    }

    /// All entries in canonical order.
    pub fn entries(&self) -> &[MultiIndex] {
        &self.entries
    }

    /// Position of an index within the canonical order.
    pub fn position(&self, idx: &MultiIndex) -> Option<usize> {
        self.entries.iter().position(|e| e == idx)
    }

    /// Iterate `(position, index)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &MultiIndex)> {
        self.entries.iter().enumerate()
    }
}

/// Enumerate all degree-m multi-indices in dimension d, canonically ordered.
///
/// The generation recurses on the leading component from m down to 0, which
/// produces the canonical (descending-lexicographic) order directly.
pub fn enumerate_multiindices(d: usize, m: usize) -> Result<IndexSet> {
    if d == 0 || m == 0 {
        return Err(Error::invalid(format!(
            "multi-index enumeration requires d ≥ 1 and m ≥ 1, got d={d}, m={m}"
        )));
    }
    let mut entries = Vec::new();
    let mut scratch = vec![0usize; d];
    fill_indices(&mut entries, &mut scratch, 0, m);
    debug_assert_eq!(entries.len() as u128, index_count(d, m));
    Ok(IndexSet { d, m, entries })
}

fn fill_indices(out: &mut Vec<MultiIndex>, scratch: &mut Vec<usize>, axis: usize, left: usize) {
    if axis + 1 == scratch.len() {
        scratch[axis] = left;
        out.push(MultiIndex(scratch.clone()));
        return;
    }
    for lead in (0..=left).rev() {
        scratch[axis] = lead;
        fill_indices(out, scratch, axis + 1, left - lead);
    }
}

/// One Fourier mode of one tensor entry, as supplied in coefficient JSON.
///
/// `i`, `j` are 1-based component labels; `k` lists the (d+1) integer
/// frequencies, spatial axes first and the temporal axis last.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModeEntry {
    /// Row multi-index α (degree m).
    pub alpha: Vec<usize>,
    /// Column multi-index β (degree m).
    pub beta: Vec<usize>,
    /// Row component, 1-based.
    pub i: usize,
    /// Column component, 1-based.
    pub j: usize,
    /// Integer frequency vector, length d+1.
    pub k: Vec<i64>,
    /// Real part of the Fourier coefficient.
    pub re: f64,
    /// Imaginary part of the Fourier coefficient.
    pub im: f64,
}

/// JSON document shape for coefficient tensors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoefficientJson {
    /// Spatial dimension.
    pub d: usize,
    /// Half-order of the operator.
    pub m: usize,
    /// System size.
    pub n: usize,
    /// Ellipticity constant μ.
    pub mu: f64,
    /// Fourier modes; Hermitian completion is applied on load.
    pub modes: Vec<ModeEntry>,
}

/// A band-limited coefficient tensor `A^{αβ}_{ij}(y, s)` on the unit cell,
/// stored as per-entry sparse Fourier mode lists with Hermitian symmetry
/// enforced, so evaluation is exactly real and exactly 1-periodic.
#[derive(Clone, Debug)]
pub struct CoefficientField {
    d: usize,
    m: usize,
    n: usize,
    mu: f64,
    index_set: IndexSet,
    /// Flat layout: `((a·L + b)·n + i)·n + j` ↦ sorted mode list.
    entries: Vec<Vec<(Vec<i64>, Complex64)>>,
}

impl CoefficientField {
    /// Build from raw mode entries, applying Hermitian completion: for every
    /// supplied mode `(k, c)` the conjugate mode `(−k, c̄)` is added unless it
    /// was supplied explicitly, in which case the pair must already be
    /// conjugate-consistent. `k = 0` modes must be real.
    pub fn new(d: usize, m: usize, n: usize, mu: f64, modes: &[ModeEntry]) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("system size n must be ≥ 1"));
        }
        if !(mu > 0.0) {
            return Err(Error::invalid(format!(
                "ellipticity constant must be positive, got μ={mu}"
            )));
        }
        let index_set = enumerate_multiindices(d, m)?;
        let ln = index_set.len();
        let mut entries: Vec<Vec<(Vec<i64>, Complex64)>> = vec![Vec::new(); ln * ln * n * n];
        for mode in modes {
            let alpha = MultiIndex::new(mode.alpha.clone());
            let beta = MultiIndex::new(mode.beta.clone());
            if alpha.dim() != d || beta.dim() != d {
                return Err(Error::invalid(format!(
                    "mode index dimension mismatch: α={alpha}, β={beta}, expected dimension {d}"
                )));
            }
            if alpha.degree() != m || beta.degree() != m {
                return Err(Error::invalid(format!(
                    "mode indices must have degree m={m}: α={alpha}, β={beta}"
                )));
            }
            let a = index_set
                .position(&alpha)
                .expect("degree-m index is in the enumeration");
            let b = index_set
                .position(&beta)
                .expect("degree-m index is in the enumeration");
            if mode.i == 0 || mode.i > n || mode.j == 0 || mode.j > n {
                return Err(Error::invalid(format!(
                    "component labels are 1-based in 1..={n}, got i={}, j={}",
                    mode.i, mode.j
                )));
            }
            if mode.k.len() != d + 1 {
                return Err(Error::invalid(format!(
                    "frequency vector must have d+1 = {} entries, got {:?}",
                    d + 1,
                    mode.k
                )));
            }
            let flat = ((a * ln + b) * n + (mode.i - 1)) * n + (mode.j - 1);
            let c = Complex64::new(mode.re, mode.im);
            let list = &mut entries[flat];
            if list.iter().any(|(k, _)| *k == mode.k) {
                return Err(Error::invalid(format!(
                    "duplicate mode for entry α={alpha}, β={beta}, i={}, j={}, k={:?}",
                    mode.i, mode.j, mode.k
                )));
            }
            list.push((mode.k.clone(), c));
        }
        // Hermitian completion per entry list.
        for list in &mut entries {
            let supplied = list.clone();
            for (k, c) in &supplied {
                if k.iter().all(|&kk| kk == 0) {
                    if c.im.abs() > 1e-14 * (1.0 + c.re.abs()) {
                        return Err(Error::invalid(format!(
                            "zero-frequency mode must be real, got imaginary part {:.3e}",
                            c.im
                        )));
                    }
                    continue;
                }
                let neg: Vec<i64> = k.iter().map(|&kk| -kk).collect();
                match supplied.iter().find(|(kk, _)| *kk == neg) {
                    Some((_, c_neg)) => {
                        let defect = (c_neg - c.conj()).norm();
                        if defect > 1e-12 * (1.0 + c.norm()) {
                            return Err(Error::invalid(format!(
                                "modes k={k:?} and −k are not conjugate (defect {defect:.3e})"
                            )));
                        }
                    }
                    None => list.push((neg, c.conj())),
                }
            }
            // Deterministic order for all later sparse contractions.
            list.sort_by(|(ka, _), (kb, _)| ka.cmp(kb));
        }
        Ok(CoefficientField {
            d,
            m,
            n,
            mu,
            index_set,
            entries,
        })
    }

    /// Load from the JSON document shape.
    pub fn from_json(doc: &CoefficientJson) -> Result<Self> {
        CoefficientField::new(doc.d, doc.m, doc.n, doc.mu, &doc.modes)
    }

    /// Parse and load from JSON text.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: CoefficientJson = serde_json::from_str(text)?;
        CoefficientField::from_json(&doc)
    }

    /// Scalar (n=1) field with `A^{αβ} = δ_{αβ}·a(y,s)` from the modes of a:
    /// each mode is `(k, re, im)`.
    pub fn isotropic_scalar(
        d: usize,
        m: usize,
        mu: f64,
        a_modes: &[(Vec<i64>, f64, f64)],
    ) -> Result<Self> {
        let index_set = enumerate_multiindices(d, m)?;
        let mut modes = Vec::new();
        for (_, alpha) in index_set.iter() {
            for (k, re, im) in a_modes {
                modes.push(ModeEntry {
                    alpha: alpha.0.clone(),
                    beta: alpha.0.clone(),
                    i: 1,
                    j: 1,
                    k: k.clone(),
                    re: *re,
                    im: *im,
                });
            }
        }
        CoefficientField::new(d, m, 1, mu, &modes)
    }

    /// Constant field from dense tensor values `values[a][b][i][j]`.
    pub fn constant(d: usize, m: usize, n: usize, mu: f64, values: &[f64]) -> Result<Self> {
        let index_set = enumerate_multiindices(d, m)?;
        let ln = index_set.len();
        if values.len() != ln * ln * n * n {
            return Err(Error::invalid(format!(
                "constant tensor needs {} values, got {}",
                ln * ln * n * n,
                values.len()
            )));
        }
        let mut modes = Vec::new();
        for (a, alpha) in index_set.iter() {
            for (b, beta) in index_set.iter() {
                for i in 0..n {
                    for j in 0..n {
                        let v = values[((a * ln + b) * n + i) * n + j];
                        if v != 0.0 {
                            modes.push(ModeEntry {
                                alpha: alpha.0.clone(),
                                beta: beta.0.clone(),
                                i: i + 1,
                                j: j + 1,
                                k: vec![0; d + 1],
                                re: v,
                                im: 0.0,
                            });
                        }
                    }
                }
            }
        }
        CoefficientField::new(d, m, n, mu, &modes)
    }

    /// Spatial dimension d.
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

    /// Stated ellipticity constant μ.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// The degree-m index set shared by all contractions over this field.
    pub fn index_set(&self) -> &IndexSet {
        &self.index_set
    }

    /// Sorted mode list of one tensor entry (positions are index-set slots,
    /// components 0-based).
    pub fn entry_modes(&self, a: usize, b: usize, i: usize, j: usize) -> &[(Vec<i64>, Complex64)] {
        let ln = self.index_set.len();
        &self.entries[((a * ln + b) * self.n + i) * self.n + j]
    }

    /// Largest |frequency| per axis over all modes (length d+1).
    pub fn bandwidth(&self) -> Vec<i64> {
        let mut bw = vec![0i64; self.d + 1];
        for list in &self.entries {
            for (k, _) in list {
                for (axis, &kk) in k.iter().enumerate() {
                    bw[axis] = bw[axis].max(kk.abs());
                }
            }
        }
        bw
    }

    /// Evaluate one entry at a point `(y, s)`; exactly real by Hermitian
    /// symmetry (the imaginary parts cancel pairwise; only the real part of
    /// each mode's contribution is accumulated).
    pub fn eval_entry(&self, a: usize, b: usize, i: usize, j: usize, y: &[f64], s: f64) -> f64 {
        let mut acc = 0.0;
        for (k, c) in self.entry_modes(a, b, i, j) {
            let mut phase = k[self.d] as f64 * s;
            for (axis, &ky) in k[..self.d].iter().enumerate() {
                phase += ky as f64 * y[axis];
            }
            let (sin, cos) = (2.0 * PI * phase).sin_cos();
            acc += c.re * cos - c.im * sin;
        }
        acc
    }

    /// Evaluate the whole tensor at a point into `out` (layout
    /// `((a·L+b)·n+i)·n+j`).
    pub fn eval_all(&self, y: &[f64], s: f64, out: &mut [f64]) {
        let ln = self.index_set.len();
        debug_assert_eq!(out.len(), ln * ln * self.n * self.n);
        for a in 0..ln {
            for b in 0..ln {
                for i in 0..self.n {
                    for j in 0..self.n {
                        out[((a * ln + b) * self.n + i) * self.n + j] =
                            self.eval_entry(a, b, i, j, y, s);
                    }
                }
            }
        }
    }

    /// The adjoint tensor `A*` with `A*^{αβ}_{ij} = A^{βα}_{ji}`.
    pub fn adjoint(&self) -> CoefficientField {
        let ln = self.index_set.len();
        let mut entries = vec![Vec::new(); self.entries.len()];
        for a in 0..ln {
            for b in 0..ln {
                for i in 0..self.n {
                    for j in 0..self.n {
                        let src = ((b * ln + a) * self.n + j) * self.n + i;
                        entries[((a * ln + b) * self.n + i) * self.n + j] =
                            self.entries[src].clone();
                    }
                }
            }
        }
        CoefficientField {
            entries,
            index_set: self.index_set.clone(),
            ..self.clone()
        }
    }

    /// The time-reflected tensor `A(y, c − s)`: every mode `(k_y, k_s) ↦ c_k`
    /// becomes `(k_y, −k_s) ↦ e^{−2πi(−k_s)c}·c_k` — equivalently the new
    /// coefficient at `(k_y, k_s)` is `e^{−2πi k_s c}·Â(k_y, −k_s)`.
    /// For integer-compatible reflections the phase is exactly 1.
    pub fn reflect_time(&self, c: f64) -> CoefficientField {
        let mut entries = Vec::with_capacity(self.entries.len());
        for list in &self.entries {
            let mut new_list: Vec<(Vec<i64>, Complex64)> = list
                .iter()
                .map(|(k, coeff)| {
                    let mut nk = k.clone();
                    nk[self.d] = -nk[self.d];
                    let phase = -2.0 * PI * (nk[self.d] as f64) * c;
                    let rot = Complex64::new(phase.cos(), phase.sin());
                    (nk, coeff * rot)
                })
                .collect();
            new_list.sort_by(|(ka, _), (kb, _)| ka.cmp(kb));
            entries.push(new_list);
        }
        CoefficientField {
            entries,
            index_set: self.index_set.clone(),
            ..self.clone()
        }
    }
}

/// Outcome of a dense-grid ellipticity scan. The certificate speaks for the
/// sampled lattice and trial directions only; with `grid_res` at least twice
/// the field's bandwidth the samples determine the trigonometric polynomial
/// exactly, which is as strong as pointwise sampling can be.
#[derive(Clone, Debug, Serialize)]
pub struct EllipticityCertificate {
    /// Whether both bounds held on the scan.
    pub certified: bool,
    /// Minimum of the quadratic form over grid points and unit trial vectors.
    pub form_min: f64,
    /// Maximum absolute tensor entry over grid points.
    pub entry_max: f64,
    /// The constant the scan was checked against.
    pub mu: f64,
    /// Grid resolution per axis.
    pub grid_res: usize,
    /// Number of random trial directions (coordinate directions are always
    /// included on top of these).
    pub trials: usize,
    /// Violating sample, if any: (point coordinates, trial vector, form value).
    pub witness: Option<(Vec<f64>, Vec<f64>, f64)>,
}

/// Scan the Legendre form `Σ A^{αβ}_{ij} ξ_{β,j} ξ_{α,i} ≥ μ|ξ|²` and the
/// entry bound `|A| ≤ 1/μ` over a uniform `grid_res^{d+1}` lattice on the
/// unit cell, using all coordinate directions plus `trial_count` seeded
/// random unit vectors ξ ∈ ℝ^{L·n}.
pub fn check_ellipticity(
    field: &CoefficientField,
    grid_res: usize,
    trial_count: usize,
    seed: u64,
) -> Result<EllipticityCertificate> {
    let bw = field.bandwidth();
    let max_bw = bw.iter().copied().max().unwrap_or(0) as usize;
    if grid_res < 2 * max_bw {
        return Err(Error::invalid(format!(
            "ellipticity grid resolution {grid_res} is below twice the bandwidth {max_bw}"
        )));
    }
    let d = field.dim();
    let ln = field.index_set().len();
    let n = field.system_size();
    let dim = ln * n;

    // Trial directions: coordinate vectors, then seeded random unit vectors.
    let mut trials: Vec<Vec<f64>> = Vec::with_capacity(dim + trial_count);
    for p in 0..dim {
        let mut e = vec![0.0; dim];
        e[p] = 1.0;
        trials.push(e);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trial_count {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-12 {
            v[0] = 1.0;
        } else {
            for x in &mut v {
                *x /= norm;
            }
        }
        trials.push(v);
    }

    let mut form_min = f64::INFINITY;
    let mut entry_max: f64 = 0.0;
    let mut witness = None;
    let mut tensor = vec![0.0; ln * ln * n * n];
    let mut point = vec![0.0; d + 1];
    let mut lattice = vec![0usize; d + 1];
    let total = grid_res.pow((d + 1) as u32);
    for flat in 0..total {
        let mut rem = flat;
        for axis in 0..d + 1 {
            lattice[axis] = rem % grid_res;
            rem /= grid_res;
            point[axis] = -0.5 + lattice[axis] as f64 / grid_res as f64;
        }
        field.eval_all(&point[..d], point[d], &mut tensor);
        for &v in &tensor {
            entry_max = entry_max.max(v.abs());
        }
        for xi in &trials {
            // ξ is indexed by (index-set slot a, component i) flattened a·n+i.
            let mut form = 0.0;
            for a in 0..ln {
                for b in 0..ln {
                    for i in 0..n {
                        for j in 0..n {
                            form += tensor[((a * ln + b) * n + i) * n + j] * xi[b * n + j] * xi[a * n + i];
                        }
                    }
                }
            }
            if form < form_min {
                form_min = form;
                if form < field.mu() - tol::ELLIPTICITY_SLACK {
                    witness = Some((point.clone(), xi.clone(), form));
                }
            }
        }
    }

    let certified = form_min >= field.mu() - tol::ELLIPTICITY_SLACK
        && entry_max <= 1.0 / field.mu() + tol::ELLIPTICITY_SLACK;
    Ok(EllipticityCertificate {
        certified,
        form_min,
        entry_max,
        mu: field.mu(),
        grid_res,
        trials: trial_count,
        witness: if certified { None } else { witness },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_matches_stars_and_bars_examples() {
        let set = enumerate_multiindices(2, 2).unwrap();
        let expect: Vec<MultiIndex> = [[2, 0], [1, 1], [0, 2]]
            .iter()
            .map(|c| MultiIndex::new(c.to_vec()))
            .collect();
        assert_eq!(set.entries(), &expect[..]);
        assert_eq!(set.len(), 3);

        let set = enumerate_multiindices(1, 3).unwrap();
        assert_eq!(set.entries(), &[MultiIndex::new(vec![3])]);

        assert_eq!(enumerate_multiindices(3, 2).unwrap().len(), 6);
    }

    #[test]
    fn enumeration_counts_match_binomial_formula() {
        for d in 1..=4 {
            for m in 1..=3 {
                let set = enumerate_multiindices(d, m).unwrap();
                assert_eq!(set.len() as u128, index_count(d, m), "d={d} m={m}");
                // Distinct, complete, sorted.
                let mut sorted = set.entries().to_vec();
                sorted.sort();
                sorted.dedup();
                assert_eq!(sorted.len(), set.len());
                assert_eq!(&sorted[..], set.entries());
                assert!(set.entries().iter().all(|e| e.degree() == m));
            }
        }
    }

    #[test]
    fn enumeration_rejects_degenerate_sizes() {
        assert!(enumerate_multiindices(0, 1).is_err());
        assert!(enumerate_multiindices(1, 0).is_err());
    }

    #[test]
    fn binomial_factor_examples() {
        let g = |c: &[usize]| MultiIndex::new(c.to_vec());
        assert_eq!(binomial_factor(&g(&[2, 0]), &g(&[1, 0])).unwrap(), 2);
        assert_eq!(binomial_factor(&g(&[2, 2]), &g(&[0, 0])).unwrap(), 1);
        assert_eq!(binomial_factor(&g(&[2, 1]), &g(&[1, 1])).unwrap(), 2);
        assert!(binomial_factor(&g(&[1, 0]), &g(&[0, 2])).is_err());
    }

    #[test]
    fn binomial_factors_sum_to_power_of_two() {
        // Σ_{ζ ≤ γ} C(γ, ζ) = 2^{|γ|} (Vandermonde), all γ up to degree 4 in d ≤ 3.
        for d in 1..=3usize {
            for total in 1..=4usize {
                let gammas = enumerate_multiindices(d, total).unwrap();
                for (_, gamma) in gammas.iter() {
                    let mut sum: u128 = 0;
                    // Enumerate ζ ≤ γ by mixed radix count.
                    let radices: Vec<usize> = gamma.0.iter().map(|&g| g + 1).collect();
                    let count: usize = radices.iter().product();
                    for flat in 0..count {
                        let mut rem = flat;
                        let mut comps = Vec::with_capacity(d);
                        for &r in &radices {
                            comps.push(rem % r);
                            rem /= r;
                        }
                        sum += binomial_factor(gamma, &MultiIndex::new(comps)).unwrap();
                    }
                    assert_eq!(sum, 1u128 << total, "γ={gamma}");
                }
            }
        }
    }

    fn oscillatory_scalar(d: usize, m: usize) -> CoefficientField {
        // a(y, s) = 2 + sin 2π(y_1 + s): modes at ±(e_1, 1) with ∓i/2.
        // Range [1, 3], so both bounds hold exactly for μ = 1/3.
        let mut k_plus = vec![0i64; d + 1];
        k_plus[0] = 1;
        k_plus[d] = 1;
        CoefficientField::isotropic_scalar(
            d,
            m,
            1.0 / 3.0,
            &[
                (vec![0; d + 1], 2.0, 0.0),
                (k_plus, 0.0, -0.5),
            ],
        )
        .unwrap()
    }

    #[test]
    fn hermitian_completion_makes_values_real_and_periodic() {
        let a = oscillatory_scalar(2, 1);
        // Supplied only the +k mode; completion must reproduce 2 + sin 2π(y1+s).
        for &(y1, y2, s) in &[(0.13, -0.41, 0.29), (0.5, -0.5, 0.0), (-0.25, 0.08, -0.37)] {
            let v = a.eval_entry(0, 0, 0, 0, &[y1, y2], s);
            let expect = 2.0 + (2.0 * PI * (y1 + s)).sin();
            assert!((v - expect).abs() < 1e-13, "value {v} vs {expect}");
            // 1-periodicity under integer lattice shifts.
            let shifted = a.eval_entry(0, 0, 0, 0, &[y1 + 1.0, y2 - 2.0], s + 3.0);
            assert!((shifted - v).abs() < 1e-12);
        }
    }

    #[test]
    fn ellipticity_certifies_identity_tensor() {
        let set = enumerate_multiindices(2, 2).unwrap();
        let ln = set.len();
        let mut values = vec![0.0; ln * ln];
        for a in 0..ln {
            values[a * ln + a] = 1.0;
        }
        let field = CoefficientField::constant(2, 2, 1, 1.0, &values).unwrap();
        let cert = check_ellipticity(&field, 4, 16, 7).unwrap();
        assert!(cert.certified);
        assert!((cert.form_min - 1.0).abs() < 1e-12);
        assert!((cert.entry_max - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ellipticity_scalar_oscillatory_minimum() {
        // Form minimum of (2 + sin)·|ξ|² is 1, attained where sin = −1.
        let field = oscillatory_scalar(1, 1);
        let cert = check_ellipticity(&field, 8, 32, 3).unwrap();
        assert!(cert.certified);
        assert!((cert.form_min - 1.0).abs() < 1e-9, "min {}", cert.form_min);
    }

    #[test]
    fn ellipticity_rejects_sign_flipped_tensor_with_witness() {
        // Large oscillation around a small mean goes negative somewhere.
        let field = CoefficientField::isotropic_scalar(
            1,
            1,
            0.5,
            &[(vec![0, 0], 1.0, 0.0), (vec![1, 1], 0.0, -1.5)],
        )
        .unwrap();
        let cert = check_ellipticity(&field, 16, 8, 11).unwrap();
        assert!(!cert.certified);
        let (point, xi, value) = cert.witness.expect("witness located");
        assert!(value < 0.5);
        // Re-evaluate the form at the witness to confirm it.
        let v = field.eval_entry(0, 0, 0, 0, &point[..1], point[1]);
        assert!((v * xi[0] * xi[0] - value).abs() < 1e-12);
    }

    #[test]
    fn certificates_are_lattice_shift_invariant() {
        let field = oscillatory_scalar(1, 1);
        // Shifting the field by an integer lattice vector leaves all sampled
        // values unchanged, hence the certificate too.
        for &(y, s) in &[(0.21, -0.34), (-0.49, 0.11)] {
            let v0 = field.eval_entry(0, 0, 0, 0, &[y], s);
            let v1 = field.eval_entry(0, 0, 0, 0, &[y + 1.0], s - 4.0);
            assert!((v0 - v1).abs() < 1e-12);
        }
        let c0 = check_ellipticity(&field, 8, 8, 5).unwrap();
        let c1 = check_ellipticity(&field, 8, 8, 5).unwrap();
        assert_eq!(c0.form_min, c1.form_min);
        assert_eq!(c0.entry_max, c1.entry_max);
    }

    #[test]
    fn adjoint_swaps_indices_and_components() {
        // Non-symmetric 2-component example: A^{αβ}_{12} ≠ A^{αβ}_{21}.
        let modes = vec![
            ModeEntry {
                alpha: vec![1],
                beta: vec![1],
                i: 1,
                j: 2,
                k: vec![1, 0],
                re: 0.0,
                im: -0.25,
            },
            ModeEntry {
                alpha: vec![1],
                beta: vec![1],
                i: 1,
                j: 1,
                k: vec![0, 0],
                re: 2.0,
                im: 0.0,
            },
            ModeEntry {
                alpha: vec![1],
                beta: vec![1],
                i: 2,
                j: 2,
                k: vec![0, 0],
                re: 2.0,
                im: 0.0,
            },
        ];
        let field = CoefficientField::new(1, 1, 2, 0.5, &modes).unwrap();
        let adj = field.adjoint();
        for &(y, s) in &[(0.17, 0.05), (-0.31, 0.42)] {
            assert_eq!(
                field.eval_entry(0, 0, 0, 1, &[y], s),
                adj.eval_entry(0, 0, 1, 0, &[y], s)
            );
        }
    }

    #[test]
    fn time_reflection_with_integer_phase_is_mode_reflection() {
        let field = oscillatory_scalar(1, 1);
        let reflected = field.reflect_time(0.0);
        for &(y, s) in &[(0.2, 0.3), (-0.45, -0.12)] {
            let direct = field.eval_entry(0, 0, 0, 0, &[y], -s);
            let refl = reflected.eval_entry(0, 0, 0, 0, &[y], s);
            assert!((direct - refl).abs() < 1e-13);
        }
        // General phase c: A(y, c−s).
        let c = 0.3;
        let shifted = field.reflect_time(c);
        for &(y, s) in &[(0.2, 0.3), (-0.45, -0.12)] {
            let direct = field.eval_entry(0, 0, 0, 0, &[y], c - s);
            let refl = shifted.eval_entry(0, 0, 0, 0, &[y], s);
            assert!((direct - refl).abs() < 1e-13, "{direct} vs {refl}");
        }
    }

    #[test]
    fn json_round_trip() {
        let doc = CoefficientJson {
            d: 1,
            m: 2,
            n: 1,
            mu: 0.4,
            modes: vec![ModeEntry {
                alpha: vec![2],
                beta: vec![2],
                i: 1,
                j: 1,
                k: vec![0, 0],
                re: 3.0,
                im: 0.0,
            }],
        };
        let text = serde_json::to_string(&doc).unwrap();
        let field = CoefficientField::from_json_str(&text).unwrap();
        assert_eq!(field.half_order(), 2);
        assert_eq!(field.eval_entry(0, 0, 0, 0, &[0.3], 0.7), 3.0);
    }

    #[test]
    fn rejects_inconsistent_conjugate_pair() {
        let modes = vec![
            ModeEntry {
                alpha: vec![1],
                beta: vec![1],
                i: 1,
                j: 1,
                k: vec![1, 0],
                re: 1.0,
                im: 0.5,
            },
            ModeEntry {
                alpha: vec![1],
                beta: vec![1],
                i: 1,
                j: 1,
                k: vec![-1, 0],
                re: 1.0,
                im: 0.5, // should be −0.5
            },
        ];
        assert!(CoefficientField::new(1, 1, 1, 1.0, &modes).is_err());
    }
}
