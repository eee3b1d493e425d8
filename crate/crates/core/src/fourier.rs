//! Spectral fields on the periodic unit cell `Y = [−1/2, 1/2)^{d+1}`.
//!
//! Everything cell-periodic in this crate (correctors, oscillation tensors,
//! flux potentials) lives on a [`TorusGrid`] as a complex Fourier spectrum in
//! standard FFT layout (frequencies `0, 1, …, L/2−1, −L/2, …, −1` per axis;
//! spatial axes first, the temporal axis last and fastest-varying). A field's
//! physical samples are `u(x_j) = Σ_k c_k e^{2πi k·x_j}`, so `to_physical`
//! is an unnormalized inverse FFT and `from_physical` a forward FFT divided
//! by the node count.
//!
//! Nyquist planes are kept identically zero: every consumer requires an
//! unambiguous derivative symbol, and grids are sized with bandwidth margin
//! anyway.

use crate::error::{Error, Result};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;
use std::sync::Mutex;

/// Discretization of the unit cell: `n_space` modes per spatial axis (even),
/// `n_time` temporal modes (even); node count `n_space^d · n_time`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TorusGrid {
    d: usize,
    n_space: usize,
    n_time: usize,
}

impl TorusGrid {
    /// Build a grid; axis sizes must be even and ≥ 4.
    pub fn new(d: usize, n_space: usize, n_time: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("torus grid needs d ≥ 1"));
        }
        if n_space % 2 != 0 || n_time % 2 != 0 || n_space < 4 || n_time < 4 {
            return Err(Error::invalid(format!(
                "grid sizes must be even and ≥ 4, got {n_space}×{n_time}"
            )));
        }
        Ok(TorusGrid {
            d,
            n_space,
            n_time,
        })
    }

    /// Grid sized for a coefficient bandwidth plus a corrector bandwidth
    /// margin: each axis gets at least `2·(bandwidth + margin)` modes
    /// (rounded up to even).
    pub fn for_bandwidth(d: usize, bw: &[i64], margin: usize) -> Result<Self> {
        if bw.len() != d + 1 {
            return Err(Error::invalid("bandwidth vector must have d+1 axes"));
        }
        let need = |b: i64| -> usize { (2 * (b.unsigned_abs() as usize + margin)).max(4) };
        let ns = bw[..d].iter().map(|&b| need(b)).max().unwrap();
        let nt = need(bw[d]);
        TorusGrid::new(d, ns, nt)
    }

    /// Spatial dimension.
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Modes per spatial axis.
    pub fn n_space(&self) -> usize {
        self.n_space
    }

    /// Temporal modes.
    pub fn n_time(&self) -> usize {
        self.n_time
    }

    /// Axis lengths, spatial first, temporal last.
    pub fn dims(&self) -> Vec<usize> {
        let mut v = vec![self.n_space; self.d];
        v.push(self.n_time);
        v
    }

    /// Total node count.
    pub fn len(&self) -> usize {
        self.n_space.pow(self.d as u32) * self.n_time
    }

    /// Never zero.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// The grid with every axis doubled (for alias-free products).
    pub fn doubled(&self) -> TorusGrid {
        TorusGrid {
            d: self.d,
            n_space: 2 * self.n_space,
            n_time: 2 * self.n_time,
        }
    }

    /// Signed frequency of a raw index along an axis of length `len`.
    #[inline]
    pub fn freq_of(idx: usize, len: usize) -> i64 {
        if idx < len - len / 2 {
            idx as i64
        } else {
            idx as i64 - len as i64
        }
    }

    /// Flat index from per-axis raw indices.
    #[inline]
    pub fn flat(&self, raw: &[usize]) -> usize {
        let mut acc = 0usize;
        for axis in 0..self.d {
            acc = acc * self.n_space + raw[axis];
        }
        acc * self.n_time + raw[self.d]
    }

    /// Raw index along an axis holding a signed frequency, if representable
    /// below the Nyquist plane.
    #[inline]
    pub fn raw_of(freq: i64, len: usize) -> Option<usize> {
        let half = (len / 2) as i64;
        if freq.abs() >= half {
            return None;
        }
        Some(if freq >= 0 {
            freq as usize
        } else {
            (freq + len as i64) as usize
        })
    }
}

/// A complex spectrum on a torus grid. Real-valued fields keep Hermitian
/// symmetry up to roundoff; [`Field::realness_defect`] quantifies it.
#[derive(Clone, Debug)]
pub struct Field {
    grid: TorusGrid,
    /// FFT-layout Fourier coefficients.
    pub coeffs: Vec<Complex64>,
}

impl Field {
    /// The zero field.
    pub fn zeros(grid: TorusGrid) -> Field {
        Field {
            grid,
            coeffs: vec![Complex64::ZERO; grid.len()],
        }
    }

    /// Place sparse modes `(k, c)` (signed frequencies, spatial first) onto
    /// the grid. Errors if a frequency does not fit below Nyquist.
    pub fn from_modes(grid: TorusGrid, modes: &[(Vec<i64>, Complex64)]) -> Result<Field> {
        let mut f = Field::zeros(grid);
        let dims = grid.dims();
        let mut raw = vec![0usize; grid.d + 1];
        for (k, c) in modes {
            for axis in 0..=grid.d {
                raw[axis] = TorusGrid::raw_of(k[axis], dims[axis]).ok_or_else(|| {
                    Error::invalid(format!(
                        "frequency {k:?} does not fit on grid {}×{}",
                        grid.n_space, grid.n_time
                    ))
                })?;
            }
            f.coeffs[grid.flat(&raw)] += c;
        }
        Ok(f)
    }

    /// Grid accessor.
    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    /// Zero-frequency coefficient (the mean over the cell).
    pub fn zero_mode(&self) -> Complex64 {
        self.coeffs[0]
    }

    /// Force the mean to zero.
    pub fn project_zero_mean(&mut self) {
        self.coeffs[0] = Complex64::ZERO;
    }

    /// L²(Y) norm via Parseval (cell volume 1).
    pub fn norm_l2(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Spectral derivative `D^α ∂_s^j`: multiply by `(2πi k)^α (2πi k_s)^j`.
    pub fn derivative(&self, alpha: &[usize], time_order: usize) -> Field {
        assert_eq!(alpha.len(), self.grid.d);
        let mut out = Field::zeros(self.grid);
        let dims = self.grid.dims();
        for_each_mode(&dims, |flat, freqs| {
            let c = self.coeffs[flat];
            if c == Complex64::ZERO {
                return;
            }
            let mut factor = Complex64::new(1.0, 0.0);
            let mut nyquist = false;
            for axis in 0..dims.len() {
                let ord = if axis < self.grid.d {
                    alpha[axis]
                } else {
                    time_order
                };
                if ord == 0 {
                    continue;
                }
                if freqs[axis].unsigned_abs() as usize >= dims[axis] / 2 {
                    nyquist = true;
                    break;
                }
                let ik = Complex64::new(0.0, 2.0 * PI * freqs[axis] as f64);
                for _ in 0..ord {
                    factor *= ik;
                }
            }
            out.coeffs[flat] = if nyquist { Complex64::ZERO } else { factor * c };
        });
        out
    }

    /// Evaluate the series at one point (exact trigonometric interpolation).
    pub fn eval_at(&self, y: &[f64], s: f64) -> Complex64 {
        let dims = self.grid.dims();
        let mut acc = Complex64::ZERO;
        for_each_mode(&dims, |flat, freqs| {
            let c = self.coeffs[flat];
            if c == Complex64::ZERO {
                return;
            }
            let mut phase = freqs[self.grid.d] as f64 * s;
            for axis in 0..self.grid.d {
                phase += freqs[axis] as f64 * y[axis];
            }
            let (sin, cos) = (2.0 * PI * phase).sin_cos();
            acc += c * Complex64::new(cos, sin);
        });
        acc
    }

    /// Collapse the temporal axis at a fixed time `s`, producing the spatial
    /// spectrum `c(k_y) = Σ_{k_s} ĉ(k_y, k_s) e^{2πi k_s s}` in the same
    /// spatial FFT layout.
    pub fn collapse_temporal(&self, s: f64) -> Vec<Complex64> {
        let nt = self.grid.n_time;
        let spatial_len = self.grid.len() / nt;
        let mut out = vec![Complex64::ZERO; spatial_len];
        // Precompute temporal phases.
        let phases: Vec<Complex64> = (0..nt)
            .map(|it| {
                let k = TorusGrid::freq_of(it, nt);
                let (sin, cos) = (2.0 * PI * k as f64 * s).sin_cos();
                Complex64::new(cos, sin)
            })
            .collect();
        for sp in 0..spatial_len {
            let base = sp * nt;
            let mut acc = Complex64::ZERO;
            for it in 0..nt {
                acc += self.coeffs[base + it] * phases[it];
            }
            out[sp] = acc;
        }
        out
    }

    /// Physical samples on the grid nodes (unnormalized inverse FFT).
    pub fn to_physical(&self) -> Vec<Complex64> {
        let mut data = self.coeffs.clone();
        fft_nd(&mut data, &self.grid.dims(), true);
        data
    }

    /// Build from physical samples (forward FFT / node count), zeroing the
    /// Nyquist planes so derivative symbols stay unambiguous.
    pub fn from_physical(grid: TorusGrid, mut samples: Vec<Complex64>) -> Field {
        let dims = grid.dims();
        fft_nd(&mut samples, &dims, false);
        let scale = 1.0 / grid.len() as f64;
        for c in &mut samples {
            *c *= scale;
        }
        let mut f = Field {
            grid,
            coeffs: samples,
        };
        f.zero_nyquist();
        f
    }

    /// Zero all Nyquist planes.
    pub fn zero_nyquist(&mut self) {
        let dims = self.grid.dims();
        for_each_mode_mut(&dims, &mut self.coeffs, |c, freqs| {
            for (axis, &k) in freqs.iter().enumerate() {
                if k.unsigned_abs() as usize >= dims[axis] / 2 {
                    *c = Complex64::ZERO;
                    return;
                }
            }
        });
    }

    /// Embed into a finer grid (zero padding in spectrum).
    pub fn pad_to(&self, target: TorusGrid) -> Result<Field> {
        if target.d != self.grid.d
            || target.n_space < self.grid.n_space
            || target.n_time < self.grid.n_time
        {
            return Err(Error::invalid("padding target must refine the grid"));
        }
        let mut out = Field::zeros(target);
        let dims = self.grid.dims();
        let tdims = target.dims();
        for_each_mode(&dims, |flat, freqs| {
            let c = self.coeffs[flat];
            if c == Complex64::ZERO {
                return;
            }
            let mut raw = vec![0usize; tdims.len()];
            for axis in 0..tdims.len() {
                match TorusGrid::raw_of(freqs[axis], tdims[axis]) {
                    Some(r) => raw[axis] = r,
                    None => return, // Nyquist data is zero anyway
                }
            }
            out.coeffs[target.flat(&raw)] = c;
        });
        Ok(out)
    }

    /// Restrict to a coarser grid (spectral truncation).
    pub fn truncate_to(&self, target: TorusGrid) -> Result<Field> {
        if target.d != self.grid.d
            || target.n_space > self.grid.n_space
            || target.n_time > self.grid.n_time
        {
            return Err(Error::invalid("truncation target must coarsen the grid"));
        }
        let mut out = Field::zeros(target);
        let tdims = target.dims();
        let sdims = self.grid.dims();
        for_each_mode(&tdims, |tflat, freqs| {
            for (axis, &k) in freqs.iter().enumerate() {
                if k.unsigned_abs() as usize >= tdims[axis] / 2 {
                    return; // keep Nyquist zero
                }
                debug_assert!(TorusGrid::raw_of(k, sdims[axis]).is_some());
            }
            let mut raw = vec![0usize; sdims.len()];
            for axis in 0..sdims.len() {
                raw[axis] = TorusGrid::raw_of(freqs[axis], sdims[axis]).unwrap();
            }
            out.coeffs[tflat] = self.coeffs[self.grid.flat(&raw)];
        });
        Ok(out)
    }

    /// Largest |imaginary part| of the physical samples relative to the
    /// largest |sample| (0 for the zero field).
    pub fn realness_defect(&self) -> f64 {
        let phys = self.to_physical();
        let max_im = phys.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
        let max_abs = phys.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if max_abs == 0.0 {
            0.0
        } else {
            max_im / max_abs
        }
    }

    /// a ← a + w·b.
    pub fn axpy(&mut self, w: Complex64, other: &Field) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += w * b;
        }
    }

    /// Alias-free pointwise product, returned on the doubled grid. Exact
    /// whenever the two bandwidths sum below the doubled Nyquist limit,
    /// which holds for any pair of fields resolved on this grid.
    pub fn mul_exact(&self, other: &Field) -> Result<Field> {
        if self.grid != other.grid {
            return Err(Error::invalid("product factors must share a grid"));
        }
        let target = self.grid.doubled();
        let pa = self.pad_to(target)?.to_physical();
        let pb = other.pad_to(target)?.to_physical();
        let prod: Vec<Complex64> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();
        Ok(Field::from_physical(target, prod))
    }

    /// Exact integral `∫_Y f·g = Σ_k f̂(k) ĝ(−k)` of two fields on the same
    /// grid (a Parseval pairing — no sampling, hence no aliasing).
    pub fn mean_times(&self, other: &Field) -> Complex64 {
        debug_assert_eq!(self.grid, other.grid);
        let dims = self.grid.dims();
        let mut acc = Complex64::ZERO;
        let total = self.coeffs.len();
        let mut raw = vec![0usize; dims.len()];
        for flat in 0..total {
            let c = self.coeffs[flat];
            if c == Complex64::ZERO {
                continue;
            }
            let mut rem = flat;
            for axis in (0..dims.len()).rev() {
                raw[axis] = rem % dims[axis];
                rem /= dims[axis];
            }
            // Conjugate-index lookup: k ↦ −k is idx ↦ (len − idx) mod len.
            let mut conj_flat = 0usize;
            for axis in 0..dims.len() {
                let ci = (dims[axis] - raw[axis]) % dims[axis];
                conj_flat = conj_flat * dims[axis] + ci;
            }
            acc += c * other.coeffs[conj_flat];
        }
        acc
    }
}

/// Visit every mode: `f(flat_index, signed_frequencies)`.
pub fn for_each_mode(dims: &[usize], mut f: impl FnMut(usize, &[i64])) {
    let total: usize = dims.iter().product();
    let mut freqs = vec![0i64; dims.len()];
    let mut raw = vec![0usize; dims.len()];
    for flat in 0..total {
        let mut rem = flat;
        for axis in (0..dims.len()).rev() {
            raw[axis] = rem % dims[axis];
            rem /= dims[axis];
        }
        for axis in 0..dims.len() {
            freqs[axis] = TorusGrid::freq_of(raw[axis], dims[axis]);
        }
        f(flat, &freqs);
    }
}

fn for_each_mode_mut(
    dims: &[usize],
    data: &mut [Complex64],
    mut f: impl FnMut(&mut Complex64, &[i64]),
) {
    let total: usize = dims.iter().product();
    let mut freqs = vec![0i64; dims.len()];
    let mut raw = vec![0usize; dims.len()];
    for flat in 0..total {
        let mut rem = flat;
        for axis in (0..dims.len()).rev() {
            raw[axis] = rem % dims[axis];
            rem /= dims[axis];
        }
        for axis in 0..dims.len() {
            freqs[axis] = TorusGrid::freq_of(raw[axis], dims[axis]);
        }
        f(&mut data[flat], &freqs);
    }
}

/// In-place n-dimensional FFT over a row-major array (last axis fastest).
/// `inverse = true` applies the unnormalized inverse transform.
pub fn fft_nd(data: &mut [Complex64], dims: &[usize], inverse: bool) {
    static PLANNER: Mutex<Option<FftPlanner<f64>>> = Mutex::new(None);
    let total: usize = dims.iter().product();
    assert_eq!(data.len(), total);
    // Fetch plans up front; the planner lock is not held during the
    // transforms themselves, so concurrent solves stay parallel.
    let plans: Vec<_> = {
        let mut planner_guard = PLANNER.lock().unwrap();
        let planner = planner_guard.get_or_insert_with(FftPlanner::new);
        dims.iter()
            .map(|&len| {
                if inverse {
                    planner.plan_fft_inverse(len)
                } else {
                    planner.plan_fft_forward(len)
                }
            })
            .collect()
    };

    // Stride of each axis in the row-major layout.
    let mut strides = vec![1usize; dims.len()];
    for axis in (0..dims.len().saturating_sub(1)).rev() {
        strides[axis] = strides[axis + 1] * dims[axis + 1];
    }
    for axis in 0..dims.len() {
        let len = dims[axis];
        if len == 1 {
            continue;
        }
        let fft = plans[axis].clone();
        let stride = strides[axis];
        let mut line = vec![Complex64::ZERO; len];
        // Iterate over all 1-D lines along `axis`.
        let line_count = total / len;
        for lc in 0..line_count {
            // Decompose lc into (outer, inner) around the axis.
            let inner = lc % stride;
            let outer = lc / stride;
            let base = outer * stride * len + inner;
            for (t, slot) in line.iter_mut().enumerate() {
                *slot = data[base + t * stride];
            }
            fft.process(&mut line);
            for (t, slot) in line.iter().enumerate() {
                data[base + t * stride] = *slot;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn fft_round_trip_identity() {
        let grid = TorusGrid::new(1, 8, 4).unwrap();
        let mut f = Field::zeros(grid);
        for (i, coeff) in f.coeffs.iter_mut().enumerate() {
            *coeff = c((i as f64).sin(), (i as f64 * 0.37).cos());
        }
        f.zero_nyquist();
        let phys = f.to_physical();
        let back = Field::from_physical(grid, phys);
        for (a, b) in f.coeffs.iter().zip(&back.coeffs) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn single_mode_evaluates_to_plane_wave() {
        let grid = TorusGrid::new(2, 8, 8).unwrap();
        let f = Field::from_modes(grid, &[(vec![2, -1, 1], c(0.0, -0.5)), (vec![-2, 1, -1], c(0.0, 0.5))]).unwrap();
        // f = sin 2π(2y₁ − y₂ + s)
        for &(y1, y2, s) in &[(0.11, 0.72, -0.3), (0.5, -0.25, 0.125)] {
            let v = f.eval_at(&[y1, y2], s);
            let expect = (2.0 * PI * (2.0 * y1 - y2 + s)).sin();
            assert!((v.re - expect).abs() < 1e-12);
            assert!(v.im.abs() < 1e-12);
        }
        assert!(f.realness_defect() < 1e-13);
    }

    #[test]
    fn derivative_multiplies_by_ik() {
        let grid = TorusGrid::new(1, 16, 8).unwrap();
        let f = Field::from_modes(grid, &[(vec![3, -2], c(1.0, 0.25)), (vec![-3, 2], c(1.0, -0.25))]).unwrap();
        let d = f.derivative(&[2], 1);
        let dims = grid.dims();
        for_each_mode(&dims, |flat, freqs| {
            let expect = f.coeffs[flat]
                * Complex64::new(0.0, 2.0 * PI * freqs[0] as f64).powi(2)
                * Complex64::new(0.0, 2.0 * PI * freqs[1] as f64);
            assert!((d.coeffs[flat] - expect).norm() < 1e-12);
        });
    }

    #[test]
    fn pad_truncate_round_trip() {
        let grid = TorusGrid::new(1, 8, 8).unwrap();
        let f = Field::from_modes(grid, &[(vec![1, 2], c(0.3, 0.1)), (vec![-1, -2], c(0.3, -0.1))]).unwrap();
        let padded = f.pad_to(grid.doubled()).unwrap();
        let back = padded.truncate_to(grid).unwrap();
        for (a, b) in f.coeffs.iter().zip(&back.coeffs) {
            assert!((a - b).norm() < 1e-14);
        }
        // Padding preserves point values exactly.
        let v0 = f.eval_at(&[0.21], 0.34);
        let v1 = padded.eval_at(&[0.21], 0.34);
        assert!((v0 - v1).norm() < 1e-13);
    }

    #[test]
    fn collapse_temporal_matches_pointwise_eval() {
        let grid = TorusGrid::new(1, 8, 8).unwrap();
        let f = Field::from_modes(
            grid,
            &[
                (vec![1, 1], c(0.2, -0.4)),
                (vec![-1, -1], c(0.2, 0.4)),
                (vec![2, -3], c(-0.1, 0.05)),
                (vec![-2, 3], c(-0.1, -0.05)),
            ],
        )
        .unwrap();
        let s = 0.3125;
        let spatial = f.collapse_temporal(s);
        for &y in &[0.17, -0.42, 0.0] {
            let mut acc = Complex64::ZERO;
            for (idx, coeff) in spatial.iter().enumerate() {
                let k = TorusGrid::freq_of(idx, 8);
                let (sin, cos) = (2.0 * PI * k as f64 * y).sin_cos();
                acc += coeff * c(cos, sin);
            }
            let direct = f.eval_at(&[y], s);
            assert!((acc - direct).norm() < 1e-12);
        }
    }

    #[test]
    fn parseval_norm() {
        let grid = TorusGrid::new(1, 16, 8).unwrap();
        // sin 2πy: coefficients ∓i/2 at k=±1 → L² norm √(1/2).
        let f = Field::from_modes(grid, &[(vec![1, 0], c(0.0, -0.5)), (vec![-1, 0], c(0.0, 0.5))]).unwrap();
        assert!((f.norm_l2() - (0.5f64).sqrt()).abs() < 1e-14);
    }
}
