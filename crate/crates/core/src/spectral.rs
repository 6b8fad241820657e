//! Discrete Fourier transforms on the periodic box.
//!
//! The forward transform divides by `N^n`, so the zero mode of a field is its
//! mean and `f(x) = Σ_k c_k exp(2πi k·x / L)` on the grid.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use once_cell::sync::Lazy;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::GridSpec;

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Relative tolerance for Hermitian symmetry and imaginary residue checks.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Fourier coefficients of one real scalar, indexed like the real grid with
/// wavenumbers `k_j ∈ [-N/2, N/2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    pub grid: GridSpec,
    pub coeffs: Vec<C64>,
}

impl SpectralField {
    pub fn zeros(grid: GridSpec) -> Self {
        SpectralField {
            grid,
            coeffs: vec![ZERO; grid.len()],
        }
    }

    /// Coefficient of integer wavevector `k` (components taken modulo N).
    pub fn coeff(&self, k: [i64; 3]) -> C64 {
        self.coeffs[self.index_of(k)]
    }

    pub fn set_coeff(&mut self, k: [i64; 3], value: C64) {
        let idx = self.index_of(k);
        self.coeffs[idx] = value;
    }

    fn index_of(&self, k: [i64; 3]) -> usize {
        let n = self.grid.points as i64;
        let mut c = [0usize; 3];
        for axis in 0..self.grid.dim {
            c[axis] = k[axis].rem_euclid(n) as usize;
        }
        self.grid.index(c)
    }

    /// Worst `|c(-k) - conj(c(k))|` and where it occurs.
    pub fn hermitian_mismatch(&self) -> (usize, f64) {
        let mut worst = (0, 0.0);
        for idx in 0..self.coeffs.len() {
            let m = (self.coeffs[self.grid.negated_index(idx)] - self.coeffs[idx].conj()).norm();
            if m > worst.1 {
                worst = (idx, m);
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.norm()))
    }
}

/// Forward transform of a real field.
pub fn forward_transform(field: &ScalarField) -> Result<SpectralField> {
    field.check_finite()?;
    let ops = SpectralOps::for_grid(field.grid);
    Ok(SpectralField {
        grid: field.grid,
        coeffs: ops.forward(&field.values),
    })
}

/// Inverse transform; rejects coefficient sets that are not the spectrum of a
/// real field.
pub fn inverse_transform(spec: &SpectralField) -> Result<ScalarField> {
    let scale = spec.max_abs();
    if scale > 0.0 {
        let (idx, mismatch) = spec.hermitian_mismatch();
        if mismatch > HERMITIAN_TOL * scale {
            let k = spec.grid.wavevector(idx);
            return Err(Error::NotHermitian {
                wavevector: k[..spec.grid.dim].to_vec(),
                mismatch,
            });
        }
    }
    let ops = SpectralOps::for_grid(spec.grid);
    let mut data = spec.coeffs.clone();
    ops.fft_inverse(&mut data);
    let re_max = data.iter().fold(0.0f64, |m, c| m.max(c.re.abs()));
    let im_max = data.iter().fold(0.0f64, |m, c| m.max(c.im.abs()));
    if im_max > HERMITIAN_TOL * re_max.max(f64::MIN_POSITIVE) && im_max > 0.0 {
        return Err(Error::ImaginaryResidue { residue: im_max });
    }
    ScalarField::from_values(spec.grid, data.into_iter().map(|c| c.re).collect())
}

/// Grid-bound FFT plans and wavevector tables, shared across threads.
pub struct SpectralOps {
    pub grid: GridSpec,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// `|2πk/L|²` per mode.
    pub mu: Vec<f64>,
    /// Derivative wavenumbers `2πk_j/L` per axis; zero on the Nyquist plane so
    /// odd derivatives of real fields stay real.
    pub kd: Vec<Vec<f64>>,
    /// Full wavenumbers `2πk_j/L` per axis.
    pub kf: Vec<Vec<f64>>,
    /// Modes kept by the 2/3 rule.
    pub keep: Vec<bool>,
}

type OpsKey = (usize, usize, u64);

static OPS_CACHE: Lazy<Mutex<HashMap<OpsKey, Arc<SpectralOps>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

impl SpectralOps {
    pub fn for_grid(grid: GridSpec) -> Arc<SpectralOps> {
        let key = (grid.dim, grid.points, grid.length.to_bits());
        let mut cache = OPS_CACHE.lock().expect("spectral cache poisoned");
        cache
            .entry(key)
            .or_insert_with(|| Arc::new(SpectralOps::build(grid)))
            .clone()
    }

    fn build(grid: GridSpec) -> SpectralOps {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.points);
        let inv = planner.plan_fft_inverse(grid.points);
        let len = grid.len();
        let base = 2.0 * PI / grid.length;
        let half = (grid.points / 2) as i64;
        let mut mu = vec![0.0; len];
        let mut kd = vec![vec![0.0; len]; grid.dim];
        let mut kf = vec![vec![0.0; len]; grid.dim];
        let mut keep = vec![true; len];
        for idx in 0..len {
            let k = grid.wavevector(idx);
            let mut m = 0.0;
            for axis in 0..grid.dim {
                let kk = base * k[axis] as f64;
                m += kk * kk;
                kf[axis][idx] = kk;
                kd[axis][idx] = if k[axis] == -half { 0.0 } else { kk };
                if 3 * k[axis].unsigned_abs() as usize >= grid.points {
                    keep[idx] = false;
                }
            }
            mu[idx] = m;
        }
        SpectralOps {
            grid,
            fwd,
            inv,
            mu,
            kd,
            kf,
            keep,
        }
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// Normalized forward transform of real values.
    pub fn forward(&self, values: &[f64]) -> Vec<C64> {
        let mut data: Vec<C64> = values.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.fft_forward(&mut data);
        data
    }

    /// Inverse transform returning the real part; callers guarantee symmetry.
    pub fn inverse_real(&self, coeffs: &[C64]) -> Vec<f64> {
        let mut data = coeffs.to_vec();
        self.fft_inverse(&mut data);
        data.into_iter().map(|c| c.re).collect()
    }

    pub(crate) fn fft_forward(&self, data: &mut [C64]) {
        self.process(data, &self.fwd);
        let s = 1.0 / data.len() as f64;
        for c in data.iter_mut() {
            *c *= s;
        }
    }

    pub(crate) fn fft_inverse(&self, data: &mut [C64]) {
        self.process(data, &self.inv);
    }

    fn process(&self, data: &mut [C64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.grid.points;
        let total = data.len();
        let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
        // last axis is contiguous
        fft.process_with_scratch(data, &mut scratch);
        let mut slab = vec![ZERO; total];
        for axis in (0..self.grid.dim - 1).rev() {
            let stride = n.pow((self.grid.dim - 1 - axis) as u32);
            let block = n * stride;
            for base in (0..total).step_by(block) {
                let src = &mut data[base..base + block];
                let tmp = &mut slab[..block];
                // transpose (n × stride) -> (stride × n)
                for i in 0..n {
                    for j in 0..stride {
                        tmp[j * n + i] = src[i * stride + j];
                    }
                }
                fft.process_with_scratch(tmp, &mut scratch);
                for i in 0..n {
                    for j in 0..stride {
                        src[i * stride + j] = tmp[j * n + i];
                    }
                }
            }
        }
    }

    /// Zeroes modes outside the 2/3-rule band.
    pub fn dealias(&self, coeffs: &mut [C64]) {
        for (c, &keep) in coeffs.iter_mut().zip(&self.keep) {
            if !keep {
                *c = ZERO;
            }
        }
    }

    /// Leray projector `v ↦ v - k(k·v)/|k|²`, identity at `k = 0`.
    pub fn leray(&self, v: &mut [Vec<C64>]) {
        let dim = self.grid.dim;
        for idx in 0..self.len() {
            let m = self.mu[idx];
            if m == 0.0 {
                continue;
            }
            // a mode on a Nyquist plane has no Hermitian partner with the
            // opposite wavevector, so its projection would not stay real
            if (0..dim).any(|a| self.kd[a][idx] != self.kf[a][idx]) {
                for comp in v.iter_mut().take(dim) {
                    comp[idx] = ZERO;
                }
                continue;
            }
            let mut kv = ZERO;
            for (axis, comp) in v.iter().enumerate().take(dim) {
                kv += comp[idx] * self.kf[axis][idx];
            }
            let s = kv / m;
            for (axis, comp) in v.iter_mut().enumerate().take(dim) {
                comp[idx] -= s * self.kf[axis][idx];
            }
        }
    }

    /// `∇·v` in spectral form.
    pub fn divergence(&self, v: &[Vec<C64>]) -> Vec<C64> {
        let mut out = vec![ZERO; self.len()];
        for (axis, comp) in v.iter().enumerate() {
            let k = &self.kd[axis];
            for idx in 0..out.len() {
                out[idx] += C64::new(0.0, k[idx]) * comp[idx];
            }
        }
        out
    }

    /// `∇f` in spectral form.
    pub fn gradient(&self, f: &[C64]) -> Vec<Vec<C64>> {
        (0..self.grid.dim)
            .map(|axis| {
                let k = &self.kd[axis];
                f.iter()
                    .zip(k)
                    .map(|(&c, &kk)| C64::new(0.0, kk) * c)
                    .collect()
            })
            .collect()
    }

    /// Row divergence of a tensor, `(∇·T)_i = Σ_j ∂_j T_ij`.
    pub fn div_tensor(&self, t: &[Vec<Vec<C64>>]) -> Vec<Vec<C64>> {
        t.iter().map(|row| self.divergence(row)).collect()
    }

    /// Multiplies by the heat multiplier `exp(-t|k'|²)`.
    pub fn heat(&self, coeffs: &mut [C64], t: f64) {
        for (c, &m) in coeffs.iter_mut().zip(&self.mu) {
            *c *= (-t * m).exp();
        }
    }

    /// Largest `|k·û(k)| / |k|` over `k ≠ 0` with integer `k`, relative to
    /// the largest coefficient.
    pub fn divergence_residual(&self, v: &[Vec<C64>]) -> f64 {
        let scale = v
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, c| m.max(c.norm()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for idx in 1..self.len() {
            let k = self.grid.wavevector(idx);
            let mut kv = ZERO;
            let mut k2 = 0.0;
            for (axis, comp) in v.iter().enumerate() {
                kv += comp[idx] * k[axis] as f64;
                k2 += (k[axis] * k[axis]) as f64;
            }
            worst = worst.max(kv.norm() / k2.sqrt());
        }
        worst / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct O(N^{2n}) DFT used as an independent oracle.
    fn naive_dft(field: &ScalarField) -> Vec<C64> {
        let g = field.grid;
        let n = g.points as f64;
        let len = g.len();
        let mut out = vec![ZERO; len];
        for (kidx, o) in out.iter_mut().enumerate() {
            let kc = g.coords(kidx);
            let mut acc = ZERO;
            for (xidx, v) in field.values.iter().enumerate() {
                let xc = g.coords(xidx);
                let mut phase = 0.0;
                for a in 0..g.dim {
                    phase += (kc[a] * xc[a]) as f64;
                }
                acc += C64::from_polar(*v, -2.0 * PI * phase / n);
            }
            *o = acc / len as f64;
        }
        out
    }

    fn grid2() -> GridSpec {
        GridSpec::new(2, 8, 2.0).unwrap()
    }

    #[test]
    fn constant_field_has_only_mean() {
        let g = GridSpec::new(3, 8, 1.0).unwrap();
        let s = forward_transform(&ScalarField::constant(g, 2.5)).unwrap();
        assert!((s.coeffs[0] - C64::new(2.5, 0.0)).norm() < 1e-14);
        assert!(s.coeffs[1..].iter().all(|c| c.norm() < 1e-14));
    }

    #[test]
    fn cosine_matches_direct_sum() {
        let g = grid2();
        let f = ScalarField::from_fn(g, |x| (2.0 * PI * x[0] / g.length).cos());
        let s = forward_transform(&f).unwrap();
        let oracle = naive_dft(&f);
        for (a, b) in s.coeffs.iter().zip(&oracle) {
            assert!((a - b).norm() < 1e-13);
        }
        assert!((s.coeff([1, 0, 0]).re - 0.5).abs() < 1e-14);
        assert!((s.coeff([-1, 0, 0]).re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn matches_direct_sum_in_3d() {
        let g = GridSpec::new(3, 8, 1.0).unwrap();
        let f = ScalarField::from_fn(g, |x| (x[0] * 3.0 + x[1] * x[2]).sin() + x[2]);
        let s = forward_transform(&f).unwrap();
        let oracle = naive_dft(&f);
        for (a, b) in s.coeffs.iter().zip(&oracle) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn single_pair_inverts_to_cosine() {
        let g = grid2();
        let mut s = SpectralField::zeros(g);
        s.set_coeff([1, 0, 0], C64::new(0.5, 0.0));
        s.set_coeff([-1, 0, 0], C64::new(0.5, 0.0));
        let f = inverse_transform(&s).unwrap();
        for (i, v) in f.values.iter().enumerate() {
            let x = g.position(i);
            assert!((v - (2.0 * PI * x[0] / g.length).cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_and_mean_only_inverses() {
        let g = grid2();
        let f = inverse_transform(&SpectralField::zeros(g)).unwrap();
        assert!(f.values.iter().all(|&v| v == 0.0));
        let mut s = SpectralField::zeros(g);
        s.coeffs[0] = C64::new(-1.25, 0.0);
        let f = inverse_transform(&s).unwrap();
        assert!(f.values.iter().all(|&v| (v + 1.25).abs() < 1e-15));
    }

    #[test]
    fn asymmetric_spectrum_rejected_with_wavevector() {
        let g = grid2();
        let mut s = SpectralField::zeros(g);
        s.set_coeff([2, 1, 0], C64::new(1.0, 0.0));
        match inverse_transform(&s) {
            Err(Error::NotHermitian { wavevector, .. }) => {
                assert!(wavevector == vec![2, 1] || wavevector == vec![-2, -1]);
            }
            other => panic!("expected symmetry error, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_input_rejected() {
        let g = grid2();
        let mut f = ScalarField::zeros(g);
        f.values[0] = f64::INFINITY;
        assert!(forward_transform(&f).is_err());
    }

    fn arb_field() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-10.0f64..10.0, 64)
    }

    proptest! {
        #[test]
        fn roundtrip_parseval_linearity(a in arb_field(), b in arb_field(), s in -3.0f64..3.0, t in -3.0f64..3.0) {
            let g = grid2();
            let fa = ScalarField::from_values(g, a).unwrap();
            let fb = ScalarField::from_values(g, b).unwrap();
            let sa = forward_transform(&fa).unwrap();
            let sb = forward_transform(&fb).unwrap();
            let (_, mismatch) = sa.hermitian_mismatch();
            prop_assert!(mismatch <= 1e-13 * sa.max_abs().max(1.0));

            let back = inverse_transform(&sa).unwrap();
            let scale = fa.max_abs().max(1e-300);
            for (x, y) in back.values.iter().zip(&fa.values) {
                prop_assert!((x - y).abs() <= 1e-12 * scale);
            }

            let lhs = fa.l2_squared();
            let rhs: f64 = sa.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() * g.volume();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1e-300));

            let mut comb = fa.scaled(s);
            comb.axpy(t, &fb);
            let sc = forward_transform(&comb).unwrap();
            let cscale = sa.max_abs().max(sb.max_abs()) * (s.abs() + t.abs()).max(1.0);
            for i in 0..sc.coeffs.len() {
                let expect = sa.coeffs[i] * s + sb.coeffs[i] * t;
                prop_assert!((sc.coeffs[i] - expect).norm() <= 1e-12 * cscale);
            }
        }
    }
}
