//! Spectral state, source terms and the per-mode quadrature weights.

use crate::error::Result;
use crate::field::{ScalarField, State, VectorField};
use crate::grid::GridSpec;
use crate::spectral::{SpectralOps, C64};

use super::forcing::{exp_integral, ForcingSpec, Phase};

const ZERO: C64 = C64::new(0.0, 0.0);

/// `(û, θ̂)` on one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SpecState {
    pub u: Vec<Vec<C64>>,
    pub th: Vec<C64>,
}

impl SpecState {
    pub fn zeros(grid: GridSpec) -> Self {
        SpecState {
            u: vec![vec![ZERO; grid.len()]; grid.dim],
            th: vec![ZERO; grid.len()],
        }
    }

    pub fn from_state(ops: &SpectralOps, x: &State) -> Result<Self> {
        x.check_finite()?;
        Ok(SpecState {
            u: x.u.components.iter().map(|c| ops.forward(&c.values)).collect(),
            th: ops.forward(&x.theta.values),
        })
    }

    pub fn to_state(&self, ops: &SpectralOps) -> State {
        let grid = ops.grid;
        State {
            u: VectorField {
                grid,
                components: self
                    .u
                    .iter()
                    .map(|c| ScalarField {
                        grid,
                        values: ops.inverse_real(c),
                    })
                    .collect(),
            },
            theta: ScalarField {
                grid,
                values: ops.inverse_real(&self.th),
            },
        }
    }

    pub(crate) fn rows(&self) -> impl Iterator<Item = &Vec<C64>> {
        self.u.iter().chain(std::iter::once(&self.th))
    }

    pub(crate) fn rows_mut(&mut self) -> impl Iterator<Item = &mut Vec<C64>> {
        self.u.iter_mut().chain(std::iter::once(&mut self.th))
    }

    /// Largest coefficient modulus.
    pub fn max_abs(&self) -> f64 {
        self.rows()
            .flat_map(|r| r.iter())
            .fold(0.0, |m, c| m.max(c.norm()))
    }

    pub fn max_diff(&self, other: &SpecState) -> f64 {
        self.rows()
            .zip(other.rows())
            .flat_map(|(a, b)| a.iter().zip(b))
            .fold(0.0, |m, (x, y)| m.max((x - y).norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.rows().flat_map(|r| r.iter()).all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// `self ← w ∘ self` per mode.
    pub fn scale_modes(&mut self, w: &[f64]) {
        for row in self.rows_mut() {
            for (c, &x) in row.iter_mut().zip(w) {
                *c *= x;
            }
        }
    }

    /// `self += w ∘ other` per mode.
    pub fn add_weighted(&mut self, w: &[f64], other: &SpecState) {
        for (a, b) in self.rows_mut().zip(other.rows()) {
            for ((x, y), &s) in a.iter_mut().zip(b).zip(w) {
                *x += *y * s;
            }
        }
    }

    pub fn add_scaled(&mut self, s: f64, other: &SpecState) {
        for (a, b) in self.rows_mut().zip(other.rows()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y * s;
            }
        }
    }

    pub fn zero_mean(&mut self) {
        for row in self.rows_mut() {
            row[0] = ZERO;
        }
    }
}

/// `∫₀¹ e^{−zx} dx` and `∫₀¹ x e^{−zx} dx`.
pub(crate) fn phi_pair(z: f64) -> (f64, f64) {
    if z < 0.5 {
        let (mut a, mut b) = (0.0, 0.0);
        let mut term = 1.0; // (−z)^k / k!
        for k in 0..24 {
            a += term / (k as f64 + 1.0);
            b += term / (k as f64 + 2.0);
            term *= -z / (k as f64 + 1.0);
        }
        (a, b)
    } else {
        let e = (-z).exp();
        ((1.0 - e) / z, (1.0 - (1.0 + z) * e) / (z * z))
    }
}

/// Per-mode weights of the exponential product trapezoid on a step `h`:
/// `X(t+h) = E·X(t) + start·N(t) + end·N(t+h)`.
pub(crate) struct StepWeights {
    pub decay: Vec<f64>,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
}

impl StepWeights {
    pub fn new(ops: &SpectralOps, h: f64) -> Self {
        let n = ops.len();
        let mut decay = vec![0.0; n];
        let mut start = vec![0.0; n];
        let mut end = vec![0.0; n];
        for i in 0..n {
            let z = ops.mu[i] * h;
            let (a, b) = phi_pair(z);
            decay[i] = (-z).exp();
            start[i] = h * b;
            end[i] = h * (a - b);
        }
        StepWeights { decay, start, end }
    }
}

/// Spectral sources of one forcing term.
struct ForcingMode {
    omega: f64,
    phase: Phase,
    src: SpecState,
    /// `∫₀ʰ e^{−(μ+iω)τ} dτ` per mode.
    kernel: Vec<C64>,
}

/// Exact Duhamel increments of the direct forcing `(P div F, div f)`.
pub(crate) struct ForcingIntegrator {
    modes: Vec<ForcingMode>,
    h: f64,
}

impl ForcingIntegrator {
    pub fn new(ops: &SpectralOps, forcing: &ForcingSpec, h: f64) -> Self {
        let grid = ops.grid;
        let mut modes = Vec::new();
        let kernel_for = |omega: f64| -> Vec<C64> {
            ops.mu
                .iter()
                .map(|&m| exp_integral(C64::new(m, omega), h))
                .collect()
        };
        for term in &forcing.tensor.terms {
            if term.amplitude == 0.0 {
                continue;
            }
            let rows: Vec<Vec<Vec<C64>>> = term
                .shape
                .components
                .iter()
                .map(|row| row.iter().map(|c| ops.forward(&c.values)).collect())
                .collect();
            let mut u = ops.div_tensor(&rows);
            ops.leray(&mut u);
            for c in u.iter_mut().flatten() {
                *c *= term.amplitude;
            }
            let mut src = SpecState::zeros(grid);
            src.u = u;
            let omega = term.omega(forcing.period);
            modes.push(ForcingMode {
                omega,
                phase: term.phase,
                src,
                kernel: kernel_for(omega),
            });
        }
        for term in &forcing.vector.terms {
            if term.amplitude == 0.0 {
                continue;
            }
            let f: Vec<Vec<C64>> = term.shape.components.iter().map(|c| ops.forward(&c.values)).collect();
            let mut src = SpecState::zeros(grid);
            src.th = ops.divergence(&f);
            for c in &mut src.th {
                *c *= term.amplitude;
            }
            let omega = term.omega(forcing.period);
            modes.push(ForcingMode {
                omega,
                phase: term.phase,
                src,
                kernel: kernel_for(omega),
            });
        }
        ForcingIntegrator { modes, h }
    }

    /// Adds `∫_{t}^{t+h} e^{−(t+h−s)L} C(s) ds` to `x`, with `t_end = t + h`.
    pub fn add_increment(&self, x: &mut SpecState, t_end: f64) {
        debug_assert!(self.h > 0.0);
        for m in &self.modes {
            let rot = C64::from_polar(1.0, m.omega * t_end);
            for (dst, src) in x.rows_mut().zip(m.src.rows()) {
                for ((d, s), k) in dst.iter_mut().zip(src).zip(&m.kernel) {
                    let w = rot * k;
                    let f = match m.phase {
                        Phase::Cos => w.re,
                        Phase::Sin => w.im,
                    };
                    *d += *s * f;
                }
            }
        }
    }
}

/// Which pieces of the nonlinearity are switched on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct SourceFlags {
    pub velocity_transport: bool,
    pub temperature_transport: bool,
    pub gravity: bool,
}

/// Real-space inputs of the source terms at one time.
pub(crate) struct RealInputs<'a> {
    pub u: &'a [Vec<f64>],
    pub theta: &'a [f64],
    pub g: Option<&'a [Vec<f64>]>,
}

/// `[−P div(u⊗u) + κP(θg); −div(uθ)]` with dealiased products.
pub(crate) fn source_terms(ops: &SpectralOps, inp: &RealInputs, kappa: f64, flags: SourceFlags) -> SpecState {
    let grid = ops.grid;
    let dim = grid.dim;
    let n = grid.len();
    let mut out = SpecState::zeros(grid);
    let product = |a: &[f64], b: &[f64]| -> Vec<C64> {
        let prod: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
        let mut c = ops.forward(&prod);
        ops.dealias(&mut c);
        c
    };
    if flags.velocity_transport || flags.gravity {
        let mut vel = vec![vec![ZERO; n]; dim];
        if flags.velocity_transport {
            // symmetric tensor: compute each (i, j ≥ i) product once
            let mut t: Vec<Vec<Vec<C64>>> = vec![vec![Vec::new(); dim]; dim];
            for i in 0..dim {
                for j in i..dim {
                    t[i][j] = product(&inp.u[i], &inp.u[j]);
                }
            }
            for i in 0..dim {
                for j in 0..i {
                    t[i][j] = t[j][i].clone();
                }
            }
            let div = ops.div_tensor(&t);
            for (v, d) in vel.iter_mut().zip(div) {
                for (x, y) in v.iter_mut().zip(d) {
                    *x -= y;
                }
            }
        }
        if flags.gravity {
            if let Some(g) = inp.g {
                for (v, gi) in vel.iter_mut().zip(g) {
                    let tg = product(inp.theta, gi);
                    for (x, y) in v.iter_mut().zip(tg) {
                        *x += y * kappa;
                    }
                }
            }
        }
        ops.leray(&mut vel);
        out.u = vel;
    }
    if flags.temperature_transport {
        let flux: Vec<Vec<C64>> = inp.u.iter().map(|ui| product(ui, inp.theta)).collect();
        let div = ops.divergence(&flux);
        for (x, y) in out.th.iter_mut().zip(div) {
            *x = -y;
        }
    }
    out
}

/// `[−P div(u⊗v); −div(uξ)]` for `a = (u, ·)`, `b = (v, ξ)`.
pub(crate) fn pair_terms(ops: &SpectralOps, a: &State, b: &State) -> SpecState {
    let dim = ops.grid.dim;
    let product = |x: &[f64], y: &[f64]| -> Vec<C64> {
        let prod: Vec<f64> = x.iter().zip(y).map(|(p, q)| p * q).collect();
        let mut c = ops.forward(&prod);
        ops.dealias(&mut c);
        c
    };
    let ua = &a.u.components;
    let ub = &b.u.components;
    let t: Vec<Vec<Vec<C64>>> = (0..dim)
        .map(|i| (0..dim).map(|j| product(&ua[i].values, &ub[j].values)).collect())
        .collect();
    let mut vel = ops.div_tensor(&t);
    for c in vel.iter_mut().flatten() {
        *c = -*c;
    }
    ops.leray(&mut vel);
    let flux: Vec<Vec<C64>> = ua.iter().map(|c| product(&c.values, &b.theta.values)).collect();
    let th = ops.divergence(&flux).into_iter().map(|c| -c).collect();
    SpecState { u: vel, th }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_terms_match_symmetric_sources() {
        let g = GridSpec::new(3, 8, 2.0 * std::f64::consts::PI).unwrap();
        let ops = SpectralOps::for_grid(g);
        let u = VectorField::from_fn(g, |x| [x[1].sin(), x[2].cos(), (x[0] + x[1]).sin()]);
        let th = ScalarField::from_fn(g, |x| (2.0 * x[0]).cos());
        let s = State::new(u, th).unwrap();
        let a = pair_terms(&ops, &s, &s);
        let uv: Vec<Vec<f64>> = s.u.components.iter().map(|c| c.values.clone()).collect();
        let inp = RealInputs {
            u: &uv,
            theta: &s.theta.values,
            g: None,
        };
        let flags = SourceFlags {
            velocity_transport: true,
            temperature_transport: true,
            gravity: false,
        };
        let b = source_terms(&ops, &inp, 0.0, flags);
        assert!(a.max_diff(&b) < 1e-13);
    }

    #[test]
    fn phi_pair_branches_are_continuous() {
        let lo = phi_pair(0.5 - 1e-12);
        let hi = phi_pair(0.5 + 1e-12);
        assert!((lo.0 - hi.0).abs() < 1e-11 && (lo.1 - hi.1).abs() < 1e-11);
        assert_eq!(phi_pair(0.0), (1.0, 0.5));
        let z: f64 = 3.0;
        let n = 100_000;
        let (mut a, mut b) = (0.0, 0.0);
        for i in 0..n {
            let x = (i as f64 + 0.5) / n as f64;
            a += (-z * x).exp() / n as f64;
            b += x * (-z * x).exp() / n as f64;
        }
        let (pa, pb) = phi_pair(z);
        assert!((pa - a).abs() < 1e-9 && (pb - b).abs() < 1e-9);
    }
}
