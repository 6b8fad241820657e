//! Empirical constants of the linear and bilinear estimates, with the
//! closed-form constants and the smallness expressions they feed.

use mildflow::norms::BallSampler;
use mildflow::runner::{estimate_suite, EstimateConfig};
use mildflow::stability::{constants_c1_c2, smallness_report, SmallnessInputs, StabilityParams};
use mildflow::{GridSpec, Result};

fn main() -> Result<()> {
    let g = GridSpec::new(3, 16, std::f64::consts::TAU)?;
    let stab = StabilityParams::new(3.0, 6.0, 6.0, 3.0, 3)?;
    let est = EstimateConfig { ensemble: 2, ..Default::default() };
    let rows = estimate_suite(g, 3.0, &stab, &est, 0, &BallSampler::default())?;
    for r in &rows {
        println!("{:<24} constant {:.4} over {} samples", r.estimate, r.constant, r.samples);
    }

    let (c1, c2) = constants_c1_c2(3.0, 6.0, 6.0)?;
    println!("C1 = {c1:.6}, C2 = {c2:.6}");

    let k = rows.iter().find(|r| r.estimate == "bilinear").map(|r| r.constant);
    let inputs = SmallnessInputs {
        k,
        rho: Some(1e-3),
        perturbation: Some(1e-4),
        g_norm: Some(1.0),
        g_gap: Some(0.0),
        kappa: Some(0.01),
        c_semigroup: Some(1.0),
    };
    let report = smallness_report(&inputs, &stab)?;
    for e in &report.expressions {
        println!("{}: {:.4e} (holds: {})", e.name, e.value, e.holds);
    }
    Ok(())
}
