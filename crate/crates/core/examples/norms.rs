//! Weak-Morrey norms of a few standard profiles, and the scaling identity.

use mildflow::norms::{lorentz_norm, morrey_lorentz_norm, scaling_check, BallSampler, NormParams, Region, ScalablePreset};
use mildflow::presets::{gaussian, indicator_ball};
use mildflow::{GridSpec, Result};

fn main() -> Result<()> {
    let g = GridSpec::new(3, 32, 1.0)?;
    let sampler = BallSampler::default();
    let ball = indicator_ball(g, 0.25, 1.0);
    let bump = gaussian(g, 1.0, 0.1);

    for p in [2.0, 3.0, 6.0] {
        let weak = lorentz_norm(&ball, Region::WholeBox, p, f64::INFINITY)?;
        println!("indicator  L^({p},inf) = {weak:.6}");
    }

    let crit = NormParams::critical(3.0, 3)?;
    for (name, f) in [("indicator", &ball), ("gaussian", &bump)] {
        let est = morrey_lorentz_norm(f, crit, &sampler)?;
        println!(
            "{name:<10} critical norm >= {:.6}  (ball at {:?}, radius {:.4}, {} balls)",
            est.value, est.center, est.radius, est.balls
        );
    }

    let preset = ScalablePreset::Gaussian { amplitude: 1.0, sigma: 0.08 };
    for c in [0.5, 2.0] {
        println!("scaling ratio at c = {c}: {:.4}", scaling_check(preset, g, c, crit, &sampler)?);
    }
    Ok(())
}
