//! Write a state to the binary field format and read it back.

use mildflow::field::State;
use mildflow::io::{read_state, write_state};
use mildflow::presets::{make_preset, params};
use mildflow::{GridSpec, Result};

fn main() -> Result<()> {
    let g = GridSpec::new(3, 16, 1.0)?;
    let u = make_preset("taylor-green", g, &params(&[("amplitude", 1.0)]))?.into_vector()?;
    let th = make_preset("gaussian-bump", g, &params(&[("amplitude", 0.5), ("sigma", 0.1)]))?.into_scalar()?;
    let x = State::new(u, th)?;

    let path = std::env::temp_dir().join("mildflow-example.bqf");
    write_state(&path, &x)?;
    let y = read_state(&path)?;
    println!("wrote {} ({} bytes)", path.display(), std::fs::metadata(&path)?.len());
    println!("round-trip difference {:e}", x.sub(&y).max_abs());
    std::fs::remove_file(&path)?;
    Ok(())
}
