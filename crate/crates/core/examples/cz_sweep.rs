//! S and C across the controlled-phase family, written as CSV to stdout.
//! Both grow as sin(θ/2), so C = 2S along the whole family.

use qcausal::cli::{sweep, write_sweep_csv, Family};
use qcausal::diamond::DEFAULT_TOL;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let records = sweep(
        Family::Cz,
        0.0,
        std::f64::consts::PI,
        9,
        0,
        false,
        DEFAULT_TOL,
    )?;
    write_sweep_csv(&records, std::io::stdout())?;
    for r in &records {
        let ratio = if r.s_value > 1e-6 {
            r.c_value / r.s_value
        } else {
            f64::NAN
        };
        eprintln!("theta {:.4}: C/S = {ratio:.6}", r.theta);
    }
    Ok(())
}
