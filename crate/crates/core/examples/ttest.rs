//! Welch's t-test between two conditions.

use emistrip::welch_t_test;

fn main() -> anyhow::Result<()> {
    let clean = [0.71, 0.64, 0.69, 0.75, 0.66, 0.70];
    let attacked = [0.52, 0.61, 0.48, 0.57, 0.55, 0.50];
    let r = welch_t_test(&clean, &attacked)?;
    println!("t = {:.4}, df = {:.3}, p = {:.3e}", r.t_statistic, r.degrees_of_freedom, r.p_value);

    let r = welch_t_test(&[1.0, 2.0, 3.0, 4.0], &[2.0, 3.0, 4.0, 5.0])?;
    println!("t = {:.6}, df = {:.3}, p = {:.9}", r.t_statistic, r.degrees_of_freedom, r.p_value);

    println!("constant samples: {}", welch_t_test(&[1.0, 1.0], &[1.0, 1.0]).unwrap_err());
    Ok(())
}
