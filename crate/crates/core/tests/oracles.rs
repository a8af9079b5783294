//! Construct-then-recover checks for the physical-coordinate solvers.
//!
//! A plant in physical coordinates is built first, so `T_s` and `X` are
//! known; the solvers only see the Jordan-coordinate data derived from it.

#[path = "support/checks.rs"]
mod checks;

const INSTANCES: usize = 100;
const TOL: f64 = 1e-8;

#[test]
fn ts_recovers_planted_transform() {
    let out = checks::ts_oracle(0x7501, INSTANCES);
    let bad = checks::oracle_failures(&out, TOL);
    assert!(bad.is_empty(), "{} of {INSTANCES} failed:\n{}", bad.len(), bad.join("\n"));
    println!("worst T_s error over {INSTANCES} instances: {:e}", checks::worst(&out));
}

#[test]
fn x_recovers_planted_coupling() {
    let out = checks::x_oracle(0x7502, INSTANCES);
    let bad = checks::oracle_failures(&out, TOL);
    assert!(bad.is_empty(), "{} of {INSTANCES} failed:\n{}", bad.len(), bad.join("\n"));
    println!("worst X error over {INSTANCES} instances: {:e}", checks::worst(&out));
}
