//! Property checks for the numerical building blocks.

#[path = "support/checks.rs"]
mod checks;

use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn jordan_round_trip(seed in any::<u64>(), pairs in 0usize..4, reals in 0usize..3) {
        prop_assume!(pairs + reals > 0);
        prop_assert!(checks::jordan_round_trip(seed, pairs, reals) <= 1e-8);
    }

    #[test]
    fn vec_kron_identity(seed in any::<u64>(), p in 1usize..5, q in 1usize..5, r in 1usize..5, s in 1usize..5) {
        let (res, unvec_ok) = checks::vec_kron_residual(seed, p, q, r, s);
        prop_assert!(res <= 1e-12);
        prop_assert!(unvec_ok);
    }

    #[test]
    fn pseudo_inverse_penrose(seed in any::<u64>(), m in 1usize..7, n in 1usize..7, k in 1usize..7) {
        prop_assert!(checks::penrose_residual(seed, m, n, k) <= 1e-9);
    }

    #[test]
    fn rotation_log_is_exact(theta in -3.1f64..3.1) {
        prop_assert!(checks::rotation_log_error(theta) <= 1e-12);
    }

    #[test]
    fn log_inverts_exp(seed in any::<u64>(), pairs in 0usize..3, reals in 0usize..3) {
        prop_assume!(pairs + reals > 0);
        prop_assert!(checks::log_exp_error(seed, pairs, reals) <= 1e-8);
    }

    #[test]
    fn riccati_residuals(seed in any::<u64>(), n in 1usize..5, m in 1usize..4) {
        let r = checks::riccati_check(seed, n, m);
        prop_assert!(r.noise_residual <= 1e-10);
        prop_assert!(r.covariance_residual <= 1e-10);
        prop_assert!(r.agreement <= 1e-6);
    }
}

#[test]
fn dt_block_at_quarter_rate_is_quarter_turn() {
    assert!(checks::dt_quarter_block_error() <= 1e-12);
}

#[test]
fn persistent_excitation_ranks() {
    let bad = checks::pe_rank_mismatches();
    assert!(bad.is_empty(), "{}", bad.join("\n"));
}
