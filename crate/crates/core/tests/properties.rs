use approx::assert_relative_eq;
use proptest::prelude::*;

use markov_hitting::generators::{self, biased_cycle, random_birth_death};
use markov_hitting::harness::{parse_report_json, report_json, SuiteReport};
use markov_hitting::spectral::{self, Grid};
use markov_hitting::{geometric, hitting, montecarlo};
use markov_hitting::{Chain, Config, Exec, SubsetMask, VerificationRecord};

fn reversible() -> impl Strategy<Value = Chain> {
    prop_oneof![
        (3usize..9, any::<u64>()).prop_map(|(n, seed)| random_birth_death(n, 0.5, seed).unwrap()),
        (3usize..9, 0.2f64..0.8, any::<u64>())
            .prop_map(|(n, q, seed)| generators::lazy_rw_graph(&generators::random_graph(n, q, seed), 0.5).unwrap()),
    ]
}

fn any_chain() -> impl Strategy<Value = Chain> {
    prop_oneof![reversible(), (3usize..10).prop_map(|n| biased_cycle(n).unwrap())]
}

/// A nonempty proper subset drawn from the low bits of `bits`.
fn proper_subset(c: &Chain, bits: u64) -> SubsetMask {
    let full = (1u64 << c.n()) - 1;
    let mut m = bits & full;
    if m == 0 || m == full {
        m = 1;
    }
    SubsetMask::from_bits(c, m)
}

/// A connected proper subset picked by `pick`.
fn connected_subset(c: &Chain, pick: usize) -> SubsetMask {
    let full = SubsetMask::full(c);
    let sets: Vec<SubsetMask> = c
        .connected_subsets(1.0, &Config::default())
        .unwrap()
        .into_iter()
        .filter(|b| b.len() < full.len())
        .collect();
    sets[pick % sets.len()].clone()
}

fn max_abs_diff(a: &nalgebra::DMatrix<f64>, b: &nalgebra::DMatrix<f64>) -> f64 {
    (a - b).amax()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn time_reversal_is_an_involution(c in any_chain()) {
        let back = c.time_reversal().unwrap().time_reversal().unwrap();
        prop_assert!(max_abs_diff(c.p(), back.p()) < 1e-12);
    }

    #[test]
    fn restriction_commutes_with_reversal(c in any_chain(), bits in any::<u64>()) {
        let b = proper_subset(&c, bits);
        let rev = c.time_reversal().unwrap();
        let lhs = c.restrict(&b).unwrap().adjoint();
        let rhs = rev.restrict(&b).unwrap().entries;
        prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn stationary_hitting_sits_below_twice_relaxation(c in reversible()) {
        let cfg = Config::default();
        let t_rel = spectral::relaxation_time(&c).unwrap();
        let h = hitting::t_h_pi(&c, &cfg).unwrap().value;
        prop_assert!(h <= 2.0 * t_rel + 1e-9);
        prop_assert!(h >= markov_hitting::constants::exit_lower() * t_rel);
    }

    #[test]
    fn exit_time_is_at_most_inverse_rate(c in reversible(), pick in any::<usize>()) {
        let b = connected_subset(&c, pick);
        let exit = hitting::stationary_exit(&c, &b).unwrap();
        let lambda = spectral::restricted_lambda(&c, &b).unwrap();
        prop_assert!(exit <= 1.0 / lambda * (1.0 + 1e-9));
    }

    #[test]
    fn profiles_are_monotone_and_ordered(c in reversible()) {
        let cfg = Config::default();
        let lam = spectral::spectral_profile(&c, &Grid::Auto, &cfg).unwrap();
        for w in lam.values.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
        let hat = spectral::spectral_profile_hat(&c, &Grid::Points(lam.breakpoints.clone()), &cfg).unwrap();
        for (l, h) in lam.values.iter().zip(&hat.values) {
            prop_assert!(l <= &(h + 1e-9));
        }
    }

    #[test]
    fn tail_mixture_matches_matrix_powers(c in reversible(), pick in any::<usize>(), m in 0u32..40) {
        let b = connected_subset(&c, pick);
        let mix = hitting::tail_mixture(&c, &b).unwrap();
        let direct = hitting::matrix_tail(&c, &b, m).unwrap();
        prop_assert!((mix.tail(m) - direct).abs() <= 1e-10);
    }

    #[test]
    fn geometric_norm_is_non_increasing(c in any_chain(), t in 1.0f64..50.0, dt in 0.0f64..50.0) {
        let a = geometric::geometric_norm(&c, t).unwrap();
        let b = geometric::geometric_norm(&c, t + dt).unwrap();
        prop_assert!(b <= a + 1e-9);
    }

    #[test]
    fn resolvent_matches_series(c in any_chain(), i in 0usize..4) {
        let t = [1.5, 2.0, 10.0, 100.0][i];
        let r = geometric::geometric_average(&c, t).unwrap().matrix;
        let s = geometric::geometric_series(&c, t).unwrap().matrix;
        prop_assert!(max_abs_diff(&r, &s) < 1e-10);
    }

    #[test]
    fn generators_are_seed_deterministic(n in 3usize..20, seed in any::<u64>()) {
        let a = random_birth_death(n, 0.5, seed).unwrap();
        let b = random_birth_death(n, 0.5, seed).unwrap();
        prop_assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn records_pass_iff_margin_within_tolerance(lhs in -10.0f64..10.0, rhs in -10.0f64..10.0) {
        let r = VerificationRecord::le("hitting_rel.upper", lhs, rhs);
        prop_assert_eq!(r.pass, r.margin >= -r.tolerance);
        prop_assert_eq!(r.margin, rhs - lhs);
    }

    #[test]
    fn reports_round_trip(vals in proptest::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 0..20)) {
        let records = vals.iter().enumerate()
            .map(|(i, &(a, b))| VerificationRecord::le(format!("tail.m{i}"), a, b))
            .collect();
        let report = SuiteReport::new("reversible_core", records);
        prop_assert_eq!(parse_report_json(&report_json(&report)).unwrap(), report);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn simulation_is_seed_deterministic(n in 3usize..7, seed in any::<u64>(), sim_seed in any::<u64>()) {
        let c = random_birth_death(n, 0.5, seed).unwrap();
        let target = SubsetMask::singleton(&c, n - 1);
        let mut start = vec![0.0; n];
        start[0] = 1.0;
        let cap = montecarlo::default_cap(&c, None);
        let a = montecarlo::simulate_hitting(&c, &start, &target, 2000, sim_seed, cap, Exec::Sequential).unwrap();
        let b = montecarlo::simulate_hitting(&c, &start, &target, 2000, sim_seed, cap, Exec::Parallel).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn unit_time_kernel_is_identity() {
    let c = biased_cycle(5).unwrap();
    let k = geometric::geometric_average(&c, 1.0).unwrap().matrix;
    assert_relative_eq!(k, nalgebra::DMatrix::identity(5, 5), epsilon = 1e-14);
}
