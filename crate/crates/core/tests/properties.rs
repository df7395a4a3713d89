use proptest::prelude::*;

use guerra_cascades::cascade::build_cascade;
use guerra_cascades::interpolation::{build_coupled_system, draw_disorder, InterpolationSetup, OverlapKernel};
use guerra_cascades::mu_quadrature::mu_r_quadrature;
use guerra_cascades::pd_process::sample_pd;
use guerra_cascades::quadrature::QuadratureSpec;
use guerra_cascades::recursion::phi0;
use guerra_cascades::sk_model::sample_hamiltonian;
use guerra_cascades::{MixtureFunction, RsbParams, Seed};

fn rsb_pair() -> impl Strategy<Value = RsbParams> {
    (0.1..0.45f64, 0.55..0.95f64, 0.1..0.45f64, 0.55..0.9f64)
        .prop_map(|(m1, m2, q1, q2)| RsbParams::new(&[m1, m2], &[q1, q2]).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pd_points_decrease_and_weights_normalize(m in 0.05..0.95f64, seed in any::<u64>()) {
        let pd = sample_pd(m, 300, Seed::new(seed)).unwrap();
        prop_assert!(pd.u.windows(2).all(|p| p[0] > p[1]));
        prop_assert!((pd.w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(pd.tail_bound >= 0.0);
    }

    #[test]
    fn cascade_masses_partition_unity(rsb in rsb_pair(), b in 2usize..40, seed in any::<u64>()) {
        let c = build_cascade(&rsb, b, Seed::new(seed)).unwrap();
        prop_assert!((c.overlap_masses().iter().sum::<f64>() - 1.0).abs() < 1e-10);
        let kept: f64 = c.w_compensated().iter().chain(c.remainder()).sum();
        prop_assert!((kept - 1.0).abs() < 1e-10);
        prop_assert!((c.w().iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn gibbs_systems_normalize(rsb in rsb_pair(), t in 0.0..=1.0f64, h in -1.0..1.0f64, seed in any::<u64>()) {
        let setup = InterpolationSetup { n: 3, mixture: MixtureFunction::sk(0.9).unwrap(), rsb, b: 6, h };
        let g = draw_disorder(&setup, Seed::new(seed)).unwrap().system(t, h);
        prop_assert!((g.total_mass() - 1.0).abs() < 1e-10);
        prop_assert!((g.overlap_masses().iter().sum::<f64>() - 1.0).abs() < 1e-10);
        for r in 1..=2 {
            let c = build_coupled_system(&setup, t, r, Seed::new(seed)).unwrap();
            prop_assert!((c.total_mass() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn error_density_average_is_nonnegative(rsb in rsb_pair(), t in 0.0..=1.0f64, seed in any::<u64>()) {
        let setup = InterpolationSetup { n: 3, mixture: MixtureFunction::new(&[(2, 1.0), (4, 0.6)]).unwrap(), rsb, b: 5, h: 0.2 };
        let q = setup.rsb.q().to_vec();
        let g = draw_disorder(&setup, Seed::new(seed)).unwrap().system(t, setup.h);
        let mix = &setup.mixture;
        prop_assert!(g.pair_average(|r, x| mix.delta(x, q[r])) >= -1e-12);
    }

    #[test]
    fn hamiltonian_is_deterministic_and_spin_flip_even(seed in any::<u64>()) {
        let mix = MixtureFunction::sk(1.0).unwrap();
        let a = sample_hamiltonian(5, &mix, Seed::new(seed)).unwrap();
        prop_assert_eq!(&a, &sample_hamiltonian(5, &mix, Seed::new(seed)).unwrap());
        // only even parities at p = 2: H(sigma) = H(-sigma)
        for s in 0..32usize {
            prop_assert!((a.values[s] - a.values[s ^ 31]).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn mu_routes_agree(t in 0.0..=1.0f64, h in -0.5..0.5f64, r in 1usize..=2) {
        let mix = MixtureFunction::new(&[(1, 0.3), (2, 0.8)]).unwrap();
        let rsb = RsbParams::new(&[0.35, 0.9], &[0.25, 0.65]).unwrap();
        let q = rsb.q()[r];
        let rep = mu_r_quadrature(1, &mix, &rsb, h, t, r, OverlapKernel::ErrorDensity { q }, &QuadratureSpec::with_nodes(8)).unwrap();
        prop_assert!(rep.routes_agree(), "{:?}", rep);
        prop_assert!(rep.w_route >= -1e-12);
    }

    #[test]
    fn phi0_increases_with_field(h in 0.0..1.0f64, dh in 0.05..0.5f64) {
        let mix = MixtureFunction::sk(1.0).unwrap();
        let rsb = RsbParams::new(&[0.5, 1.0], &[0.3, 0.7]).unwrap();
        let quad = QuadratureSpec::with_nodes(24);
        let a = phi0(&rsb, &mix, h, &quad).unwrap().phi0;
        let b = phi0(&rsb, &mix, h + dh, &quad).unwrap().phi0;
        prop_assert!(b > a);
    }
}
