use lossy_gbs::benchmark::{tvd_empirical, Distribution};
use lossy_gbs::decompose::{decompose_sdp, SdpOptions};
use lossy_gbs::gaussian::{apply_loss, apply_passive, squeezed_input, symplectic_residual, williamson};
use lossy_gbs::hafnian::PhotonPattern;
use lossy_gbs::linalg::{haar_unitary, min_eig_sym, passive_symplectic};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn patterns(modes: usize) -> impl Strategy<Value = Vec<PhotonPattern>> {
    prop::collection::vec(prop::collection::vec(0usize..3, modes).prop_map(PhotonPattern), 1..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tvd_is_a_metric(a in patterns(3), b in patterns(3), c in patterns(3)) {
        let (a, b, c) = (
            Distribution::from_patterns(3, &a).unwrap(),
            Distribution::from_patterns(3, &b).unwrap(),
            Distribution::from_patterns(3, &c).unwrap(),
        );
        let ab = tvd_empirical(&a, &b);
        prop_assert!(tvd_empirical(&a, &a).abs() < 1e-15);
        prop_assert!((ab - tvd_empirical(&b, &a)).abs() < 1e-15);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
        prop_assert!(ab <= tvd_empirical(&a, &c) + tvd_empirical(&c, &b) + 1e-12);
    }

    #[test]
    fn threshold_conversion_is_idempotent(a in patterns(4)) {
        let d = Distribution::from_patterns(4, &a).unwrap();
        let once = d.to_threshold();
        let twice = once.to_threshold();
        prop_assert!((once.total() - d.total()).abs() < 1e-12);
        prop_assert!(tvd_empirical(&once, &twice) < 1e-15);
        prop_assert!(once.iter().all(|(p, _)| p.counts().iter().all(|&n| n <= 1)));
    }

    #[test]
    fn interferometers_are_symplectic(n in 1usize..6, seed in any::<u64>()) {
        let u = haar_unitary(n, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!(symplectic_residual(&passive_symplectic(&u)) < 1e-10);
    }

    #[test]
    fn symplectic_spectrum_is_invariant(
        r in prop::collection::vec(0.0f64..1.5, 1..4),
        eta in 0.05f64..1.0,
        seed in any::<u64>(),
    ) {
        let m = r.len();
        let v = apply_loss(&squeezed_input(&r), &vec![eta; m]).unwrap();
        let u = haar_unitary(m, &mut ChaCha8Rng::seed_from_u64(seed));
        let rotated = apply_passive(&v, &u).unwrap();
        let (a, b) = (williamson(&v).unwrap(), williamson(&rotated).unwrap());
        for (x, y) in a.nu.iter().zip(&b.nu) {
            prop_assert!((x - y).abs() < 1e-8 * x.max(1.0));
        }
        prop_assert!(a.nu.iter().all(|&x| x >= 1.0 - 1e-9));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn split_is_physical(r in prop::collection::vec(0.0f64..2.0, 1..3), eta in 0.05f64..0.99, seed in any::<u64>()) {
        let m = r.len();
        let u = haar_unitary(m, &mut ChaCha8Rng::seed_from_u64(seed));
        let v = apply_passive(&apply_loss(&squeezed_input(&r), &vec![eta; m]).unwrap(), &u).unwrap();
        let dec = decompose_sdp(&v, &SdpOptions::default()).unwrap();
        prop_assert!(dec.stats.reconstruction < 1e-8);
        prop_assert!(min_eig_sym(&dec.w) > -1e-8);
        let nu = williamson(&dec.vp).unwrap().nu;
        prop_assert!(nu.iter().all(|&x| (x - 1.0).abs() < 1e-5), "{nu:?}");
    }
}
