use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use weakns::field::{divergence_sup, leray_project};
use weakns::heat::heat_evolve;
use weakns::lorentz::{calderon_split, distribution_function, lorentz_quasinorm, LorentzProfile};
use weakns::stokes::{duhamel_solve, ForcingTensor};
use weakns::{Grid, GridField, Magnitudes, TimeGrid};

fn grid() -> Grid {
    Grid::new(8, 2.0).unwrap()
}

fn random_field(seed: u64, scale: f64) -> GridField {
    let g = grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comps = [0, 1, 2].map(|_| (0..g.cells()).map(|_| scale * rng.gen_range(-1.0..1.0)).collect());
    GridField::new(g, comps).unwrap()
}

fn random_tensor(seed: u64) -> ForcingTensor {
    let g = grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = std::array::from_fn(|_| (0..g.cells()).map(|_| rng.gen_range(-1.0..1.0)).collect());
    ForcingTensor::new(g, entries).unwrap()
}

fn max_diff(a: &GridField, b: &GridField) -> f64 {
    (a - b).max_abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn weak_norm_is_homogeneous(seed in any::<u64>(), lambda in 0.01f64..100.0) {
        let f = random_field(seed, 1.0);
        let a = lorentz_quasinorm(&f.scale(lambda), 3.0, f64::INFINITY).unwrap();
        let b = lambda * lorentz_quasinorm(&f, 3.0, f64::INFINITY).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * b);
    }

    #[test]
    fn distribution_is_nonincreasing(seed in any::<u64>(), a in 0.0f64..1.5, da in 0.0f64..1.0) {
        let f = random_field(seed, 1.0);
        let lo = distribution_function(&f, a).unwrap();
        let hi = distribution_function(&f, a + da).unwrap();
        prop_assert!(hi <= lo);
    }

    #[test]
    fn weak_norm_below_strong_norm(seed in any::<u64>()) {
        let f = random_field(seed, 1.0);
        let p = LorentzProfile::of(&f);
        prop_assert!(p.quasinorm(3.0, f64::INFINITY) <= f.lp_norm(3.0) * (1.0 + 1e-12));
    }

    #[test]
    fn pointwise_split_reassembles(seed in any::<u64>(), n in 0.05f64..1.8) {
        let f = random_field(seed, 1.0);
        let pair = calderon_split(&f, n, false).unwrap();
        prop_assert_eq!(max_diff(&pair.whole(), &f), 0.0);
        prop_assert!(pair.minus.max_abs() <= n);
    }

    #[test]
    fn divfree_split_reassembles_the_projection(seed in any::<u64>(), n in 0.05f64..1.8) {
        let f = random_field(seed, 1.0);
        let pair = calderon_split(&f, n, true).unwrap();
        let pf = leray_project(&f).unwrap();
        prop_assert!(max_diff(&pair.whole(), &pf) < 1e-12);
        prop_assert!(divergence_sup(&pair.plus).unwrap() < 1e-10);
        prop_assert!(divergence_sup(&pair.minus).unwrap() < 1e-10);
    }

    #[test]
    fn projection_is_idempotent(seed in any::<u64>()) {
        let f = random_field(seed, 3.0);
        let p = leray_project(&f).unwrap();
        let pp = leray_project(&p).unwrap();
        prop_assert!(max_diff(&p, &pp) < 1e-12);
        prop_assert!(divergence_sup(&p).unwrap() < 1e-10);
        prop_assert!(p.inner(&p) <= f.inner(&f) * (1.0 + 1e-12));
    }

    #[test]
    fn heat_semigroup_composes(seed in any::<u64>(), s in 0.0f64..0.2, t in 0.0f64..0.2) {
        let f = leray_project(&random_field(seed, 1.0)).unwrap();
        let two = heat_evolve(&heat_evolve(&f, s).unwrap(), t).unwrap();
        let one = heat_evolve(&f, s + t).unwrap();
        prop_assert!(max_diff(&one, &two) < 1e-12);
    }

    #[test]
    fn heat_dissipates_energy(seed in any::<u64>(), s in 0.0f64..0.2, ds in 0.0f64..0.2) {
        let f = random_field(seed, 1.0);
        let a = heat_evolve(&f, s).unwrap();
        let b = heat_evolve(&f, s + ds).unwrap();
        prop_assert!(b.inner(&b) <= a.inner(&a) * (1.0 + 1e-12));
    }

    #[test]
    fn duhamel_is_linear(s1 in any::<u64>(), s2 in any::<u64>(), a in -3.0f64..3.0) {
        let times = TimeGrid::uniform(0.1, 4).unwrap();
        let f: Vec<ForcingTensor> = (0..5).map(|j| random_tensor(s1.wrapping_add(j))).collect();
        let g: Vec<ForcingTensor> = (0..5).map(|j| random_tensor(s2.wrapping_add(j))).collect();
        let combo: Vec<ForcingTensor> = f
            .iter()
            .zip(&g)
            .map(|(x, y)| {
                let entries = std::array::from_fn(|e| {
                    x.entry(e / 3, e % 3).iter().zip(y.entry(e / 3, e % 3)).map(|(p, q)| a * p + q).collect()
                });
                ForcingTensor::new(grid(), entries).unwrap()
            })
            .collect();
        let uf = duhamel_solve(&f, &times).unwrap();
        let ug = duhamel_solve(&g, &times).unwrap();
        let uc = duhamel_solve(&combo, &times).unwrap();
        for j in 0..times.len() {
            let expect = &uf.fields()[j].scale(a) + &ug.fields()[j];
            let scale = expect.max_abs().max(1e-3);
            prop_assert!(max_diff(&uc.fields()[j], &expect) < 1e-10 * scale);
            prop_assert!(divergence_sup(&uc.fields()[j]).unwrap() < 1e-10);
        }
    }
}
