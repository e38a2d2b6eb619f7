use num_rational::BigRational;
use proptest::prelude::*;

use resistkit::bits::negate;
use resistkit::dicttest::{fold_representatives, make_random_odd, run_test, FunctionOracle, Mode};
use resistkit::distribution::{CorrelationMatrix, Distribution};
use resistkit::gaussian::isserlis;
use resistkit::multigraph::enumerate_odd_multigraphs;
use resistkit::bits::VertexSet;
use resistkit::partite::{greedy_integralize, Constraint, PartiteInstance};
use resistkit::predicate::Predicate;
use resistkit::rng::stream;
use resistkit::vanishing::VanishingCertificate;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn lin4_identity() -> (Predicate, VanishingCertificate) {
    let p = Predicate::named("lin4").unwrap();
    let odd: Vec<u32> = p.satisfying_points().collect();
    let cert = VanishingCertificate::singleton(&p, 8, Distribution::uniform_over(4, &odd).unwrap()).unwrap();
    (p, cert)
}

fn random_fs(seed: u64, n: usize) -> Vec<FunctionOracle> {
    let mut rng = stream(seed, 0);
    (0..4).map(|_| make_random_odd(n, &mut rng).unwrap()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn exact_matches_monte_carlo(seed in any::<u64>(), n in 1usize..=3, eps_num in 0i64..=10) {
        let (p, cert) = lin4_identity();
        let fs = random_fs(seed, n);
        let eps = q(eps_num, 10);
        let exact = run_test(&p, &cert, &eps, &fs, Mode::Exact, 0, 0).unwrap();
        let mc = run_test(&p, &cert, &eps, &fs, Mode::Mc, seed, 1_000_000).unwrap();
        let se = mc.std_err.unwrap().max(1e-12);
        prop_assert!((exact.probability - mc.probability).abs() <= 4.0 * se,
            "exact {} mc {} se {}", exact.probability, mc.probability, se);
    }

    #[test]
    fn full_noise_gives_the_density(seed in any::<u64>(), n in 1usize..=4) {
        let (p, cert) = lin4_identity();
        let r = run_test(&p, &cert, &q(1, 1), &random_fs(seed, n), Mode::Exact, 0, 0).unwrap();
        prop_assert_eq!(r.exact_value.unwrap(), q(1, 2));
    }

    #[test]
    fn folding_does_not_change_acceptance(seed in any::<u64>(), layer in 0usize..4) {
        let (p, cert) = lin4_identity();
        let fs = random_fs(seed, 3);
        let base = run_test(&p, &cert, &q(1, 10), &fs, Mode::Exact, 0, 0).unwrap();
        let mut rng = stream(seed, 1);
        let mut table = fs[layer].table().unwrap();
        for x in 0..8u32 {
            if x >> 2 & 1 == 1 {
                table[x as usize] = if rand::Rng::random_bool(&mut rng, 0.5) { 1.0 } else { -1.0 };
            }
        }
        let mut swapped = fs.clone();
        swapped[layer] = fold_representatives(&FunctionOracle::from_table(3, table).unwrap()).unwrap();
        let again = run_test(&p, &cert, &q(1, 10), &swapped, Mode::Exact, 0, 0).unwrap();
        prop_assert_eq!(base.exact_value, again.exact_value);
    }
}

proptest! {
    #[test]
    fn enumerated_graphs_are_odd_sorted_and_distinct(mask in 1u32..64, m in 1usize..=5) {
        let gs = enumerate_odd_multigraphs(VertexSet(mask), m);
        prop_assert!(gs.iter().all(|g| g.is_odd_degree() && g.edge_count() <= m));
        prop_assert!(gs.windows(2).all(|w| w[0] < w[1]));
        if mask.count_ones() % 2 == 1 {
            prop_assert!(gs.is_empty());
        }
    }

    #[test]
    fn symmetrizing_keeps_second_moments(weights in proptest::collection::vec(1u32..100, 6)) {
        let p = Predicate::named("nae3").unwrap();
        let sat: Vec<u32> = p.satisfying_points().collect();
        let total: i64 = weights.iter().map(|&w| w as i64).sum();
        let mu = Distribution::<BigRational>::new(3, sat.iter().zip(&weights).map(|(&x, &w)| (x, q(w as i64, total))))
            .unwrap();
        let s = mu.symmetrize(&p).unwrap();
        prop_assert!(s.biases().iter().all(|b| *b == q(0, 1)));
        prop_assert_eq!(s.correlation_matrix(), mu.correlation_matrix());
        for x in 0..8u32 {
            prop_assert_eq!(s.weight(x), s.weight(negate(x, 3)));
        }
    }

    #[test]
    fn isserlis_ignores_index_order(a in -0.9f64..0.9, b in -0.9f64..0.9, perm in Just(vec![2usize, 0, 1, 1, 0, 2]).prop_shuffle()) {
        let rho = CorrelationMatrix::<f64>::from_off_diagonal(3, [(0, 1, a), (0, 2, b), (1, 2, a * b)]).unwrap();
        let base = isserlis(&rho, &[0, 0, 1, 1, 2, 2]);
        prop_assert!((isserlis(&rho, &perm) - base).abs() < 1e-12);
    }

    #[test]
    fn greedy_never_lowers_the_objective(seed in any::<u64>()) {
        let mut rng = stream(seed, 0);
        let p = Predicate::named("nae3").unwrap();
        let n = 3;
        let constraints: Vec<Constraint> = (0..6)
            .map(|_| Constraint {
                vars: (0..3).map(|_| rand::Rng::random_range(&mut rng, 0..n)).collect(),
                signs: (0..3).map(|_| if rand::Rng::random_bool(&mut rng, 0.5) { 1 } else { -1 }).collect(),
            })
            .collect();
        let inst = PartiteInstance::new(p, n, constraints).unwrap();
        let alpha: Vec<BigRational> = (0..3 * n).map(|_| q(rand::Rng::random_range(&mut rng, -4..=4), 4)).collect();
        let before = inst.multilinear_value(&alpha);
        let a = greedy_integralize(&inst, &alpha);
        let after = inst.multilinear_value(&a.values.iter().map(|&v| q(v as i64, 1)).collect::<Vec<_>>());
        prop_assert!(after >= before);
    }
}
