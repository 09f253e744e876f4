use proptest::prelude::*;

use fastchain::discrete_time::{frak_f, frak_f_spectral, kernel_spectrum, phi_map};
use fastchain::dp::{discrete_value_function, full_mask};
use fastchain::eigentime::{h_matrix, h_matrix_from_moments, inverse_speed, spectrum};
use fastchain::experiments::s2_closed_form;
use fastchain::generator::{combine, cycle_generator, decompose_into_cycles, Generator, ProbabilityVector};
use fastchain::graph::{Cycle, DirectedGraph};
use fastchain::linalg::{match_multisets, max_abs_diff, C64};
use fastchain::sample;

fn instance(seed: u64, n: usize, extra: usize) -> (ProbabilityVector, Generator) {
    let mut rng = sample::rng(seed);
    let pi = sample::random_probability(n, &mut rng);
    let l = sample::random_generator(&pi, extra, &mut rng).unwrap();
    (pi, l)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generator_json_round_trip(seed in any::<u64>(), n in 2usize..7) {
        let (pi, l) = instance(seed, n, 2);
        let text = serde_json::to_string(&l).unwrap();
        let back: Generator = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&back, &l);
        let p: ProbabilityVector = serde_json::from_str(&serde_json::to_string(&pi).unwrap()).unwrap();
        prop_assert_eq!(p, pi);
    }

    #[test]
    fn decomposition_recombines(seed in any::<u64>(), n in 2usize..7, extra in 0usize..5) {
        let (pi, l) = instance(seed, n, extra);
        let d = decompose_into_cycles(&l, &pi).unwrap();
        prop_assert!((d.total_weight() - 1.0).abs() < 1e-9);
        let back = combine(&d, &pi).unwrap();
        prop_assert!(max_abs_diff(back.matrix(), l.matrix()) <= 1e-9 * l.max_exit_rate().max(1.0));
    }

    #[test]
    fn hamiltonian_value_is_label_free(seed in any::<u64>(), n in 3usize..8) {
        let mut rng = sample::rng(seed);
        let pi = sample::random_probability(n, &mut rng);
        let a = sample::random_cycle(n, n, &mut rng);
        let b = sample::random_cycle(n, n, &mut rng);
        let fa = inverse_speed(&cycle_generator(&pi, &a).unwrap(), &pi).unwrap();
        let fb = inverse_speed(&cycle_generator(&pi, &b).unwrap(), &pi).unwrap();
        prop_assert!((fa - fb).abs() <= 1e-10 * fa.max(1.0));
    }

    #[test]
    fn scaling_the_generator_scales_f(seed in any::<u64>(), n in 2usize..7, alpha in 0.1f64..10.0) {
        let (pi, l) = instance(seed, n, 2);
        let f = inverse_speed(&l, &pi).unwrap();
        let fs = inverse_speed(&l.scaled(alpha), &pi).unwrap();
        prop_assert!((fs * alpha - f).abs() <= 1e-9 * f.max(1.0));
    }

    #[test]
    fn h_kernel_two_routes(seed in any::<u64>(), n in 2usize..8) {
        let (pi, l) = instance(seed, n, 3);
        let a = h_matrix(&l, &pi).unwrap();
        let b = h_matrix_from_moments(&l, &pi).unwrap();
        let scale = inverse_speed(&l, &pi).unwrap().max(1.0).powi(2);
        prop_assert!(max_abs_diff(&a, &b) <= 1e-8 * scale);
    }

    #[test]
    fn spectrum_is_conjugation_closed_with_positive_real_part(seed in any::<u64>(), n in 2usize..8) {
        let (_, l) = instance(seed, n, 3);
        let s = spectrum(&l).unwrap();
        prop_assert_eq!(s.len(), n - 1);
        prop_assert!(s.conjugation_defect() <= 1e-8);
        prop_assert!(s.values().iter().all(|z| z.re > 0.0));
    }

    #[test]
    fn phi_map_lands_in_zero_diagonal_kernels(seed in any::<u64>(), n in 2usize..7) {
        let (pi, l) = instance(seed, n, 2);
        let (k, lmax) = phi_map(&l).unwrap();
        prop_assert!((0..n).any(|x| k.matrix()[(x, x)].abs() <= 1e-15));
        prop_assert!(k.check_invariant(&pi).is_ok());
        let theta = kernel_spectrum(&k).unwrap();
        let lam: Vec<C64> = spectrum(&l).unwrap().values().iter().map(|z| C64::new(1.0, 0.0) - z / lmax).collect();
        prop_assert!(match_multisets(&theta, &lam).unwrap() <= 1e-7);
        let f = frak_f(&k, &pi).unwrap();
        prop_assert!((f - frak_f_spectral(&k).unwrap()).abs() <= 1e-8 * f.max(1.0));
    }

    #[test]
    fn dp_value_is_monotone_in_the_target(seed in any::<u64>(), n in 3usize..8, sub in any::<u32>(), extra in any::<u32>()) {
        let mut rng = sample::rng(seed);
        let g = sample::random_hamiltonian_digraph(n, 0.2, &mut rng);
        let t = discrete_value_function(&g, 0, full_mask(n) & !1).unwrap();
        let full = full_mask(n);
        let a = sub & full;
        let b = a | (extra & full);
        for i in 0..n {
            prop_assert!(t.value_at(i, a) <= t.value_at(i, b));
            if a != 0 {
                prop_assert!(t.value_at(i, a) >= a.count_ones() as f64);
            }
        }
    }

    #[test]
    fn segment_closed_form_beats_every_mixture(w in proptest::collection::vec(0.05f64..1.0, 3), p in 0.01f64..0.99) {
        let s: f64 = w.iter().sum();
        let pi: Vec<f64> = w.iter().map(|x| x / s).collect();
        let rep = s2_closed_form(&pi).unwrap();
        let pv = ProbabilityVector::new(pi).unwrap();
        let a = cycle_generator(&pv, &Cycle::new(vec![0, 1]).unwrap()).unwrap();
        let b = cycle_generator(&pv, &Cycle::new(vec![1, 2]).unwrap()).unwrap();
        let l = Generator::from_off_diagonal(a.matrix() * p + b.matrix() * (1.0 - p)).unwrap();
        prop_assert!(rep.f_min <= inverse_speed(&l, &pv).unwrap() + 1e-10);
        prop_assert!((rep.f_min - inverse_speed(&rep.generator, &pv).unwrap()).abs() <= 1e-10);
    }

    #[test]
    fn graph_json_round_trip(n in 2usize..9, seed in any::<u64>()) {
        let mut rng = sample::rng(seed);
        let g = sample::random_hamiltonian_digraph(n, 0.3, &mut rng);
        let back: DirectedGraph = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        prop_assert_eq!(back, g);
    }
}
