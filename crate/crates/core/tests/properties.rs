use gdpe::analysis::{verify_energy_identity, verify_necessary_condition};
use gdpe::coefficients::CoefficientField;
use gdpe::io::{read_coefficients, read_field, write_coefficients, write_field};
use gdpe::operator::{apply, energy, gradient};
use gdpe::solver::{cg_solve, SolverConfig};
use gdpe::spectral::{dft, difference_factor};
use gdpe::{Boundary, Complex, Domain, LatticeField, C64};
use proptest::prelude::*;

fn extents_strategy(max_dim: usize, max_extent: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(2..=max_extent, 1..=max_dim)
}

fn rel_err(a: &LatticeField<f64>, b: &LatticeField<f64>) -> f64 {
    a.sub(b).unwrap().norm() / b.norm().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn flat_multi_round_trip(extents in extents_strategy(4, 6), pick in any::<usize>()) {
        let d = Domain::periodic(extents).unwrap();
        let flat = pick % d.len();
        prop_assert_eq!(d.flat_index(d.multi_index(flat).coords()), Some(flat));
    }

    #[test]
    fn shifts_compose_on_torus(extents in extents_strategy(3, 6), seed in any::<u64>(), a in -5isize..=5, b in -5isize..=5, axis_pick in any::<usize>()) {
        let d = Domain::periodic(extents).unwrap();
        let axis = axis_pick % d.dim();
        let n = d.extent(axis) as isize;
        prop_assume!(a.abs() < n && b.abs() < n && (a + b).abs() < n);
        let f = LatticeField::<f64>::random(d, seed);
        let twice = f.shift(axis, a).unwrap().shift(axis, b).unwrap();
        prop_assert_eq!(twice, f.shift(axis, a + b).unwrap());
    }

    #[test]
    fn inner_product_translation_invariant(extents in extents_strategy(3, 6), seed in any::<u64>(), axis_pick in any::<usize>()) {
        let d = Domain::periodic(extents).unwrap();
        let axis = axis_pick % d.dim();
        let a = LatticeField::<f64>::random(d.clone(), seed);
        let b = LatticeField::<f64>::random(d, seed ^ 1);
        let plain = a.inner_product(&b).unwrap();
        let shifted = a.shift(axis, 1).unwrap().inner_product(&b.shift(axis, 1).unwrap()).unwrap();
        prop_assert!((plain - shifted).norm() <= 1e-13 * (a.norm() * b.norm()).max(1.0));
        let self_ip = a.inner_product(&a).unwrap();
        prop_assert!(self_ip.im == 0.0 && self_ip.re >= 0.0);
    }

    #[test]
    fn subtract_mean_projects(extents in extents_strategy(3, 7), seed in any::<u64>()) {
        let f = LatticeField::<f64>::random(Domain::periodic(extents).unwrap(), seed);
        let once = f.subtract_mean();
        let tol = 1e-14 * f.max_abs().max(1e-300);
        prop_assert!(once.mean_value().norm() <= tol);
        let twice = once.subtract_mean();
        for (x, y) in once.values().iter().zip(twice.values()) {
            prop_assert!((x - y).norm() <= tol);
        }
        let mean = f.mean_value();
        for (x, y) in once.values().iter().zip(f.values()) {
            prop_assert!((x + mean - y).norm() <= tol);
        }
    }

    #[test]
    fn apply_is_linear(extents in extents_strategy(3, 5), seed in any::<u64>(), ar in -2.0..2.0f64, ai in -2.0..2.0f64) {
        let d = Domain::periodic(extents).unwrap();
        let b = CoefficientField::random_hermitian_pd(d.clone(), 0.3, 2.0, seed).unwrap();
        let f = LatticeField::random(d.clone(), seed ^ 2);
        let h = LatticeField::random(d, seed ^ 3);
        let alpha = Complex::new(ar, ai);
        let beta = Complex::new(0.5, -1.0);
        let lhs = apply(&b, &f.scale(alpha).add(&h.scale(beta)).unwrap()).unwrap();
        let rhs = apply(&b, &f).unwrap().scale(alpha).add(&apply(&b, &h).unwrap().scale(beta)).unwrap();
        prop_assert!(rel_err(&lhs, &rhs) <= 1e-12);
    }

    #[test]
    fn apply_output_sums_to_zero_on_torus(extents in extents_strategy(3, 6), seed in any::<u64>()) {
        let d = Domain::periodic(extents).unwrap();
        let b = CoefficientField::random_hermitian_pd(d.clone(), 0.3, 2.0, seed).unwrap();
        let f = LatticeField::random(d, seed ^ 5);
        let g = apply(&b, &f).unwrap();
        let v_abs: f64 = gradient(&f).as_slice().iter().map(|z| z.norm()).sum();
        prop_assert!(g.sum().norm() <= 1e-12 * 2.0 * v_abs);
    }

    #[test]
    fn summation_by_parts_and_energy_bounds(extents in extents_strategy(3, 5), seed in any::<u64>()) {
        let d = Domain::periodic(extents).unwrap();
        let b = CoefficientField::<f64>::random_hermitian_pd(d.clone(), 0.25, 3.0, seed).unwrap();
        let x = LatticeField::random(d, seed ^ 7);
        let w: f64 = energy(&b, &x).unwrap();
        let pairing = x.inner_product(&apply(&b, &x).unwrap()).unwrap();
        prop_assert!((pairing + w).norm() <= 1e-12 * w.max(1.0));
        let vsq = gradient(&x).norm_sqr();
        prop_assert!(0.25 * vsq * (1.0 - 1e-10) <= w && w <= 3.0 * vsq * (1.0 + 1e-10));
        prop_assert!(verify_energy_identity(&b, &x).unwrap().pass());
    }

    #[test]
    fn parseval_and_shift_theorem(extents in extents_strategy(4, 6), seed in any::<u64>()) {
        let d = Domain::periodic(extents).unwrap();
        let f = LatticeField::<f64>::random(d.clone(), seed);
        let h = LatticeField::<f64>::random(d.clone(), seed ^ 9);
        let (sf, sh) = (dft(&f).unwrap(), dft(&h).unwrap());
        prop_assert!((sf.norm_sqr() - f.norm_sqr()).abs() <= 1e-12 * f.norm_sqr());
        let ip_spec: C64 = sf.values().iter().zip(sh.values()).map(|(a, b)| a.conj() * b).sum();
        let ip = f.inner_product(&h).unwrap();
        prop_assert!((ip_spec - ip).norm() <= 1e-12 * f.norm() * h.norm());
        let v = gradient(&f);
        let scale = sf.max_abs();
        for k in 0..d.dim() {
            let sv = dft(&v.component(k)).unwrap();
            for m in 0..d.len() {
                let want = difference_factor(sf.frequency(m)[k]) * sf.get(m);
                prop_assert!((sv.get(m) - want).norm() <= 1e-12 * scale.max(1.0));
            }
        }
    }

    #[test]
    fn necessary_condition_holds_for_two_or_more_dimensions(extents in prop::collection::vec(2usize..=5, 2..=3), seed in any::<u64>(), amp in 0.01..100.0f64) {
        let d = Domain::periodic(extents).unwrap();
        let b = CoefficientField::random_hermitian_pd(d.clone(), 0.2, 2.0, seed).unwrap();
        let f = LatticeField::random(d, seed ^ 11);
        let r = verify_necessary_condition(&b, &f).unwrap();
        prop_assert!(r.pass());
        prop_assert!(r.get("ratio").unwrap() <= 1.0);
        let scaled = verify_necessary_condition(&b, &f.scale(Complex::new(amp, 0.0))).unwrap();
        let (r0, r1) = (r.get("ratio").unwrap(), scaled.get("ratio").unwrap());
        prop_assert!((r0 - r1).abs() <= 1e-12 * r0);
    }

    #[test]
    fn solver_commutes_with_scaling(seed in any::<u64>(), ar in 0.1..10.0f64, ai in -10.0..10.0f64) {
        let d = Domain::periodic(vec![5, 4]).unwrap();
        let b = CoefficientField::random_hermitian_pd(d.clone(), 0.5, 2.0, seed).unwrap();
        let g = LatticeField::random(d, seed ^ 13).subtract_mean();
        let alpha = Complex::new(ar, ai);
        let cfg = SolverConfig::default();
        let base = cg_solve(&b, &g, &cfg).unwrap().solution;
        let scaled = cg_solve(&b, &g.scale(alpha), &cfg).unwrap().solution;
        prop_assert!(rel_err(&scaled, &base.scale(alpha)) <= 1e-8);
    }

    #[test]
    fn files_round_trip_bitwise(extents in extents_strategy(3, 4), seed in any::<u64>(), zero in any::<bool>()) {
        let boundary = if zero { Boundary::FixedZero } else { Boundary::Periodic };
        let d = Domain::new(extents, boundary).unwrap();
        let f = LatticeField::<f64>::random(d.clone(), seed);
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        let back: LatticeField<f64> = read_field(&buf[..]).unwrap();
        prop_assert!(back.values().iter().zip(f.values()).all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()));
        prop_assert_eq!(back.domain(), f.domain());

        let b = CoefficientField::<f64>::random_hermitian_pd(d, 0.1 + 1e-3 * (seed % 7) as f64, 2.5, seed).unwrap();
        let mut buf = Vec::new();
        write_coefficients(&mut buf, &b).unwrap();
        let back: CoefficientField<f64> = read_coefficients(&buf[..]).unwrap();
        prop_assert_eq!(back, b);
    }
}
