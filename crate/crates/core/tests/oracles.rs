//! Checks against independent brute-force oracles: nalgebra eigensolves,
//! naive DFT sums, compensated summation, and a pseudoinverse solve.

use gdpe::analysis::verify_kernel;
use gdpe::coefficients::CoefficientField;
use gdpe::operator::{apply, apply_unchecked, dense_assemble, flux, gradient};
use gdpe::solver::{cg_solve, SolverConfig};
use gdpe::spectral::{check_compatibility_relation, dft, symbol};
use gdpe::{Boundary, Complex, DenseMatrix, Domain, LatticeField, C64};
use nalgebra::{DMatrix, DVector};

fn torus(extents: &[usize]) -> Domain {
    Domain::periodic(extents.to_vec()).unwrap()
}

fn to_na(m: &DenseMatrix<f64>) -> DMatrix<C64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

/// Neumaier-compensated complex sum of `conj(a) b`.
fn compensated_inner(a: &[C64], b: &[C64]) -> C64 {
    let mut sum = [0.0f64; 2];
    let mut comp = [0.0f64; 2];
    for (x, y) in a.iter().zip(b) {
        let p = x.conj() * y;
        for (idx, term) in [p.re, p.im].into_iter().enumerate() {
            let t = sum[idx] + term;
            if sum[idx].abs() >= term.abs() {
                comp[idx] += (sum[idx] - t) + term;
            } else {
                comp[idx] += (term - t) + sum[idx];
            }
            sum[idx] = t;
        }
    }
    Complex::new(sum[0] + comp[0], sum[1] + comp[1])
}

fn naive_dft(f: &LatticeField<f64>, m: usize) -> C64 {
    let d = f.domain();
    let mi = d.multi_index(m).0;
    let mut acc = Complex::new(0.0, 0.0);
    for n in 0..d.len() {
        let ni = d.multi_index(n).0;
        let phase: f64 = (0..d.dim())
            .map(|j| 2.0 * std::f64::consts::PI * (mi[j] * ni[j]) as f64 / d.extent(j) as f64)
            .sum();
        acc += f.get(n) * Complex::new(phase.cos(), -phase.sin());
    }
    acc / (d.len() as f64).sqrt()
}

#[test]
fn inner_product_matches_compensated_sum() {
    for seed in 0..5 {
        let d = torus(&[4, 4, 4]);
        let a = LatticeField::<f64>::random(d.clone(), seed);
        let b = LatticeField::<f64>::random(d, seed + 100);
        let got = a.inner_product(&b).unwrap();
        let want = compensated_inner(a.values(), b.values());
        assert!((got - want).norm() <= 1e-14 * want.norm().max(1.0), "{got} vs {want}");
    }
}

#[test]
fn site_eigenvalues_match_nalgebra() {
    let b = CoefficientField::<f64>::random_hermitian_pd(torus(&[4, 4, 4]), 0.5, 2.0, 17).unwrap();
    let report = b.validate();
    assert!(report.pass(), "{:?}", report.failures);
    let (lo, hi) = b.estimate_spectral_bounds().unwrap();
    let mut oracle_lo = f64::INFINITY;
    let mut oracle_hi = f64::NEG_INFINITY;
    for n in 0..b.domain().len() {
        let eig = to_na(&b.site_matrix(n)).symmetric_eigenvalues();
        for &l in eig.iter() {
            assert!(l > 0.5 && l <= 2.0 * (1.0 + 1e-10), "eigenvalue {l} outside (0.5, 2]");
            oracle_lo = oracle_lo.min(l);
            oracle_hi = oracle_hi.max(l);
        }
    }
    assert!((lo - oracle_lo).abs() <= 1e-10);
    assert!((hi - oracle_hi).abs() <= 1e-10);
    assert!((report.min_eigenvalue - oracle_lo).abs() <= 1e-10);
}

#[test]
fn quadratic_form_bounds_on_random_vectors() {
    let b = CoefficientField::<f64>::random_hermitian_pd(torus(&[3, 3, 3]), 0.3, 1.7, 5).unwrap();
    let w_field = LatticeField::<f64>::random(torus(&[3, 3, 3]), 99);
    for n in 0..b.domain().len() {
        let m = b.site_matrix(n);
        let w: Vec<C64> = (0..3).map(|k| w_field.get((n + 7 * k) % 27)).collect();
        let mw = m.matvec(&w).unwrap();
        let form: C64 = w.iter().zip(&mw).map(|(a, b)| a.conj() * b).sum();
        let wsq: f64 = w.iter().map(|z| z.norm_sqr()).sum();
        assert!(form.im.abs() <= 1e-12 * wsq);
        assert!(0.3 * wsq <= form.re + 1e-10 * 1.7 * wsq);
        assert!(form.re <= 1.7 * wsq * (1.0 + 1e-10));
        for z in m.as_slice() {
            assert!(z.norm() <= 1.7 * (1.0 + 1e-10));
        }
    }
}

#[test]
fn gradient_and_flux_match_loops() {
    let d = torus(&[3, 4, 5]);
    let f = LatticeField::<f64>::random(d.clone(), 1);
    let b = CoefficientField::random_hermitian_pd(d.clone(), 0.5, 2.0, 2).unwrap();
    let v = gradient(&f);
    let y = flux(&b, &v).unwrap();
    for n in 0..d.len() {
        let c = d.multi_index(n).0;
        for k in 0..3 {
            let mut back = c.clone();
            back[k] = (back[k] + d.extent(k) - 1) % d.extent(k);
            let expect = f.get(n) - f.get(d.flat_index(&back).unwrap());
            assert_eq!(v.get(n, k), expect);
            for l in 0..3 {
                assert_eq!(y.get(n, k, l), b.entry(n, k, l) * v.get(n, l));
            }
        }
    }
}

#[test]
fn dense_columns_equal_apply_on_indicators() {
    for boundary in [Boundary::Periodic, Boundary::FixedZero] {
        let d = Domain::new(vec![3, 4], boundary).unwrap();
        let b = CoefficientField::<f64>::random_hermitian_pd(d.clone(), 0.5, 2.0, 3).unwrap();
        let a = dense_assemble(&b).unwrap();
        for j in 0..d.len() {
            let col = apply(&b, &LatticeField::delta(d.clone(), j).unwrap()).unwrap();
            for i in 0..d.len() {
                assert!((a[(i, j)] - col.get(i)).norm() <= 1e-14, "{boundary} ({i},{j})");
            }
        }
    }
}

#[test]
fn apply_matches_dense_on_random_instance() {
    let d = torus(&[3, 4, 5]);
    let b = CoefficientField::<f64>::random_hermitian_pd(d.clone(), 0.5, 2.0, 4).unwrap();
    let f = LatticeField::random(d, 5);
    let want = dense_assemble(&b).unwrap().matvec(f.values()).unwrap();
    let got = apply(&b, &f).unwrap();
    let err: f64 = got.values().iter().zip(&want).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    let scale: f64 = want.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    assert!(err <= 1e-12 * scale);
}

#[test]
fn dense_is_hermitian_and_negative_semidefinite() {
    for boundary in [Boundary::Periodic, Boundary::FixedZero] {
        let d = Domain::new(vec![4, 4], boundary).unwrap();
        let b = CoefficientField::<f64>::random_hermitian_pd(d, 0.5, 2.0, 6).unwrap();
        let a = dense_assemble(&b).unwrap();
        assert!(a.hermiticity_defect() <= 1e-12);
        let eig = to_na(&a).symmetric_eigenvalues();
        assert!(eig.iter().all(|&l| l <= 1e-10), "max eigenvalue {}", eig.max());
        if boundary == Boundary::FixedZero {
            // Zero padding removes the constant kernel.
            assert!(eig.max() < -1e-3);
        }
    }
}

#[test]
fn kernel_verifier_agrees_with_nalgebra() {
    let b = CoefficientField::<f64>::random_hermitian_pd(torus(&[3, 3, 3]), 0.4, 1.6, 7).unwrap();
    let r = verify_kernel(&b).unwrap();
    assert!(r.pass(), "{}", r.to_key_value());
    let a = -to_na(&dense_assemble(&b).unwrap());
    let mut eig: Vec<f64> = a.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
    assert!(eig[0].abs() < 1e-10);
    assert!((r.get("spectral_gap").unwrap() - eig[1]).abs() < 1e-10);
    assert!((r.get("max_eigenvalue").unwrap() - eig[26]).abs() < 1e-10);
}

#[test]
fn dft_matches_naive_sum() {
    for extents in [vec![8usize], vec![5, 6], vec![3, 4, 5], vec![4, 3, 2, 3]] {
        let d = torus(&extents);
        let f = LatticeField::<f64>::random(d.clone(), 21);
        let spectrum = dft(&f).unwrap();
        for m in 0..d.len() {
            assert!((spectrum.get(m) - naive_dft(&f, m)).norm() <= 1e-12, "{extents:?} m={m}");
        }
    }
}

#[test]
fn dft_matches_naive_sum_on_large_4d_domain() {
    let d = torus(&[16, 16, 16, 16]);
    let f = LatticeField::<f64>::random(d.clone(), 22);
    let spectrum = dft(&f).unwrap();
    let scale = f.max_abs();
    for &m in &[0usize, 1, 17, 4097, 30000, 65535, 12345, 54321] {
        assert!((spectrum.get(m) - naive_dft(&f, m)).norm() <= 1e-12 * scale.max(1.0) * 4.0);
    }
}

#[test]
fn symbol_matches_dense_on_plane_waves() {
    let d = torus(&[4, 5]);
    let block = DenseMatrix::from_vec(
        2,
        2,
        vec![
            Complex::new(1.3, 0.0),
            Complex::new(0.2, -0.5),
            Complex::new(0.2, 0.5),
            Complex::new(0.9, 0.0),
        ],
    )
    .unwrap();
    let b = CoefficientField::constant(d.clone(), &block, gdpe::SpectralBounds::new(0.1, 2.0).unwrap())
        .unwrap();
    let a = dense_assemble(&b).unwrap();
    for m in 0..d.len() {
        let mi = d.multi_index(m).0;
        let wave: Vec<C64> = (0..d.len())
            .map(|n| {
                let ni = d.multi_index(n).0;
                let phase: f64 = (0..2)
                    .map(|j| 2.0 * std::f64::consts::PI * (mi[j] * ni[j]) as f64 / d.extent(j) as f64)
                    .sum();
                Complex::new(phase.cos(), phase.sin())
            })
            .collect();
        let aw = a.matvec(&wave).unwrap();
        let lam = symbol(&block, &mi, d.extents()).unwrap();
        assert!(lam.re <= 0.0 && lam.im.abs() <= 1e-12 * lam.norm().max(1e-300));
        for (x, w) in aw.iter().zip(&wave) {
            assert!((x - w * lam).norm() <= 1e-10);
        }
    }
}

#[test]
fn non_gradient_breaks_compatibility_relation() {
    let d = torus(&[8, 8]);
    let f = LatticeField::<f64>::random(d.clone(), 31);
    let v = gradient(&f);
    let exact = check_compatibility_relation(&v).unwrap();
    assert!(exact.defect <= 1e-12 * exact.scale);
    let broken = v.with_component(1, &LatticeField::zeros(d)).unwrap();
    let r = check_compatibility_relation(&broken).unwrap();
    assert!(r.defect >= 0.1 * r.scale, "defect {} scale {}", r.defect, r.scale);
}

#[test]
fn cg_matches_pseudoinverse_solution() {
    let d = torus(&[4, 4, 4]);
    let b = CoefficientField::<f64>::random_hermitian_pd(d.clone(), 0.5, 2.0, 41).unwrap();
    let g = LatticeField::<f64>::random(d.clone(), 42).subtract_mean();
    let rep = cg_solve(&b, &g, &SolverConfig::default()).unwrap();

    let a = to_na(&dense_assemble(&b).unwrap());
    let rhs = DVector::from_iterator(d.len(), g.values().iter().copied());
    let least_norm = a.svd(true, true).solve(&rhs, 1e-9).unwrap();
    let mean: C64 = least_norm.iter().sum::<C64>() / d.len() as f64;
    let scale = least_norm.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for (n, z) in least_norm.iter().enumerate() {
        assert!((rep.solution.get(n) - (z - mean)).norm() <= 1e-8 * scale);
    }
}

#[test]
fn apply_unchecked_agrees_with_dense_for_non_hermitian_blocks() {
    let d = torus(&[3, 3]);
    let mut b = CoefficientField::<f64>::identity(d.clone(), 1.0).unwrap();
    for n in 0..d.len() {
        *b.entry_mut(n, 0, 1) = Complex::new(0.3, 0.1 * n as f64);
    }
    let f = LatticeField::random(d, 8);
    let want = dense_assemble(&b).unwrap().matvec(f.values()).unwrap();
    let got = apply_unchecked(&b, &f).unwrap();
    for (x, y) in got.values().iter().zip(&want) {
        assert!((x - y).norm() <= 1e-13);
    }
}
