use agler_core::family::{annulus_kernel_eval, disc_compression, disc_family, mobius};
use agler_core::hilbert::{build_h2, isometry_check, rank_one_compress};
use agler_core::kernel::{
    direct_sum, kernel_gram, pick_gram, restrict, scalarize, szego, Kernel, Point, PointSet, ScalarFunction,
    VectorField,
};
use agler_core::linalg::{hermitian_eigen, psd_check, DEFAULT_PSD_TOL, DEFAULT_RANK_TOL};
use agler_core::multiplier::{multiplier_norm, multiplier_norm_by_bisection, quotient_norm};
use agler_core::solver::{extend, minimal_rho, pick_feasible, two_point_disc_oracle, InterpolationInstance};
use agler_core::{c64, CVector, C64};
use proptest::prelude::*;

fn disc_point(radius: f64) -> impl Strategy<Value = C64> {
    (0.0..1.0f64, 0.0..std::f64::consts::TAU).prop_map(move |(s, a)| C64::from_polar(radius * s.sqrt(), a))
}

/// Points whose pairwise pseudo-hyperbolic distance is at least 0.05.
fn separated(coords: &[C64]) -> bool {
    coords.iter().enumerate().all(|(i, a)| {
        coords[..i]
            .iter()
            .all(|b| ((a - b) / (c64(1.0, 0.0) - a * b.conj())).norm() > 0.05)
    })
}

fn nodes(max: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec(disc_point(0.9), 2..=max).prop_filter("separated nodes", |c| separated(c))
}

fn values(n: usize, radius: f64) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec(disc_point(radius), n)
}

fn nodes_and_values(max: usize, radius: f64) -> impl Strategy<Value = (Vec<C64>, Vec<C64>)> {
    nodes(max).prop_flat_map(move |c| {
        let n = c.len();
        (Just(c), values(n, radius))
    })
}

fn function(coords: &[C64], vals: &[C64]) -> (PointSet, ScalarFunction) {
    let pts = PointSet::from_coordinates(coords);
    let f = ScalarFunction::new(pts.clone(), vals.to_vec()).unwrap();
    (pts, f)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn szego_gram_is_hermitian_and_psd(coords in nodes(6)) {
        let pts = PointSet::from_coordinates(&coords);
        let g = kernel_gram(&Kernel::szego(1), &pts).unwrap();
        prop_assert!((&g - g.adjoint()).norm() == 0.0);
        prop_assert!(psd_check(&g, DEFAULT_PSD_TOL).unwrap().is_psd);
        for (i, a) in coords.iter().enumerate() {
            for (j, b) in coords.iter().enumerate() {
                prop_assert!((g[(i, j)] - szego(*a, *b)).norm() <= 1e-15 * g[(i, j)].norm());
            }
        }
    }

    #[test]
    fn norm_is_homogeneous_and_dominates_sup((coords, vals) in nodes_and_values(5, 1.0), c in disc_point(3.0)) {
        let (pts, f) = function(&coords, &vals);
        let s = Kernel::szego(1);
        let nf = multiplier_norm(&s, &pts, &f).unwrap().value;
        let ncf = multiplier_norm(&s, &pts, &f.scaled(c)).unwrap().value;
        prop_assert!((ncf - c.norm() * nf).abs() <= 1e-9 * (1.0 + c.norm() * nf));
        prop_assert!(nf >= f.max_modulus() - 1e-10);
    }

    #[test]
    fn pencil_and_bisection_agree((coords, vals) in nodes_and_values(4, 1.0)) {
        let (pts, f) = function(&coords, &vals);
        let s = Kernel::szego(1);
        let a = multiplier_norm(&s, &pts, &f).unwrap().value;
        let b = multiplier_norm_by_bisection(&s, &pts, &f, 1e-10).unwrap().value;
        // the PSD tolerance only lets bisection stop early, never late
        prop_assert!(b <= a * (1.0 + 1e-8), "{a} vs {b}");
        prop_assert!(a - b <= 1e-5 * a, "{a} vs {b}");
    }

    #[test]
    fn restriction_does_not_increase_the_norm((coords, vals) in nodes_and_values(5, 1.0)) {
        let (pts, f) = function(&coords, &vals);
        let s = Kernel::szego(1);
        let sub = pts.select(&["p0", "p1"]).unwrap();
        let full = multiplier_norm(&s, &pts, &f).unwrap().value;
        let part = multiplier_norm(&s, &sub, &f.restrict(&sub).unwrap()).unwrap().value;
        prop_assert!(part <= full * (1.0 + 1e-9) + 1e-12);
        let k = restrict(&s, &sub).unwrap();
        prop_assert_eq!(kernel_gram(&k, &sub).unwrap(), kernel_gram(&s, &sub).unwrap());
    }

    #[test]
    fn direct_sum_spectrum_is_the_union(coords in nodes(4), scale in 0.1..3.0f64) {
        let pts = PointSet::from_coordinates(&coords);
        let s = Kernel::szego(1);
        let g1 = kernel_gram(&s, &pts).unwrap();
        let k2 = Kernel::from_gram(pts.clone(), 1, &g1.map(|v| v * scale)).unwrap();
        let sum = direct_sum(&s, &k2).unwrap();
        let mut expect = hermitian_eigen(&g1).values;
        expect.extend(hermitian_eigen(&kernel_gram(&k2, &pts).unwrap()).values);
        expect.sort_by(f64::total_cmp);
        let got = hermitian_eigen(&kernel_gram(&sum, &pts).unwrap()).values;
        for (a, b) in got.iter().zip(&expect) {
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn disc_compression_factors(coords in nodes(5), lambda in disc_point(0.95), n in 1usize..=3, seed in any::<u64>()) {
        let pts = PointSet::from_coordinates(&coords);
        let raw: Vec<C64> = (0..n).map(|i| c64(((seed >> (8 * i)) & 0xff) as f64 + 1.0, i as f64)).collect();
        let gamma = CVector::from_vec(raw);
        let gamma = gamma.clone() / c64(gamma.norm(), 0.0);
        let kp = rank_one_compress(&Kernel::szego(n), &pts, &Point::new("lambda", lambda), &gamma).unwrap();
        let (kappa, g) = disc_compression(lambda, &gamma, &pts).unwrap();
        prop_assert!(isometry_check(&kp, &kappa, &g, &pts).unwrap() <= 1e-10);
    }

    #[test]
    fn mobius_is_an_involution_up_to_sign(lambda in disc_point(0.95), z in disc_point(0.95)) {
        let w = mobius(lambda, z);
        prop_assert!(w.norm() < 1.0);
        prop_assert!((mobius(-lambda, w) - z).norm() <= 1e-12);
    }

    #[test]
    fn scalarization_preserves_positivity(coords in nodes(4), seed in any::<u64>()) {
        let pts = PointSet::from_coordinates(&coords);
        let k = Kernel::szego(2);
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let g = VectorField::from_fn(pts.clone(), |_| CVector::from_fn(2, |_, _| c64(next(), next())));
        let sk = scalarize(&k, &g).unwrap();
        prop_assert!(psd_check(&kernel_gram(&sk, &pts).unwrap(), DEFAULT_PSD_TOL).unwrap().is_psd);
    }

    #[test]
    fn annulus_kernel_is_hermitian_symmetric(theta in 0.0..1.0f64, z in (0.55..1.8f64, 0.0..6.28f64), w in (0.55..1.8f64, 0.0..6.28f64)) {
        let z = C64::from_polar(z.0, z.1);
        let w = C64::from_polar(w.0, w.1);
        let a = annulus_kernel_eval(0.5, theta, z, w, None).unwrap();
        let b = annulus_kernel_eval(0.5, theta, w, z, None).unwrap();
        prop_assert!((a - b.conj()).norm() <= 1e-12 * (1.0 + a.norm()));
    }

    #[test]
    fn two_point_feasibility_matches_the_oracle(w in (disc_point(0.95), disc_point(0.95)), v in (disc_point(0.95), disc_point(0.95))) {
        prop_assume!(w.0 != w.1);
        let y = PointSet::from_coordinates(&[w.0, w.1]);
        let g = ScalarFunction::new(y.clone(), vec![v.0, v.1]).unwrap();
        let cert = pick_feasible(&disc_family(1), &y, &g, 1.0).unwrap();
        prop_assume!(cert.min_eigenvalues[0].abs() > 1e-7);
        prop_assert_eq!(cert.feasible, two_point_disc_oracle(w.0, w.1, v.0, v.1).unwrap());
    }

    #[test]
    fn minimal_rho_is_the_feasibility_threshold((coords, vals) in nodes_and_values(4, 0.9)) {
        let (pts, f) = function(&coords, &vals);
        let fam = disc_family(1);
        let rho = minimal_rho(&fam, &pts, &f, 1e-9).unwrap();
        prop_assert!(pick_feasible(&fam, &pts, &f, rho * (1.0 + 1e-6)).unwrap().feasible);
        prop_assert!(!pick_feasible(&fam, &pts, &f, rho * (1.0 - 1e-6)).unwrap().feasible);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn quotient_norm_is_at_most_any_extension_norm(coords in nodes(5), vals in values(5, 0.9)) {
        let m = coords.len();
        let (x, f) = function(&coords, &vals[..m]);
        let y = x.select(&["p0", "p1"]).unwrap();
        let s = Kernel::szego(1);
        let q = quotient_norm(&s, &x, &y, &f.restrict(&y).unwrap(), 1e-8).unwrap();
        let full = multiplier_norm(&s, &x, &f).unwrap().value;
        prop_assert!(q.value <= full * (1.0 + 1e-6));
        prop_assert_eq!(q.minimizer.restrict(&y).unwrap(), f.restrict(&y).unwrap());
        let rho = minimal_rho(&disc_family(1), &y, &f.restrict(&y).unwrap(), 1e-9).unwrap();
        prop_assert!((q.value - rho).abs() <= 1e-4 * rho.max(1e-12));
    }

    #[test]
    fn extension_keeps_the_pick_matrix_positive(coords in nodes(4), vals in values(4, 0.9)) {
        let m = coords.len();
        prop_assume!(m >= 3);
        let x = PointSet::from_coordinates(&coords);
        let y = x.select(&["p0", "p1"]).unwrap();
        let g = ScalarFunction::new(y.clone(), vals[..2].to_vec()).unwrap();
        let fam = disc_family(1);
        let inst = InterpolationInstance::new(x.clone(), y.clone(), g.clone(), fam, None).unwrap();
        let res = extend(&inst, 1e-6, 41).unwrap();
        prop_assert_eq!(res.f.restrict(&y).unwrap(), g);
        let p = pick_gram(&Kernel::szego(1), &res.f, res.rho_used, &x).unwrap();
        prop_assert!(psd_check(&p, DEFAULT_PSD_TOL).unwrap().is_psd);
    }
}

#[test]
fn model_of_rank_deficient_kernel_has_a_null_space() {
    let pts = PointSet::from_coordinates(&[c64(0.1, 0.0), c64(0.2, 0.0), c64(0.3, 0.0)]);
    let ones = Kernel::from_gram(pts.clone(), 1, &agler_core::CMatrix::from_element(3, 3, c64(1.0, 0.0))).unwrap();
    let model = build_h2(&ones, &pts, DEFAULT_RANK_TOL).unwrap();
    assert_eq!(model.rank(), 1);
    assert_eq!(model.null_basis().ncols(), 2);
}
