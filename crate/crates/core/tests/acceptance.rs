//! Acceptance suite. Runs every criterion in sequence, prints one PASS/FAIL
//! line per criterion and exits non-zero if any criterion fails.

use std::io::Write;
use std::time::{Duration, Instant};

use agler_core::family::{
    annulus_family, disc_compression, disc_family, fit_annulus_compression, AnnulusKernel, FIT_GRID,
};
use agler_core::hilbert::{build_h2, isometry_check, qx_operator, rank_one_compress};
use agler_core::kernel::{
    direct_sum, kernel_gram, pick_gram, pick_kernel, scalarize, Kernel, Point, PointSet, ScalarFunction,
    VectorField,
};
use agler_core::linalg::{hermitian_eigen, max_abs, psd_check, spectral_norm, DEFAULT_PSD_TOL, DEFAULT_RANK_TOL};
use agler_core::multiplier::{multiplier_norm, quotient_norm};
use agler_core::solver::{
    extend, minimal_rho, one_point_region, one_point_region_in, pick_feasible, two_point_disc_oracle,
    InterpolationInstance, DEFAULT_EPSILON, DEFAULT_GRID,
};
use agler_core::{c64, CMatrix, CVector, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    ok: bool,
    detail: String,
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform in the disc `|z| ≤ radius`.
fn in_disc(r: &mut ChaCha8Rng, radius: f64) -> C64 {
    let rad = radius * r.gen::<f64>().sqrt();
    let ang = std::f64::consts::TAU * r.gen::<f64>();
    C64::from_polar(rad, ang)
}

/// Log-uniform modulus strictly inside `r < |z| < 1/r`, uniform angle.
fn in_annulus(rg: &mut ChaCha8Rng, r: f64) -> C64 {
    let l = -r.ln() * 0.98;
    let modulus = (rg.gen_range(-l..l)).exp();
    C64::from_polar(modulus, std::f64::consts::TAU * rg.gen::<f64>())
}

fn gaussian(r: &mut ChaCha8Rng) -> f64 {
    let u1 = 1.0 - r.gen::<f64>();
    let u2 = r.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn random_vector(r: &mut ChaCha8Rng, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| c64(gaussian(r), gaussian(r)))
}

fn unit_vector(r: &mut ChaCha8Rng, n: usize) -> CVector {
    let v = random_vector(r, n);
    let norm = v.norm();
    v / c64(norm, 0.0)
}

fn disc_points(r: &mut ChaCha8Rng, m: usize, radius: f64) -> PointSet {
    let coords: Vec<C64> = (0..m).map(|_| in_disc(r, radius)).collect();
    PointSet::from_coordinates(&coords)
}

fn random_function(r: &mut ChaCha8Rng, pts: &PointSet, radius: f64) -> ScalarFunction {
    ScalarFunction::from_fn(pts.clone(), |_| in_disc(r, radius))
}

/// Random subset of `x` of the given size, in the order of `x`.
fn ordered_subset(r: &mut ChaCha8Rng, x: &PointSet, size: usize) -> PointSet {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    for i in (1..idx.len()).rev() {
        let j = r.gen_range(0..=i);
        idx.swap(i, j);
    }
    let mut chosen: Vec<usize> = idx[..size].to_vec();
    chosen.sort_unstable();
    let labels: Vec<&str> = chosen.iter().map(|&i| x.get(i).unwrap().label()).collect();
    x.select(&labels).unwrap()
}

fn criterion_1() -> Outcome {
    let mut r = rng(1);
    let fam = disc_family(1);
    let (mut checked, mut skipped, mut disagreements) = (0, 0, 0);
    for _ in 0..1000 {
        let (w1, w2, v1, v2) = (in_disc(&mut r, 0.95), in_disc(&mut r, 0.95), in_disc(&mut r, 0.95), in_disc(&mut r, 0.95));
        let y = PointSet::from_coordinates(&[w1, w2]);
        let g = ScalarFunction::new(y.clone(), vec![v1, v2]).unwrap();
        let cert = pick_feasible(&fam, &y, &g, 1.0).unwrap();
        if cert.min_eigenvalues[0].abs() <= 1e-7 {
            skipped += 1;
            continue;
        }
        checked += 1;
        if cert.feasible != two_point_disc_oracle(w1, w2, v1, v2).unwrap() {
            disagreements += 1;
        }
    }
    Outcome {
        ok: disagreements == 0,
        detail: format!("{checked} compared, {skipped} in boundary band, {disagreements} disagreements"),
    }
}

fn criterion_2() -> Outcome {
    let mut r = rng(2);
    let fam = disc_family(2);
    let s = Kernel::szego(1);
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for case in 0..100 {
        let ny = r.gen_range(1..=4);
        let nx = r.gen_range(ny + 1..=6);
        let x = disc_points(&mut r, nx, 0.9);
        let y = ordered_subset(&mut r, &x, ny);
        let g = random_function(&mut r, &y, 0.9);
        let rho = minimal_rho(&fam, &y, &g, 1e-9).unwrap();
        match quotient_norm(&s, &x, &y, &g, 1e-7) {
            Ok(q) => {
                let rel = (q.value - rho).abs() / rho.max(1e-300);
                worst = worst.max(rel);
                if rel > 1e-4 {
                    failures.push(format!("case {case}: quotient {} vs rho {rho}", q.value));
                }
            }
            Err(e) => failures.push(format!("case {case}: {e}")),
        }
    }
    Outcome {
        ok: failures.is_empty(),
        detail: format!("worst relative difference {worst:.3e}; failures {failures:?}"),
    }
}

fn criterion_3() -> Outcome {
    let mut r = rng(3);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = r.gen_range(1..=3);
        let pts = disc_points(&mut r, 5, 0.95);
        let lambda = in_disc(&mut r, 0.95);
        let gamma = unit_vector(&mut r, n);
        let kp = rank_one_compress(&Kernel::szego(n), &pts, &Point::new("lambda", lambda), &gamma).unwrap();
        let (kappa, g) = disc_compression(lambda, &gamma, &pts).unwrap();
        worst = worst.max(isometry_check(&kp, &kappa, &g, &pts).unwrap());
    }
    Outcome {
        ok: worst <= 1e-10,
        detail: format!("max isometry residual {worst:.3e}"),
    }
}

fn criterion_4() -> Outcome {
    let mut r = rng(4);
    let mut grams = 0;
    let mut failures = 0;
    let mut worst = f64::INFINITY;
    for &modulus in &[0.3, 0.5, 0.7] {
        let fam = annulus_family(modulus, 64, None).unwrap();
        for _ in 0..50 {
            let coords: Vec<C64> = (0..8).map(|_| in_annulus(&mut r, modulus)).collect();
            let pts = PointSet::from_coordinates(&coords);
            for k in fam.generators() {
                let rep = psd_check(&kernel_gram(k, &pts).unwrap(), DEFAULT_PSD_TOL).unwrap();
                grams += 1;
                worst = worst.min(rep.min_eigenvalue / (1.0 + rep.max_eigenvalue));
                if !rep.is_psd {
                    failures += 1;
                }
            }
        }
    }
    Outcome {
        ok: failures == 0,
        detail: format!("{grams} Grams, {failures} not PSD, worst relative min eigenvalue {worst:.3e}"),
    }
}

fn criterion_5() -> Outcome {
    let mut r = rng(5);
    let modulus = 0.5;
    let mut worst_res = 0.0f64;
    let mut worst_round = 0.0f64;
    let mut failures = Vec::new();
    for case in 0..50 {
        let theta: f64 = r.gen();
        let lambda = in_annulus(&mut r, modulus);
        let coords: Vec<C64> = (0..8).map(|_| in_annulus(&mut r, modulus)).collect();
        let pts = PointSet::from_coordinates(&coords);
        let k = Kernel::annulus(AnnulusKernel::new(modulus, theta, None).unwrap());
        let one = CVector::from_element(1, c64(1.0, 0.0));
        let kp = rank_one_compress(&k, &pts, &Point::new("lambda", lambda), &one).unwrap();
        match fit_annulus_compression(&kp.gram, &pts, modulus, FIT_GRID, None) {
            Ok(fit) => {
                let kt = Kernel::annulus(AnnulusKernel::new(modulus, fit.theta_best, None).unwrap());
                let g = kernel_gram(&kt, &pts).unwrap();
                let phi = fit.phi.values();
                let rec = CMatrix::from_fn(8, 8, |i, j| phi[i] * g[(i, j)] * phi[j].conj());
                let round = max_abs(&(&rec - &kp.gram)) / max_abs(&kp.gram);
                worst_res = worst_res.max(fit.residual);
                worst_round = worst_round.max(round);
                if fit.residual > 1e-4 || round > 1e-3 {
                    failures.push(format!(
                        "case {case} (theta {theta}, lambda {lambda}): residual {:.3e}, round trip {round:.3e}, profile {:?}",
                        fit.residual, fit.grid_profile
                    ));
                }
            }
            Err(e) => failures.push(format!("case {case} (theta {theta}, lambda {lambda}): {e:?}")),
        }
    }
    Outcome {
        ok: failures.is_empty(),
        detail: format!(
            "max residual {worst_res:.3e}, max round-trip error {worst_round:.3e}; failures {failures:?}"
        ),
    }
}

fn criterion_6() -> Outcome {
    let mut r = rng(6);
    let fam = disc_family(2);
    let mut failures = Vec::new();
    let mut screened_out = 0;
    let mut run = 0;
    while run < 200 {
        let x = disc_points(&mut r, 5, 0.9);
        let y = ordered_subset(&mut r, &x, 3);
        let g = random_function(&mut r, &y, 0.9);
        let rho = minimal_rho(&fam, &y, &g, 1e-9).unwrap();
        if !pick_feasible(&fam, &y, &g, rho).unwrap().feasible {
            screened_out += 1;
            continue;
        }
        run += 1;
        let inst = InterpolationInstance::new(x.clone(), y.clone(), g.clone(), fam.clone(), Some(rho)).unwrap();
        match extend(&inst, DEFAULT_EPSILON, DEFAULT_GRID) {
            Ok(res) => {
                let exact = y.iter().all(|p| {
                    res.f.value(p.label()).map(|v| (v.re.to_bits(), v.im.to_bits()))
                        == g.value(p.label()).map(|v| (v.re.to_bits(), v.im.to_bits()))
                });
                let psd = fam.generators().iter().all(|k| {
                    psd_check(&pick_gram(k, &res.f, rho * (1.0 + 1e-6), &x).unwrap(), DEFAULT_PSD_TOL)
                        .unwrap()
                        .is_psd
                });
                if !exact || !psd {
                    failures.push(format!("instance {run}: exact restriction {exact}, psd {psd}"));
                }
            }
            Err(e) => failures.push(format!("instance {run}: {e}")),
        }
    }
    Outcome {
        ok: failures.is_empty(),
        detail: format!("200 instances ({screened_out} screened out), failures {failures:?}"),
    }
}

fn random_matrix_kernel(r: &mut ChaCha8Rng, pts: &PointSet, n: usize) -> Kernel {
    let size = n * pts.len();
    let a = CMatrix::from_fn(size, size, |_, _| c64(gaussian(r), gaussian(r)));
    let gram = &a * a.adjoint() + CMatrix::identity(size, size) * c64(1e-3, 0.0);
    let gram = (&gram + gram.adjoint()) * c64(0.5, 0.0);
    Kernel::from_gram(pts.clone(), n, &gram).unwrap()
}

fn criterion_7() -> Outcome {
    let mut r = rng(7);
    let mut forward_failures = 0;
    let mut converse_failures = 0;
    for case in 0..100 {
        let n = if case % 2 == 0 { 2 } else { 3 };
        let pts = disc_points(&mut r, 4, 0.9);
        let k = random_matrix_kernel(&mut r, &pts, n);
        let f = random_function(&mut r, &pts, 1.0);
        let rho = multiplier_norm(&k, &pts, &f).unwrap().value * (1.0 + 1e-6);
        for _ in 0..100 {
            let g = VectorField::from_fn(pts.clone(), |_| random_vector(&mut r, n));
            let sk = scalarize(&k, &g).unwrap();
            let p = kernel_gram(&pick_kernel(&sk, &f, rho).unwrap(), &pts).unwrap();
            if !psd_check(&p, DEFAULT_PSD_TOL).unwrap().is_psd {
                forward_failures += 1;
            }
        }
    }
    for case in 0..20 {
        let n = if case % 2 == 0 { 2 } else { 3 };
        let pts = disc_points(&mut r, 4, 0.9);
        let k = random_matrix_kernel(&mut r, &pts, n);
        let f = random_function(&mut r, &pts, 1.0);
        let rho = 0.9 * multiplier_norm(&k, &pts, &f).unwrap().value;
        let p = kernel_gram(&pick_kernel(&k, &f, rho).unwrap(), &pts).unwrap();
        let eig = hermitian_eigen(&p);
        let h = eig.vectors.column(0);
        let g = VectorField::from_fn(pts.clone(), |pt| {
            let i = pts.position(pt.label()).unwrap();
            h.rows(i * n, n).into_owned()
        });
        let sk = scalarize(&k, &g).unwrap();
        let ps = kernel_gram(&pick_kernel(&sk, &f, rho).unwrap(), &pts).unwrap();
        let ones = CVector::from_element(pts.len(), c64(1.0, 0.0));
        let pairing = (ones.adjoint() * &ps * &ones)[(0, 0)].re;
        if !(eig.min() < 0.0 && pairing < 0.0) {
            converse_failures += 1;
        }
    }
    Outcome {
        ok: forward_failures == 0 && converse_failures == 0,
        detail: format!(
            "forward: 10000 scalarizations, {forward_failures} failures; converse: 20 instances, {converse_failures} failures"
        ),
    }
}

fn criterion_8() -> Outcome {
    let mut r = rng(8);
    let mut failures: Vec<String> = Vec::new();
    let mut check = |ok: bool, what: String| {
        if !ok {
            failures.push(what);
        }
    };
    let fam = disc_family(1);
    for case in 0..500 {
        let m = r.gen_range(2..=5);
        let n = r.gen_range(1..=2);
        let pts = disc_points(&mut r, m, 0.9);
        let k = Kernel::szego(n);
        let model = build_h2(&k, &pts, DEFAULT_RANK_TOL).unwrap();

        // Q_x idempotence and resolution of the identity
        let mut sum = CMatrix::zeros(model.rank(), model.rank());
        for p in pts.iter() {
            let q = qx_operator(&model, p).unwrap();
            let scale = 1.0 + spectral_norm(&q);
            check(spectral_norm(&(&q * &q - &q)) <= 1e-9 * scale, format!("case {case}: Q_x idempotence"));
            sum += q;
        }
        let ident = CMatrix::identity(model.rank(), model.rank());
        check(spectral_norm(&(sum - ident)) <= 1e-9, format!("case {case}: resolution of identity"));

        // rank-one annihilation
        let zi = r.gen_range(0..m);
        let z = pts.get(zi).unwrap().clone();
        let gamma = unit_vector(&mut r, n);
        let kp = rank_one_compress(&k, &pts, &z, &gamma).unwrap();
        let col = kp.gram.columns(zi * n, n) * &gamma;
        let leak = col.iter().fold(0.0f64, |a, v| a.max(v.norm()));
        check(leak <= 1e-11, format!("case {case}: annihilation {leak:.3e}"));

        // homogeneity and diagonal lower bound
        let f = random_function(&mut r, &pts, 1.0);
        let c = in_disc(&mut r, 2.0);
        let nf = multiplier_norm(&k, &pts, &f).unwrap().value;
        let ncf = multiplier_norm(&k, &pts, &f.scaled(c)).unwrap().value;
        check((ncf - c.norm() * nf).abs() <= 1e-9 * (1.0 + c.norm() * nf), format!("case {case}: homogeneity"));
        check(nf >= f.max_modulus() - 1e-10, format!("case {case}: diagonal lower bound"));

        // submultiplicativity
        let g = random_function(&mut r, &pts, 1.0);
        let ng = multiplier_norm(&k, &pts, &g).unwrap().value;
        let nfg = multiplier_norm(&k, &pts, &f.product(&g).unwrap()).unwrap().value;
        check(nfg <= nf * ng + 1e-8, format!("case {case}: submultiplicativity"));

        // direct-sum spectral union
        let k2 = Kernel::from_gram(pts.clone(), n, &model.gram().map(|v| v * 0.5)).unwrap();
        let sum_k = direct_sum(&k, &k2).unwrap();
        let mut expect = hermitian_eigen(model.gram()).values;
        expect.extend(hermitian_eigen(&kernel_gram(&k2, &pts).unwrap()).values);
        expect.sort_by(f64::total_cmp);
        let got = hermitian_eigen(&kernel_gram(&sum_k, &pts).unwrap()).values;
        let dev = got.iter().zip(&expect).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        check(dev <= 1e-10, format!("case {case}: direct-sum spectrum {dev:.3e}"));

        // region nesting on a shared grid
        if case % 5 == 0 {
            let x = pts.select(&[pts.get(0).unwrap().label()]).unwrap();
            let fx = f.restrict(&x).unwrap();
            let znew = Point::new("new", in_disc(&mut r, 0.9));
            let rho1 = fx.max_modulus() * 1.1 + 0.05;
            let rho2 = rho1 * 1.3;
            let r1 = one_point_region_in(&fam, &x, &fx, &znew, rho1, rho2, 15, 1).unwrap();
            for cell in r1.feasible_cells() {
                let ext = fx.with_value(znew.clone(), cell.center).unwrap();
                let ok = pick_feasible(&fam, ext.points(), &ext, rho2).unwrap().feasible;
                check(ok, format!("case {case}: region nesting at {}", cell.center));
            }
        }
    }
    Outcome {
        ok: failures.is_empty(),
        detail: format!("500 cases, failures {failures:?}"),
    }
}

fn criterion_9() -> Outcome {
    let re = |x: f64| c64(x, 0.0);
    let s = Kernel::szego(1);
    let pair = PointSet::from_coordinates(&[re(0.0), re(0.5)]);
    let id = ScalarFunction::new(pair.clone(), vec![re(0.0), re(0.5)]).unwrap();
    let steep = ScalarFunction::new(pair.clone(), vec![re(0.0), re(0.9)]).unwrap();
    let norm = multiplier_norm(&s, &pair, &id).unwrap().value;
    let rho = minimal_rho(&disc_family(1), &pair, &steep, 1e-9).unwrap();
    let x = PointSet::from_coordinates(&[re(0.0)]);
    let f0 = ScalarFunction::constant(x.clone(), re(0.0));
    let region = one_point_region(&disc_family(1), &x, &f0, &Point::new("z", re(0.5)), 1.0, DEFAULT_GRID).unwrap();
    let radius = region.max_feasible_modulus();
    let kp = rank_one_compress(&s, &pair, pair.get(0).unwrap(), &CVector::from_element(1, re(1.0))).unwrap();
    let third = kp.gram[(1, 1)].re;
    let ok = (norm - 1.0).abs() <= 1e-6
        && (rho - 1.8).abs() <= 1e-6
        && (radius - 0.5).abs() <= 2.0 * region.cell_size
        && (third - 1.0 / 3.0).abs() <= 1e-6;
    Outcome {
        ok,
        detail: format!(
            "norm {norm}, rho {rho}, region radius {radius} (cell {:.4}), compressed value {third}",
            region.cell_size
        ),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 9] = [
        ("two-point disc oracle agreement", criterion_1, Duration::from_secs(10)),
        ("quotient norm equals minimal rho on the disc", criterion_2, Duration::from_secs(120)),
        ("disc compression identity", criterion_3, Duration::from_secs(5)),
        ("annulus family positivity", criterion_4, Duration::from_secs(30)),
        ("annulus compression identity", criterion_5, Duration::from_secs(120)),
        ("extension solver soundness", criterion_6, Duration::from_secs(180)),
        ("scalarization forward and converse", criterion_7, Duration::from_secs(30)),
        ("invariant suite", criterion_8, Duration::from_secs(60)),
        ("hand-value regression", criterion_9, Duration::from_secs(1)),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut all_ok = true;
    let mut out = std::io::stdout().lock();
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let id = format!("{}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| *f == id) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *limit;
        let ok = outcome.ok && in_time;
        all_ok &= ok;
        writeln!(
            out,
            "criterion {id} [{}] {name}: {} in {:.2}s (limit {}s){}; {}",
            if ok { "PASS" } else { "FAIL" },
            if outcome.ok { "criteria met" } else { "criteria not met" },
            elapsed.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", over time limit" },
            outcome.detail
        )
        .unwrap();
    }
    if !all_ok {
        std::process::exit(1);
    }
}
