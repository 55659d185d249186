//! Command dispatch: instance document + settings → [`CommandResult`].

use agler_core::family::{
    annulus_kernel_eval, annulus_tail_bound, default_truncation, fit_annulus_compression,
    verify_family_axioms, AnnulusKernel, FamilyKind, KernelFamily, FIT_GRID,
};
use agler_core::hilbert::{build_h2, rank_one_compress};
use agler_core::kernel::{kernel_gram, pick_gram, Kernel, Point, PointSet, ScalarFunction};
use agler_core::linalg::{hermitian_eigen, max_abs, psd_check, DEFAULT_PSD_TOL, DEFAULT_RANK_TOL};
use agler_core::multiplier::{diagonal_lower_bound, multiplier_norm_in, quotient_norm, NormMethod};
use agler_core::solver::{
    extend, minimal_rho, one_point_region, InterpolationInstance, DEFAULT_EPSILON, DEFAULT_GRID,
    REFINEMENT_DEPTH, RHO_TOL,
};
use agler_core::{c64, CMatrix, CVector};
use clap::ValueEnum;
use serde_json::{json, Value};

use crate::instance::{to_c64, InstanceDocument};
use crate::output::{cnum, function, matrix, num, nums, vector, CommandResult, ErrorBody, Status};
use crate::CliError;

/// Default relative tolerance of `qnorm`.
pub const DEFAULT_QNORM_TOL: f64 = 1e-8;
/// Default sample count of `verify-family`.
pub const DEFAULT_SAMPLES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Gram,
    Psd,
    Norm,
    Qnorm,
    Compress,
    VerifyFamily,
    Pick,
    Rho,
    Extend,
    Region,
    AnnulusEval,
    FitCompression,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Gram => "gram",
            Command::Psd => "psd",
            Command::Norm => "norm",
            Command::Qnorm => "qnorm",
            Command::Compress => "compress",
            Command::VerifyFamily => "verify-family",
            Command::Pick => "pick",
            Command::Rho => "rho",
            Command::Extend => "extend",
            Command::Region => "region",
            Command::AnnulusEval => "annulus-eval",
            Command::FitCompression => "fit-compression",
        }
    }
}

/// Per-invocation overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    /// Primary tolerance of the command: `qnorm` → quotient tolerance,
    /// `rho` and `extend` → minimal-ρ tolerance, otherwise the PSD tolerance.
    pub tol: Option<f64>,
    pub grid: Option<usize>,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    pub theta_grid: Option<usize>,
    pub truncation: Option<usize>,
}

/// Effective tolerances, echoed in every result.
#[derive(Debug, Clone)]
struct Tolerances {
    psd: f64,
    rank: f64,
    rho: f64,
    qnorm: f64,
}

impl Tolerances {
    fn resolve(command: Command, doc: &InstanceDocument, settings: &Settings) -> Result<Self, CliError> {
        let t = &doc.tolerances;
        let mut tol = Tolerances {
            psd: t.psd.unwrap_or(DEFAULT_PSD_TOL),
            rank: t.rank.unwrap_or(DEFAULT_RANK_TOL),
            rho: t.rho.unwrap_or(RHO_TOL),
            qnorm: t.qnorm.unwrap_or(DEFAULT_QNORM_TOL),
        };
        if let Some(v) = settings.tol {
            match command {
                Command::Qnorm => tol.qnorm = v,
                Command::Rho | Command::Extend => tol.rho = v,
                _ => tol.psd = v,
            }
        }
        for (name, v) in [("psd", tol.psd), ("rank", tol.rank), ("rho", tol.rho), ("qnorm", tol.qnorm)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(CliError::schema(format!("tolerance {name} must be a positive number")));
            }
        }
        if !(tol.rho < 1.0) {
            return Err(CliError::schema("tolerance rho must be below 1"));
        }
        // the region and extension solvers certify at the library PSD tolerance
        if matches!(command, Command::Region | Command::Extend) && tol.psd != DEFAULT_PSD_TOL {
            return Err(CliError::schema(format!(
                "the psd tolerance of {} is fixed at {DEFAULT_PSD_TOL:e}",
                command.name()
            )));
        }
        Ok(tol)
    }

    fn to_json(&self) -> Value {
        json!({
            "psd": num(self.psd),
            "rank": num(self.rank),
            "rho": num(self.rho),
            "qnorm": num(self.qnorm),
        })
    }
}

/// Successful or infeasible outcome of a command before wrapping.
struct Outcome {
    status: Status,
    payload: Value,
    certificates: Value,
}

impl Outcome {
    fn ok(payload: Value, certificates: Value) -> Self {
        Outcome {
            status: Status::Ok,
            payload,
            certificates,
        }
    }

    fn verdict(ok: bool, payload: Value, certificates: Value) -> Self {
        Outcome {
            status: if ok { Status::Ok } else { Status::Infeasible },
            payload,
            certificates,
        }
    }
}

/// Runs `command` on a parsed instance.
pub fn run(command: Command, doc: &InstanceDocument, settings: &Settings) -> CommandResult {
    let tolerances = Tolerances::resolve(command, doc, settings);
    let echoed = tolerances.as_ref().map(Tolerances::to_json).unwrap_or(Value::Null);
    let outcome = tolerances.and_then(|tol| dispatch(command, doc, settings, &tol));
    let (status, payload, certificates, error) = match outcome {
        Ok(o) => (o.status, Some(o.payload), o.certificates, None),
        Err(e) => (
            e.status,
            e.payload,
            json!({}),
            Some(ErrorBody {
                code: e.code,
                message: e.message,
            }),
        ),
    };
    CommandResult {
        command: command.name().into(),
        status,
        payload,
        certificates,
        version: env!("CARGO_PKG_VERSION").into(),
        tolerances: echoed,
        error,
    }
}

/// Result for input that never became an instance document.
pub fn failure(command: Command, error: CliError) -> CommandResult {
    CommandResult {
        command: command.name().into(),
        status: error.status,
        payload: error.payload,
        certificates: json!({}),
        version: env!("CARGO_PKG_VERSION").into(),
        tolerances: Value::Null,
        error: Some(ErrorBody {
            code: error.code,
            message: error.message,
        }),
    }
}

fn dispatch(command: Command, doc: &InstanceDocument, s: &Settings, tol: &Tolerances) -> Result<Outcome, CliError> {
    match command {
        Command::Gram => gram(doc, s, tol),
        Command::Psd => psd(doc, s, tol),
        Command::Norm => norm(doc, s, tol),
        Command::Qnorm => qnorm(doc, s, tol),
        Command::Compress => compress(doc, s),
        Command::VerifyFamily => verify(doc, s),
        Command::Pick => pick(doc, s, tol),
        Command::Rho => rho(doc, s, tol),
        Command::Extend => extend_cmd(doc, s, tol),
        Command::Region => region(doc, s),
        Command::AnnulusEval => annulus_eval(doc, s),
        Command::FitCompression => fit(doc, s),
    }
}

fn require<'a, T>(v: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    v.as_ref().ok_or_else(|| CliError::schema(format!("query.{name} is required")))
}

fn family(doc: &InstanceDocument, s: &Settings) -> Result<KernelFamily, CliError> {
    doc.family(s.theta_grid, s.truncation)
}

fn generator(doc: &InstanceDocument, s: &Settings) -> Result<(KernelFamily, Kernel, usize), CliError> {
    let fam = family(doc, s)?;
    let index = doc.query.kernel.unwrap_or(0);
    let k = fam
        .generators()
        .get(index)
        .cloned()
        .ok_or_else(|| CliError::schema(format!("the family has no generator {index}")))?;
    Ok((fam, k, index))
}

fn labels(pts: &PointSet) -> Value {
    Value::Array(pts.labels().map(|l| Value::String(l.into())).collect())
}

fn function_on(doc: &InstanceDocument, on: &PointSet) -> Result<ScalarFunction, CliError> {
    let f = doc.function(require(&doc.query.function, "function")?)?;
    Ok(f.restrict(on)?)
}

fn gram(doc: &InstanceDocument, s: &Settings, tol: &Tolerances) -> Result<Outcome, CliError> {
    let (_, k, index) = generator(doc, s)?;
    let pts = doc.subset(doc.query.on.as_deref())?;
    let g = kernel_gram(&k, &pts)?;
    let eig = hermitian_eigen(&g);
    let report = psd_check(&g, tol.psd)?;
    Ok(Outcome::ok(
        json!({
            "kernel": index,
            "dim": k.dim(),
            "points": labels(&pts),
            "gram": matrix(&g),
            "eigenvalues": nums(&eig.values),
        }),
        json!({
            "min_eigenvalue": num(report.min_eigenvalue),
            "max_eigenvalue": num(report.max_eigenvalue),
            "is_psd": report.is_psd,
        }),
    ))
}

fn psd(doc: &InstanceDocument, s: &Settings, tol: &Tolerances) -> Result<Outcome, CliError> {
    let (fam, _, _) = generator(doc, s)?;
    let pts = doc.subset(doc.query.on.as_deref())?;
    let selected: Vec<usize> = match doc.query.kernel {
        Some(i) => vec![i],
        None => (0..fam.generators().len()).collect(),
    };
    let mut reports = Vec::new();
    let mut all = true;
    for i in selected {
        let k = &fam.generators()[i];
        let r = psd_check(&kernel_gram(k, &pts)?, tol.psd)?;
        all &= r.is_psd;
        reports.push(json!({
            "kernel": i,
            "is_psd": r.is_psd,
            "min_eigenvalue": num(r.min_eigenvalue),
            "max_eigenvalue": num(r.max_eigenvalue),
        }));
    }
    let mins: Vec<f64> = reports
        .iter()
        .map(|r| r["min_eigenvalue"].as_f64().unwrap_or(f64::NAN))
        .collect();
    Ok(Outcome::verdict(
        all,
        json!({"is_psd": all, "points": labels(&pts), "kernels": reports}),
        json!({"min_eigenvalues": nums(&mins)}),
    ))
}

fn norm(doc: &InstanceDocument, s: &Settings, tol: &Tolerances) -> Result<Outcome, CliError> {
    let (_, k, index) = generator(doc, s)?;
    let pts = doc.subset(doc.query.on.as_deref())?;
    let f = function_on(doc, &pts)?;
    let model = build_h2(&k, &pts, tol.rank)?;
    let r = multiplier_norm_in(&model, &f)?;
    let lower = diagonal_lower_bound(&k, &f)?;
    Ok(Outcome::ok(
        json!({
            "kernel": index,
            "points": labels(&pts),
            "value": num(r.value),
            "method": match r.method { NormMethod::Pencil => "pencil", NormMethod::Bisection => "bisection" },
            "certificate": vector(&r.certificate),
        }),
        json!({"diagonal_lower_bound": num(lower), "rank": model.rank()}),
    ))
}

fn qnorm(doc: &InstanceDocument, s: &Settings, tol: &Tolerances) -> Result<Outcome, CliError> {
    let (_, k, index) = generator(doc, s)?;
    let x = doc.subset(doc.query.x.as_deref())?;
    let y = doc.subset(Some(require(&doc.query.y, "y")?))?;
    let psi = function_on(doc, &y)?;
    let q = quotient_norm(&k, &x, &y, &psi, tol.qnorm)?;
    Ok(Outcome::ok(
        json!({
            "kernel": index,
            "value": num(q.value),
            "minimizer": function(&q.minimizer),
            "iterations": q.iterations,
        }),
        json!({"gap": num(q.gap), "lower_bound": num(q.lower_bound)}),
    ))
}

fn gamma(doc: &InstanceDocument, n: usize) -> Result<CVector, CliError> {
    match &doc.query.gamma {
        None if n == 1 => Ok(CVector::from_element(1, c64(1.0, 0.0))),
        None => Err(CliError::schema("query.gamma is required for matrix-valued kernels")),
        Some(v) if v.len() != n => Err(CliError::schema(format!("query.gamma needs {n} entries"))),
        Some(v) => Ok(CVector::from_iterator(n, v.iter().map(|c| to_c64(*c)))),
    }
}

fn compress(doc: &InstanceDocument, s: &Settings) -> Result<Outcome, CliError> {
    let (fam, k, index) = generator(doc, s)?;
    let pts = doc.subset(doc.query.on.as_deref())?;
    let label = require(&doc.query.point, "point")?;
    let z = doc.all_points().find(label).cloned().expect("validated label");
    let g = gamma(doc, k.dim())?;
    let kp = rank_one_compress(&k, &pts, &z, &g)?;
    let mut certificates = json!({"defect": num(kp.defect)});
    if fam.has_compression_rule() {
        if let Some(cert) = fam.compress(index, &pts, &z, &g)? {
            certificates["factorization_residual"] = num(cert.relative_residual);
        }
    }
    Ok(Outcome::ok(
        json!({
            "kernel": index,
            "point": label,
            "dim": kp.dim,
            "points": labels(&kp.points),
            "gram": matrix(&kp.gram),
        }),
        certificates,
    ))
}

fn verify(doc: &InstanceDocument, s: &Settings) -> Result<Outcome, CliError> {
    let fam = family(doc, s)?;
    let pts = doc.subset(doc.query.on.as_deref())?;
    let samples = doc.query.samples.unwrap_or(DEFAULT_SAMPLES);
    let seed = s.seed.or(doc.seed).unwrap_or(0);
    let r = verify_family_axioms(&fam, &pts, samples, seed);
    let failed = [r.direct_sums, r.compressions, r.multipliers, r.nonvanishing]
        .iter()
        .any(|v| *v == agler_core::family::Verdict::Fail);
    Ok(Outcome::verdict(
        !failed,
        json!({
            "family": fam.id(),
            "seed": seed,
            "direct_sums": r.direct_sums.as_str(),
            "generator_count": r.generator_count,
            "compressions": r.compressions.as_str(),
            "compression_samples": r.compression_samples,
            "compression_errors": r.compression_errors,
            "multipliers": r.multipliers.as_str(),
            "multiplier_samples": r.multiplier_samples,
            "nonvanishing": r.nonvanishing.as_str(),
            "vanishing_points": r.vanishing_points,
        }),
        json!({
            "compression_max_residual": r.compression_max_residual.map_or(Value::Null, num),
            "compression_threshold": r.compression_threshold.map_or(Value::Null, num),
            "multiplier_max_norm": num(r.multiplier_max_norm),
            "multiplier_bound": num(r.multiplier_bound),
        }),
    ))
}

fn pick(doc: &InstanceDocument, s: &Settings, tol: &Tolerances) -> Result<Outcome, CliError> {
    let fam = family(doc, s)?;
    let y = doc.subset(doc.query.on.as_deref())?;
    let g = function_on(doc, &y)?;
    let rho = *require(&doc.query.rho, "rho")?;
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(CliError::schema("query.rho must be a nonnegative number"));
    }
    let mut feasible = true;
    let mut mins = Vec::new();
    for k in fam.generators() {
        let r = psd_check(&pick_gram(k, &g, rho, &y)?, tol.psd)?;
        feasible &= r.is_psd;
        mins.push(r.min_eigenvalue);
    }
    Ok(Outcome::verdict(
        feasible,
        json!({"feasible": feasible, "rho": num(rho), "points": labels(&y)}),
        json!({"min_eigenvalues": nums(&mins)}),
    ))
}

fn rho(doc: &InstanceDocument, s: &Settings, tol: &Tolerances) -> Result<Outcome, CliError> {
    let fam = family(doc, s)?;
    let y = doc.subset(doc.query.on.as_deref())?;
    let g = function_on(doc, &y)?;
    let rho = minimal_rho(&fam, &y, &g, tol.rho)?;
    let above = rho * (1.0 + tol.rho);
    let mins = fam
        .generators()
        .iter()
        .map(|k| Ok(psd_check(&pick_gram(k, &g, above, &y)?, DEFAULT_PSD_TOL)?.min_eigenvalue))
        .collect::<Result<Vec<f64>, CliError>>()?;
    Ok(Outcome::ok(
        json!({"rho": num(rho), "points": labels(&y)}),
        json!({"min_eigenvalues_above": nums(&mins), "checked_at": num(above)}),
    ))
}

fn extend_cmd(doc: &InstanceDocument, s: &Settings, tol: &Tolerances) -> Result<Outcome, CliError> {
    let fam = family(doc, s)?;
    let x = doc.subset(doc.query.x.as_deref())?;
    let y = doc.subset(Some(require(&doc.query.y, "y")?))?;
    let g = function_on(doc, &y)?;
    let rho = match doc.query.rho {
        Some(r) => r,
        None => minimal_rho(&fam, &y, &g, tol.rho)?,
    };
    let epsilon = s.epsilon.unwrap_or(DEFAULT_EPSILON);
    let grid = s.grid.unwrap_or(DEFAULT_GRID);
    let inst = InterpolationInstance::new(x, y, g, fam, Some(rho))?;
    let r = extend(&inst, epsilon, grid)?;
    let steps: Vec<Value> = r
        .margins
        .iter()
        .map(|m| json!({"point": m.point, "value": cnum(m.value), "margins": nums(&m.margins)}))
        .collect();
    Ok(Outcome::ok(
        json!({
            "f": function(&r.f),
            "rho": num(r.rho),
            "rho_used": num(r.rho_used),
            "epsilon": num(epsilon),
            "grid": grid,
            "order": r.order,
            "steps": steps,
        }),
        json!({"min_eigenvalues": nums(&r.certificates)}),
    ))
}

fn region(doc: &InstanceDocument, s: &Settings) -> Result<Outcome, CliError> {
    let fam = family(doc, s)?;
    let on = doc.subset(doc.query.on.as_deref())?;
    let f = function_on(doc, &on)?;
    let label = require(&doc.query.point, "point")?;
    let z: Point = doc.all_points().find(label).cloned().expect("validated label");
    let rho = *require(&doc.query.rho, "rho")?;
    let grid = s.grid.unwrap_or(DEFAULT_GRID);
    let reg = one_point_region(&fam, &on, &f, &z, rho, grid)?;
    let cells: Vec<Value> = reg
        .feasible_cells()
        .map(|c| {
            json!({
                "center": cnum(c.center),
                "size": num(c.size),
                "level": c.level,
                "margin": num(c.margin),
                "margins": nums(&c.margins),
            })
        })
        .collect();
    let best = reg.best_cell().map_or(Value::Null, |c| cnum(c.center));
    let nonempty = !reg.is_empty();
    Ok(Outcome::verdict(
        nonempty,
        json!({
            "point": reg.point,
            "rho": num(reg.rho),
            "center_bound": num(reg.center_bound),
            "half_width": num(reg.half_width),
            "grid": reg.grid_n,
            "cell_size": num(reg.cell_size),
            "refinement_depth": REFINEMENT_DEPTH,
            "tol": num(reg.tol),
            "evaluated_cells": reg.cells.len(),
            "feasible_cells": cells,
            "best": best,
            "max_feasible_modulus": num(reg.max_feasible_modulus()),
        }),
        json!({"best_margin": reg.best_cell().map_or(Value::Null, |c| num(c.margin))}),
    ))
}

/// `r` from the query, else from an annulus family.
fn annulus_r(doc: &InstanceDocument, s: &Settings) -> Result<f64, CliError> {
    if let Some(r) = doc.query.r {
        return Ok(r);
    }
    match family(doc, s).map(|f| f.kind().clone()) {
        Ok(FamilyKind::Annulus { r, .. }) => Ok(r),
        _ => Err(CliError::schema("query.r is required without an annulus family")),
    }
}

fn annulus_eval(doc: &InstanceDocument, s: &Settings) -> Result<Outcome, CliError> {
    let r = annulus_r(doc, s)?;
    let theta = *require(&doc.query.theta, "theta")?;
    let z = to_c64(*require(&doc.query.z, "z")?);
    let w = to_c64(*require(&doc.query.w, "w")?);
    let value = annulus_kernel_eval(r, theta, z, w, s.truncation)?;
    let n = s.truncation.unwrap_or_else(|| default_truncation(r, z, w));
    Ok(Outcome::ok(
        json!({"r": num(r), "theta": num(theta), "z": cnum(z), "w": cnum(w), "value": cnum(value), "truncation": n}),
        json!({"tail_bound": num(annulus_tail_bound(r, z, w, n))}),
    ))
}

fn fit(doc: &InstanceDocument, s: &Settings) -> Result<Outcome, CliError> {
    let r = annulus_r(doc, s)?;
    let theta = *require(&doc.query.theta, "theta")?;
    let lambda = to_c64(*require(&doc.query.lambda, "lambda")?);
    let pts = doc.subset(doc.query.on.as_deref())?;
    let k = Kernel::annulus(AnnulusKernel::new(r, theta, s.truncation)?);
    let one = CVector::from_element(1, c64(1.0, 0.0));
    let kp = rank_one_compress(&k, &pts, &Point::new("lambda", lambda), &one)?;
    let grid = s.theta_grid.unwrap_or(FIT_GRID);
    let fit = fit_annulus_compression(&kp.gram, &pts, r, grid, s.truncation)?;
    let kt = Kernel::annulus(AnnulusKernel::new(r, fit.theta_best, s.truncation)?);
    let g = kernel_gram(&kt, &pts)?;
    let phi = fit.phi.values();
    let rec = CMatrix::from_fn(g.nrows(), g.ncols(), |i, j| phi[i] * g[(i, j)] * phi[j].conj());
    let scale = max_abs(&kp.gram);
    let round_trip = if scale > 0.0 { max_abs(&(&rec - &kp.gram)) / scale } else { 0.0 };
    Ok(Outcome::ok(
        json!({
            "r": num(r),
            "theta": num(theta),
            "lambda": cnum(lambda),
            "theta_best": num(fit.theta_best),
            "phi": function(&fit.phi),
            "grid": grid,
            "grid_profile": fit.grid_profile.iter().map(|(t, e)| nums(&[*t, *e])).collect::<Vec<_>>(),
        }),
        json!({"residual": num(fit.residual), "round_trip_error": num(round_trip)}),
    ))
}
