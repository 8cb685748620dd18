use std::path::Path;
use std::time::Instant;

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use driftlab_core::barrier::{barrier_report, BarrierParams, BarrierReport};
use driftlab_core::examples::{make_example, ExampleCase, ExampleId};
use driftlab_core::field::CoreRule;
use driftlab_core::norms::{
    bmo_seminorm, lp_norm, magnitude, morrey_norm, orlicz_l2ln_norm, w12_seminorm, BallSampling, NormReport, OrliczConfig,
};
use driftlab_core::solver::{epsilon_sweep, solve_cylinder_eps, GridPolicy, SolveReport, SweepRow, PROBE_HEIGHTS};
use driftlab_core::weak_form::{weak_residual_div_form, weak_residual_grad_form, BumpFunction, WeakResidual};
use driftlab_core::{Domain, Point, QuadratureSpec, ScalarField};

use crate::config::{FieldChoice, NormChoice, RunConfig, UsageError};
use crate::output::{emit, json_bytes, profile_table, real, reals, sibling, Format, Table};

pub const STRONG_TOL: f64 = 1e-8;
pub const WEAK_TOL: f64 = 1e-5;

pub struct Outcome {
    pub pass: bool,
    pub summary: String,
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn write_main(cfg: &RunConfig, table: impl FnOnce() -> Table, json: impl FnOnce() -> Result<Vec<u8>>) -> Result<()> {
    let bytes = match cfg.format {
        Format::Csv => table().to_bytes()?,
        Format::Json => json()?,
    };
    emit(cfg.out.as_deref(), &bytes)
}

fn examples_for(cfg: &RunConfig, ids: &[ExampleId]) -> Result<Vec<ExampleCase>> {
    ids.iter()
        .map(|&id| {
            let n = match id {
                ExampleId::Ex1 | ExampleId::Ex2 => None,
                _ => cfg.n,
            };
            make_example(id, n).map_err(|e| UsageError(e.to_string()).into())
        })
        .collect()
}

/// Log-uniform radius in `[r_lo, r_hi]`, direction uniform by rejection.
fn random_point(rng: &mut ChaCha8Rng, n: usize, r_lo: f64, r_hi: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let len = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if len > 0.1 && len <= 1.0 {
            let r = (r_lo.ln() + (r_hi / r_lo).ln() * rng.random::<f64>()).exp();
            return v.iter().map(|c| c * r / len).collect();
        }
    }
}

#[derive(Serialize)]
struct ResidualRow {
    id: ExampleId,
    index: usize,
    radius: f64,
    point: Vec<f64>,
    residual: f64,
}

#[derive(Serialize)]
struct ExamplesOutput {
    rows: Vec<ResidualRow>,
    max_residual: Vec<(ExampleId, f64)>,
    tolerance: f64,
    pass: bool,
}

fn strong_residuals(cases: &[ExampleCase], points: usize, seed: u64) -> Result<ExamplesOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut max_residual = Vec::new();
    for ex in cases {
        let mut worst: f64 = 0.0;
        for index in 0..points {
            let x = random_point(&mut rng, ex.dim, 1e-3, 0.9 * ex.radius);
            let residual = ex.strong_residual(&x)?;
            worst = worst.max(residual.abs());
            let radius = x.iter().map(|c| c * c).sum::<f64>().sqrt();
            rows.push(ResidualRow { id: ex.id, index, radius, point: x, residual });
        }
        max_residual.push((ex.id, worst));
    }
    let pass = max_residual.iter().all(|(_, m)| *m <= STRONG_TOL);
    Ok(ExamplesOutput { rows, max_residual, tolerance: STRONG_TOL, pass })
}

pub fn examples(cfg: &RunConfig, ids: &[ExampleId], points: usize) -> Result<Outcome> {
    if points == 0 {
        return Err(UsageError("--points 0: must be >= 1".into()).into());
    }
    let cases = examples_for(cfg, ids)?;
    let out = strong_residuals(&cases, points, cfg.seed)?;
    write_main(
        cfg,
        || {
            let mut t = Table::new(&["id", "index", "radius", "point", "residual"]);
            for r in &out.rows {
                t.push(vec![r.id.name().into(), r.index.to_string(), real(r.radius), reals(&r.point), real(r.residual)]);
            }
            t
        },
        || json_bytes(&out),
    )?;
    let worst = out.max_residual.iter().map(|m| m.1).fold(0.0, f64::max);
    Ok(Outcome {
        pass: out.pass,
        summary: format!("examples verify: {} ({} points, max strong residual {worst:.3e})", verdict(out.pass), out.rows.len()),
    })
}

fn quad(cfg: &RunConfig, dim: usize, order: usize, cells_2d: usize, cells_3d: usize) -> QuadratureSpec {
    let cells = cfg.quad_cells.unwrap_or(if dim == 2 { cells_2d } else { cells_3d });
    QuadratureSpec::gauss(cfg.quad_order.unwrap_or(order), cells)
}

pub fn norms(cfg: &RunConfig, id: ExampleId, kind: NormChoice, field: FieldChoice, alpha: f64) -> Result<Outcome> {
    let p = cfg.params.p_target;
    if !(alpha >= 0.0) {
        return Err(UsageError(format!("--alpha {alpha}: must be >= 0")).into());
    }
    let ex = &examples_for(cfg, &[id])?[0];
    let dom = Domain::ball(ex.dim, ex.radius)?;
    let base = quad(cfg, ex.dim, 4, 64, 32);
    let polar = base.clone().with_polar(Point::origin(ex.dim), 64, cfg.delta, CoreRule::Exclude);
    let b = magnitude(&ex.b);
    let u = |x: &[f64]| ex.u.value(x).abs();
    let f: &dyn Fn(&[f64]) -> f64 = match field {
        FieldChoice::Drift => &b,
        FieldChoice::Solution => &u,
    };
    let sampling = BallSampling { centers: 16, radii: 8 };
    let rep: NormReport = match kind {
        NormChoice::Lp => lp_norm(f, &dom, p, &polar)?,
        NormChoice::W12 => w12_seminorm(&ex.u, &dom, &polar)?,
        NormChoice::Orlicz => orlicz_l2ln_norm(f, &dom, &polar, &OrliczConfig::default())?,
        NormChoice::Morrey => morrey_norm(f, &dom, p, alpha, sampling, &base)?,
        NormChoice::Bmo => bmo_seminorm(f, &dom, sampling, &base)?,
    };
    write_main(
        cfg,
        || {
            let mut t = Table::new(&["id", "kind", "params", "value", "diverging", "inner_cutoff", "trail_levels", "trail"]);
            let params = rep.params.iter().map(|(k, v)| format!("{k}={}", real(*v))).collect::<Vec<_>>().join(";");
            let levels: Vec<f64> = rep.trail.iter().map(|t| t.level).collect();
            let values: Vec<f64> = rep.trail.iter().map(|t| t.value).collect();
            t.push(vec![
                id.name().into(),
                rep.kind.name().into(),
                params,
                real(rep.value),
                rep.diverging.to_string(),
                rep.inner_cutoff.map(real).unwrap_or_default(),
                reals(&levels),
                reals(&values),
            ]);
            t
        },
        || json_bytes(&rep),
    )?;
    Ok(Outcome {
        pass: true,
        summary: format!(
            "norms {} {}: value {:.6e}, trail {}",
            id.name(),
            rep.kind.name(),
            rep.value,
            if rep.diverging { "diverging" } else { "converging" }
        ),
    })
}

/// Four bumps clear of the origin and one centred on it.
fn bumps(n: usize, radius: f64) -> Vec<BumpFunction> {
    let mut out = Vec::new();
    for k in 0..4 {
        let mut c = vec![0.0; n];
        let a = std::f64::consts::FRAC_PI_2 * k as f64 + 0.3;
        c[0] = 0.55 * radius * a.cos();
        c[1] = 0.55 * radius * a.sin();
        out.push(BumpFunction::new(Point::new(c), 0.3 * radius));
    }
    out.push(BumpFunction::new(Point::origin(n), 0.6 * radius));
    out
}

#[derive(Serialize)]
struct WeakRow {
    form: &'static str,
    id: ExampleId,
    bump: BumpFunction,
    residual: WeakResidual,
}

#[derive(Serialize)]
struct WeakOutput {
    rows: Vec<WeakRow>,
    tolerance: f64,
    pass: bool,
}

pub fn weakform(cfg: &RunConfig, ids: &[ExampleId]) -> Result<Outcome> {
    let mut rows = Vec::new();
    for ex in examples_for(cfg, ids)? {
        let dom = Domain::ball(ex.dim, ex.radius)?;
        let base = quad(cfg, ex.dim, 6, 128, 16);
        for bump in bumps(ex.dim, ex.radius) {
            let q = if bump.center.norm() < bump.radius {
                base.clone().with_polar(Point::origin(ex.dim), 64, cfg.delta, CoreRule::Resolve)
            } else {
                base.clone()
            };
            let grad = weak_residual_grad_form(&ex.u, &ex.b, &bump, &dom, &q)?;
            let div = weak_residual_div_form(|x: &[f64]| ex.u.value(x), &ex.b, &bump, &dom, &q)?;
            rows.push(WeakRow { form: "grad", id: ex.id, bump: bump.clone(), residual: grad });
            rows.push(WeakRow { form: "div", id: ex.id, bump, residual: div });
        }
    }
    // only the gradient form vanishes for every example
    let worst = rows.iter().filter(|r| r.form == "grad").map(|r| r.residual.value.abs()).fold(0.0, f64::max);
    let out = WeakOutput { pass: worst <= WEAK_TOL, rows, tolerance: WEAK_TOL };
    write_main(
        cfg,
        || {
            let mut t = Table::new(&["form", "id", "bump_center", "bump_radius", "value", "abs_scale", "trail_levels", "trail"]);
            for r in &out.rows {
                let levels: Vec<f64> = r.residual.trail.iter().map(|t| t.level).collect();
                let values: Vec<f64> = r.residual.trail.iter().map(|t| t.value).collect();
                t.push(vec![
                    r.form.into(),
                    r.id.name().into(),
                    reals(r.bump.center.as_slice()),
                    real(r.bump.radius),
                    real(r.residual.value),
                    real(r.residual.abs_scale),
                    reals(&levels),
                    reals(&values),
                ]);
            }
            t
        },
        || json_bytes(&out),
    )?;
    Ok(Outcome {
        pass: out.pass,
        summary: format!("weakform: {} ({} residuals, max grad-form {worst:.3e})", verdict(out.pass), out.rows.len()),
    })
}

fn barrier_table(r: &BarrierReport) -> Table {
    let mut t = Table::new(&[
        "n", "mu", "eps", "K", "c1", "k_min", "f_two_eps", "f_properties", "positivity_min", "divergence_max",
        "cone_consistency", "envelope_constant", "b_norm", "b_minus_b0_norm", "pass",
    ]);
    let p = &r.params;
    t.push(vec![
        p.n.to_string(),
        real(p.mu),
        real(p.eps),
        real(p.k),
        real(r.constants.c1),
        real(r.constants.k_min),
        real(r.f_properties.f_two_eps),
        r.f_properties.pass.to_string(),
        real(r.positivity.min),
        real(r.divergence.max_abs),
        real(r.cone_consistency),
        real(r.envelope.constant),
        real(r.b_norm),
        real(r.b_minus_b0_norm),
        r.pass().to_string(),
    ]);
    t
}

pub fn barrier(cfg: &RunConfig) -> Result<Outcome> {
    let params = cfg.checked_params()?[0];
    let rep = barrier_report(&params, cfg.samples, 0)?;
    write_main(cfg, || barrier_table(&rep), || json_bytes(&rep))?;
    Ok(Outcome {
        pass: rep.pass(),
        summary: format!(
            "barrier check: {} (min Δv - b·∇v {:.4e}, max |div b| {:.2e})",
            verdict(rep.pass()),
            rep.positivity.min,
            rep.divergence.max_abs
        ),
    })
}

#[derive(Serialize)]
struct SolveOutput {
    params: BarrierParams,
    n_rho: usize,
    n_z: usize,
    c1: f64,
    u_origin: f64,
    u_two_eps: f64,
    pass: bool,
    report: SolveReport,
}

fn solve_once(cfg: &RunConfig, params: &BarrierParams) -> Result<SolveOutput> {
    let grid = cfg.solve_grid(params.eps)?;
    let t0 = Instant::now();
    let (u, mut report) = solve_cylinder_eps(params, &grid, cfg.tol, cfg.max_iter)?;
    report.wall_time = cfg.wall(t0.elapsed());
    let c1 = params.constants()?.c1;
    let u_origin = u.at(0, 0);
    let u_two_eps = u.interpolate(0.0, 2.0 * params.eps);
    let pass = u_origin == 0.0 && u_two_eps >= c1 && report.maximum_principle == Some(true);
    Ok(SolveOutput { params: *params, n_rho: grid.n_rho, n_z: grid.n_z, c1, u_origin, u_two_eps, pass, report })
}

pub fn solve(cfg: &RunConfig) -> Result<Outcome> {
    let params = cfg.checked_params()?[0];
    cfg.solve_grid(params.eps)?;
    let out = solve_once(cfg, &params)?;
    write_main(
        cfg,
        || {
            let mut t = Table::new(&[
                "eps", "n_rho", "n_z", "u_origin", "u_two_eps", "c1", "min", "max", "maximum_principle", "barrier_gap",
                "iterations", "residual", "wall_time", "pass",
            ]);
            let r = &out.report;
            t.push(vec![
                real(out.params.eps),
                out.n_rho.to_string(),
                out.n_z.to_string(),
                real(out.u_origin),
                real(out.u_two_eps),
                real(out.c1),
                real(r.min),
                real(r.max),
                r.maximum_principle.unwrap_or(false).to_string(),
                r.barrier_gap.map(real).unwrap_or_default(),
                r.iterations.to_string(),
                real(r.residual),
                real(r.wall_time),
                out.pass.to_string(),
            ]);
            t
        },
        || json_bytes(&out),
    )?;
    if let (Format::Csv, Some(path)) = (cfg.format, cfg.out.as_deref()) {
        emit(Some(&sibling(path, "axis")), &profile_table(&out.report.axis_profile).to_bytes()?)?;
    }
    Ok(Outcome {
        pass: out.pass,
        summary: format!(
            "solve eps={}: {} (u(0,0) = {}, u(0,2eps) = {:.6}, c1 = {:.6})",
            out.params.eps,
            verdict(out.pass),
            out.u_origin,
            out.u_two_eps,
            out.c1
        ),
    })
}

#[derive(Serialize)]
struct SweepOutput {
    rows: Vec<SweepRow>,
    c1: f64,
    pass: bool,
}

fn axis_name(eps: f64) -> String {
    format!("axis_eps{eps}")
}

pub fn sweep(cfg: &RunConfig) -> Result<Outcome> {
    let params = cfg.checked_params()?;
    let base = cfg.grid.map(|(r, z)| r.max(z)).unwrap_or(128);
    let policy = GridPolicy { base };
    let c1 = params[0].constants()?.c1;
    // one core sweep per ε so each row gets its own wall time
    let mut rows: Vec<SweepRow> = Vec::new();
    for p in &params {
        let t0 = Instant::now();
        let mut row = epsilon_sweep(&[p.eps], p, policy, cfg.tol, cfg.max_iter)?.remove(0);
        row.report.wall_time = cfg.wall(t0.elapsed());
        if let Some(prev) = rows.last() {
            row.deltas = row.probes.iter().zip(&prev.probes).map(|(a, b)| (a.1 - b.1).abs()).collect();
        }
        rows.push(row);
    }
    let pass = rows.iter().all(|r| r.u_origin == 0.0 && r.u_two_eps >= c1 && r.maximum_principle);
    let out = SweepOutput { rows, c1, pass };
    write_main(
        cfg,
        || {
            let mut header: Vec<String> = ["eps", "cells", "u_origin", "u_two_eps"].iter().map(|s| s.to_string()).collect();
            header.extend(PROBE_HEIGHTS.iter().map(|z| format!("u_z{z}")));
            header.extend(PROBE_HEIGHTS.iter().map(|z| format!("delta_z{z}")));
            header.extend(
                ["b_lp_norm", "grad_l2", "gradient_ratio", "maximum_principle", "iterations", "residual", "wall_time"]
                    .iter()
                    .map(|s| s.to_string()),
            );
            let mut t = Table { header, rows: Vec::new() };
            for r in &out.rows {
                let mut cells = vec![real(r.eps), r.cells.to_string(), real(r.u_origin), real(r.u_two_eps)];
                cells.extend(r.probes.iter().map(|p| real(p.1)));
                if r.deltas.is_empty() {
                    cells.extend(PROBE_HEIGHTS.iter().map(|_| String::new()));
                } else {
                    cells.extend(r.deltas.iter().map(|d| real(*d)));
                }
                cells.extend([
                    real(r.b_lp_norm),
                    real(r.grad_l2),
                    real(r.gradient_ratio),
                    r.maximum_principle.to_string(),
                    r.report.iterations.to_string(),
                    real(r.report.residual),
                    real(r.report.wall_time),
                ]);
                t.push(cells);
            }
            t
        },
        || json_bytes(&out),
    )?;
    let mut profiles = 0;
    if let Some(path) = cfg.out.as_deref() {
        for r in &out.rows {
            write_profile(path, &axis_name(r.eps), &r.report.axis_profile)?;
            profiles += 1;
        }
    }
    let last = out.rows.last().map(|r| r.probes[PROBE_HEIGHTS.len() - 1].1).unwrap_or(f64::NAN);
    Ok(Outcome {
        pass: out.pass,
        summary: format!(
            "sweep: {} ({} eps values, u(0,0.4) = {last:.6} at the smallest eps, {profiles} axis profiles)",
            verdict(out.pass),
            out.rows.len()
        ),
    })
}

fn write_profile(main: &Path, suffix: &str, profile: &[(f64, f64)]) -> Result<()> {
    emit(Some(&sibling(main, suffix)), &profile_table(profile).to_bytes()?)
}

#[derive(Serialize)]
struct FullReport {
    params: BarrierParams,
    examples: Vec<(ExampleId, f64)>,
    examples_pass: bool,
    barrier: BarrierReport,
    barrier_pass: bool,
    solve: SolveOutput,
    pass: bool,
}

pub fn report(cfg: &RunConfig) -> Result<Outcome> {
    if cfg.format != Format::Json {
        return Err(UsageError("report is written as JSON only".into()).into());
    }
    let params = cfg.checked_params()?[0];
    cfg.solve_grid(params.eps)?;
    let cases = examples_for(cfg, &ExampleId::ALL)?;
    let ex = strong_residuals(&cases, 100, cfg.seed)?;
    let barrier = barrier_report(&params, cfg.samples, 0)?;
    let solve = solve_once(cfg, &params)?;
    let barrier_pass = barrier.pass();
    let pass = ex.pass && barrier_pass && solve.pass;
    let out = FullReport {
        params,
        examples: ex.max_residual,
        examples_pass: ex.pass,
        barrier,
        barrier_pass,
        solve,
        pass,
    };
    emit(cfg.out.as_deref(), &json_bytes(&out)?)?;
    Ok(Outcome {
        pass,
        summary: format!(
            "report: {} (examples {}, barrier {}, solve {})",
            verdict(pass),
            verdict(out.examples_pass),
            verdict(barrier_pass),
            verdict(out.solve.pass)
        ),
    })
}
