//! One function per experiment kind. Each returns the report and its companion files without
//! touching the filesystem.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use warpstab_core::identities::{
    convergence_csv, divergence_residual, flux_residuals, observed_orders, pohozaev_residual, reilly_residual,
    serrin_master_residual,
};
use warpstab_core::profile::interior_grid;
use warpstab_core::solver::neumann_trace;
use warpstab_core::stability::{cmc_deficit, hk_deficit, stability_sweep};
use warpstab_core::{
    boundary_geometry, radial_oracle, solve_serrin, solve_warped_torsion, BoundarySpec, DeficitReport,
    IdentityResidual, MeridianDomain, MeridianMesh, RadialProblem, Sampling, ScalarField, SourceSpec, SweepConfig,
    SweepKind, Topology, WarpingProfile,
};

use crate::config::{Experiment, Prepared, Problem, RunConfig};
use crate::error::CliError;
use crate::report::{csv, to_json, Artifacts, Check, Report};

pub fn run(cfg: &RunConfig, prepared: &Prepared) -> Result<Artifacts, CliError> {
    let config = to_json(cfg);
    let kind = cfg.experiment().name();
    let domain = || prepared.domain.as_ref().expect("validated config carries a domain");
    let (result, checks, files) = match cfg.experiment() {
        Experiment::VerifyHypotheses { grid_points, random_points, beta1 } => {
            verify_hypotheses(&prepared.profile, *grid_points, *random_points, *beta1, cfg.seed)?
        }
        Experiment::SolveSerrin { source } => solve(cfg, domain(), Some(source))?,
        Experiment::SolveWarped => solve(cfg, domain(), None)?,
        Experiment::Identities { problem, source, levels } => identities(cfg, domain(), *problem, source, *levels)?,
        Experiment::HkDeficit => hk(cfg, domain())?,
        Experiment::CmcDeficit => cmc(cfg, domain()),
        Experiment::Sweep { r0, coeffs, amplitudes, problem, topology, solve } => {
            sweep(cfg, &prepared.profile, *r0, coeffs, amplitudes, problem, *topology, *solve)?
        }
    };
    Ok(Artifacts { report: Report::new(kind, config, result, checks), files })
}

type Outcome = (Value, Vec<Check>, Vec<(String, String)>);

fn verify_hypotheses(
    profile: &WarpingProfile,
    grid_points: usize,
    random_points: usize,
    beta1: f64,
    seed: u64,
) -> Result<Outcome, CliError> {
    let r_bar = profile.r_bar();
    let mut grid = interior_grid(r_bar, grid_points);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    grid.extend((0..random_points).map(|_| rng.gen_range(0.0..r_bar)).filter(|&r| r > 0.0));
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let report = profile.check_hypotheses(&grid, beta1)?;
    let checks = report.records.iter().map(|r| Check::holds(&r.hypothesis, r.pass)).collect();
    let result = json!({
        "r_bar": r_bar,
        "theta_at_origin": profile.theta_at_origin(),
        "grid_size": grid.len(),
        "beta1": beta1,
        "all_passed": report.all_passed(),
        "records": report.records,
    });
    Ok((result, checks, Vec::new()))
}

/// The radial solution on a centred ball (spaceforms) or an unperturbed slab.
fn oracle_error(domain: &MeridianDomain, field: &ScalarField, source: Option<&SourceSpec>) -> Option<f64> {
    let profile = domain.profile_arc();
    let (problem, radius) = match (domain.boundary(), source) {
        (BoundarySpec::GeodesicBall { radius, center }, Some(src)) if *center == 0.0 => {
            (RadialProblem::Serrin { curvature: profile.spaceform_curvature()?, source: src.clone() }, *radius)
        }
        (BoundarySpec::CosineSeries { r0, coeffs }, None)
            if domain.topology() == Topology::Homologous && coeffs.iter().all(|c| *c == 0.0) =>
        {
            (RadialProblem::Torsion, *r0)
        }
        _ => return None,
    };
    let exact = radial_oracle(&problem, profile, radius).ok()?;
    let mesh = field.mesh();
    Some(
        (0..mesh.num_nodes())
            .map(|v| (field.values[v] - exact.value(mesh.polar(v).0)).abs())
            .fold(0.0, f64::max),
    )
}

fn solve(cfg: &RunConfig, domain: &MeridianDomain, source: Option<&SourceSpec>) -> Result<Outcome, CliError> {
    let (h, panels) = (cfg.solver.h, cfg.solver.panels);
    let profile = domain.profile();
    let mesh = Arc::new(MeridianMesh::build(Arc::new(domain.clone()), h)?);
    let field = match source {
        Some(src) => solve_serrin(mesh.clone(), src, &cfg.solver.options())?,
        None => solve_warped_torsion(mesh.clone(), &cfg.solver.options())?,
    };
    let sampling = Sampling::from_mesh(&mesh, panels);
    let sampled = sampling.sample(&field);
    let surface = boundary_geometry(domain, panels);
    let geometric = DeficitReport::geometric(domain, &surface, panels);
    let deficits = match source {
        Some(src) => geometric.with_serrin(&sampling, profile, &sampled, src),
        None => geometric.with_warped(&sampling, profile, &sampled),
    };

    let trace = neumann_trace(&field, &surface);
    let area = surface.area();
    let mean = surface.nodes.iter().zip(&trace).map(|(p, t)| p.weight * t).sum::<f64>() / area;
    let (lo, hi) = trace.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), t| (a.min(*t), b.max(*t)));

    let tol = cfg.tolerances.deficit;
    let mut checks = vec![Check::at_most("interior_max", field.stats.interior_max, 0.0)];
    if let Some(e) = deficits.energy_serrin {
        checks.push(Check::at_least("energy_serrin", e, -tol));
    }
    if let Some(e) = deficits.energy_warped {
        checks.push(Check::at_least("energy_warped", e, -tol));
        for (name, bound) in [("hk_chain_bound", deficits.hk_chain_bound), ("cmc_chain_bound", deficits.cmc_chain_bound)] {
            if let Some(b) = bound {
                checks.push(Check::at_most(&format!("energy_warped_minus_{name}"), e - b, tol));
            }
        }
    }
    let oracle = oracle_error(domain, &field, source);
    let result = json!({
        "h": h,
        "nodes": mesh.num_nodes(),
        "stats": field.stats,
        "min_value": field.min_value(),
        "boundary_area": area,
        "neumann": { "mean": mean, "min": lo, "max": hi },
        "oracle_max_error": oracle,
        "deficits": deficits,
    });
    let files = vec![("field.csv".to_string(), csv("r,s,f,f_r,f_s", &field.csv_rows()))];
    Ok((result, checks, files))
}

fn identities(
    cfg: &RunConfig,
    domain: &MeridianDomain,
    problem: Problem,
    source: &SourceSpec,
    levels: usize,
) -> Result<Outcome, CliError> {
    let profile = domain.profile();
    let shared = Arc::new(domain.clone());
    let mut by_level = Vec::with_capacity(levels);
    for k in 0..levels {
        let h = cfg.solver.h / 2f64.powi(k as i32);
        let mesh = Arc::new(MeridianMesh::build(shared.clone(), h)?);
        let field = match problem {
            Problem::Serrin => solve_serrin(mesh.clone(), source, &cfg.solver.options())?,
            Problem::Warped => solve_warped_torsion(mesh.clone(), &cfg.solver.options())?,
        };
        let sampling = Sampling::from_mesh(&mesh, cfg.solver.panels);
        let sampled = sampling.sample(&field);
        let mut residuals: Vec<IdentityResidual> =
            vec![divergence_residual(&sampling, profile, &sampled), reilly_residual(&sampling, profile, &sampled)];
        match problem {
            Problem::Serrin if profile.spaceform_curvature().is_some() => {
                residuals.push(pohozaev_residual(&sampling, profile, &sampled, source)?);
                residuals.push(serrin_master_residual(&sampling, profile, &sampled, source)?);
            }
            Problem::Serrin => {}
            Problem::Warped => residuals.extend(flux_residuals(&sampling, profile, &sampled)),
        }
        by_level.push((h, residuals));
    }

    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let mut finest_scaled = BTreeMap::new();
    for (h, residuals) in &by_level {
        for r in residuals {
            series.entry(r.id.clone()).or_default().push((*h, r.relative));
            // |L - R| over the sum of |terms| stays meaningful when both sides vanish
            finest_scaled.insert(r.id.clone(), (r.scaled_residual(), r.absolute));
        }
    }
    let mut table = String::from("id,h,residual,order\n");
    let mut orders = BTreeMap::new();
    let mut checks = Vec::new();
    for (id, levels) in &series {
        for line in convergence_csv(levels).lines().skip(1) {
            table.push_str(&format!("{id},{line}\n"));
        }
        orders.insert(id.clone(), observed_orders(levels));
        let (scaled, absolute) = finest_scaled[id];
        let mut check = Check::at_most(id, scaled, cfg.tolerances.identity);
        check.pass |= absolute <= cfg.tolerances.identity_absolute;
        checks.push(check);
    }
    let result = json!({
        "problem": problem,
        "levels": by_level.iter().map(|(h, r)| json!({ "h": h, "residuals": r })).collect::<Vec<_>>(),
        "orders": orders,
    });
    Ok((result, checks, vec![("convergence.csv".to_string(), table)]))
}

fn hk(cfg: &RunConfig, domain: &MeridianDomain) -> Result<Outcome, CliError> {
    let panels = cfg.solver.panels;
    let surface = boundary_geometry(domain, panels);
    let deficit = hk_deficit(&surface, domain, panels)?;
    let tol = cfg.tolerances.deficit;
    let checks = vec![
        Check::at_least("hk_deficit", deficit.deficit, -tol * deficit.support_integral),
        Check::at_most(
            "support_divergence_mismatch",
            (deficit.support_integral - deficit.support_from_volume).abs() / deficit.support_from_volume,
            tol.max(1e-10),
        ),
    ];
    let report = DeficitReport::geometric(domain, &surface, panels);
    Ok((json!({ "hk": deficit, "report": report }), checks, Vec::new()))
}

fn cmc(cfg: &RunConfig, domain: &MeridianDomain) -> Outcome {
    let panels = cfg.solver.panels;
    let surface = boundary_geometry(domain, panels);
    let deficit = cmc_deficit(&surface, domain, panels);
    let checks = vec![Check::at_least("cmc_deficit", deficit.deficit, -cfg.tolerances.deficit)];
    let report = DeficitReport::geometric(domain, &surface, panels);
    (json!({ "cmc": deficit, "report": report }), checks, Vec::new())
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    cfg: &RunConfig,
    profile: &Arc<WarpingProfile>,
    r0: f64,
    coeffs: &[f64],
    amplitudes: &[f64],
    problem: &SweepKind,
    topology: Topology,
    solve: bool,
) -> Result<Outcome, CliError> {
    let needs_field = solve || matches!(problem, SweepKind::Serrin { .. });
    let sweep_cfg = SweepConfig {
        r0,
        coeffs: coeffs.to_vec(),
        amplitudes: amplitudes.to_vec(),
        kind: problem.clone(),
        topology,
        h: needs_field.then_some(cfg.solver.h),
        panels: cfg.solver.panels,
        solver: cfg.solver.options(),
    };
    let table = stability_sweep(profile.clone(), &sweep_cfg)?;
    let mut files = vec![("sweep.csv".to_string(), table.csv())];
    for (i, row) in table.rows.iter().enumerate() {
        let member = serde_json::to_string_pretty(&to_json(row)).expect("member serializes") + "\n";
        files.push((format!("members/member_{i:03}.json"), member));
    }
    let mut checks = vec![
        Check::holds("monotone_deficit", table.monotone_deficit),
        Check::holds("monotone_ring", table.monotone_ring),
    ];
    if table.rows.iter().all(|r| r.report.slice.is_some()) {
        checks.push(Check::holds("monotone_distance", table.monotone_distance));
    }
    Ok((to_json(&table), checks, files))
}
