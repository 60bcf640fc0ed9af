use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use ymaxial::bargmann::{gram_schmidt, BasisCache, PAIRS};
use ymaxial::functionals::abelian_value;
use ymaxial::grid::{all_edges, boundary_holonomy, builtin_su2_a, builtin_su2_b, builtin_u1, edge_field_from_connection, grid_identity_check, surface_ordered_product, CellOrder, ConnectionField, EdgeField};
use ymaxial::lie::{build_basis, max_abs, CMat, LieBasis};
use ymaxial::limits::{area_law_closed_form, area_law_limit, casimir_scalar, dual_area_law, potential_closed_form, quark_potential};
use ymaxial::measure::{ratio_estimate, sample_pairs, FieldSpace, MeasureConfig};
use ymaxial::surface::{area, heat_kernel_area, Surface};

use crate::config::{Command, ConnectionChoice, GroupSpec, RunConfig};
use crate::{CliError, Output};

/// Validates and runs on a pool of `workers` threads; the numbers do not depend on the count.
pub fn run(cfg: &RunConfig) -> Result<Output, CliError> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| CliError::Io(e.to_string()))?;
    pool.install(|| dispatch(cfg))
}

fn dispatch(cfg: &RunConfig) -> Result<Output, CliError> {
    let cmd = cfg.command()?;
    let surf = cfg.surface_for(cmd);
    match cmd {
        Command::Area => cmd_area(cfg, &surf),
        Command::Abelian => cmd_abelian(cfg, &surf),
        Command::Limit => cmd_limit(cfg, &surf),
        Command::Potential => cmd_potential(cfg),
        Command::Mc => cmd_mc(cfg, &surf),
        Command::GridCheck => cmd_grid_check(cfg, &surf),
        Command::Holonomy => cmd_holonomy(cfg, &surf),
        Command::Duality => cmd_duality(cfg, &surf),
    }
}

/// The κσ/2 Gaussians have width ~2/κ on a unit parameter square; a grid coarser
/// than that is flagged, and is fatal under --strict.
fn resolution_guard(cfg: &RunConfig, kappa: f64, out: &mut Output) -> Result<(), CliError> {
    let ratio = kappa / cfg.resolution as f64;
    if ratio > 1.0 {
        let msg = format!("kappa {kappa}: kappa/resolution = {ratio:.3} > 1, Gaussian width not resolved");
        if cfg.strict {
            return Err(CliError::Numerical(msg));
        }
        out.warnings.push(msg);
    }
    Ok(())
}

fn pair_label((a, b): (usize, usize)) -> String {
    format!("{a}{b}")
}

fn cmd_area(cfg: &RunConfig, surf: &Surface) -> Result<Output, CliError> {
    let mut out = Output::new(Command::Area, &["quantity", "pair", "kappa", "value"]);
    let rep = area(surf, cfg.resolution)?;
    out.push(vec![json!("area"), Value::Null, Value::Null, json!(rep.area)]);
    if let Some(exact) = surf.exact_area() {
        out.push(vec![json!("exact_area"), Value::Null, Value::Null, json!(exact)]);
    }
    for (k, &p) in PAIRS.iter().enumerate() {
        out.push(vec![json!("rho_weighted"), json!(pair_label(p)), Value::Null, json!(rep.per_pair[k])]);
    }
    for &kappa in &cfg.kappa {
        let hk = heat_kernel_area(surf, kappa, cfg.resolution, cfg.strict)?;
        if let Some(w) = hk.warning {
            out.warnings.push(format!("kappa {kappa}: {w}"));
        }
        let ratio = if rep.area > 0.0 { json!(hk.value / (2.0 * PI * rep.area)) } else { Value::Null };
        out.push(vec![json!("heat_kernel_ratio"), Value::Null, json!(kappa), ratio]);
    }
    Ok(out)
}

fn cmd_abelian(cfg: &RunConfig, surf: &Surface) -> Result<Output, CliError> {
    let mut out = Output::new(Command::Abelian, &["kappa", "value", "area", "target", "rel_dev"]);
    let a = area(surf, cfg.resolution)?.area;
    let target = (-a / 8.0).exp();
    for &kappa in &cfg.kappa {
        resolution_guard(cfg, kappa, &mut out)?;
        let v = abelian_value(surf, kappa, cfg.resolution)?;
        out.push(vec![json!(kappa), json!(v), json!(a), json!(target), json!((v - target).abs() / target)]);
    }
    Ok(out)
}

fn groups(cfg: &RunConfig) -> Vec<GroupSpec> {
    if cfg.groups.is_empty() {
        vec![GroupSpec { group: cfg.group, n: cfg.n }]
    } else {
        cfg.groups.clone()
    }
}

fn cmd_limit(cfg: &RunConfig, surf: &Surface) -> Result<Output, CliError> {
    let mut out = Output::new(Command::Limit, &["group", "n", "area", "limit", "closed_form", "exponent_scalar", "potential_slope"]);
    let a = area(surf, cfg.resolution)?.area;
    for g in groups(cfg) {
        let basis = build_basis(g.group, g.n)?;
        let r = area_law_limit(a, &basis)?;
        let slope = match casimir_scalar(&basis)? {
            Some(_) => json!(quark_potential(1.0, &basis)?),
            None => Value::Null,
        };
        out.push(vec![json!(g.group.to_string()), json!(g.n), json!(a), json!(r.value), json!(area_law_closed_form(g.group, g.n, a)), json!(r.exponent_scalar), slope]);
    }
    Ok(out)
}

fn cmd_potential(cfg: &RunConfig) -> Result<Output, CliError> {
    let mut out = Output::new(Command::Potential, &["group", "n", "R", "V", "closed_form"]);
    for g in groups(cfg) {
        let basis = build_basis(g.group, g.n)?;
        for &r in &cfg.radii {
            out.push(vec![json!(g.group.to_string()), json!(g.n), json!(r), json!(quark_potential(r, &basis)?), json!(potential_closed_form(g.group, g.n, r))]);
        }
    }
    Ok(out)
}

fn cache_file(dir: &Path, kappa: f64, cutoff: u32) -> std::path::PathBuf {
    dir.join(format!("basis_kappa{kappa}_r{cutoff}.json"))
}

/// Reads the cache file for (κ, cutoff) when present, else builds and writes it.
pub fn load_or_build_cache(dir: Option<&Path>, kappa: f64, cutoff: u32) -> Result<BasisCache, CliError> {
    let Some(dir) = dir else {
        return Ok(gram_schmidt(kappa, cutoff)?);
    };
    let path = cache_file(dir, kappa, cutoff);
    if path.exists() {
        let text = fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        return Ok(BasisCache::from_json(&v)?);
    }
    let cache = gram_schmidt(kappa, cutoff)?;
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let text = serde_json::to_string(&cache.to_json()).map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(cache)
}

fn cmd_mc(cfg: &RunConfig, surf: &Surface) -> Result<Output, CliError> {
    let mut out = Output::new(Command::Mc, &["kappa", "mean_re", "mean_im", "stderr", "n_samples", "mean_y", "stderr_y", "area_law_limit"]);
    if cfg.samples < 2 {
        return Err(CliError::Config("mc needs samples >= 2".into()));
    }
    let seed = cfg.seed.expect("validated");
    let basis = build_basis(cfg.group, cfg.n)?;
    let limit = area_law_limit(area(surf, cfg.resolution)?.area, &basis)?.value;
    for &kappa in &cfg.kappa {
        let mcfg = MeasureConfig { kappa, cutoff: cfg.cutoff, group: cfg.group, n: cfg.n, variance: cfg.variance, domain: cfg.domain, seed, qmc_nodes: cfg.qmc_nodes };
        let cache = load_or_build_cache(cfg.basis_cache_dir.as_deref(), kappa, cfg.cutoff)?;
        let space = FieldSpace::with_cache(&mcfg, cache)?;
        let (js, ys) = sample_pairs(&space, surf, cfg.samples, cfg.mc_grid, cfg.ode_steps)?;
        let e = ratio_estimate(&js, &ys)?;
        out.push(vec![json!(kappa), json!(e.mean.re), json!(e.mean.im), json!(e.stderr), json!(e.n_samples), json!(e.mean_y), json!(e.stderr_y), json!(limit)]);
    }
    Ok(out)
}

/// exp of a random algebra element Σ c_α E^α, c_α uniform in (-π, π).
fn random_group_element(rng: &mut ChaCha8Rng, basis: &LieBasis) -> CMat {
    let n = basis.matrix_dim;
    let mut x = CMat::zeros(n, n);
    for g in &basis.generators {
        x += g * Complex64::new(rng.random_range(-PI..PI), 0.0);
    }
    x.exp()
}

fn cmd_grid_check(cfg: &RunConfig, surf: &Surface) -> Result<Output, CliError> {
    let mut out = Output::new(Command::GridCheck, &["n", "source", "fields", "max_deviation"]);
    let basis = build_basis(cfg.group, cfg.n)?;
    let conn = resolve_connection(cfg)?;
    for &n in &cfg.grid_sizes {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.expect("validated"));
        rng.set_stream(n as u64);
        let mut worst = 0.0f64;
        for _ in 0..cfg.samples {
            let pairs = all_edges(n).into_iter().map(|e| (e, random_group_element(&mut rng, &basis))).collect();
            let field = EdgeField::from_pairs(n, basis.matrix_dim, pairs)?;
            worst = worst.max(grid_identity_check(&field)?.deviation);
        }
        out.push(vec![json!(n), json!(format!("random {}({})", basis.kind, basis.matrix_dim)), json!(cfg.samples), json!(worst)]);
        let field = edge_field_from_connection(&conn, surf, n, cfg.ode_steps)?;
        out.push(vec![json!(n), json!("connection"), json!(1), json!(grid_identity_check(&field)?.deviation)]);
    }
    Ok(out)
}

fn resolve_connection(cfg: &RunConfig) -> Result<ConnectionField, CliError> {
    match &cfg.connection {
        ConnectionChoice::Builtin(name) => match name.as_str() {
            "su2_a" => Ok(builtin_su2_a()),
            "su2_b" => Ok(builtin_su2_b()),
            "u1" => Ok(builtin_u1()),
            other => Err(CliError::Config(format!("unknown builtin connection {other:?} (su2_a, su2_b, u1)"))),
        },
        ConnectionChoice::Spec(spec) => Ok(ConnectionField::from_spec(spec)?),
    }
}

fn cmd_holonomy(cfg: &RunConfig, surf: &Surface) -> Result<Output, CliError> {
    let mut out = Output::new(Command::Holonomy, &["n", "order", "error", "ratio_to_previous"]);
    let conn = resolve_connection(cfg)?;
    let reference = boundary_holonomy(&conn, surf, cfg.reference_grid, cfg.ode_steps);
    for (order, label) in [(CellOrder::Holonomy, "holonomy"), (CellOrder::TimeOrdered, "time_ordered")] {
        let mut prev: Option<f64> = None;
        for &n in &cfg.grid_sizes {
            let err = max_abs(&(surface_ordered_product(&conn, surf, n, cfg.ode_steps, order)? - &reference));
            let ratio = prev.map_or(Value::Null, |p| json!(p / err));
            out.push(vec![json!(n), json!(label), json!(err), ratio]);
            prev = Some(err);
        }
    }
    Ok(out)
}

fn cmd_duality(cfg: &RunConfig, surf: &Surface) -> Result<Output, CliError> {
    let mut out = Output::new(Command::Duality, &["kappa", "norm_f", "norm_dual", "inner", "cos_theta", "sin_theta", "theta", "kappa2_inner", "lk_estimate", "asserted_limit"]);
    for &kappa in &cfg.kappa {
        resolution_guard(cfg, kappa, &mut out)?;
    }
    let basis: LieBasis = build_basis(cfg.group, cfg.n)?;
    let d = dual_area_law(surf, &basis, &cfg.kappa, cfg.resolution)?;
    for (r, k2) in d.per_kappa.iter().zip(&d.kappa2_inner) {
        out.push(vec![json!(r.kappa), json!(r.norm_f), json!(r.norm_dual), json!(r.inner), json!(r.cos_theta), json!(r.sin_theta), json!(r.theta), json!(k2), json!(r.lk_estimate), json!(d.limit.value)]);
    }
    Ok(out)
}
