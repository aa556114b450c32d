//! Subcommand implementations.

use crate::geometry_spec::{parse_ball, parse_geometry, parse_point};
use crate::outputs::{csv, emit, fmt, Artifacts};
use crate::{Cli, CliError, CliResult};
use clap::Args;
use codimlab_core::alpha::{alpha_number, ur_carleson_sum, AlphaConfig, UrConfig};
use codimlab_core::carleson::{
    cm_norm, counterexample_integral, green_ratio_functional, BallFamily, CounterexampleRule,
};
use codimlab_core::geometry::BoundarySet;
use codimlab_core::smooth_distance::{
    d_exponent, grad_d_beta, EvalPath, OperatorParams,
};
use codimlab_core::solver::{
    assemble_and_solve, green_infinity, harmonic_measure, radial_solution, Assembly, CellRole,
    Grid, RadialWeight,
};
use codimlab_core::whitney::{whitney_decompose, BoxRegion, CutoffSpec};
use std::path::PathBuf;

fn internal<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Internal(e.to_string())
}

fn config<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Config(e.to_string())
}

fn params_from(set: &BoundarySet, beta: f64, gamma: f64, alpha: f64) -> CliResult<OperatorParams> {
    OperatorParams::new(beta, gamma, alpha, set).map_err(config)
}

fn read_points(path: &PathBuf, n: usize) -> CliResult<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('x') {
            continue;
        }
        let coords: Result<Vec<f64>, _> =
            line.split(',').take(n).map(|t| t.trim().parse::<f64>()).collect();
        let coords = coords
            .map_err(|e| CliError::Config(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        if coords.len() != n {
            return Err(CliError::Config(format!(
                "{}:{}: expected {n} coordinates",
                path.display(),
                lineno + 1
            )));
        }
        out.push(coords);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct GeometryArgs {
    /// Generator spec or CSV path.
    #[arg(long)]
    pub geometry: String,
    /// Atom CSV output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run the Ahlfors-regularity sweep with `centers,radii`.
    #[arg(long)]
    pub check_ahlfors: Option<String>,
}

pub fn geometry(cli: &Cli, args: &GeometryArgs) -> CliResult<()> {
    let set = parse_geometry(&args.geometry)?;
    if let Some(path) = &args.out {
        let mut buf = Vec::new();
        set.write_csv(&mut buf).map_err(internal)?;
        std::fs::write(path, buf).map_err(internal)?;
    }
    let mut summary = set.descriptor_json();
    if let Some(spec) = &args.check_ahlfors {
        let (c, r) = spec
            .split_once(',')
            .ok_or_else(|| CliError::Config("expected centers,radii".into()))?;
        let centers: usize = c.trim().parse().map_err(config)?;
        let radii: usize = r.trim().parse().map_err(config)?;
        let report =
            codimlab_core::geometry::check_ahlfors(&set, centers, radii, cli.seed).map_err(config)?;
        summary["ahlfors"] = serde_json::json!({
            "c_low": report.c_low,
            "c_high": report.c_high,
            "samples": report.samples,
            "scale_range": report.scale_range,
        });
    }
    emit(
        cli.json,
        &format!(
            "{} atoms (d={}, n={}, h={})",
            set.len(),
            set.dim_d(),
            set.dim_n(),
            set.resolution_h()
        ),
        &summary,
    )
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct DbetaArgs {
    #[arg(long)]
    pub geometry: String,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// CSV of query points (n coordinates per row).
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Evaluation route: auto, cloud, or parametric.
    #[arg(long, default_value = "auto")]
    pub path: String,
}

fn parse_path(s: &str) -> CliResult<EvalPath> {
    match s {
        "auto" => Ok(EvalPath::Auto),
        "cloud" => Ok(EvalPath::Cloud),
        "parametric" => Ok(EvalPath::Parametric),
        other => Err(CliError::Config(format!("unknown path '{other}'"))),
    }
}

pub fn dbeta(cli: &Cli, args: &DbetaArgs) -> CliResult<()> {
    let set = parse_geometry(&args.geometry)?;
    let params = params_from(&set, args.beta, 0.0, args.beta)?;
    let path = parse_path(&args.path)?;
    let points = read_points(&args.points, set.dim_n())?;
    let mut rows = Vec::with_capacity(points.len());
    let mut failures = 0usize;
    for p in &points {
        let mut row: Vec<String> = p.iter().map(|c| fmt(*c)).collect();
        match (d_exponent(&set, args.beta, p, path), grad_d_beta(&set, &params, p, path)) {
            (Ok(d), Ok(g)) => {
                row.push(fmt(d.value));
                for c in &g.value {
                    row.push(fmt(*c));
                }
                row.push(fmt(d.est_error.max(g.est_error)));
            }
            _ => {
                failures += 1;
                row.extend(std::iter::repeat_n("nan".to_string(), set.dim_n() + 2));
            }
        }
        rows.push(row);
    }
    let mut header: Vec<String> = (1..=set.dim_n()).map(|j| format!("x{j}")).collect();
    header.push("d_beta".into());
    for j in 1..=set.dim_n() {
        header.push(format!("grad{j}"));
    }
    header.push("est_error".into());
    std::fs::write(&args.out, csv(&header.join(","), &rows)).map_err(internal)?;
    emit(
        cli.json,
        &format!("{} points evaluated ({failures} rejected) -> {}", points.len(), args.out.display()),
        &serde_json::json!({"points": points.len(), "rejected": failures}),
    )
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct WhitneyArgs {
    #[arg(long)]
    pub geometry: String,
    /// Box as "half_width" (cube centered at the origin).
    #[arg(long, default_value_t = 2.0)]
    pub box_half: f64,
    #[arg(long, default_value_t = 6)]
    pub max_level: i32,
    #[arg(long, default_value_t = 20_000_000)]
    pub budget: usize,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn whitney(cli: &Cli, args: &WhitneyArgs) -> CliResult<()> {
    let set = parse_geometry(&args.geometry)?;
    let bx = BoxRegion::cube(&vec![0.0; set.dim_n()], args.box_half);
    let dec = whitney_decompose(&set, &bx, args.max_level, args.budget).map_err(internal)?;
    let n = set.dim_n();
    let mut rows = Vec::with_capacity(dec.cubes.len());
    for (cube, kind) in dec
        .cubes
        .iter()
        .map(|c| (c, "whitney"))
        .chain(dec.tube_cubes.iter().map(|c| (c, "tube")))
    {
        let mut row = vec![cube.level.to_string()];
        for j in 0..n {
            row.push(fmt(cube.lo(j)));
        }
        row.push(fmt(cube.side));
        row.push(fmt(cube.center_dist));
        row.push(kind.to_string());
        rows.push(row);
    }
    let mut header = vec!["level".to_string()];
    for j in 1..=n {
        header.push(format!("corner{j}"));
    }
    header.extend(["side".into(), "center_dist".into(), "kind".into()]);
    std::fs::write(&args.out, csv(&header.join(","), &rows)).map_err(internal)?;
    emit(
        cli.json,
        &format!(
            "{} whitney cubes, {} tube cubes -> {}",
            dec.cubes.len(),
            dec.tube_cubes.len(),
            args.out.display()
        ),
        &serde_json::json!({
            "whitney": dec.cubes.len(),
            "tube": dec.tube_cubes.len(),
            "effective_box": dec.effective_box,
        }),
    )
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct CutoffArgs {
    #[arg(long)]
    pub geometry: String,
    /// Ball as "x1,..,xn,r" centered on the boundary.
    #[arg(long)]
    pub ball: String,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn cutoff(cli: &Cli, args: &CutoffArgs) -> CliResult<()> {
    let set = parse_geometry(&args.geometry)?;
    let (center, radius) = parse_ball(&args.ball, set.dim_n())?;
    let spec = CutoffSpec::new(&center, radius, args.epsilon).map_err(config)?;
    let points = read_points(&args.points, set.dim_n())?;
    let mut rows = Vec::new();
    for p in &points {
        let (value, grad) = codimlab_core::whitney::cutoff_eval(&spec, &set, p).map_err(internal)?;
        let mut row: Vec<String> = p.iter().map(|c| fmt(*c)).collect();
        row.push(fmt(value));
        for g in &grad {
            row.push(fmt(*g));
        }
        rows.push(row);
    }
    let mut header: Vec<String> = (1..=set.dim_n()).map(|j| format!("x{j}")).collect();
    header.push("phi".into());
    for j in 1..=set.dim_n() {
        header.push(format!("dphi{j}"));
    }
    std::fs::write(&args.out, csv(&header.join(","), &rows)).map_err(internal)?;
    emit(
        cli.json,
        &format!("{} cutoff evaluations -> {}", points.len(), args.out.display()),
        &serde_json::json!({"points": points.len()}),
    )
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct AlphaArgs {
    #[arg(long)]
    pub geometry: String,
    /// Center on the boundary, "x1,..,xn".
    #[arg(long)]
    pub center: String,
    #[arg(long)]
    pub radius: f64,
    #[arg(long, default_value_t = 600)]
    pub node_cap: usize,
}

pub fn alpha(cli: &Cli, args: &AlphaArgs) -> CliResult<()> {
    let set = parse_geometry(&args.geometry)?;
    let center = parse_point(&args.center, set.dim_n())?;
    let cfg = AlphaConfig { node_cap: args.node_cap, seed: cli.seed, ..Default::default() };
    let a = alpha_number(&set, &center, args.radius, &cfg).map_err(config)?;
    emit(
        cli.json,
        &format!(
            "alpha({:?}, {}) = {:.6e} [{:?}, {} lp solves]",
            center, args.radius, a.value, a.lp_status, a.lp_solves
        ),
        &serde_json::json!({
            "value": a.value,
            "plane_point": a.minimizer.plane_point,
            "plane_basis": a.minimizer.plane_basis,
            "density_c": a.minimizer.density_c,
            "lp_status": format!("{:?}", a.lp_status),
            "lp_solves": a.lp_solves,
        }),
    )
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct UrSumArgs {
    #[arg(long)]
    pub geometry: String,
    /// Ball "x1,..,xn,r".
    #[arg(long)]
    pub ball: String,
    #[arg(long, default_value_t = 4)]
    pub scales: usize,
    #[arg(long, default_value_t = 16)]
    pub centers_per_scale: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn ur_sum(cli: &Cli, args: &UrSumArgs) -> CliResult<()> {
    let set = parse_geometry(&args.geometry)?;
    let (center, radius) = parse_ball(&args.ball, set.dim_n())?;
    let cfg = UrConfig {
        alpha: AlphaConfig { seed: cli.seed, ..Default::default() },
        max_centers_per_scale: args.centers_per_scale,
    };
    let report = ur_carleson_sum(&set, &center, radius, args.scales, &cfg).map_err(config)?;
    if let Some(path) = &args.out {
        let rows: Vec<Vec<String>> = report
            .rows
            .iter()
            .map(|r| {
                vec![
                    fmt(r.scale),
                    fmt(r.contribution),
                    fmt(r.mean_alpha),
                    r.centers_used.to_string(),
                    r.centers_skipped.to_string(),
                ]
            })
            .collect();
        std::fs::write(
            path,
            csv("scale,contribution,mean_alpha,centers_used,centers_skipped", &rows),
        )
        .map_err(internal)?;
    }
    emit(
        cli.json,
        &format!(
            "normalized multi-scale sum = {:.6e} over {} scales (sigma(B) = {:.4e})",
            report.normalized,
            report.rows.len(),
            report.sigma_ball
        ),
        &serde_json::to_value(&report).map_err(internal)?,
    )
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[arg(long)]
    pub geometry: String,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 48)]
    pub grid: usize,
    #[arg(long, default_value_t = 2.0)]
    pub box_half: f64,
    /// green | hm | dirichlet-power (data = D^{1-gamma} everywhere).
    #[arg(long, default_value = "green")]
    pub mode: String,
    /// hm mode: boundary patch "x1,..,xn,r".
    #[arg(long)]
    pub patch: Option<String>,
    /// hm mode: pole "x1,..,xn".
    #[arg(long)]
    pub pole: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

fn write_field(
    path: &PathBuf,
    grid: &Grid,
    values: &[f64],
) -> CliResult<()> {
    let mut rows = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        let c = grid.center(idx);
        rows.push(vec![
            idx.to_string(),
            fmt(c[0]),
            fmt(c[1]),
            fmt(c[2]),
            (grid.role(idx) as u8).to_string(),
            fmt(values[idx]),
        ]);
    }
    std::fs::write(path, csv("cell,x,y,z,role,value", &rows)).map_err(internal)
}

pub fn solve(cli: &Cli, args: &SolveArgs) -> CliResult<()> {
    let set = parse_geometry(&args.geometry)?;
    let params = params_from(&set, args.beta, args.gamma, args.beta)?;
    let bx = BoxRegion::cube(&vec![0.0; 3], args.box_half);
    let grid = Grid::new(&set, &bx, args.grid, None).map_err(config)?;
    let assembly = Assembly::new(grid.clone(), &set, &params).map_err(internal)?;
    let (values, report_json) = match args.mode.as_str() {
        "green" => {
            let (field, report) =
                green_infinity(&assembly, &set, &vec![0.0; 3], args.box_half / 4.0)
                    .map_err(internal)?;
            (field.values, serde_json::to_value(&report).map_err(internal)?)
        }
        "hm" => {
            let patch_spec = args
                .patch
                .as_ref()
                .ok_or_else(|| CliError::Config("hm mode needs --patch".into()))?;
            let pole_spec = args
                .pole
                .as_ref()
                .ok_or_else(|| CliError::Config("hm mode needs --pole".into()))?;
            let (pcenter, pradius) = parse_ball(patch_spec, 3)?;
            let pole = parse_point(pole_spec, 3)?;
            let patch: Vec<usize> = grid
                .tube_cells()
                .into_iter()
                .filter(|&c| {
                    let (ni, _) = set.nearest(&grid.center(c));
                    let y = set.point(ni);
                    y.iter().zip(&pcenter).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                        <= pradius * pradius
                })
                .collect();
            let est = harmonic_measure(&assembly, &pole, &patch).map_err(internal)?;
            let g2 = grid.clone();
            let is_patch: std::collections::HashSet<usize> = patch.iter().copied().collect();
            let data = move |idx: usize| if is_patch.contains(&idx) { 1.0 } else { 0.0 };
            let (field, _) = assembly
                .solve_dirichlet(&data, codimlab_core::solver::SOLVE_TOL, codimlab_core::solver::SOLVE_MAX_ITER)
                .map_err(internal)?;
            let _ = g2;
            (field.values, serde_json::to_value(&est).map_err(internal)?)
        }
        "dirichlet-power" => {
            let one_minus_gamma = 1.0 - args.gamma;
            let g2 = grid.clone();
            let beta = args.beta;
            let set2 = &set;
            let data = move |idx: usize| {
                let c = g2.center(idx);
                d_exponent(set2, beta, &c, EvalPath::Auto)
                    .map(|s| s.value.powf(one_minus_gamma))
                    .unwrap_or(0.0)
            };
            let (field, rep) = assemble_and_solve(grid.clone(), &set, &params, &data)
                .map_err(internal)?;
            (field.values, serde_json::to_value(&rep).map_err(internal)?)
        }
        other => return Err(CliError::Config(format!("unknown mode '{other}'"))),
    };
    write_field(&args.out, &grid, &values)?;
    if let Some(path) = &args.report {
        std::fs::write(path, serde_json::to_string_pretty(&report_json).map_err(internal)?)
            .map_err(internal)?;
    }
    emit(
        cli.json,
        &format!("{} cells -> {}", grid.len(), args.out.display()),
        &report_json,
    )
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct HmArgs {
    #[arg(long)]
    pub geometry: String,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 48)]
    pub grid: usize,
    #[arg(long, default_value_t = 2.0)]
    pub box_half: f64,
    /// Boundary patch "x1,..,xn,r".
    #[arg(long)]
    pub patch: String,
    /// Pole "x1,..,xn".
    #[arg(long)]
    pub pole: String,
}

pub fn hm(cli: &Cli, args: &HmArgs) -> CliResult<()> {
    let set = parse_geometry(&args.geometry)?;
    let params = params_from(&set, args.beta, args.gamma, args.beta)?;
    let bx = BoxRegion::cube(&vec![0.0; 3], args.box_half);
    let grid = Grid::new(&set, &bx, args.grid, None).map_err(config)?;
    let assembly = Assembly::new(grid.clone(), &set, &params).map_err(internal)?;
    let (pcenter, pradius) = parse_ball(&args.patch, 3)?;
    let pole = parse_point(&args.pole, 3)?;
    let patch: Vec<usize> = grid
        .tube_cells()
        .into_iter()
        .filter(|&c| {
            let (ni, _) = set.nearest(&grid.center(c));
            let y = set.point(ni);
            y.iter().zip(&pcenter).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                <= pradius * pradius
        })
        .collect();
    let est = harmonic_measure(&assembly, &pole, &patch).map_err(internal)?;
    emit(
        cli.json,
        &format!("omega^X(patch) ≈ {:.6e} over {} tube cells", est.value, est.patch_cells),
        &serde_json::to_value(&est).map_err(internal)?,
    )
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct GreenCheckArgs {
    #[arg(long)]
    pub geometry: String,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 48)]
    pub grid: usize,
    #[arg(long, default_value_t = 2.0)]
    pub box_half: f64,
    #[arg(long, default_value_t = 16)]
    pub balls: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn green_check(cli: &Cli, args: &GreenCheckArgs) -> CliResult<()> {
    let set = parse_geometry(&args.geometry)?;
    let params = params_from(&set, args.beta, args.gamma, args.alpha)?;
    let bx = BoxRegion::cube(&vec![0.0; 3], args.box_half);
    let grid = Grid::new(&set, &bx, args.grid, None).map_err(config)?;
    let assembly = Assembly::new(grid.clone(), &set, &params).map_err(internal)?;
    let (field, _) =
        green_infinity(&assembly, &set, &vec![0.0; 3], args.box_half / 4.0).map_err(internal)?;
    let r_max = args.box_half / 4.0;
    let r_min = (8.0 * grid.delta).max(40.0 * set.resolution_h()).min(r_max);
    let family =
        BallFamily::build(&set, &grid, 8, r_min, r_max, args.balls).map_err(config)?;
    let report = green_ratio_functional(&field, &set, &params, &family).map_err(internal)?;
    if let Some(path) = &args.out {
        let rows: Vec<Vec<String>> = report
            .rows
            .iter()
            .map(|r| {
                let mut row: Vec<String> = r.center.iter().map(|c| fmt(*c)).collect();
                row.push(fmt(r.radius));
                row.push(fmt(r.value));
                row.push(r.cells.to_string());
                row
            })
            .collect();
        std::fs::write(path, csv("cx,cy,cz,radius,value,cells", &rows)).map_err(internal)?;
    }
    emit(
        cli.json,
        &format!(
            "green-ratio functional sup = {:.6e} over {} balls",
            report.sup_value,
            report.rows.len()
        ),
        &serde_json::json!({
            "sup": report.sup_value,
            "n_balls": report.rows.len(),
            "skipped": report.skipped_balls,
        }),
    )
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct CarlesonArgs {
    /// Field CSV from `solve` (cell,x,y,z,role,value).
    #[arg(long)]
    pub field: PathBuf,
    #[arg(long)]
    pub geometry: String,
    #[arg(long, default_value_t = 48)]
    pub grid: usize,
    #[arg(long, default_value_t = 2.0)]
    pub box_half: f64,
    #[arg(long, default_value_t = 8)]
    pub stride: usize,
    #[arg(long, default_value_t = 32)]
    pub max_balls: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn carleson(cli: &Cli, args: &CarlesonArgs) -> CliResult<()> {
    let set = parse_geometry(&args.geometry)?;
    let bx = BoxRegion::cube(&vec![0.0; 3], args.box_half);
    let grid = Grid::new(&set, &bx, args.grid, None).map_err(config)?;
    let text = std::fs::read_to_string(&args.field).map_err(config)?;
    let mut values = vec![0.0; grid.len()];
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 6 {
            continue;
        }
        let idx: usize = fields[0].trim().parse().map_err(config)?;
        let v: f64 = fields[5].trim().parse().map_err(config)?;
        if idx < values.len() {
            values[idx] = v * v;
        }
    }
    let r_max = args.box_half / 4.0;
    let r_min = (8.0 * grid.delta).max(40.0 * set.resolution_h()).min(r_max);
    let family =
        BallFamily::build(&set, &grid, args.stride, r_min, r_max, args.max_balls)
            .map_err(config)?;
    let report = cm_norm(&values, &grid, &set, &family, "field^2").map_err(internal)?;
    if let Some(path) = &args.out {
        let rows: Vec<Vec<String>> = report
            .rows
            .iter()
            .map(|r| {
                let mut row: Vec<String> = r.center.iter().map(|c| fmt(*c)).collect();
                row.push(fmt(r.radius));
                row.push(fmt(r.value));
                row.push(fmt(r.excluded_mass));
                row
            })
            .collect();
        std::fs::write(path, csv("cx,cy,cz,radius,value,excluded", &rows)).map_err(internal)?;
    }
    emit(
        cli.json,
        &format!("carleson sup = {:.6e} over {} balls", report.sup_value, report.rows.len()),
        &serde_json::json!({
            "sup": report.sup_value,
            "n_balls": report.rows.len(),
            "excluded_mass_max": report.rows.iter().map(|r| r.excluded_mass).fold(0.0, f64::max),
        }),
    )
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct CounterexampleArgs {
    /// Comma-separated list of R values.
    #[arg(long, default_value = "100,1000,10000")]
    pub r_list: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn counterexample(cli: &Cli, args: &CounterexampleArgs) -> CliResult<()> {
    let mut rows = Vec::new();
    let mut values = Vec::new();
    for token in args.r_list.split(',') {
        let r: f64 = token.trim().parse().map_err(config)?;
        let a = counterexample_integral(r, CounterexampleRule::PeriodPanels).map_err(config)?;
        let b = counterexample_integral(r, CounterexampleRule::Simpson).map_err(config)?;
        if (a - b).abs() > 1e-6 * (1.0 + a.abs()) {
            return Err(CliError::Check(format!(
                "quadrature rules disagree at R={r}: {a} vs {b}"
            )));
        }
        rows.push(vec![fmt(r), fmt(a)]);
        values.push((r, a));
    }
    if let Some(path) = &args.out {
        std::fs::write(path, csv("R,I", &rows)).map_err(internal)?;
    }
    emit(
        cli.json,
        &values
            .iter()
            .map(|(r, v)| format!("I({r}) = {v:.8e}"))
            .collect::<Vec<_>>()
            .join("\n"),
        &serde_json::json!(values
            .iter()
            .map(|(r, v)| serde_json::json!({"R": r, "I": v}))
            .collect::<Vec<_>>()),
    )
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct PaperChecksArgs {
    /// Check profile: flat-codim2 (fast) or full (adds the sine-graph solve).
    #[arg(long, default_value = "flat-codim2")]
    pub profile: String,
    #[arg(long, default_value = "codimlab-out")]
    pub outdir: PathBuf,
}

struct CheckRow {
    name: String,
    value: f64,
    threshold: f64,
    pass: bool,
}

fn check(rows: &mut Vec<CheckRow>, name: &str, value: f64, threshold: f64) {
    rows.push(CheckRow {
        name: name.to_string(),
        value,
        threshold,
        pass: value <= threshold,
    });
}

pub fn paper_checks(cli: &Cli, args: &PaperChecksArgs) -> CliResult<()> {
    match args.profile.as_str() {
        "flat-codim2" | "full" => {}
        other => return Err(CliError::Config(format!("unknown profile '{other}'"))),
    }
    let mut artifacts = Artifacts::new(&args.outdir)?;
    let mut rows: Vec<CheckRow> = Vec::new();

    // Distance constancy on the flat line.
    let set = parse_geometry("flat:d=1,n=3,extent=10,h=0.01")?;
    let params = params_from(&set, 1.0, 0.0, 1.0)?;
    {
        let mut rng = codimlab_core::numeric::SplitMix64::new(cli.seed);
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for _ in 0..200 {
            let t = rng.range_f64(0.1, 2.0);
            let x = [rng.range_f64(-2.0, 2.0), t, 0.0];
            let d = d_exponent(&set, 1.0, &x, EvalPath::Parametric).map_err(internal)?;
            let ratio = d.value / t;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        check(&mut rows, "flat distance ratio spread", hi / lo - 1.0, 1e-3);
    }
    // Gradient identity on the cloud route.
    {
        let mut rng = codimlab_core::numeric::SplitMix64::new(cli.seed + 1);
        let mut worst = 0.0f64;
        for _ in 0..40 {
            let x = [rng.range_f64(-2.0, 2.0), rng.range_f64(0.3, 1.5), rng.range_f64(-1.0, 1.0)];
            let g = grad_d_beta(&set, &params, &x, EvalPath::Cloud).map_err(internal)?;
            let dist = set.distance(&x);
            let step = 1e-4 * dist;
            let mut fd = [0.0f64; 3];
            for j in 0..3 {
                let mut xp = x;
                xp[j] += step;
                let mut xm = x;
                xm[j] -= step;
                fd[j] = (d_exponent(&set, 1.0, &xp, EvalPath::Cloud).map_err(internal)?.value
                    - d_exponent(&set, 1.0, &xm, EvalPath::Cloud).map_err(internal)?.value)
                    / (2.0 * step);
            }
            let norm: f64 = g.value.iter().map(|v| v * v).sum::<f64>().sqrt();
            let err: f64 =
                g.value.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            worst = worst.max(err / norm);
        }
        check(&mut rows, "gradient identity rel error", worst, 1e-5);
    }
    // Counterexample closed form and decade increments.
    {
        let w = RadialWeight::Function(std::sync::Arc::new(|s: f64| 1.0 / (2.0 + s.cos())));
        let sol = radial_solution(3, 2, w, 0.0, 20.0).map_err(config)?;
        let mut worst = 0.0f64;
        for r in [1.0, std::f64::consts::PI, 10.0] {
            let u = sol.eval(r).map_err(internal)?;
            worst = worst.max((u - (2.0 * r + r.sin())).abs());
        }
        check(&mut rows, "cosine-weight profile abs error", worst, 1e-8);
        let mut increments = Vec::new();
        for r in [100.0, 1000.0] {
            let big = counterexample_integral(10.0 * r, CounterexampleRule::PeriodPanels)
                .map_err(internal)?;
            let small =
                counterexample_integral(r, CounterexampleRule::PeriodPanels).map_err(internal)?;
            increments.push(big - small);
        }
        let rel = (increments[0] - increments[1]).abs()
            / increments.iter().cloned().fold(0.0, f64::max);
        check(&mut rows, "counterexample decade spread", rel, 0.05);
    }
    // Magic case.
    {
        let sol = radial_solution(
            4,
            1,
            RadialWeight::OperatorPower { d: 1, n: 4, gamma: 0.0 },
            0.0,
            8.0,
        )
        .map_err(config)?;
        let mut worst = 0.0f64;
        for r in [0.25, 1.0, 7.0] {
            worst = worst.max((sol.eval(r).map_err(internal)? - r).abs());
        }
        check(&mut rows, "magic case linearity abs error", worst, 1e-8);
    }
    // A small green solve (full profile only; the fast profile stays by the
    // closed forms).
    if args.profile == "full" {
        let bx = BoxRegion::cube(&vec![0.0; 3], 2.0);
        let grid = Grid::new(&set, &bx, 32, None).map_err(config)?;
        let assembly = Assembly::new(grid.clone(), &set, &params).map_err(internal)?;
        let (g, _) =
            green_infinity(&assembly, &set, &vec![0.0; 3], 0.5).map_err(internal)?;
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for idx in 0..grid.len() {
            if grid.role(idx) != CellRole::Interior
                || grid.dist(idx) < 3.0 * grid.tube_radius
            {
                continue;
            }
            let c = grid.center(idx);
            if c.iter().any(|v| v.abs() > 1.0) {
                continue;
            }
            let d = d_exponent(&set, 1.0, &c, EvalPath::Parametric)
                .map_err(internal)?
                .value;
            let r = g.values[idx] / d;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        check(&mut rows, "green ratio two-sided spread (coarse)", hi / lo - 1.0, 1.0);
    }

    // Report.
    let mut csv_rows = Vec::new();
    let mut all_pass = true;
    for row in &rows {
        all_pass &= row.pass;
        println!(
            "{} {:45} value={:.6e} threshold={:.1e}",
            if row.pass { "PASS" } else { "FAIL" },
            row.name,
            row.value,
            row.threshold
        );
        csv_rows.push(vec![
            row.name.clone(),
            fmt(row.value),
            fmt(row.threshold),
            if row.pass { "pass".into() } else { "fail".into() },
        ]);
    }
    artifacts.write("checks.csv", &csv("name,value,threshold,status", &csv_rows))?;
    let manifest = artifacts.finish(serde_json::json!({
        "profile": args.profile,
        "seed": cli.seed,
        "pass": all_pass,
    }))?;
    emit(
        cli.json,
        &format!("manifest: {}", manifest.display()),
        &serde_json::json!({"pass": all_pass, "manifest": manifest.display().to_string()}),
    )?;
    if all_pass {
        Ok(())
    } else {
        Err(CliError::Check("one or more rows failed".into()))
    }
}
