//! Batch commands: each builds what it needs from a [`RunConfig`], writes
//! CSV artifacts into the output directory and reports failures through
//! exit-code classes. All emission is deterministic for a fixed config and
//! seed: fixed row order, compensated sums underneath, seventeen
//! significant digits.

use crate::config::{ConfigError, RunConfig, SurfaceSource};
use crate::epstein::{
    ball_distance, boundary_conformal_factor, epstein_embed, EpsteinError, SupportFunction,
};
use crate::foliation::{complex_dilatation, teich_bound, ExtendedReal, FoliationError, FoliationLeaf};
use crate::gauss::{solve_gauss, GaussError, MinimalSurfaceData, SolveOptions};
use crate::moebius::FuchsianGroup;
use crate::surface::{
    build_sampled_surface, poincare_series_batch, MeshError, QuadDifferentialField,
    SampledSurface, ScalarField, MIN_ANGLE_DEG,
};
use crate::wp::{first_variation_slope, minimal_surface_area, second_variation_fd, WpError};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Input(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Invariant(String),
    #[error("{0}")]
    Solver(String),
}

impl CommandError {
    /// 1 for configuration and I/O problems, 2 for violated invariants,
    /// 3 for solver non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(_) | CommandError::Input(_) | CommandError::Io { .. } => 1,
            CommandError::Invariant(_) => 2,
            CommandError::Solver(_) => 3,
        }
    }
}

impl From<MeshError> for CommandError {
    fn from(e: MeshError) -> Self {
        CommandError::Invariant(format!("{e}"))
    }
}

impl From<GaussError> for CommandError {
    fn from(e: GaussError) -> Self {
        match e {
            GaussError::ParameterCap { .. } | GaussError::NonConvergence { .. } => {
                CommandError::Solver(format!("{e}"))
            }
            GaussError::Mesh(m) => m.into(),
            GaussError::Group(g) => CommandError::Invariant(format!("{g}")),
        }
    }
}

impl From<WpError> for CommandError {
    fn from(e: WpError) -> Self {
        match e {
            WpError::Gauss(g) => g.into(),
            other => CommandError::Invariant(format!("{other}")),
        }
    }
}

impl From<FoliationError> for CommandError {
    fn from(e: FoliationError) -> Self {
        CommandError::Invariant(format!("{e}"))
    }
}

impl From<EpsteinError> for CommandError {
    fn from(e: EpsteinError) -> Self {
        match e {
            EpsteinError::BadSpec { .. } => CommandError::Input(format!("{e}")),
            other => CommandError::Invariant(format!("{other}")),
        }
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_artifact(dir: &Path, name: &str, text: &str) -> Result<(), CommandError> {
    std::fs::create_dir_all(dir).map_err(|source| CommandError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|source| CommandError::Io { path, source })
}

fn load_group(cfg: &RunConfig) -> Result<FuchsianGroup, CommandError> {
    match &cfg.source {
        SurfaceSource::Bolza => Ok(FuchsianGroup::bolza()),
        SurfaceSource::File(path) => {
            FuchsianGroup::from_file(path).map_err(|e| CommandError::Input(format!("{e}")))
        }
    }
}

fn zero_field(surface: &SampledSurface) -> QuadDifferentialField {
    QuadDifferentialField {
        values: vec![Complex64::new(0.0, 0.0); surface.point_count()],
        automorphy_residual: 0.0,
    }
}

fn solver_options(cfg: &RunConfig) -> SolveOptions {
    SolveOptions {
        tolerance: cfg.solver_tolerance,
        max_newton: cfg.max_newton,
        t_cap: cfg.t_max,
        initial_u: None,
    }
}

/// Solve at the configured parameter with the first basis differential.
/// At t = 0 the series never enters the equation, so its construction is
/// skipped entirely.
fn solve_configured(
    cfg: &RunConfig,
    group: &FuchsianGroup,
    surface: &SampledSurface,
) -> Result<MinimalSurfaceData, CommandError> {
    let field = if cfg.t == Complex64::new(0.0, 0.0) {
        zero_field(surface)
    } else {
        let polys = cfg.parsed_basis();
        poincare_series_batch(&polys[..1], group, cfg.word_length, surface)?
            .pop()
            .expect("one field")
    };
    Ok(solve_gauss(surface, &field, cfg.t, &solver_options(cfg))?)
}

pub fn cmd_surface_check(cfg: &RunConfig) -> Result<(), CommandError> {
    let group = load_group(cfg)?;
    let report = group.verify();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut circle_residual: f64 = 0.0;
    for _ in 0..64 {
        let z = Complex64::from_polar(1.0, rng.gen::<f64>() * std::f64::consts::TAU);
        for g in group.generators() {
            circle_residual = circle_residual.max((g.apply_unchecked(z).norm() - 1.0).abs());
        }
    }

    struct Row {
        name: &'static str,
        value: f64,
        threshold: f64,
        pass: bool,
    }
    let below = |name: &'static str, value: f64, threshold: f64| Row {
        name,
        value,
        threshold,
        pass: value <= threshold,
    };
    let mut rows = vec![
        below("det_residual", report.det_residual, 1e-8),
        below("relation_residual", report.relation_residual, 1e-8),
        below("circle_preservation", circle_residual, 1e-8),
    ];

    let mut build_error: Option<MeshError> = None;
    match build_sampled_surface(&group, cfg.resolution) {
        Ok(surface) => {
            let mut seam_residual: f64 = 0.0;
            for pair in surface.seam() {
                let from = surface.chart_coords()[pair.from_chart as usize];
                let to = surface.chart_coords()[pair.to_chart as usize];
                let image = group.generators()[pair.generator].apply_unchecked(from);
                seam_residual = seam_residual.max((image - to).norm());
            }
            rows.push(below("seam_residual", seam_residual, 1e-8));
            let area = surface.total_mass();
            let target = 4.0 * std::f64::consts::PI;
            rows.push(below(
                "area_vs_gauss_bonnet",
                (area - target).abs() / target,
                0.01,
            ));
            let ones = ScalarField::constant(1.0, surface.point_count());
            let flat = surface.laplace_beltrami(&ones)?;
            rows.push(below("laplacian_on_constants", flat.max_abs(), 1e-8));
            rows.push(below(
                "stiffness_symmetry",
                surface.stiffness().symmetry_residual(),
                1e-12,
            ));
            rows.push(Row {
                name: "min_triangle_angle_deg",
                value: surface.min_angle_deg(),
                threshold: MIN_ANGLE_DEG,
                pass: surface.min_angle_deg() >= MIN_ANGLE_DEG,
            });
        }
        Err(MeshError::SeamMismatch { residual }) => {
            rows.push(Row {
                name: "seam_residual",
                value: residual,
                threshold: 1e-8,
                pass: false,
            });
        }
        Err(other) => build_error = Some(other),
    }

    let mut csv = String::from("check,value,threshold,pass\n");
    for row in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            row.name,
            num(row.value),
            num(row.threshold),
            row.pass
        );
    }
    write_artifact(&cfg.out_dir, "surface_check.csv", &csv)?;

    if let Some(e) = build_error {
        return Err(e.into());
    }
    let failing: Vec<&str> = rows.iter().filter(|r| !r.pass).map(|r| r.name).collect();
    if failing.is_empty() {
        println!("surface-check: {} checks passed", rows.len());
        Ok(())
    } else {
        Err(CommandError::Invariant(format!(
            "surface checks failed: {}",
            failing.join(", ")
        )))
    }
}

pub fn cmd_gauss_solve(cfg: &RunConfig) -> Result<(), CommandError> {
    let group = load_group(cfg)?;
    let surface = build_sampled_surface(&group, cfg.resolution)?;
    let data = solve_configured(cfg, &group, &surface)?;
    let area = minimal_surface_area(&surface, &data);

    let mut csv = String::from("idx,re_z,im_z,u,lambda,shape_a,shape_b\n");
    for i in 0..surface.point_count() {
        let z = surface.points()[i];
        let _ = writeln!(
            csv,
            "{i},{},{},{},{},{},{}",
            num(z.re),
            num(z.im),
            num(data.u.values[i]),
            num(data.lambda.values[i]),
            num(data.shape_a.values[i]),
            num(data.shape_b.values[i])
        );
    }
    write_artifact(&cfg.out_dir, "gauss_solve.csv", &csv)?;

    let mut summary = String::from(
        "t_re,t_im,resolution,word_length,iterations,residual,area,max_lambda,almost_fuchsian\n",
    );
    let _ = writeln!(
        summary,
        "{},{},{},{},{},{},{},{},{}",
        num(cfg.t.re),
        num(cfg.t.im),
        cfg.resolution,
        cfg.word_length,
        data.iterations,
        num(data.residual),
        num(area),
        num(data.max_lambda()),
        data.almost_fuchsian
    );
    write_artifact(&cfg.out_dir, "gauss_summary.csv", &summary)?;
    println!(
        "gauss-solve: t = {} + {}i, {} Newton iterations, area {:.6}, max lambda {:.6}",
        cfg.t.re,
        cfg.t.im,
        data.iterations,
        area,
        data.max_lambda()
    );
    Ok(())
}

pub fn cmd_foliate(cfg: &RunConfig) -> Result<(), CommandError> {
    let group = load_group(cfg)?;
    let surface = build_sampled_surface(&group, cfg.resolution)?;
    let data = solve_configured(cfg, &group, &surface)?;
    let lambda0 = data.max_lambda();

    let mut grid = cfg.r_grid.clone();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut csv = String::from("r,max_lambda1,max_lambda2,max_abs_mu,dT_bound_from_minimal\n");
    for &r in &grid {
        let leaf = FoliationLeaf::from_minimal_data(&surface, &data, r)?;
        let mu = complex_dilatation(&leaf.metric)?;
        let max_mu = mu.iter().map(|m| m.norm()).fold(0.0, f64::max);
        let max_l1 = leaf
            .principal_low
            .values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let max_l2 = leaf
            .principal_high
            .values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let bound = teich_bound(lambda0, ExtendedReal::Finite(0.0), ExtendedReal::Finite(r))?;
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            num(r),
            num(max_l1),
            num(max_l2),
            num(max_mu),
            num(bound)
        );
    }
    write_artifact(&cfg.out_dir, "foliate.csv", &csv)?;
    println!(
        "foliate: {} leaves, central max lambda {:.6}",
        grid.len(),
        lambda0
    );
    Ok(())
}

pub fn cmd_bounds(cfg: &RunConfig) -> Result<(), CommandError> {
    let mut grid = cfg.r_grid.clone();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut csv = String::from("lambda0,r1,r2,bound\n");
    for &l in &cfg.lambda0 {
        let mut pairs: Vec<(ExtendedReal, ExtendedReal)> = Vec::new();
        for i in 0..grid.len() {
            for j in i + 1..grid.len() {
                pairs.push((ExtendedReal::Finite(grid[i]), ExtendedReal::Finite(grid[j])));
            }
        }
        pairs.push((ExtendedReal::NegInf, ExtendedReal::PosInf));
        pairs.push((ExtendedReal::Finite(0.0), ExtendedReal::PosInf));
        pairs.push((ExtendedReal::NegInf, ExtendedReal::Finite(0.0)));
        for (r1, r2) in pairs {
            let bound = teich_bound(l, r1, r2)?;
            let _ = writeln!(csv, "{},{r1},{r2},{}", num(l), num(bound));
        }
    }
    write_artifact(&cfg.out_dir, "bounds.csv", &csv)?;
    println!(
        "bounds: {} curvature levels over {} grid values",
        cfg.lambda0.len(),
        grid.len()
    );
    Ok(())
}

pub fn cmd_wp_verify(cfg: &RunConfig) -> Result<(), CommandError> {
    let group = load_group(cfg)?;
    let surface = build_sampled_surface(&group, cfg.resolution)?;
    let polys = cfg.parsed_basis();
    let fields = poincare_series_batch(&polys, &group, cfg.word_length, &surface)?;

    let mut csv =
        String::from("alpha_id,beta_id,resolution,word_len,h,fd_re,fd_im,wp_re,wp_im,rel_error\n");
    let mut worst: f64 = 0.0;
    for i in 0..fields.len() {
        for j in i..fields.len() {
            let report = second_variation_fd(&surface, &fields[i], &fields[j], cfg.wp_step)?;
            worst = worst.max(report.rel_error);
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{},{}",
                cfg.basis[i],
                cfg.basis[j],
                cfg.resolution,
                cfg.word_length,
                num(cfg.wp_step),
                num(report.finite_difference.re),
                num(report.finite_difference.im),
                num(report.pairing.re),
                num(report.pairing.im),
                num(report.rel_error)
            );
        }
    }
    write_artifact(&cfg.out_dir, "wp_verify.csv", &csv)?;

    let slope = first_variation_slope(&surface, &fields[0], &[0.02, 0.04, 0.08])?;
    let mut slope_csv = String::from("alpha_id,slope\n");
    let _ = writeln!(slope_csv, "{},{}", cfg.basis[0], num(slope));
    write_artifact(&cfg.out_dir, "wp_slope.csv", &slope_csv)?;

    println!(
        "wp-verify: worst rel error {worst:.3e}, first-variation slope {slope:.4}"
    );
    if worst > cfg.wp_threshold {
        return Err(CommandError::Invariant(format!(
            "worst rel error {worst:.3e} exceeds threshold {}",
            cfg.wp_threshold
        )));
    }
    if !(1.8..=2.2).contains(&slope) {
        return Err(CommandError::Invariant(format!(
            "first-variation slope {slope} outside [1.8, 2.2]"
        )));
    }
    Ok(())
}

pub fn cmd_epstein(cfg: &RunConfig) -> Result<(), CommandError> {
    let rho = SupportFunction::parse(&cfg.rho)?;
    let unit = SupportFunction::constant(1.0);

    let n = cfg.grid_n as usize;
    let mut grid = Vec::with_capacity(n * n);
    for iy in 0..n {
        for ix in 0..n {
            let coord = |i: usize| {
                if n == 1 {
                    0.0
                } else {
                    -cfg.grid_extent + 2.0 * cfg.grid_extent * i as f64 / (n - 1) as f64
                }
            };
            grid.push(Complex64::new(coord(ix), coord(iy)));
        }
    }

    let radius = (0.5f64).tanh();
    let sphere_defect = grid
        .iter()
        .map(|&theta| {
            let p = epstein_embed(&unit, theta);
            (p.norm_sqr().sqrt() - radius).abs()
        })
        .fold(0.0f64, f64::max);

    let mut csv = String::from("rho_id,re_theta,im_theta,px,py,pz,boundary_factor\n");
    for (id, sf) in [(cfg.rho.as_str(), &rho), ("constant:1", &unit)] {
        for &theta in &grid {
            let p = epstein_embed(sf, theta);
            let bf = boundary_conformal_factor(sf, theta);
            let _ = writeln!(
                csv,
                "{id},{},{},{},{},{},{}",
                num(theta.re),
                num(theta.im),
                num(p.x),
                num(p.y),
                num(p.z),
                num(bf)
            );
        }
    }
    write_artifact(&cfg.out_dir, "epstein.csv", &csv)?;

    let mut flow = String::from("re_theta,im_theta,shift,distance\n");
    let mut flow_defect: f64 = 0.0;
    for &shift in &cfg.flow_shifts {
        let moved = rho.offset(shift);
        for &theta in &grid {
            let d = ball_distance(epstein_embed(&rho, theta), epstein_embed(&moved, theta))?;
            flow_defect = flow_defect.max((d - shift).abs());
            let _ = writeln!(
                flow,
                "{},{},{},{}",
                num(theta.re),
                num(theta.im),
                num(shift),
                num(d)
            );
        }
    }
    write_artifact(&cfg.out_dir, "epstein_normal_flow.csv", &flow)?;

    let factor_at_origin = boundary_conformal_factor(&unit, Complex64::new(0.0, 0.0));
    let expected = 4.0 * (2.0f64).exp();
    let factor_defect = (factor_at_origin - expected).abs() / expected;

    println!(
        "epstein: {} grid points, sphere defect {sphere_defect:.3e}, flow defect {flow_defect:.3e}",
        grid.len()
    );
    if sphere_defect > 1e-12 {
        return Err(CommandError::Invariant(format!(
            "constant density rows deviate from the centered sphere by {sphere_defect:.3e}"
        )));
    }
    if factor_defect > 1e-12 {
        return Err(CommandError::Invariant(format!(
            "boundary factor at the origin off by {factor_defect:.3e}"
        )));
    }
    if flow_defect > 1e-6 {
        return Err(CommandError::Invariant(format!(
            "normal flow distance defect {flow_defect:.3e} exceeds 1e-6"
        )));
    }
    Ok(())
}
