use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use laguerre_lab::ensemble::EnsembleConfig;
use laguerre_lab::kernel::{local_grid, universality_residual, KernelEvaluator};
use laguerre_lab::limit_density::{density_curve, support};
use laguerre_lab::mc_stats::{
    default_lambda0, empirical_gap, mean_spacing, run_trials, spacing_ks, spacings, BatchSpec, SigmaSource, TrialBatch, CUT_MARGIN,
};
use laguerre_lab::saddle_contour::{build_branch, build_contours, check_lemmas, default_grid, PhaseFn, SaddleEquation};
use laguerre_lab::sine_stats::{gap_probability, spacing_pdf};
use laguerre_lab::verify::{run_criterion, VerifyOptions, CRITERIA};
use serde::Serialize;
use serde_json::json;

use crate::config::{Grid, Lambda0, RunConfig};
use crate::NumericalFailure;

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn csv<R: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = R>) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_path(self.dir.join(name))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json<V: Serialize>(&mut self, name: &str, value: &V) -> anyhow::Result<()> {
        let w = BufWriter::new(File::create(self.dir.join(name))?);
        serde_json::to_writer_pretty(w, value)?;
        self.files.push(name.to_string());
        Ok(())
    }
}

pub fn dispatch(name: &str, cfg: &RunConfig, batch: Option<&Path>, only: &[usize]) -> anyhow::Result<()> {
    let start = Instant::now();
    let mut out = Outputs::new(&cfg.out)?;
    let result = match name {
        "density" => density(cfg, &mut out),
        "saddle" => saddle(cfg, &mut out),
        "kernel" => kernel(cfg, &mut out),
        "gap" => gap(cfg, batch, &mut out),
        "spacing" => spacing(cfg, batch, &mut out),
        "simulate" => simulate(cfg, &mut out),
        "verify" => verify(cfg, only, &mut out),
        other => unreachable!("unknown subcommand {other}"),
    };
    // The manifest is written even when a tolerance check failed, so the run
    // can be reproduced and inspected.
    let mut echo = cfg.clone();
    echo.manifest = Some(json!({
        "subcommand": name,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.seed,
        "wall_time_seconds": start.elapsed().as_secs_f64(),
        "outputs": out.files,
        "status": if result.is_ok() { "ok" } else { "failed" },
    }));
    out.json("manifest.json", &echo)?;
    result
}

fn lambda0(cfg: &RunConfig) -> anyhow::Result<f64> {
    Ok(match cfg.lambda0 {
        Lambda0::Value(l) => l,
        Lambda0::Auto => default_lambda0(&cfg.sigma.limit_measure()?, cfg.ratio()?)?,
    })
}

fn density(cfg: &RunConfig, out: &mut Outputs) -> anyhow::Result<()> {
    let measure = cfg.sigma.limit_measure()?;
    let c = cfg.ratio()?;
    let supp = support(&measure, c)?;
    let bulk = measure.saddle_equation(c)?.bulk_lambda_intervals();
    let grid = match &cfg.grid {
        Some(g) => g.values(),
        None => {
            let hi = 1.1 * supp.last().map_or(1.0, |s| s.1);
            Grid { lo: hi / 400.0, hi, points: 400 }.values()
        }
    };
    let curve = density_curve(&grid, &measure, c, cfg.eps_bulk)?;
    out.csv("density.csv", &curve)?;
    out.json("density_summary.json", &json!({ "c": c, "support": supp, "bulk_intervals": bulk }))?;
    Ok(())
}

#[derive(Serialize)]
struct BranchRow {
    lambda: f64,
    re_z: f64,
    im_z: f64,
    #[serde(rename = "re_S")]
    re_s: f64,
    #[serde(rename = "im_S")]
    im_s: f64,
}

#[derive(Serialize)]
struct ContourRow {
    r#loop: usize,
    theta: f64,
    re_z: f64,
    im_z: f64,
    #[serde(rename = "re_S")]
    re_s: f64,
    #[serde(rename = "im_S")]
    im_s: f64,
}

fn saddle(cfg: &RunConfig, out: &mut Outputs) -> anyhow::Result<()> {
    let sigma = cfg.sigma_spectrum()?;
    let c = cfg.m()? as f64 / sigma.n() as f64;
    let l0 = lambda0(cfg)?;
    let eq = SaddleEquation::from_taus(sigma.tau(), c)?;
    let branch = build_branch(&eq, &default_grid(&eq, l0, 1024))?;
    let contours = build_contours(&branch, l0)?;
    let phase = PhaseFn::new(&eq, l0, contours.z0)?;
    let s_at = |z| phase.eval(z).unwrap_or(laguerre_lab::Complex64::new(f64::NAN, f64::NAN));
    out.csv(
        "branch.csv",
        branch.lambdas.iter().zip(&branch.z).map(|(&lambda, &z)| {
            let s = s_at(z);
            BranchRow { lambda, re_z: z.re, im_z: z.im, re_s: s.re, im_s: s.im }
        }),
    )?;
    let steps = 512;
    let mut rows = Vec::new();
    for k in 0..contours.loops.len() {
        for j in 0..=steps {
            let theta = std::f64::consts::TAU * j as f64 / steps as f64;
            let z = contours.point(k, theta).z;
            let s = s_at(z);
            rows.push(ContourRow { r#loop: k, theta, re_z: z.re, im_z: z.im, re_s: s.re, im_s: s.im });
        }
    }
    out.csv("contour.csv", rows)?;
    let report = check_lemmas(&branch, &contours, &phase);
    out.json("lemmas.json", &report)?;
    if !report.all_passed() {
        let failed: Vec<String> = report.predicates.iter().filter(|p| !p.passed).map(|p| p.id.to_string()).collect();
        return Err(NumericalFailure(format!("lemma predicates failed: {}", failed.join(", "))).into());
    }
    Ok(())
}

#[derive(Serialize)]
struct KernelCsvRow {
    xi: f64,
    eta: f64,
    kernel_value: f64,
    sine_limit: f64,
    abs_error: f64,
}

fn kernel(cfg: &RunConfig, out: &mut Outputs) -> anyhow::Result<()> {
    let sigma = cfg.sigma_spectrum()?;
    let l0 = lambda0(cfg)?;
    let ev = KernelEvaluator::new(sigma.tau(), cfg.m()?, l0)?;
    let grid = local_grid(cfg.kernel_half_width, cfg.kernel_step, cfg.kernel_spread);
    let report = universality_residual(&ev, &grid)?;
    out.csv(
        "kernel.csv",
        report.rows.iter().map(|r| KernelCsvRow { xi: r.xi, eta: r.eta, kernel_value: r.kernel_value, sine_limit: r.sine_limit, abs_error: r.abs_error }),
    )?;
    let flagged = report.rows.iter().filter(|r| r.flagged).count();
    out.json(
        "universality.json",
        &json!({
            "lambda0": report.lambda0, "n": report.n, "m": report.m, "rho": report.rho,
            "sup_error": report.sup_error, "points": report.rows.len(), "flagged": flagged,
        }),
    )?;
    if flagged > 0 {
        return Err(NumericalFailure(format!("{flagged} kernel values missed the quadrature tolerance")).into());
    }
    Ok(())
}

fn s_grid(cfg: &RunConfig) -> Vec<f64> {
    let count = (cfg.s_max / cfg.s_step).round() as usize;
    (0..=count).map(|k| k as f64 * cfg.s_step).collect()
}

#[derive(Serialize)]
struct CurveRow {
    s: f64,
    gap: f64,
    pdf: f64,
}

fn write_curve(cfg: &RunConfig, name: &str, out: &mut Outputs) -> anyhow::Result<laguerre_lab::sine_stats::SpacingCurve> {
    let curve = spacing_pdf(&s_grid(cfg))?;
    out.csv(name, (0..curve.s.len()).map(|k| CurveRow { s: curve.s[k], gap: curve.gap[k], pdf: curve.pdf[k] }))?;
    for w in &curve.warnings {
        log::warn!("{w}");
    }
    Ok(curve)
}

fn load_batch(dir: &Path) -> anyhow::Result<TrialBatch> {
    TrialBatch::load(dir).with_context(|| format!("loading batch from {}", dir.display()))
}

#[derive(Serialize)]
struct GapRow {
    s: f64,
    estimate: f64,
    stderr: f64,
    centered: f64,
    centered_stderr: f64,
    fredholm: f64,
}

fn gap(cfg: &RunConfig, batch: Option<&Path>, out: &mut Outputs) -> anyhow::Result<()> {
    write_curve(cfg, "gap.csv", out)?;
    if let Some(dir) = batch {
        let b = load_batch(dir)?;
        let reach = 2.0 * (b.half_width() - CUT_MARGIN);
        let mut rows = Vec::new();
        for s in s_grid(cfg).into_iter().filter(|&s| s <= reach) {
            let e = empirical_gap(&b, s)?;
            let f = gap_probability(-0.5 * s, 0.5 * s, 32)?.value;
            rows.push(GapRow { s, estimate: e.estimate, stderr: e.stderr, centered: e.centered, centered_stderr: e.centered_stderr, fredholm: f });
        }
        out.csv("gap_empirical.csv", rows)?;
    }
    Ok(())
}

fn spacing(cfg: &RunConfig, batch: Option<&Path>, out: &mut Outputs) -> anyhow::Result<()> {
    let curve = write_curve(cfg, "spacing.csv", out)?;
    if let Some(dir) = batch {
        let b = load_batch(dir)?;
        let sp = spacings(&b);
        #[derive(Serialize)]
        struct Row {
            spacing: f64,
        }
        out.csv("spacings.csv", sp.iter().map(|&spacing| Row { spacing }))?;
        out.json("ks.json", &spacing_ks(&sp, &curve))?;
    }
    Ok(())
}

fn simulate(cfg: &RunConfig, out: &mut Outputs) -> anyhow::Result<()> {
    let sigma = cfg.sigma_spectrum()?;
    let config = EnsembleConfig::new(sigma.n(), cfg.m()?, cfg.seed)?;
    let mut spec = BatchSpec::new(config, SigmaSource::fixed(&sigma), cfg.trials);
    spec.lambda0 = match cfg.lambda0 {
        Lambda0::Value(l) => Some(l),
        Lambda0::Auto => None,
    };
    spec.window = cfg.window;
    spec.unfolding = cfg.unfolding;
    spec.keep_full = cfg.keep_full;
    let batch = run_trials(&spec)?;
    batch.save(&out.dir)?;
    out.files.extend(["batch.json".into(), "retained.csv".into()]);
    if cfg.keep_full {
        out.files.push("full.csv".into());
    }
    let radius = (batch.half_width() - CUT_MARGIN).max(0.5 * batch.half_width());
    out.json(
        "summary.json",
        &json!({
            "lambda0": batch.lambda0, "rho_n": batch.rho_n, "trials": batch.trials(),
            "retained_points": batch.pooled().len(), "mean_spacing": mean_spacing(&batch, radius),
        }),
    )?;
    Ok(())
}

fn verify(cfg: &RunConfig, only: &[usize], out: &mut Outputs) -> anyhow::Result<()> {
    let ids: Vec<usize> = if only.is_empty() { (1..=CRITERIA).collect() } else { only.to_vec() };
    let opts = VerifyOptions { seed: cfg.seed };
    let mut results = Vec::new();
    for id in ids {
        let r = run_criterion(id, &opts)?;
        println!("{r}");
        results.push(r);
    }
    out.json("verify.json", &results)?;
    let failed: Vec<String> = results.iter().filter(|r| !r.passed).map(|r| r.id.to_string()).collect();
    if !failed.is_empty() {
        return Err(NumericalFailure(format!("criteria failed: {}", failed.join(", "))).into());
    }
    Ok(())
}
