//! Monte Carlo harness: batches of sampled spectra, unfolding to local
//! coordinates, and the empirical statistics compared against the limits.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use log::warn;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{make_sigma, rng_for, sample_spectrum, EnsembleConfig, QuantileSource, SigmaPreset, SigmaSpectrum};
use crate::error::{invalid, LabError, Result};
use crate::limit_density::{support, Measure};
use crate::quadrature::GaussLegendre;
use crate::saddle_contour::SaddleEquation;
use crate::sine_stats::SpacingCurve;

/// Spacings closer than this many local units to the window cut are dropped.
pub const CUT_MARGIN: f64 = 10.0;

/// Σ for each trial: fixed, or redrawn per trial from a generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SigmaSource {
    Fixed { t: Vec<f64> },
    Random { generator: RandomSigma },
}

impl SigmaSource {
    pub fn fixed(sigma: &SigmaSpectrum) -> Self {
        SigmaSource::Fixed { t: sigma.t().to_vec() }
    }
}

/// Random-Σ generators declared with their limit `N^(0)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RandomSigma {
    /// `t_j` drawn i.i.d. from the limit.
    Iid { atoms: Vec<(f64, f64)> },
    /// `t_j` at the `j/(n+1)` quantiles of the limit (no randomness).
    Quantiles { atoms: Vec<(f64, f64)> },
    /// Quantiles of the limit with its first atom moved to
    /// `t·(1 + drift·log2 n)`, so `N_n^(0)` never settles.
    DriftingAtom { atoms: Vec<(f64, f64)>, drift: f64 },
}

impl RandomSigma {
    pub fn limit(&self) -> Result<Measure<f64>> {
        match self {
            RandomSigma::Iid { atoms } | RandomSigma::Quantiles { atoms } | RandomSigma::DriftingAtom { atoms, .. } => {
                Measure::new(atoms.clone())
            }
        }
    }

    pub fn draw(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<SigmaSpectrum> {
        let limit = self.limit()?;
        match self {
            RandomSigma::Iid { .. } => {
                let t = (0..n)
                    .map(|_| {
                        let u: f64 = rng.random();
                        let mut acc = 0.0;
                        for &(x, w) in limit.atoms() {
                            acc += w;
                            if u < acc {
                                return x;
                            }
                        }
                        limit.atoms().last().expect("nonempty").0
                    })
                    .collect();
                SigmaSpectrum::new(t)
            }
            RandomSigma::Quantiles { .. } => {
                make_sigma(&SigmaPreset::Quantile { source: QuantileSource::Atoms { atoms: limit.atoms().to_vec() }, n })
            }
            RandomSigma::DriftingAtom { drift, .. } => {
                let mut atoms = limit.atoms().to_vec();
                atoms[0].0 *= 1.0 + drift * (n as f64).log2();
                make_sigma(&SigmaPreset::Quantile { source: QuantileSource::Atoms { atoms }, n })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Unfolding {
    /// `ξ = (λ − λ0) n ρ_n(λ0)`.
    Linear,
    /// `ξ = n ∫_{λ0}^{λ} ρ_n`, with `ρ_n = c Im z_n/π` from the finite saddle equation.
    #[default]
    Integrated,
}

/// Map from eigenvalues to local coordinates around `λ0`.
#[derive(Debug, Clone)]
pub struct Unfolder {
    pub lambda0: f64,
    pub rho_n: f64,
    pub n: usize,
    pub half_width: f64,
    pub mode: Unfolding,
    /// `(λ, ξ, dξ/dλ)`, ascending in `λ`; used in integrated mode.
    table: Vec<(f64, f64, f64)>,
}

impl Unfolder {
    pub fn new(taus: &[f64], m: usize, lambda0: f64, mode: Unfolding, half_width: f64) -> Result<Self> {
        let n = taus.len();
        if !(half_width > 0.0) {
            return Err(invalid("unfolding window must be positive"));
        }
        let c = m as f64 / n as f64;
        let eq = SaddleEquation::from_taus(taus, c)?;
        let rho = |l: f64| -> Result<f64> { Ok(c * eq.root_at(l)?.im / std::f64::consts::PI) };
        let rho_n = rho(lambda0)?;
        if !(rho_n > 1e-8) {
            return Err(LabError::NotInBulk { lambda0, im_z: rho_n * std::f64::consts::PI / c });
        }
        let nf = n as f64;
        let mut table = Vec::new();
        if mode == Unfolding::Integrated {
            let gl = GaussLegendre::<f64>::new(4);
            let mut sides: [Vec<(f64, f64, f64)>; 2] = [Vec::new(), Vec::new()];
            for (side, dir) in [(0usize, -1.0f64), (1, 1.0)] {
                let (mut l, mut xi, mut r) = (lambda0, 0.0f64, rho_n);
                while xi.abs() < half_width + 2.0 && sides[side].len() < 200_000 {
                    let step = dir * 2.0 / (nf * r.max(0.05 * rho_n));
                    let next = l + step;
                    if next <= 0.0 {
                        break;
                    }
                    let (lo, hi) = if step > 0.0 { (l, next) } else { (next, l) };
                    xi += dir * nf * adaptive(&gl, &rho, lo, hi, 1e-9 / nf, 0)?;
                    r = rho(next)?;
                    l = next;
                    sides[side].push((l, xi, nf * r));
                    if r < 1e-10 {
                        break;
                    }
                }
            }
            let [mut left, right] = sides;
            left.reverse();
            table.extend(left);
            table.push((lambda0, 0.0, nf * rho_n));
            table.extend(right);
        }
        Ok(Self { lambda0, rho_n, n, half_width, mode, table })
    }

    /// Local coordinate of `λ`, or `None` outside `|ξ| ≤ half_width`.
    pub fn xi(&self, lambda: f64) -> Option<f64> {
        let xi = match self.mode {
            Unfolding::Linear => (lambda - self.lambda0) * self.n as f64 * self.rho_n,
            Unfolding::Integrated => {
                let first = self.table.first()?;
                let last = self.table.last()?;
                if lambda < first.0 || lambda > last.0 {
                    return None;
                }
                let k = self.table.partition_point(|e| e.0 < lambda).clamp(1, self.table.len() - 1);
                let (la, xa, da) = self.table[k - 1];
                let (lb, xb, db) = self.table[k];
                let h = lb - la;
                let t = (lambda - la) / h;
                let (t2, t3) = (t * t, t * t * t);
                (2.0 * t3 - 3.0 * t2 + 1.0) * xa + (t3 - 2.0 * t2 + t) * h * da + (-2.0 * t3 + 3.0 * t2) * xb + (t3 - t2) * h * db
            }
        };
        (xi.abs() <= self.half_width).then_some(xi)
    }
}

// GL on the panel against GL on its halves; the split only matters near an
// edge, where ρ has a square-root zero.
fn adaptive(gl: &GaussLegendre<f64>, f: &dyn Fn(f64) -> Result<f64>, lo: f64, hi: f64, tol: f64, depth: u32) -> Result<f64> {
    let rule = |a: f64, b: f64| -> Result<f64> {
        let (x, w) = gl.on(a, b);
        x.iter().zip(&w).try_fold(0.0, |acc, (&xk, &wk)| Ok(acc + wk * f(xk)?))
    };
    let mid = 0.5 * (lo + hi);
    let whole = rule(lo, hi)?;
    let (left, right) = (rule(lo, mid)?, rule(mid, hi)?);
    if (whole - left - right).abs() <= tol || depth >= 40 {
        return Ok(left + right);
    }
    Ok(adaptive(gl, f, lo, mid, 0.5 * tol, depth + 1)? + adaptive(gl, f, mid, hi, 0.5 * tol, depth + 1)?)
}

/// Unfolds the eigenvalues inside the window, ascending.
pub fn unfold(eigenvalues: &[f64], unfolder: &Unfolder) -> Vec<f64> {
    let mut out: Vec<f64> = eigenvalues.iter().filter_map(|&l| unfolder.xi(l)).collect();
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    out
}

/// Density-weighted median of the heaviest support component of the limit.
pub fn default_lambda0(measure: &Measure<f64>, c: f64) -> Result<f64> {
    let eq = measure.saddle_equation(c)?;
    let rho = |l: f64| -> Result<f64> { Ok(c * eq.root_at(l)?.im / std::f64::consts::PI) };
    let comps = support(measure, c)?;
    let gl = GaussLegendre::<f64>::new(8);
    let mut best: Option<(f64, Vec<(f64, f64)>)> = None;
    for (a, b) in comps {
        let cells = 256;
        let h = (b - a) / cells as f64;
        let mut cum = vec![(a, 0.0)];
        let mut acc = 0.0;
        for k in 0..cells {
            let (lo, hi) = (a + h * k as f64, a + h * (k + 1) as f64);
            let (x, w) = gl.on(lo, hi);
            for (&xk, &wk) in x.iter().zip(&w) {
                acc += wk * rho(xk)?;
            }
            cum.push((hi, acc));
        }
        if best.as_ref().is_none_or(|(m, _)| acc > *m) {
            best = Some((acc, cum));
        }
    }
    let (mass, cum) = best.ok_or(invalid("limit density has no bulk"))?;
    let half = 0.5 * mass;
    let k = cum.partition_point(|e| e.1 < half).clamp(1, cum.len() - 1);
    let (l0, c0) = cum[k - 1];
    let (l1, c1) = cum[k];
    Ok(l0 + (half - c0) / (c1 - c0) * (l1 - l0))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchSpec {
    pub config: EnsembleConfig,
    pub sigma: SigmaSource,
    pub trials: usize,
    /// `None` selects the density-weighted median of the main bulk component.
    pub lambda0: Option<f64>,
    /// Window width `W` in local units; points with `|ξ| ≤ W/2` are kept.
    pub window: f64,
    pub unfolding: Unfolding,
    /// Keep every eigenvalue, for global-law checks.
    pub keep_full: bool,
}

impl BatchSpec {
    pub fn new(config: EnsembleConfig, sigma: SigmaSource, trials: usize) -> Self {
        Self { config, sigma, trials, lambda0: None, window: 200.0, unfolding: Unfolding::default(), keep_full: false }
    }

    fn limit_measure(&self) -> Result<Measure<f64>> {
        match &self.sigma {
            SigmaSource::Fixed { t } => Measure::empirical(t),
            SigmaSource::Random { generator } => generator.limit(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialBatch {
    pub spec: BatchSpec,
    pub lambda0: f64,
    /// `ρ_n(λ0)` of the fixed Σ, or the mean over draws.
    pub rho_n: f64,
    pub streams: Vec<u64>,
    /// Per trial: `(λ, ξ)` inside the window, ascending.
    #[serde(skip)]
    pub retained: Vec<Vec<(f64, f64)>>,
    #[serde(skip)]
    pub full: Option<Vec<Vec<f64>>>,
}

struct TrialOutput {
    retained: Vec<(f64, f64)>,
    full: Option<Vec<f64>>,
    rho_n: f64,
}

pub fn run_trials(spec: &BatchSpec) -> Result<TrialBatch> {
    spec.config.validate()?;
    if spec.trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    if !(spec.window > 0.0) {
        return Err(invalid("window must be positive"));
    }
    let lambda0 = match spec.lambda0 {
        Some(l) => l,
        None => default_lambda0(&spec.limit_measure()?, spec.config.c_mn())?,
    };
    let half = 0.5 * spec.window;
    let fixed = match &spec.sigma {
        SigmaSource::Fixed { t } => {
            let sigma = SigmaSpectrum::new(t.clone())?;
            let unf = Unfolder::new(sigma.tau(), spec.config.m, lambda0, spec.unfolding, half)?;
            Some((sigma, unf))
        }
        SigmaSource::Random { .. } => None,
    };
    let streams: Vec<u64> = (0..spec.trials as u64).collect();
    let outputs: Vec<TrialOutput> = streams
        .par_iter()
        .map(|&stream| -> Result<TrialOutput> {
            let drawn;
            let (sigma, unf) = match (&fixed, &spec.sigma) {
                (Some((s, u)), _) => (s, u),
                (None, SigmaSource::Random { generator }) => {
                    // The Σ draw uses its own stream family so the matrix
                    // entries of trial k are the same as for a fixed Σ.
                    let mut rng = rng_for(spec.config.seed ^ 0x5157_4d41, stream);
                    let s = generator.draw(spec.config.n, &mut rng)?;
                    let u = Unfolder::new(s.tau(), spec.config.m, lambda0, spec.unfolding, half)?;
                    drawn = (s, u);
                    (&drawn.0, &drawn.1)
                }
                (None, SigmaSource::Fixed { .. }) => unreachable!("fixed sigma prepared above"),
            };
            let spectrum = sample_spectrum(&spec.config, sigma, stream)?;
            let mut retained: Vec<(f64, f64)> =
                spectrum.eigenvalues.iter().filter_map(|&l| unf.xi(l).map(|x| (l, x))).collect();
            retained.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite"));
            Ok(TrialOutput { retained, full: spec.keep_full.then_some(spectrum.eigenvalues), rho_n: unf.rho_n })
        })
        .collect::<Result<_>>()?;
    let rho_n = outputs.iter().map(|o| o.rho_n).sum::<f64>() / outputs.len() as f64;
    let mut retained = Vec::with_capacity(outputs.len());
    let mut full = spec.keep_full.then(Vec::new);
    for o in outputs {
        retained.push(o.retained);
        if let (Some(f), Some(v)) = (full.as_mut(), o.full) {
            f.push(v);
        }
    }
    Ok(TrialBatch { spec: spec.clone(), lambda0, rho_n, streams, retained, full })
}

#[derive(Debug, Serialize, Deserialize)]
struct RetainedRow {
    trial: usize,
    lambda: f64,
    xi: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct FullRow {
    trial: usize,
    lambda: f64,
}

impl TrialBatch {
    pub fn trials(&self) -> usize {
        self.retained.len()
    }

    /// All retained local coordinates.
    pub fn pooled(&self) -> Vec<f64> {
        self.retained.iter().flat_map(|t| t.iter().map(|p| p.1)).collect()
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.spec.window
    }

    /// Writes `batch.json`, `retained.csv` and, if present, `full.csv`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join("batch.json"))?), self)?;
        let mut w = csv::Writer::from_path(dir.join("retained.csv"))?;
        for (trial, pts) in self.retained.iter().enumerate() {
            for &(lambda, xi) in pts {
                w.serialize(RetainedRow { trial, lambda, xi })?;
            }
        }
        w.flush()?;
        if let Some(full) = &self.full {
            let mut w = csv::Writer::from_path(dir.join("full.csv"))?;
            for (trial, eigs) in full.iter().enumerate() {
                for &lambda in eigs {
                    w.serialize(FullRow { trial, lambda })?;
                }
            }
            w.flush()?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let mut batch: TrialBatch = serde_json::from_reader(BufReader::new(File::open(dir.join("batch.json"))?))?;
        let trials = batch.streams.len();
        batch.retained = vec![Vec::new(); trials];
        for row in csv::Reader::from_path(dir.join("retained.csv"))?.deserialize() {
            let row: RetainedRow = row?;
            let slot = batch.retained.get_mut(row.trial).ok_or(invalid(format!("trial {} out of range", row.trial)))?;
            slot.push((row.lambda, row.xi));
        }
        let full_path = dir.join("full.csv");
        if full_path.exists() {
            let mut full = vec![Vec::new(); trials];
            for row in csv::Reader::from_path(full_path)?.deserialize() {
                let row: FullRow = row?;
                full.get_mut(row.trial).ok_or(invalid(format!("trial {} out of range", row.trial)))?.push(row.lambda);
            }
            batch.full = Some(full);
        }
        Ok(batch)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityCheck {
    pub bin_width: f64,
    pub sup_error: f64,
    pub l1_error: f64,
    /// Support components of the limit.
    pub support: Vec<(f64, f64)>,
    /// Fraction of eigenvalues outside every component widened by `pad`.
    pub outside_fraction: f64,
    pub pad: f64,
}

/// Histogram of the pooled spectra against bin averages of the limiting density.
pub fn empirical_density_check(batch: &TrialBatch, measure: &Measure<f64>, c: f64, bin_width: f64, pad: f64) -> Result<DensityCheck> {
    let full = batch.full.as_ref().ok_or(invalid("batch was run without full-spectrum retention"))?;
    if !(bin_width > 0.0) {
        return Err(invalid("bin width must be positive"));
    }
    let all: Vec<f64> = full.iter().flatten().copied().collect();
    if all.is_empty() {
        return Err(invalid("no eigenvalues in batch"));
    }
    let eq = measure.saddle_equation(c)?;
    let comps = support(measure, c)?;
    let top = all.iter().copied().fold(0.0, f64::max).max(comps.last().map_or(0.0, |s| s.1)) + bin_width;
    let bins = (top / bin_width).ceil() as usize;
    let mut counts = vec![0usize; bins];
    for &l in &all {
        let k = ((l / bin_width).floor().max(0.0) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let gl = GaussLegendre::<f64>::new(8);
    let total = all.len() as f64;
    let (mut sup, mut l1) = (0.0f64, 0.0);
    for (k, &count) in counts.iter().enumerate() {
        let (lo, hi) = (bin_width * k as f64, bin_width * (k + 1) as f64);
        let (x, w) = gl.on(lo, hi);
        let mut mass = 0.0;
        for (&xk, &wk) in x.iter().zip(&w) {
            if xk > 0.0 {
                mass += wk * c * eq.root_at(xk)?.im / std::f64::consts::PI;
            }
        }
        let diff = (count as f64 / total - mass) / bin_width;
        sup = sup.max(diff.abs());
        l1 += diff.abs() * bin_width;
    }
    let outside = all.iter().filter(|&&l| !comps.iter().any(|&(a, b)| l >= a - pad && l <= b + pad)).count();
    Ok(DensityCheck { bin_width, sup_error: sup, l1_error: l1, support: comps, outside_fraction: outside as f64 / total, pad })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GapEstimate {
    pub s: f64,
    /// Mean over trials of the empty fraction among translated intervals.
    pub estimate: f64,
    /// Standard error from the spread of per-trial means.
    pub stderr: f64,
    pub intervals_per_trial: usize,
    /// Single centered interval `[−s/2, s/2]` per trial.
    pub centered: f64,
    pub centered_stderr: f64,
}

/// Empirical `E(s)`: probability that an interval of length `s` holds no
/// unfolded eigenvalue, pooled over translates `[x − s/2, x + s/2]` spaced
/// one unit apart inside the trimmed window.
pub fn empirical_gap(batch: &TrialBatch, s: f64) -> Result<GapEstimate> {
    if !(s >= 0.0) {
        return Err(invalid("gap length must be nonnegative"));
    }
    let reach = batch.half_width() - CUT_MARGIN - 0.5 * s;
    if reach < 0.0 {
        return Err(invalid("window too narrow for this gap length"));
    }
    let centers: Vec<f64> = {
        let k = reach.floor() as i64;
        (-k..=k).map(|j| j as f64).collect()
    };
    let empty = |pts: &[(f64, f64)], x: f64| -> bool {
        let lo = x - 0.5 * s;
        let i = pts.partition_point(|p| p.1 < lo);
        i >= pts.len() || pts[i].1 > x + 0.5 * s
    };
    let per_trial: Vec<f64> = batch
        .retained
        .iter()
        .map(|pts| centers.iter().filter(|&&x| empty(pts, x)).count() as f64 / centers.len() as f64)
        .collect();
    let trials = per_trial.len() as f64;
    let mean = per_trial.iter().sum::<f64>() / trials;
    let var = if per_trial.len() > 1 { per_trial.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials - 1.0) } else { 0.0 };
    let hits = batch.retained.iter().filter(|pts| empty(pts, 0.0)).count() as f64 / trials;
    Ok(GapEstimate {
        s,
        estimate: mean,
        stderr: (var / trials).sqrt(),
        intervals_per_trial: centers.len(),
        centered: hits,
        centered_stderr: (hits * (1.0 - hits) / trials).sqrt(),
    })
}

/// Nearest-neighbour spacings with both ends at least `CUT_MARGIN` inside the cut.
pub fn spacings(batch: &TrialBatch) -> Vec<f64> {
    let limit = batch.half_width() - CUT_MARGIN;
    let mut out = Vec::new();
    for pts in &batch.retained {
        for w in pts.windows(2) {
            if w[0].1 >= -limit && w[1].1 <= limit {
                out.push(w[1].1 - w[0].1);
            }
        }
    }
    out
}

/// Mean spacing of the unfolded points with `|ξ| ≤ radius`, per trial then pooled.
pub fn mean_spacing(batch: &TrialBatch, radius: f64) -> f64 {
    let (mut total, mut count) = (0.0, 0usize);
    for pts in &batch.retained {
        let inner: Vec<f64> = pts.iter().map(|p| p.1).filter(|x| x.abs() <= radius).collect();
        if inner.len() >= 2 {
            total += inner[inner.len() - 1] - inner[0];
            count += inner.len() - 1;
        }
    }
    total / count.max(1) as f64
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct KsResult {
    pub distance: f64,
    pub count: usize,
    /// Fewer than `1e4` spacings were available.
    pub underpowered: bool,
}

/// Kolmogorov–Smirnov distance between sample spacings and the sine-kernel law.
pub fn spacing_ks(samples: &[f64], curve: &SpacingCurve) -> KsResult {
    let mut v = samples.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite spacings"));
    let cdf = curve.cdf();
    let norm = cdf.last().copied().unwrap_or(1.0).max(f64::MIN_POSITIVE);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = (SpacingCurve::cdf_at(&cdf, &curve.s, x) / norm).min(1.0);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    let underpowered = v.len() < 10_000;
    if underpowered {
        warn!("KS distance from only {} spacings", v.len());
    }
    KsResult { distance: d, count: v.len(), underpowered }
}

/// Draws from the tabulated spacing law by inverting its CDF.
pub fn sample_spacing_law(curve: &SpacingCurve, count: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let cdf = curve.cdf();
    let norm = cdf.last().copied().unwrap_or(1.0);
    (0..count)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * norm;
            let k = cdf.partition_point(|&c| c < u);
            if k == 0 {
                curve.s[0] * u / cdf[0].max(f64::MIN_POSITIVE)
            } else if k >= cdf.len() {
                *curve.s.last().expect("nonempty grid")
            } else {
                let t = (u - cdf[k - 1]) / (cdf[k] - cdf[k - 1]).max(f64::MIN_POSITIVE);
                curve.s[k - 1] + t * (curve.s[k] - curve.s[k - 1])
            }
        })
        .collect()
}

/// Spacings of independent uniform points at unit density.
pub fn poisson_spacings(count: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut pts: Vec<f64> = (0..=count).map(|_| rng.random::<f64>() * (count + 1) as f64).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    pts.windows(2).map(|w| w[1] - w[0]).collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HypothesisRow {
    pub n: usize,
    /// `P{ max_Δ |N^(0)(Δ) − N_n^(0)(Δ)| > ε }`.
    pub probability: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub epsilon: f64,
    pub rows: Vec<HypothesisRow>,
    /// The deviation probability at least halves (within noise) per doubling
    /// of `n`, or is zero throughout.
    pub converging: bool,
}

/// Estimates how often `N_n^(0)` misses its declared limit by more than `ε`
/// on the given intervals, across the listed sizes.
pub fn sigma_hypothesis_check(generator: &RandomSigma, intervals: &[(f64, f64)], epsilon: f64, sizes: &[usize], trials: usize, seed: u64) -> Result<HypothesisReport> {
    if intervals.is_empty() || sizes.is_empty() || trials == 0 {
        return Err(invalid("need intervals, sizes and at least one trial"));
    }
    let limit = generator.limit()?;
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let misses: Vec<bool> = (0..trials as u64)
            .into_par_iter()
            .map(|k| -> Result<bool> {
                let mut rng = rng_for(seed, ((n as u64) << 32) | k);
                let sigma = generator.draw(n, &mut rng)?;
                let emp = sigma.measure()?;
                Ok(intervals.iter().any(|&(a, b)| (limit.mass(a, b) - emp.mass(a, b)).abs() > epsilon))
            })
            .collect::<Result<_>>()?;
        let p = misses.iter().filter(|&&m| m).count() as f64 / trials as f64;
        rows.push(HypothesisRow { n, probability: p, stderr: (p * (1.0 - p) / trials as f64).sqrt() });
    }
    let all_zero = rows.iter().all(|r| r.probability == 0.0);
    let halving = rows.windows(2).all(|w| {
        let noise = 2.0 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
        w[1].probability <= 0.5 * w[0].probability + noise
    });
    let first = rows[0].probability;
    let last = rows[rows.len() - 1].probability;
    let converging = all_zero || (halving && last < first);
    Ok(HypothesisReport { epsilon, rows, converging })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sine_stats::{gap_probability, spacing_pdf};

    fn identity_batch(n: usize, trials: usize, seed: u64, mode: Unfolding) -> TrialBatch {
        let cfg = EnsembleConfig::new(n, 2 * n, seed).unwrap();
        let sigma = make_sigma(&SigmaPreset::Identity { n }).unwrap();
        let mut spec = BatchSpec::new(cfg, SigmaSource::fixed(&sigma), trials);
        spec.lambda0 = Some(1.0);
        spec.unfolding = mode;
        run_trials(&spec).unwrap()
    }

    #[test]
    fn tiny_batch_bounds_and_determinism() {
        let b = identity_batch(4, 1, 3, Unfolding::Linear);
        assert!(b.retained[0].len() <= 4);
        let again = identity_batch(4, 1, 3, Unfolding::Linear);
        assert_eq!(b.pooled(), again.pooled());
    }

    #[test]
    fn deterministic_across_pool_sizes() {
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| identity_batch(40, 6, 9, Unfolding::Integrated).pooled())
        };
        let a = run(1);
        let b = run(3);
        assert_eq!(a.len(), b.len());
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn pooled_count_scales_with_trials() {
        let a = identity_batch(100, 10, 1, Unfolding::Linear).pooled().len() as f64;
        let b = identity_batch(100, 20, 1, Unfolding::Linear).pooled().len() as f64;
        assert!((b - 2.0 * a).abs() <= 3.0 * (2.0 * a).sqrt(), "{a} {b}");
    }

    #[test]
    fn unfolding_modes_agree_at_lambda0() {
        let taus = vec![1.0; 200];
        let lin = Unfolder::new(&taus, 400, 1.0, Unfolding::Linear, 50.0).unwrap();
        let int = Unfolder::new(&taus, 400, 1.0, Unfolding::Integrated, 50.0).unwrap();
        assert_eq!(lin.xi(1.0), Some(0.0));
        assert!(int.xi(1.0).unwrap().abs() < 1e-12);
        let d = 1e-3;
        let (a, b) = (lin.xi(1.0 + d).unwrap(), int.xi(1.0 + d).unwrap());
        assert!((a - b).abs() < 1e-3 * a.abs(), "{a} {b}");
        // n ∫ρ over the whole support counts all n eigenvalues.
        let wide = Unfolder::new(&taus, 400, 1.0, Unfolding::Integrated, 1e6).unwrap();
        let (lo, hi) = (wide.table[0].0, wide.table[wide.table.len() - 1].0);
        assert!(lo < (1.0 - 0.5f64.sqrt()).powi(2) && hi > (1.0 + 0.5f64.sqrt()).powi(2));
        let span = wide.xi(hi).unwrap() - wide.xi(lo).unwrap();
        assert!((span - 200.0).abs() < 0.05, "{span}");
        assert!(Unfolder::new(&taus, 400, 5.0, Unfolding::Linear, 50.0).is_err());
        // Shifting the data and λ0 together leaves ξ unchanged at fixed ρ_n.
        let shifted = Unfolder { lambda0: 1.25, ..lin.clone() };
        assert!((shifted.xi(1.25 + d).unwrap() - a).abs() < 1e-12);
    }

    #[test]
    fn unfolded_mean_spacing_is_one() {
        let b = identity_batch(400, 30, 5, Unfolding::Integrated);
        let ms = mean_spacing(&b, 50.0);
        assert!((ms - 1.0).abs() < 0.02, "{ms}");
    }

    #[test]
    fn gap_estimates() {
        let b = identity_batch(400, 40, 2, Unfolding::Integrated);
        assert_eq!(empirical_gap(&b, 0.0).unwrap().estimate, 1.0);
        let mut prev = 1.0;
        for s in [0.25, 0.5, 1.0, 1.5] {
            let g = empirical_gap(&b, s).unwrap();
            assert!(g.estimate <= prev + 2.0 * g.stderr);
            prev = g.estimate;
        }
        let g = empirical_gap(&b, 1.0).unwrap();
        let e = gap_probability(-0.5, 0.5, 40).unwrap().value;
        assert!((g.estimate - e).abs() < 0.03, "{} vs {e}", g.estimate);
    }

    #[test]
    fn ks_controls() {
        let grid: Vec<f64> = (0..=400).map(|k| k as f64 * 0.015).collect();
        let curve = spacing_pdf(&grid).unwrap();
        let mut rng = rng_for(17, 0);
        let own = sample_spacing_law(&curve, 100_000, &mut rng);
        assert!(spacing_ks(&own, &curve).distance <= 0.01);
        let poisson = poisson_spacings(100_000, &mut rng);
        assert!(spacing_ks(&poisson, &curve).distance >= 0.2);
        assert!(spacing_ks(&own[..100], &curve).underpowered);
    }

    #[test]
    fn default_lambda0_identity_is_median() {
        let l0 = default_lambda0(&Measure::delta(1.0).unwrap(), 2.0).unwrap();
        // Median of Marchenko–Pastur at c = 2, by direct quadrature.
        let (a, b) = ((1.0 - 0.5f64.sqrt()).powi(2), (1.0 + 0.5f64.sqrt()).powi(2));
        let gl = GaussLegendre::<f64>::new(200);
        let mp = |x: f64| ((b - x) * (x - a)).max(0.0).sqrt() / (std::f64::consts::PI * x);
        let below = gl.integrate(a, l0, mp);
        assert!((below - 0.5).abs() < 1e-4, "{l0}: {below}");
    }

    #[test]
    fn hypothesis_controls() {
        let atoms = vec![(1.0, 0.5), (4.0, 0.5)];
        let iv = [(0.5, 1.5), (3.5, 4.5)];
        let det = sigma_hypothesis_check(&RandomSigma::Quantiles { atoms: atoms.clone() }, &iv, 0.05, &[250, 500], 20, 1).unwrap();
        assert!(det.rows.iter().all(|r| r.probability == 0.0) && det.converging);
        let iid = sigma_hypothesis_check(&RandomSigma::Iid { atoms: atoms.clone() }, &iv, 0.05, &[250, 500, 1000], 800, 2).unwrap();
        assert!(iid.converging, "{iid:?}");
        let drift = sigma_hypothesis_check(&RandomSigma::DriftingAtom { atoms, drift: 0.1 }, &iv, 0.05, &[250, 500, 1000], 50, 3).unwrap();
        assert!(!drift.converging, "{drift:?}");
    }

    #[test]
    fn save_and_load_round_trip() {
        let mut spec = BatchSpec::new(
            EnsembleConfig::new(30, 60, 4).unwrap(),
            SigmaSource::Random { generator: RandomSigma::Iid { atoms: vec![(1.0, 0.5), (4.0, 0.5)] } },
            3,
        );
        spec.keep_full = true;
        spec.window = 20.0;
        let b = run_trials(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        b.save(dir.path()).unwrap();
        let back = TrialBatch::load(dir.path()).unwrap();
        assert_eq!(back.retained, b.retained);
        assert_eq!(back.full, b.full);
        assert_eq!(back.lambda0, b.lambda0);
    }

    #[test]
    fn density_check_small() {
        let cfg = EnsembleConfig::new(300, 600, 8).unwrap();
        let sigma = make_sigma(&SigmaPreset::Identity { n: 300 }).unwrap();
        let mut spec = BatchSpec::new(cfg, SigmaSource::fixed(&sigma), 6);
        spec.keep_full = true;
        spec.lambda0 = Some(1.0);
        let b = run_trials(&spec).unwrap();
        let r = empirical_density_check(&b, &Measure::delta(1.0).unwrap(), 2.0, 0.05, 0.1).unwrap();
        assert!(r.l1_error < 0.05, "{r:?}");
        assert!(r.outside_fraction <= 1e-3);
    }
}
