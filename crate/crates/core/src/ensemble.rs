//! Sampling the deformed Laguerre ensemble `H = (1/m) Σ^{1/2} A A* Σ^{1/2}`.
//!
//! `Σ` enters only through its eigenvalues, so it is stored as a list. The
//! entries of `A` are complex Gaussians whose real and imaginary parts are
//! independent `N(0, 1/2)`, drawn from a ChaCha8 stream selected by
//! `(seed, stream)`.

use std::path::Path;

use faer::{c64, Mat, MatRef, Side};
use log::debug;
use num_rational::Ratio;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::limit_density::Measure;

/// Eigenvalues below this are treated as exact zeros of the Gram form.
pub const ZERO_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaSpectrum {
    t: Vec<f64>,
    tau: Vec<f64>,
}

impl SigmaSpectrum {
    pub fn new(t: Vec<f64>) -> Result<Self> {
        if t.is_empty() {
            return Err(invalid("empty eigenvalue list for sigma"));
        }
        if let Some(bad) = t.iter().find(|&&x| !(x > 0.0) || !x.is_finite()) {
            return Err(invalid(format!("sigma eigenvalues must be positive and finite, got {bad}")));
        }
        let tau = t.iter().map(|x| 1.0 / x).collect();
        Ok(Self { t, tau })
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    /// Reciprocals `τ_j = 1/t_j`, the poles of the saddle equation.
    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn n(&self) -> usize {
        self.t.len()
    }

    /// Empirical measure `N_n^(0)` of the `t_j`.
    pub fn measure(&self) -> Result<Measure<f64>> {
        Measure::empirical(&self.t)
    }

    /// Reads one positive decimal per line; blank lines and `#` comments are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut t = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let v: f64 = line.parse().map_err(|_| invalid(format!("line {}: not a number: {line:?}", k + 1)))?;
            t.push(v);
        }
        Self::new(t)
    }
}

/// Source distribution for the quantile preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuantileSource {
    Uniform { lo: f64, hi: f64 },
    /// Atomic law; quantiles land on the atoms.
    Atoms { atoms: Vec<(f64, f64)> },
    /// Piecewise-linear density through `(x_k, pdf_k)`, normalized internally.
    Tabulated { x: Vec<f64>, pdf: Vec<f64> },
}

impl QuantileSource {
    /// Generalized inverse of the CDF at `q ∈ (0, 1)`.
    fn quantile(&self, q: f64) -> Result<f64> {
        match self {
            QuantileSource::Uniform { lo, hi } => {
                if !(lo < hi) {
                    return Err(invalid("uniform quantile source needs lo < hi"));
                }
                Ok(lo + q * (hi - lo))
            }
            QuantileSource::Atoms { atoms } => {
                let m = Measure::new(atoms.clone())?;
                let mut acc = 0.0;
                for &(x, w) in m.atoms() {
                    acc += w;
                    if q <= acc + 1e-15 {
                        return Ok(x);
                    }
                }
                Ok(m.atoms().last().expect("nonempty measure").0)
            }
            QuantileSource::Tabulated { x, pdf } => {
                if x.len() < 2 || x.len() != pdf.len() {
                    return Err(invalid("tabulated density needs matching x and pdf with at least two points"));
                }
                if x.windows(2).any(|w| !(w[0] < w[1])) || pdf.iter().any(|&p| !(p >= 0.0)) {
                    return Err(invalid("tabulated density needs increasing x and nonnegative pdf"));
                }
                let mut cdf = vec![0.0; x.len()];
                for k in 1..x.len() {
                    cdf[k] = cdf[k - 1] + 0.5 * (pdf[k] + pdf[k - 1]) * (x[k] - x[k - 1]);
                }
                let total = *cdf.last().expect("len ≥ 2");
                if !(total > 0.0) {
                    return Err(invalid("tabulated density has zero mass"));
                }
                let target = q * total;
                let k = cdf.partition_point(|&c| c < target).clamp(1, x.len() - 1);
                // Invert the quadratic CDF on the trapezoid cell.
                let (x0, dx) = (x[k - 1], x[k] - x[k - 1]);
                let (p0, p1) = (pdf[k - 1], pdf[k]);
                let need = target - cdf[k - 1];
                let slope = (p1 - p0) / dx;
                let s = if slope.abs() < 1e-14 * (p0 + p1).max(1e-300) / dx {
                    need / p0.max(1e-300)
                } else {
                    (-p0 + (p0 * p0 + 2.0 * slope * need).max(0.0).sqrt()) / slope
                };
                Ok(x0 + s.clamp(0.0, dx))
            }
        }
    }
}

/// Σ presets, read from JSON as `{"preset": ..., "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", content = "params", rename_all = "snake_case")]
pub enum SigmaPreset {
    Identity { n: usize },
    /// `round(p n)` eigenvalues at `t1`, the rest at `t2`.
    TwoPoint { t1: f64, t2: f64, p: f64, n: usize },
    Explicit { values: Vec<f64> },
    /// `t_j` at the `j/(n+1)` quantiles of the source.
    Quantile { source: QuantileSource, n: usize },
}

impl SigmaPreset {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// JSON presets by extension `.json`, otherwise a plain eigenvalue list.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json(&text)
        } else {
            Ok(SigmaPreset::Explicit { values: SigmaSpectrum::from_text(&text)?.t })
        }
    }

    /// The limiting measure `N^(0)` the preset approximates.
    pub fn limit_measure(&self) -> Result<Measure<f64>> {
        match self {
            SigmaPreset::Identity { .. } => Measure::delta(1.0),
            SigmaPreset::TwoPoint { t1, t2, p, .. } => Measure::two_point(*t1, *t2, *p),
            SigmaPreset::Explicit { values } => Measure::empirical(values),
            SigmaPreset::Quantile { source: QuantileSource::Atoms { atoms }, .. } => Measure::new(atoms.clone()),
            SigmaPreset::Quantile { .. } => make_sigma(self)?.measure(),
        }
    }
}

pub fn make_sigma(preset: &SigmaPreset) -> Result<SigmaSpectrum> {
    match preset {
        SigmaPreset::Identity { n } => {
            if *n == 0 {
                return Err(invalid("identity sigma needs n ≥ 1"));
            }
            SigmaSpectrum::new(vec![1.0; *n])
        }
        SigmaPreset::TwoPoint { t1, t2, p, n } => {
            if !(0.0..=1.0).contains(p) {
                return Err(invalid(format!("two-point weight must lie in [0, 1], got {p}")));
            }
            if *n == 0 {
                return Err(invalid("two-point sigma needs n ≥ 1"));
            }
            let k = (p * *n as f64).round() as usize;
            let mut t = vec![*t1; k];
            t.extend(std::iter::repeat_n(*t2, n - k));
            SigmaSpectrum::new(t)
        }
        SigmaPreset::Explicit { values } => SigmaSpectrum::new(values.clone()),
        SigmaPreset::Quantile { source, n } => {
            if *n == 0 {
                return Err(invalid("quantile sigma needs n ≥ 1"));
            }
            let t = (1..=*n).map(|j| source.quantile(j as f64 / (*n as f64 + 1.0))).collect::<Result<Vec<_>>>()?;
            SigmaSpectrum::new(t)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
}

impl EnsembleConfig {
    pub fn new(n: usize, m: usize, seed: u64) -> Result<Self> {
        let cfg = Self { n, m, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n must be at least 1"));
        }
        if self.m <= self.n {
            return Err(LabError::UnsupportedRatio(self.m as f64 / self.n as f64));
        }
        Ok(())
    }

    /// `c_mn = m/n` in lowest terms.
    pub fn ratio(&self) -> Ratio<u64> {
        Ratio::new(self.m as u64, self.n as u64)
    }

    pub fn c_mn(&self) -> f64 {
        self.m as f64 / self.n as f64
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SampledSpectrum {
    pub eigenvalues: Vec<f64>,
    pub config: EnsembleConfig,
    /// Eigenvalues raised to zero by the floor.
    pub clamped: usize,
}

/// ChaCha8 generator for `(seed, stream)`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `n × m` matrix of standard complex Gaussians, column by column.
pub fn sample_entries(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Mat<c64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut a = Mat::<c64>::zeros(n, m);
    for j in 0..m {
        for i in 0..n {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            a[(i, j)] = c64::new(s * re, s * im);
        }
    }
    a
}

/// `B = Σ^{1/2} A`.
fn scaled_rows(a: MatRef<'_, c64>, sigma: &SigmaSpectrum) -> Mat<c64> {
    let roots: Vec<f64> = sigma.t().iter().map(|t| t.sqrt()).collect();
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * roots[i])
}

/// `(1/m) Σ^{1/2} A A* Σ^{1/2}` for given entries.
pub fn gram(a: MatRef<'_, c64>, sigma: &SigmaSpectrum) -> Result<Mat<c64>> {
    if a.nrows() != sigma.n() {
        return Err(LabError::DimensionMismatch(format!("expected {}, found {}", sigma.n(), a.nrows())));
    }
    let b = scaled_rows(a, sigma);
    let scale = 1.0 / a.ncols() as f64;
    let mut h = &b * b.adjoint();
    h *= faer::Scale(c64::new(scale, 0.0));
    Ok(h)
}

/// `H` for trial `stream` of the configuration.
pub fn sample_matrix(config: &EnsembleConfig, sigma: &SigmaSpectrum, stream: u64) -> Result<Mat<c64>> {
    config.validate()?;
    if sigma.n() != config.n {
        return Err(LabError::DimensionMismatch(format!("expected {}, found {}", config.n, sigma.n())));
    }
    let mut rng = rng_for(config.seed, stream);
    let a = sample_entries(config.n, config.m, &mut rng);
    gram(a.as_ref(), sigma)
}

fn frobenius(h: MatRef<'_, c64>) -> f64 {
    let mut s = 0.0;
    for j in 0..h.ncols() {
        for i in 0..h.nrows() {
            s += h[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

/// Largest `|H − H*|` entry relative to `‖H‖_F`.
pub fn hermitian_deviation(h: MatRef<'_, c64>) -> f64 {
    let mut dev: f64 = 0.0;
    for j in 0..h.ncols() {
        for i in 0..=j.min(h.nrows().saturating_sub(1)) {
            dev = dev.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    dev / frobenius(h).max(f64::MIN_POSITIVE)
}

/// Ascending spectrum of a Hermitian matrix.
pub fn eigenvalues(h: MatRef<'_, c64>) -> Result<Vec<f64>> {
    if h.nrows() != h.ncols() {
        return Err(LabError::DimensionMismatch(format!("expected {}, found {}", h.nrows(), h.ncols())));
    }
    if h.nrows() == 0 {
        return Ok(Vec::new());
    }
    let dev = hermitian_deviation(h);
    if dev > 1e-12 {
        return Err(LabError::NotHermitian { deviation: dev });
    }
    let mut v = h
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| LabError::NoConvergence { what: "Hermitian eigensolver", iterations: 0, residual: f64::NAN })?;
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    Ok(v)
}

/// Samples `H` for trial `stream` and returns its floored spectrum.
pub fn sample_spectrum(config: &EnsembleConfig, sigma: &SigmaSpectrum, stream: u64) -> Result<SampledSpectrum> {
    let h = sample_matrix(config, sigma, stream)?;
    let mut eigenvalues = eigenvalues(h.as_ref())?;
    let mut clamped = 0;
    for v in &mut eigenvalues {
        if *v < ZERO_FLOOR {
            if *v < -ZERO_FLOOR {
                return Err(LabError::NoConvergence { what: "positive semidefinite floor", iterations: 0, residual: *v });
            }
            if *v != 0.0 {
                clamped += 1;
            }
            *v = 0.0;
        }
    }
    if clamped > 0 {
        debug!("clamped {clamped} eigenvalues below {ZERO_FLOOR} to zero");
    }
    Ok(SampledSpectrum { eigenvalues, config: *config, clamped })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CompanionCheck {
    pub max_deviation: f64,
    /// Eigenvalues of the `m × m` form at or below the zero floor.
    pub companion_zeros: usize,
}

/// Compares the spectra of `(1/m) Σ^{1/2} A A* Σ^{1/2}` and `(1/m) A* Σ A`.
pub fn companion_spectrum_check(a: MatRef<'_, c64>, sigma: &SigmaSpectrum, m: usize) -> Result<CompanionCheck> {
    if a.ncols() != m {
        return Err(LabError::DimensionMismatch(format!("expected {}, found {}", m, a.ncols())));
    }
    let h = gram(a, sigma)?;
    let b = scaled_rows(a, sigma);
    let mut g = b.adjoint() * &b;
    g *= faer::Scale(c64::new(1.0 / m as f64, 0.0));
    let small = eigenvalues(h.as_ref())?;
    let big = eigenvalues(g.as_ref())?;
    let scale = big.last().copied().unwrap_or(0.0).abs().max(1.0);
    let companion_zeros = big.iter().filter(|v| v.abs() <= 1e-10 * scale).count();
    let n = small.len();
    let top = &big[big.len() - n.min(big.len())..];
    let max_deviation = small.iter().rev().zip(top.iter().rev()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    Ok(CompanionCheck { max_deviation, companion_zeros })
}

/// `#{λ_j ∈ [a, b]}/n`.
pub fn empirical_ncm(eigenvalues: &[f64], a: f64, b: f64) -> Result<f64> {
    if !(a <= b) {
        return Err(invalid(format!("empty interval [{a}, {b}]")));
    }
    if eigenvalues.is_empty() {
        return Err(invalid("empty spectrum"));
    }
    let k = eigenvalues.iter().filter(|&&x| x >= a && x <= b).count();
    Ok(k as f64 / eigenvalues.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn presets() {
        let id = make_sigma(&SigmaPreset::Identity { n: 4 }).unwrap();
        assert_eq!(id.t(), &[1.0; 4]);
        assert_eq!(id.tau(), &[1.0; 4]);
        let tp = make_sigma(&SigmaPreset::TwoPoint { t1: 1.0, t2: 4.0, p: 0.5, n: 4 }).unwrap();
        assert_eq!(tp.t(), &[1.0, 1.0, 4.0, 4.0]);
        assert_eq!(make_sigma(&SigmaPreset::Explicit { values: vec![2.0] }).unwrap().tau(), &[0.5]);
        assert!(make_sigma(&SigmaPreset::Explicit { values: vec![] }).is_err());
        assert!(make_sigma(&SigmaPreset::Explicit { values: vec![1.0, 0.0] }).is_err());
        assert!(make_sigma(&SigmaPreset::TwoPoint { t1: 1.0, t2: 4.0, p: 1.2, n: 4 }).is_err());
        let q = make_sigma(&SigmaPreset::Quantile { source: QuantileSource::Uniform { lo: 1.0, hi: 2.0 }, n: 3 }).unwrap();
        assert_eq!(q.t(), &[1.25, 1.5, 1.75]);
        let flat = QuantileSource::Tabulated { x: vec![1.0, 2.0], pdf: vec![1.0, 1.0] };
        let q = make_sigma(&SigmaPreset::Quantile { source: flat, n: 3 }).unwrap();
        for (a, b) in q.t().iter().zip([1.25, 1.5, 1.75]) {
            assert!((a - b).abs() < 1e-14);
        }
        let atoms = QuantileSource::Atoms { atoms: vec![(1.0, 0.5), (4.0, 0.5)] };
        assert_eq!(make_sigma(&SigmaPreset::Quantile { source: atoms, n: 4 }).unwrap().t(), &[1.0, 1.0, 4.0, 4.0]);
    }

    #[test]
    fn preset_json_and_text() {
        let p = SigmaPreset::from_json(r#"{"preset": "two_point", "params": {"t1": 1, "t2": 4, "p": 0.5, "n": 6}}"#).unwrap();
        assert_eq!(p, SigmaPreset::TwoPoint { t1: 1.0, t2: 4.0, p: 0.5, n: 6 });
        assert!(SigmaPreset::from_json("{\"preset\": \"identity\"").is_err());
        let s = SigmaSpectrum::from_text("# sigma\n1.5\n\n2\n").unwrap();
        assert_eq!(s.t(), &[1.5, 2.0]);
        assert!(SigmaSpectrum::from_text("1\nabc\n").is_err());
    }

    #[test]
    fn config_validation() {
        assert!(EnsembleConfig::new(4, 4, 0).is_err());
        assert!(EnsembleConfig::new(0, 4, 0).is_err());
        let c = EnsembleConfig::new(6, 9, 1).unwrap();
        assert_eq!(c.ratio(), Ratio::new(3, 2));
        assert_eq!(c.c_mn(), 1.5);
    }

    #[test]
    fn sampled_matrix_is_hermitian_psd() {
        let cfg = EnsembleConfig::new(12, 30, 7).unwrap();
        let sigma = make_sigma(&SigmaPreset::TwoPoint { t1: 1.0, t2: 4.0, p: 0.5, n: 12 }).unwrap();
        let h = sample_matrix(&cfg, &sigma, 3).unwrap();
        assert!(hermitian_deviation(h.as_ref()) <= 1e-14);
        let spec = sample_spectrum(&cfg, &sigma, 3).unwrap();
        assert!(spec.eigenvalues[0] >= 0.0);
        assert!(spec.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        assert!(sample_matrix(&cfg, &make_sigma(&SigmaPreset::Identity { n: 5 }).unwrap(), 0).is_err());
    }

    #[test]
    fn trace_mean_is_one() {
        let cfg = EnsembleConfig::new(4, 8, 11).unwrap();
        let sigma = make_sigma(&SigmaPreset::Identity { n: 4 }).unwrap();
        let trials = 10_000;
        let mut sum = 0.0;
        for k in 0..trials {
            let h = sample_matrix(&cfg, &sigma, k).unwrap();
            sum += (0..4).map(|i| h[(i, i)].re).sum::<f64>() / 4.0;
        }
        // tr H/n has variance 1/(nm) = 1/32 per draw.
        assert!((sum / trials as f64 - 1.0).abs() < 0.01);
    }

    #[test]
    fn eigen_examples() {
        let d = Mat::<c64>::from_fn(3, 3, |i, j| if i == j { c64::new((i + 1) as f64, 0.0) } else { c64::new(0.0, 0.0) });
        assert_eq!(eigenvalues(d.as_ref()).unwrap(), vec![1.0, 2.0, 3.0]);
        let z = Mat::<c64>::zeros(4, 4);
        assert_eq!(eigenvalues(z.as_ref()).unwrap(), vec![0.0; 4]);
        let mut rng = rng_for(5, 0);
        let g = sample_entries(5, 5, &mut rng);
        let h = Mat::<c64>::from_fn(5, 5, |i, j| g[(i, j)] + g[(j, i)].conj());
        let ev = eigenvalues(h.as_ref()).unwrap();
        let tr: f64 = (0..5).map(|i| h[(i, i)].re).sum();
        assert!((ev.iter().sum::<f64>() - tr).abs() < 1e-12);
        let eig = h.self_adjoint_eigen(Side::Lower).unwrap();
        let (u, s) = (eig.U(), eig.S());
        for k in 0..5 {
            let v = u.col(k);
            let hv = &h * v;
            let res: f64 = (0..5).map(|i| (hv[i] - v[i] * s[k]).norm_sqr()).sum::<f64>().sqrt();
            assert!(res <= 1e-10 * frobenius(h.as_ref()));
        }
        let mut bad = h.clone();
        bad[(0, 1)] += c64::new(1e-3, 0.0);
        assert!(matches!(eigenvalues(bad.as_ref()), Err(LabError::NotHermitian { .. })));
    }

    #[test]
    fn companion_identity() {
        let sigma = make_sigma(&SigmaPreset::Identity { n: 2 }).unwrap();
        let a = sample_entries(2, 3, &mut rng_for(1, 0));
        assert!(companion_spectrum_check(a.as_ref(), &sigma, 3).unwrap().max_deviation <= 1e-10);
        let zero = Mat::<c64>::zeros(2, 3);
        let z = companion_spectrum_check(zero.as_ref(), &sigma, 3).unwrap();
        assert_eq!(z.max_deviation, 0.0);
        assert_eq!(z.companion_zeros, 3);
        let sigma = make_sigma(&SigmaPreset::TwoPoint { t1: 1.0, t2: 4.0, p: 0.5, n: 6 }).unwrap();
        let a = sample_entries(6, 9, &mut rng_for(2, 0));
        let r = companion_spectrum_check(a.as_ref(), &sigma, 9).unwrap();
        assert!(r.max_deviation <= 1e-10);
        assert_eq!(r.companion_zeros, 3);
    }

    #[test]
    fn ncm_examples() {
        let s = [1.0, 2.0, 3.0];
        assert_eq!(empirical_ncm(&s, f64::NEG_INFINITY, f64::INFINITY).unwrap(), 1.0);
        assert_eq!(empirical_ncm(&s, 4.0, 5.0).unwrap(), 0.0);
        assert!((empirical_ncm(&s, 1.5, 3.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(empirical_ncm(&s, 2.0, 1.0).is_err());
    }

    #[test]
    fn reproducible_entries() {
        let a = sample_entries(3, 5, &mut rng_for(42, 9));
        let b = sample_entries(3, 5, &mut rng_for(42, 9));
        let c = sample_entries(3, 5, &mut rng_for(42, 10));
        assert!(a == b);
        assert!(a != c);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn companion_holds_for_any_shape(n in 1usize..7, extra in 1usize..6, seed in any::<u64>(), t in proptest::collection::vec(0.1f64..5.0, 7)) {
            let m = n + extra;
            let sigma = SigmaSpectrum::new(t[..n].to_vec()).unwrap();
            let a = sample_entries(n, m, &mut rng_for(seed, 0));
            let r = companion_spectrum_check(a.as_ref(), &sigma, m).unwrap();
            prop_assert!(r.max_deviation <= 1e-10);
            prop_assert_eq!(r.companion_zeros, m - n);
        }

        #[test]
        fn ncm_is_monotone_probability(v in proptest::collection::vec(0.0f64..10.0, 1..40), a in 0.0f64..5.0, w1 in 0.0f64..3.0, w2 in 0.0f64..3.0) {
            let inner = empirical_ncm(&v, a, a + w1).unwrap();
            let outer = empirical_ncm(&v, a - w2, a + w1 + w2).unwrap();
            prop_assert!((0.0..=1.0).contains(&inner));
            prop_assert!(inner <= outer);
            prop_assert_eq!(empirical_ncm(&v, -1.0, 11.0).unwrap(), 1.0);
        }
    }
}
