//! Ensemble experiments and empirical laws.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{
    paired_discrepancy, simulate_path, simulate_y, PathStatus, Recording, Scheme, SchemeConfig, SdePath,
};
use crate::linalg::Vector;
use crate::lyapunov::LyapunovProfile;
use crate::model::{AdditiveDrift, Dynamics, Model};
use crate::rng::derive_seed;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// A binomial proportion with its Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fraction {
    pub count: usize,
    pub n: usize,
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Fraction {
    pub fn new(count: usize, n: usize) -> Self {
        let (lo, hi) = wilson_interval(count, n, Z95);
        let estimate = if n == 0 { f64::NAN } else { count as f64 / n as f64 };
        Self { count, n, estimate, lo, hi }
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    // the endpoints are exactly 0 and 1 at k = 0 and k = n
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Nearest-rank quantiles at 10%, 50% and 90%.
pub fn quantiles(values: &[f64]) -> Option<[f64; 3]> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pick = |q: f64| v[((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1];
    Some([pick(0.1), pick(0.5), pick(0.9)])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramSpec {
    pub bins_per_axis: usize,
    /// Compression `x ↦ tanh(x/scale)`.
    pub scale: f64,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        Self { bins_per_axis: 32, scale: 10.0 }
    }
}

/// Binned law of the compressed state `tanh(x/scale)` on `[-1,1]^d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramLaw {
    pub time: f64,
    pub d: usize,
    pub bins_per_axis: usize,
    pub scale: f64,
    /// Per-axis edges (shared by all axes).
    pub edges: Vec<f64>,
    /// Row-major masses, first axis slowest.
    pub masses: Vec<f64>,
    /// `1 + V` at the preimage of each bin center.
    pub weights: Vec<f64>,
    pub n_samples: usize,
}

fn bin_index(c: f64, bins: usize) -> usize {
    let i = ((c + 1.0) * 0.5 * bins as f64).floor();
    if i.is_nan() || i < 0.0 {
        0
    } else {
        (i as usize).min(bins - 1)
    }
}

/// Empirical law of `states` at time `t`.
pub fn empirical_law(states: &[&Vector], t: f64, spec: HistogramSpec, d: usize, profile: &LyapunovProfile) -> HistogramLaw {
    let bins = spec.bins_per_axis;
    let total = bins.pow(d as u32);
    let mut counts = vec![0usize; total];
    for x in states {
        let mut idx = 0usize;
        for i in 0..d {
            idx = idx * bins + bin_index((x[i] / spec.scale).tanh(), bins);
        }
        counts[idx] += 1;
    }
    let n = states.len();
    let masses: Vec<f64> = if n == 0 {
        vec![0.0; total]
    } else {
        counts.iter().map(|&c| c as f64 / n as f64).collect()
    };
    let edges: Vec<f64> = (0..=bins).map(|k| -1.0 + 2.0 * k as f64 / bins as f64).collect();
    let centers: Vec<f64> = (0..bins)
        .map(|k| spec.scale * (-1.0 + (2.0 * k as f64 + 1.0) / bins as f64).atanh())
        .collect();
    let weights = (0..total)
        .map(|mut idx| {
            let mut point = Vector::zeros(d);
            for i in (0..d).rev() {
                point[i] = centers[idx % bins];
                idx /= bins;
            }
            1.0 + profile.value(&point)
        })
        .collect();
    HistogramLaw { time: t, d, bins_per_axis: bins, scale: spec.scale, edges, masses, weights, n_samples: n }
}

fn check_grid(a: &HistogramLaw, b: &HistogramLaw) -> Result<()> {
    if a.d != b.d || a.bins_per_axis != b.bins_per_axis || a.scale != b.scale {
        return Err(Error::GridMismatch(format!(
            "(d={}, bins={}, scale={}) vs (d={}, bins={}, scale={})",
            a.d, a.bins_per_axis, a.scale, b.d, b.bins_per_axis, b.scale
        )));
    }
    Ok(())
}

/// `½ Σ |p_i − q_i|`.
pub fn tv_distance(a: &HistogramLaw, b: &HistogramLaw) -> Result<f64> {
    check_grid(a, b)?;
    Ok(0.5 * a.masses.iter().zip(&b.masses).map(|(p, q)| (p - q).abs()).sum::<f64>())
}

/// `Σ (1 + V(center_i)) |p_i − q_i|`.
pub fn weighted_d1(a: &HistogramLaw, b: &HistogramLaw) -> Result<f64> {
    check_grid(a, b)?;
    Ok(a.masses
        .iter()
        .zip(&b.masses)
        .zip(&a.weights)
        .map(|((p, q), w)| w * (p - q).abs())
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_paths: usize,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub checkpoints: Vec<f64>,
    #[serde(default)]
    pub histogram: HistogramSpec,
}

impl EnsembleConfig {
    pub fn new(n_paths: usize, x0: &[f64]) -> Self {
        Self { n_paths, x0: x0.to_vec(), checkpoints: Vec::new(), histogram: HistogramSpec::default() }
    }

    pub fn with_checkpoints(mut self, cps: &[f64]) -> Self {
        self.checkpoints = cps.to_vec();
        self
    }

    pub fn validate(&self, scheme: &SchemeConfig) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::InvalidParams("n_paths must be >= 1".into()));
        }
        if !self.checkpoints.windows(2).all(|w| w[0] < w[1])
            || self.checkpoints.iter().any(|&t| !(t > 0.0) || t > scheme.t_end)
        {
            return Err(Error::InvalidParams(format!(
                "checkpoints must be increasing in (0, t_end = {}], got {:?}",
                scheme.t_end, self.checkpoints
            )));
        }
        if self.histogram.bins_per_axis == 0 || !(self.histogram.scale > 0.0) {
            return Err(Error::InvalidParams("histogram needs bins_per_axis >= 1 and scale > 0".into()));
        }
        Ok(())
    }

    fn scheme_with_record(&self, scheme: &SchemeConfig) -> SchemeConfig {
        let mut s = scheme.clone();
        if !self.checkpoints.is_empty() {
            s.record = Recording::Checkpoints(self.checkpoints.clone());
        }
        s
    }
}

/// Simulates paths `0..n` of the model in parallel; output is ordered by path id.
pub fn run_ensemble(model: &Model, scheme: &SchemeConfig, x0: &Vector, n_paths: usize) -> Result<Vec<SdePath>> {
    (0..n_paths as u64).into_par_iter().map(|id| simulate_path(model, scheme, x0, id)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleStats {
    pub n_paths: usize,
    pub status_counts: BTreeMap<String, usize>,
    pub explosion: Fraction,
    pub hit_zero: Fraction,
    pub invalid: Fraction,
    pub entered_ball: Fraction,
    pub explosion_time_quantiles: Option<[f64; 3]>,
    pub entry_time_quantiles: Option<[f64; 3]>,
    /// Smallest state norm over the ensemble (`min |Y|` for transformed runs).
    pub min_norm: f64,
    pub min_norm_quantiles: Option<[f64; 3]>,
    /// Paths with at least one step below `dt0·2⁻²⁰`.
    pub floor_flagged_paths: usize,
    pub total_steps: u64,
    #[serde(skip)]
    pub laws: Vec<HistogramLaw>,
}

impl EnsembleStats {
    pub fn from_paths(paths: &[SdePath], cfg: &EnsembleConfig, profile: &LyapunovProfile, d: usize) -> Self {
        let n = paths.len();
        let mut status_counts = BTreeMap::new();
        for p in paths {
            *status_counts.entry(p.status.label().to_string()).or_insert(0) += 1;
        }
        let count = |f: &dyn Fn(&PathStatus) -> bool| paths.iter().filter(|p| f(&p.status)).count();
        let times = |f: &dyn Fn(&PathStatus) -> bool| -> Vec<f64> {
            paths.iter().filter(|p| f(&p.status)).map(|p| p.status.time()).collect()
        };
        let exploded = |s: &PathStatus| s.is_exploded();
        let entered = |s: &PathStatus| matches!(s, PathStatus::EnteredBall { .. });
        let mins: Vec<f64> = paths.iter().map(|p| p.min_norm).collect();
        let laws = cfg
            .checkpoints
            .iter()
            .map(|&t| {
                let states: Vec<&Vector> = paths.iter().filter_map(|p| p.state_at(t)).collect();
                empirical_law(&states, t, cfg.histogram, d, profile)
            })
            .collect();
        Self {
            n_paths: n,
            status_counts,
            explosion: Fraction::new(count(&exploded), n),
            hit_zero: Fraction::new(count(&|s| s.is_hit_zero()), n),
            invalid: Fraction::new(count(&|s| matches!(s, PathStatus::Invalid { .. })), n),
            entered_ball: Fraction::new(count(&entered), n),
            explosion_time_quantiles: quantiles(&times(&exploded)),
            entry_time_quantiles: quantiles(&times(&entered)),
            min_norm: mins.iter().copied().fold(f64::INFINITY, f64::min),
            min_norm_quantiles: quantiles(&mins),
            floor_flagged_paths: paths.iter().filter(|p| p.floor_steps > 0).count(),
            total_steps: paths.iter().map(|p| p.steps).sum(),
            laws,
        }
    }

    fn check_invalid(&self) -> Result<()> {
        if self.invalid.count as f64 > 1e-3 * self.n_paths as f64 {
            return Err(Error::Experiment(format!(
                "{} of {} paths produced non-finite states",
                self.invalid.count, self.n_paths
            )));
        }
        Ok(())
    }
}

fn default_profile(model: &Model) -> LyapunovProfile {
    LyapunovProfile::new(0.5, model.params.r_switch).expect("alpha = 0.5 is admissible")
}

/// Explosion fraction of the SDE over `[0, t_end]` (exploded means `|x| ≥ x_max`).
pub fn explosion_probability(model: &Model, scheme: &SchemeConfig, cfg: &EnsembleConfig) -> Result<EnsembleStats> {
    cfg.validate(scheme)?;
    let x0 = Vector::from_column_slice(&cfg.x0);
    let paths = run_ensemble(model, &cfg.scheme_with_record(scheme), &x0, cfg.n_paths)?;
    let stats = EnsembleStats::from_paths(&paths, cfg, &default_profile(model), model.params.d);
    stats.check_invalid()?;
    Ok(stats)
}

/// Zero-hitting of `dY = g(Y)dt + dW` from `cfg.x0` (read in transformed coordinates).
pub fn zero_avoidance_y<G: AdditiveDrift + ?Sized>(
    drift: &G,
    scheme: &SchemeConfig,
    cfg: &EnsembleConfig,
) -> Result<EnsembleStats> {
    cfg.validate(scheme)?;
    let mut s = cfg.scheme_with_record(scheme);
    s.scheme = Scheme::YEulerAdditive;
    let y0 = Vector::from_column_slice(&cfg.x0);
    let paths: Vec<SdePath> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|id| simulate_y(drift, &s, &y0, id))
        .collect::<Result<_>>()?;
    let profile = LyapunovProfile::new(0.5, 1.0)?;
    let stats = EnsembleStats::from_paths(&paths, cfg, &profile, drift.dim());
    stats.check_invalid()?;
    Ok(stats)
}

#[derive(Debug, Clone, Serialize)]
pub struct TauRReport {
    pub stats: EnsembleStats,
    pub radius: f64,
    /// `|x0| > R + 1`.
    pub start_outside: bool,
    pub entered_first: usize,
    pub exploded_first: usize,
    /// Paths that reached `t_end` with neither event.
    pub undecided: usize,
    /// Among decided paths, the fraction that entered `B_R` before exploding.
    pub entered_before_explosion: Fraction,
}

/// Races the entrance time into `B_R` against explosion.
pub fn hitting_time_tau_r(model: &Model, scheme: &SchemeConfig, cfg: &EnsembleConfig) -> Result<TauRReport> {
    let radius = model.params.r_switch;
    let s = scheme.clone().with_watch_radius(radius);
    let stats = explosion_probability(model, &s, cfg)?;
    let entered_first = stats.entered_ball.count;
    let exploded_first = stats.explosion.count;
    let decided = entered_first + exploded_first;
    let undecided = stats.n_paths - decided - stats.invalid.count - stats.hit_zero.count;
    let x0 = Vector::from_column_slice(&cfg.x0);
    Ok(TauRReport {
        radius,
        start_outside: x0.norm() > radius + 1.0,
        entered_first,
        exploded_first,
        undecided,
        entered_before_explosion: Fraction::new(entered_first, decided),
        stats,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErgodicityConfig {
    pub n_paths: usize,
    pub x0_a: Vec<f64>,
    pub x0_b: Vec<f64>,
    pub checkpoints: Vec<f64>,
    #[serde(default)]
    pub histogram: HistogramSpec,
    /// Independent noise for the two ensembles (otherwise both share the master seed).
    #[serde(default = "default_true")]
    pub independent_seeds: bool,
    /// Exponent of the Lyapunov weight `1 + V`.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_true() -> bool {
    true
}

fn default_alpha() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    /// `−slope` of `log d1` against `t`.
    pub rate: f64,
    pub intercept: f64,
    pub points_used: usize,
    pub reliable: bool,
}

/// Least-squares fit of `log y` against `t` over points with `y > floor`.
pub fn fit_rate(ts: &[f64], ys: &[f64], floors: &[f64]) -> RateFit {
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(ys)
        .zip(floors)
        .filter(|((_, &y), &f)| y > f && y > 0.0)
        .map(|((&t, &y), _)| (t, y.ln()))
        .collect();
    let n = pts.len();
    if n < 2 {
        return RateFit { rate: f64::NAN, intercept: f64::NAN, points_used: n, reliable: false };
    }
    let nf = n as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    RateFit { rate: -slope, intercept: my - slope * mt, points_used: n, reliable: n >= 3 }
}

#[derive(Debug, Clone, Serialize)]
pub struct ErgodicityReport {
    pub checkpoints: Vec<f64>,
    pub tv: Vec<f64>,
    pub d1: Vec<f64>,
    /// Bootstrap floors: distance between the two halves of one ensemble, divided by √2,
    /// maximized over both ensembles.
    pub noise_floor_d1: Vec<f64>,
    pub noise_floor_tv: Vec<f64>,
    /// `2·√bins/√N`.
    pub analytic_floor: f64,
    pub fit: RateFit,
    /// `d1_{k+1} ≤ d1_k + floor_{k+1}` for all k.
    pub d1_nonincreasing_within_floor: bool,
    pub final_tv: f64,
    pub samples_a: Vec<usize>,
    pub samples_b: Vec<usize>,
    pub status_counts_a: BTreeMap<String, usize>,
    pub status_counts_b: BTreeMap<String, usize>,
    pub n_paths: usize,
}

fn laws_of(paths: &[&SdePath], cps: &[f64], spec: HistogramSpec, d: usize, profile: &LyapunovProfile) -> Vec<HistogramLaw> {
    cps.iter()
        .map(|&t| {
            let states: Vec<&Vector> = paths.iter().filter_map(|p| p.state_at(t)).collect();
            empirical_law(&states, t, spec, d, profile)
        })
        .collect()
}

fn status_counts(paths: &[SdePath]) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for p in paths {
        *m.entry(p.status.label().to_string()).or_insert(0) += 1;
    }
    m
}

/// Distances between the laws of two ensembles started at `x0_a` and `x0_b`.
pub fn ergodicity_experiment(model: &Model, scheme: &SchemeConfig, cfg: &ErgodicityConfig) -> Result<ErgodicityReport> {
    if cfg.n_paths < 2 {
        return Err(Error::InvalidParams("ergodicity needs n_paths >= 2".into()));
    }
    let d = model.params.d;
    if cfg.x0_a.len() != d || cfg.x0_b.len() != d {
        return Err(Error::InvalidParams("initial points must have the model dimension".into()));
    }
    let ens = EnsembleConfig {
        n_paths: cfg.n_paths,
        x0: cfg.x0_a.clone(),
        checkpoints: cfg.checkpoints.clone(),
        histogram: cfg.histogram,
    };
    ens.validate(scheme)?;
    let base = ens.scheme_with_record(scheme);
    let (mut sa, mut sb) = (base.clone(), base);
    if cfg.independent_seeds {
        sa.seed = derive_seed(scheme.seed, 1);
        sb.seed = derive_seed(scheme.seed, 2);
    }
    let pa = run_ensemble(model, &sa, &Vector::from_column_slice(&cfg.x0_a), cfg.n_paths)?;
    let pb = run_ensemble(model, &sb, &Vector::from_column_slice(&cfg.x0_b), cfg.n_paths)?;
    let profile = LyapunovProfile::new(cfg.alpha, model.params.r_switch)?;
    let cps = &cfg.checkpoints;
    let all_a: Vec<&SdePath> = pa.iter().collect();
    let all_b: Vec<&SdePath> = pb.iter().collect();
    let la = laws_of(&all_a, cps, cfg.histogram, d, &profile);
    let lb = laws_of(&all_b, cps, cfg.histogram, d, &profile);
    let halves = |paths: &[SdePath]| {
        let even: Vec<&SdePath> = paths.iter().step_by(2).collect();
        let odd: Vec<&SdePath> = paths.iter().skip(1).step_by(2).collect();
        (laws_of(&even, cps, cfg.histogram, d, &profile), laws_of(&odd, cps, cfg.histogram, d, &profile))
    };
    let (a0, a1) = halves(&pa);
    let (b0, b1) = halves(&pb);
    let mut tv = Vec::new();
    let mut d1 = Vec::new();
    let mut floor_d1 = Vec::new();
    let mut floor_tv = Vec::new();
    for k in 0..cps.len() {
        tv.push(tv_distance(&la[k], &lb[k])?);
        d1.push(weighted_d1(&la[k], &lb[k])?);
        let s = std::f64::consts::SQRT_2;
        floor_d1.push(weighted_d1(&a0[k], &a1[k])?.max(weighted_d1(&b0[k], &b1[k])?) / s);
        floor_tv.push(tv_distance(&a0[k], &a1[k])?.max(tv_distance(&b0[k], &b1[k])?) / s);
    }
    let bins = cfg.histogram.bins_per_axis.pow(d as u32) as f64;
    let analytic_floor = 2.0 * bins.sqrt() / (cfg.n_paths as f64).sqrt();
    let fit = fit_rate(cps, &d1, &floor_d1);
    let d1_nonincreasing_within_floor = (1..d1.len()).all(|k| d1[k] <= d1[k - 1] + floor_d1[k]);
    Ok(ErgodicityReport {
        checkpoints: cps.clone(),
        final_tv: *tv.last().unwrap_or(&f64::NAN),
        tv,
        d1,
        noise_floor_d1: floor_d1,
        noise_floor_tv: floor_tv,
        analytic_floor,
        fit,
        d1_nonincreasing_within_floor,
        samples_a: la.iter().map(|l| l.n_samples).collect(),
        samples_b: lb.iter().map(|l| l.n_samples).collect(),
        status_counts_a: status_counts(&pa),
        status_counts_b: status_counts(&pb),
        n_paths: cfg.n_paths,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinementConfig {
    pub x0: Vec<f64>,
    pub dt0: f64,
    /// Number of step sizes `dt0, dt0/2, …`.
    pub levels: usize,
    pub n_paths: usize,
    pub t_end: f64,
    pub exit_radius: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefinementRow {
    pub dt: f64,
    pub mean_sup_error: f64,
    pub std_error: f64,
    pub median_sup_error: f64,
    pub exited_fraction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RefinementTable {
    pub rows: Vec<RefinementRow>,
    /// Every halving satisfies `e_{k+1} ≤ 1.5·e_k` and the last row is below the first.
    pub monotone_within_slack: bool,
}

pub const REFINEMENT_SLACK: f64 = 1.5;

pub fn refinement_verdict(errors: &[f64]) -> bool {
    errors.windows(2).all(|w| w[1] <= REFINEMENT_SLACK * w[0])
        && errors.len() >= 2
        && errors[errors.len() - 1] < errors[0]
}

/// Mean sup-path discrepancy between the Stratonovich Heun scheme and the tamed Itô Euler
/// scheme driven by the same increments, over successive step halvings.
pub fn ito_stratonovich_consistency<D: Dynamics + ?Sized>(dynamics: &D, cfg: &RefinementConfig) -> Result<RefinementTable> {
    if cfg.x0.len() != dynamics.dim() || cfg.levels < 2 || cfg.n_paths < 2 || !(cfg.dt0 > 0.0) {
        return Err(Error::InvalidParams("refinement needs matching x0, levels >= 2, n_paths >= 2, dt0 > 0".into()));
    }
    let x0 = Vector::from_column_slice(&cfg.x0);
    let rows = (0..cfg.levels)
        .map(|k| {
            let dt = cfg.dt0 / 2f64.powi(k as i32);
            let runs: Vec<_> = (0..cfg.n_paths as u64)
                .into_par_iter()
                .map(|id| paired_discrepancy(dynamics, dt, cfg.t_end, &x0, cfg.seed, id, cfg.exit_radius))
                .collect();
            let n = runs.len() as f64;
            let mean = runs.iter().map(|r| r.sup_error).sum::<f64>() / n;
            let var = runs.iter().map(|r| (r.sup_error - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let sups: Vec<f64> = runs.iter().map(|r| r.sup_error).collect();
            RefinementRow {
                dt,
                mean_sup_error: mean,
                std_error: (var / n).sqrt(),
                median_sup_error: quantiles(&sups).map_or(f64::NAN, |q| q[1]),
                exited_fraction: runs.iter().filter(|r| r.exited).count() as f64 / n,
            }
        })
        .collect::<Vec<_>>();
    let errors: Vec<f64> = rows.iter().map(|r| r.mean_sup_error).collect();
    Ok(RefinementTable { monotone_within_slack: refinement_verdict(&errors), rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::{DriftSpec, GrowthCertificate};
    use crate::linalg::{vector, Matrix};
    use crate::model::{ConstantNoise, Driftless};
    use crate::params::ModelParams;
    use crate::rng::SampleRng;
    use proptest::prelude::*;

    fn profile() -> LyapunovProfile {
        LyapunovProfile::new(0.5, 1.0).unwrap()
    }

    fn law_of(points: &[Vector], spec: HistogramSpec) -> HistogramLaw {
        let refs: Vec<&Vector> = points.iter().collect();
        empirical_law(&refs, 1.0, spec, points[0].len(), &profile())
    }

    #[test]
    fn wilson_interval_cases() {
        let f = Fraction::new(1, 1);
        assert!(f.lo > 0.0 && f.lo < 0.5 && f.hi == 1.0);
        let f = Fraction::new(0, 1);
        assert!(f.lo == 0.0 && f.hi > 0.5 && f.hi < 1.0);
        let f = Fraction::new(0, 500);
        assert_eq!(f.lo, 0.0);
        assert!((f.hi - 0.00762).abs() < 1e-4);
        // symmetric case from the closed form
        let f = Fraction::new(50, 100);
        assert!((f.lo - 0.40383).abs() < 1e-4 && (f.hi - 0.59617).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn wilson_contains_the_estimate(n in 1usize..5000, k_frac in 0.0f64..=1.0) {
            let k = ((n as f64) * k_frac).floor() as usize;
            let f = Fraction::new(k, n);
            prop_assert!(f.lo <= f.estimate + 1e-15 && f.estimate <= f.hi + 1e-15);
            prop_assert!(f.lo >= 0.0 && f.hi <= 1.0);
        }
    }

    #[test]
    fn point_mass_and_two_bins() {
        let spec = HistogramSpec::default();
        let same = vec![vector(&[0.3, -2.0]); 10];
        let law = law_of(&same, spec);
        assert_eq!(law.masses.iter().filter(|&&m| m > 0.0).count(), 1);
        assert!((law.masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut two = vec![vector(&[-5.0, 0.1]); 3];
        two.extend(vec![vector(&[5.0, 0.1]); 3]);
        let law = law_of(&two, spec);
        let mut nz: Vec<f64> = law.masses.iter().copied().filter(|&m| m > 0.0).collect();
        nz.sort_by(f64::total_cmp);
        assert_eq!(nz, vec![0.5, 0.5]);
    }

    #[test]
    fn extreme_states_land_in_edge_bins() {
        let law = law_of(&[vector(&[1e300, -1e300])], HistogramSpec::default());
        assert_eq!(law.masses[31 * 32], 1.0);
    }

    fn random_points(rng: &mut SampleRng, n: usize, d: usize, spread: f64) -> Vec<Vector> {
        (0..n).map(|_| Vector::from_fn(d, |_, _| spread * rng.normal())).collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn distance_properties(seed in 0u64..10_000, n in 1usize..200, d in 1usize..=3) {
            let spec = HistogramSpec { bins_per_axis: 8, scale: 10.0 };
            let mut rng = SampleRng::new(seed);
            let a = law_of(&random_points(&mut rng, n, d, 5.0), spec);
            let b = law_of(&random_points(&mut rng, n + 3, d, 20.0), spec);
            let c = law_of(&random_points(&mut rng, 2 * n, d, 1.0), spec);
            prop_assert!((a.masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let ab = tv_distance(&a, &b).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
            prop_assert_eq!(ab, tv_distance(&b, &a).unwrap());
            let ac = tv_distance(&a, &c).unwrap();
            let cb = tv_distance(&c, &b).unwrap();
            prop_assert!(ab <= ac + cb + 1e-12);
            let d1 = weighted_d1(&a, &b).unwrap();
            prop_assert!(ab <= d1);
            prop_assert!(2.0 * ab <= d1 + 1e-12);
            prop_assert_eq!(tv_distance(&a, &a).unwrap(), 0.0);
            prop_assert_eq!(weighted_d1(&a, &a).unwrap(), 0.0);
        }
    }

    #[test]
    fn disjoint_supports() {
        let spec = HistogramSpec::default();
        let a = law_of(&[vector(&[-3.0, 0.0])], spec);
        let b = law_of(&[vector(&[3.0, 0.0])], spec);
        assert_eq!(tv_distance(&a, &b).unwrap(), 1.0);
        assert!(weighted_d1(&a, &b).unwrap() >= 2.0);
        let other = law_of(&[vector(&[3.0, 0.0])], HistogramSpec { bins_per_axis: 16, scale: 10.0 });
        assert!(matches!(tv_distance(&a, &other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn quantiles_by_nearest_rank() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(quantiles(&v), Some([1.0, 5.0, 9.0]));
        assert_eq!(quantiles(&[]), None);
    }

    #[test]
    fn rate_fit_recovers_an_exponential() {
        let ts = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = ts.iter().map(|t: &f64| 3.0 * (-0.4 * t).exp()).collect();
        let fit = fit_rate(&ts, &ys, &[0.0; 4]);
        assert!((fit.rate - 0.4).abs() < 1e-12 && fit.reliable);
        let fit = fit_rate(&ts, &ys, &[0.0, 0.0, 1.0, 1.0]);
        assert!(!fit.reliable);
    }

    #[test]
    fn noise_off_ensemble_explodes_at_the_ode_time() {
        let p = ModelParams::new(2, 2.0, 1.0).with_noise_scale(0.0);
        let model = Model::power(p.clone());
        let scheme = SchemeConfig::new(Scheme::OdeAdaptive, 1e-3, 5.0, &p, 1);
        let stats = explosion_probability(&model, &scheme, &EnsembleConfig::new(8, &[3.0, 0.0])).unwrap();
        assert_eq!(stats.explosion.count, 8);
        let q = stats.explosion_time_quantiles.unwrap();
        assert!((q[1] - 1.0 / 3.0).abs() < 1e-3);
    }

    #[test]
    fn driftless_one_dimensional_hits_follow_reflection() {
        let p = ModelParams::new(2, 2.0, 1.0);
        let scheme = SchemeConfig::new(Scheme::YEulerAdditive, 1e-3, 5.0, &p, 3);
        let stats = zero_avoidance_y(&Driftless { d: 1 }, &scheme, &EnsembleConfig::new(1000, &[0.5])).unwrap();
        let oracle = crate::counterexample1d::reflection_hitting_probability(0.5, 5.0);
        assert!((stats.hit_zero.estimate - oracle).abs() < 0.04, "{} vs {oracle}", stats.hit_zero.estimate);
    }

    #[test]
    fn start_inside_the_ball_enters_immediately() {
        let model = Model::power(ModelParams::new(2, 2.0, 1.0));
        let scheme = SchemeConfig::new(Scheme::TamedEulerIto, 1e-3, 1.0, &model.params, 1);
        let rep = hitting_time_tau_r(&model, &scheme, &EnsembleConfig::new(4, &[0.2, 0.1])).unwrap();
        assert_eq!(rep.entered_first, 4);
        assert_eq!(rep.stats.entry_time_quantiles, Some([0.0, 0.0, 0.0]));
        assert!(!rep.start_outside);
    }

    #[test]
    fn noise_off_never_returns() {
        let p = ModelParams::new(2, 2.0, 1.0).with_noise_scale(0.0);
        let model = Model::power(p.clone());
        let scheme = SchemeConfig::new(Scheme::OdeAdaptive, 1e-3, 5.0, &p, 1);
        let rep = hitting_time_tau_r(&model, &scheme, &EnsembleConfig::new(6, &[3.0, 0.0])).unwrap();
        assert_eq!(rep.exploded_first, 6);
        assert_eq!(rep.entered_before_explosion.estimate, 0.0);
    }

    #[test]
    fn identical_ensembles_have_zero_distance() {
        let model = Model::power(ModelParams::new(2, 2.0, 1.0));
        let scheme = SchemeConfig::new(Scheme::HybridTamedY, 1e-3, 0.5, &model.params, 5);
        let cfg = ErgodicityConfig {
            n_paths: 40,
            x0_a: vec![1.0, 0.0],
            x0_b: vec![1.0, 0.0],
            checkpoints: vec![0.25, 0.5],
            histogram: HistogramSpec::default(),
            independent_seeds: false,
            alpha: 0.5,
        };
        let rep = ergodicity_experiment(&model, &scheme, &cfg).unwrap();
        assert!(rep.tv.iter().chain(&rep.d1).all(|&v| v == 0.0));
        assert!(!rep.fit.reliable);
    }

    #[test]
    fn independent_copies_sit_at_the_noise_floor() {
        let model = Model::power(ModelParams::new(2, 2.0, 1.0));
        let scheme = SchemeConfig::new(Scheme::HybridTamedY, 1e-3, 1.0, &model.params, 6);
        let cfg = ErgodicityConfig {
            n_paths: 400,
            x0_a: vec![1.0, 0.0],
            x0_b: vec![1.0, 0.0],
            checkpoints: vec![0.25, 0.5, 1.0],
            histogram: HistogramSpec { bins_per_axis: 8, scale: 10.0 },
            independent_seeds: true,
            alpha: 0.5,
        };
        let rep = ergodicity_experiment(&model, &scheme, &cfg).unwrap();
        for k in 0..3 {
            assert!(rep.d1[k] < 3.0 * rep.noise_floor_d1[k] + 1e-12, "{k}: {:?} {:?}", rep.d1, rep.noise_floor_d1);
        }
    }

    #[test]
    fn constant_noise_discrepancy_shrinks_linearly() {
        let drift = DriftSpec::custom(|x: &Vector| x.map(|v| v.sin()), GrowthCertificate { m: 2.0, c: 1.0 });
        let double = ConstantNoise { drift, sigma: Matrix::identity(2, 2) * 0.5 };
        let cfg = RefinementConfig {
            x0: vec![0.3, -0.2],
            dt0: 1e-2,
            levels: 4,
            n_paths: 50,
            t_end: 1.0,
            exit_radius: 1e3,
            seed: 8,
        };
        let table = ito_stratonovich_consistency(&double, &cfg).unwrap();
        assert!(table.monotone_within_slack);
        for w in table.rows.windows(2) {
            let ratio = w[1].mean_sup_error / w[0].mean_sup_error;
            assert!((ratio - 0.5).abs() < 0.1, "ratio {ratio}");
        }
    }

    #[test]
    fn refinement_verdict_cases() {
        assert!(refinement_verdict(&[1.0, 0.8, 0.9, 0.5]));
        assert!(!refinement_verdict(&[1.0, 1.6, 0.5, 0.4]));
        assert!(!refinement_verdict(&[1.0, 1.2, 1.3, 1.4]));
    }
}
