//! Seeded experiment runners.
//!
//! Every runner expands the parameter grids of an [`ExperimentSpec`] in a
//! fixed nested order, runs `trials` independent instances per grid point
//! and returns rows in that canonical order. Trial `t` at data point `g`
//! uses the seed `trial_seed(base_seed, g, t)`; methods compared at the same
//! data point see the same instances.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bounds::compute_bounds;
use crate::dict_update::{
    blotless_ls, dictionary_from_inverse, learn, learn_tracked, update_dictionary, LearnConfig, MethodKind,
    UpdateMethod,
};
use crate::error::{Error, Result};
use crate::imaging::{add_gaussian_noise, denoise, image_psnr, sample_training_patches, GrayImage, PatchConfig};
use crate::metrics::recovery_error;
use crate::model::Dictionary;
use crate::sparse_coding::{pattern_coefficients, OmpConfig};
use crate::synth::{corrupt_pattern, gen_training_set, mix, random_dictionary, trial_seed, GenConfig, TAG_INIT};

/// Success threshold on `R_err` for exact recovery.
pub const EXACT_TOL: f64 = 1e-6;
/// Empirical success rate that defines `n_sim`.
pub const SUCCESS_LEVEL: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExperimentKind {
    PhaseTransition,
    LearnCurve,
    PatternRobustness,
    BlockSizeSweep,
    RuntimeBench,
    BoundsTable,
    Denoise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub m: Vec<usize>,
    /// Atom counts; empty means `l = m`.
    pub l: Vec<usize>,
    pub n: Vec<usize>,
    pub theta: Vec<f64>,
    /// Pattern corruption fractions.
    pub r: Vec<f64>,
    /// `null` entries are noise free.
    pub snr_db: Vec<Option<f64>>,
    pub methods: Vec<MethodKind>,
    pub block_sizes: Vec<usize>,
    pub trials: usize,
    pub base_seed: u64,
    pub n_iterations: usize,
    /// OMP sparsity during learning; `None` means `round(theta * l)`.
    pub omp_k: Option<usize>,
    pub epsilon: f64,
    /// Inner-solver settings shared by all methods.
    pub update: UpdateMethod,
    /// Noise levels of the denoising run.
    pub sigma: Vec<f64>,
    /// Directory of PGM images for the denoising run.
    pub images: Option<PathBuf>,
    pub patch: PatchConfig,
    /// Fill the `seconds` column of learning curves. Timings make the
    /// output nondeterministic, so this is off by default.
    pub record_timing: bool,
}

impl ExperimentSpec {
    /// Default parameters for `kind`: desk scale, or full scale
    /// when `full` is set.
    pub fn preset(kind: ExperimentKind, full: bool) -> Self {
        let mut s = Self {
            kind,
            m: vec![30],
            l: Vec::new(),
            n: vec![300],
            theta: vec![0.2],
            r: vec![0.0],
            snr_db: vec![None],
            methods: vec![MethodKind::Mod, MethodKind::Ksvd, MethodKind::BlotlessItertls],
            block_sizes: Vec::new(),
            trials: 50,
            base_seed: 2020,
            n_iterations: 50,
            omp_k: None,
            epsilon: 0.01,
            update: UpdateMethod::default(),
            sigma: vec![10.0, 20.0, 30.0],
            images: None,
            patch: PatchConfig::default(),
            record_timing: false,
        };
        let (m, big) = if full { (64usize, true) } else { (32usize, false) };
        let theta = 5.0 / m as f64;
        match kind {
            ExperimentKind::PhaseTransition => {
                s.trials = 100;
                s.methods = vec![MethodKind::BlotlessLs];
                if full {
                    s.theta = vec![0.1, 0.2, 0.3, 0.4];
                    s.n = (4..=30).map(|k| 5 * k).collect();
                } else {
                    s.n = (8..=18).map(|k| 5 * k).collect();
                }
            }
            ExperimentKind::LearnCurve => {
                s.m = vec![m];
                s.n = vec![if big { 400 } else { 300 }];
                s.theta = vec![theta];
                s.trials = if big { 100 } else { 50 };
                s.n_iterations = if big { 150 } else { 50 };
            }
            ExperimentKind::PatternRobustness => {
                s.m = vec![m];
                s.n = vec![if big { 500 } else { 256 }];
                s.theta = vec![theta];
                s.r = vec![0.0, 0.05, 0.1, 0.15, 0.2];
                s.trials = if big { 100 } else { 50 };
            }
            ExperimentKind::BlockSizeSweep => {
                s.m = vec![m];
                s.n = vec![if big { 200 } else { 100 }];
                s.theta = vec![theta];
                s.methods = vec![MethodKind::BlotlessItertls];
                s.block_sizes = if big {
                    vec![1, 8, 16, 32, 64]
                } else {
                    vec![1, 8, 16, 32]
                };
                s.trials = if big { 100 } else { 20 };
            }
            ExperimentKind::RuntimeBench => {
                s.m = vec![if big { 64 } else { 16 }];
                s.theta = vec![if big { 5.0 / 64.0 } else { 5.0 / 16.0 }];
                s.methods = vec![MethodKind::BlotlessItertls, MethodKind::BlotlessPartls];
                if big {
                    // A dense STLS Jacobian is out of reach beyond m n = 12800.
                    s.n = vec![200, 300, 400, 500];
                    s.trials = 50;
                } else {
                    s.methods.push(MethodKind::BlotlessStls);
                    s.n = vec![50, 100];
                    s.trials = 3;
                    s.n_iterations = 3;
                }
            }
            ExperimentKind::BoundsTable => {
                s.theta = vec![0.1, 0.2, 0.3, 0.4];
                s.trials = 1;
                if full {
                    s.m = vec![16, 30, 64, 128, 256];
                    s.theta = (1..=9).map(|k| k as f64 * 0.05).collect();
                }
            }
            ExperimentKind::Denoise => {
                s.m = vec![64];
                s.l = vec![128];
                s.n = vec![500];
                s.theta = vec![10.0 / 128.0];
                s.methods = vec![MethodKind::BlotlessItertls, MethodKind::Mod, MethodKind::Ksvd];
                s.trials = 1;
                s.n_iterations = 20;
            }
        }
        s
    }

    /// Parses a JSON spec. Fields that are left out take the preset values
    /// of the spec's `kind`.
    pub fn from_json(text: &str, full: bool) -> Result<Self> {
        let user: serde_json::Value = serde_json::from_str(text)?;
        let obj = user
            .as_object()
            .ok_or_else(|| Error::Config("an experiment spec must be a JSON object".into()))?;
        let kind: ExperimentKind = serde_json::from_value(
            obj.get("kind")
                .cloned()
                .ok_or_else(|| Error::Config("the spec needs a \"kind\"".into()))?,
        )?;
        let mut merged = serde_json::to_value(Self::preset(kind, full))?;
        let target = merged.as_object_mut().expect("spec serializes to an object");
        for (k, v) in obj {
            if !target.contains_key(k) {
                return Err(Error::Config(format!("unknown spec field {k:?}")));
            }
            target.insert(k.clone(), v.clone());
        }
        let spec: Self = serde_json::from_value(merged)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path, full: bool) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?, full)
    }

    /// Atom counts for signal dimension `m`.
    fn atoms(&self, m: usize) -> Vec<usize> {
        if self.l.is_empty() {
            vec![m]
        } else {
            self.l.clone()
        }
    }

    fn sparsity(&self, theta: f64, l: usize) -> usize {
        self.omp_k
            .unwrap_or_else(|| ((theta * l as f64).round() as usize).max(1))
            .min(l)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("{what} must be non-empty")));
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.m.is_empty() {
            return bad("m");
        }
        if self.theta.is_empty() {
            return bad("theta");
        }
        if let Some(t) = self.theta.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(Error::Config(format!("theta = {t} must lie in (0, 1)")));
        }
        if self.kind == ExperimentKind::BoundsTable {
            return Ok(());
        }
        if self.n.is_empty() {
            return bad("n");
        }
        if self.n_iterations == 0 {
            return Err(Error::Config("n_iterations must be at least 1".into()));
        }
        let needs_methods = !matches!(
            self.kind,
            ExperimentKind::PhaseTransition | ExperimentKind::BlockSizeSweep
        );
        if needs_methods && self.methods.is_empty() {
            return bad("methods");
        }
        match self.kind {
            ExperimentKind::PatternRobustness => {
                if self.r.is_empty() {
                    return bad("r");
                }
                if let Some(r) = self.r.iter().find(|r| !(0.0..1.0).contains(*r)) {
                    return Err(Error::Config(format!("r = {r} must lie in [0, 1)")));
                }
            }
            ExperimentKind::BlockSizeSweep => {
                if self.block_sizes.is_empty() {
                    return bad("block_sizes");
                }
                for &m in &self.m {
                    for &b in &self.block_sizes {
                        self.update.with_block_size(b).block_size_for(m)?;
                    }
                }
            }
            ExperimentKind::Denoise => {
                if self.sigma.is_empty() {
                    return bad("sigma");
                }
                if self.sigma.iter().any(|s| !(*s >= 0.0)) {
                    return Err(Error::Config("noise levels must be non-negative".into()));
                }
            }
            _ => {}
        }
        if self.snr_db.is_empty() {
            return bad("snr_db");
        }
        for &m in &self.m {
            self.update.validate(m)?;
            for &n in &self.n {
                if self.methods.contains(&MethodKind::BlotlessStls) && m * n > self.update.stls_size_cap {
                    return Err(Error::SizeCapExceeded {
                        size: m * n,
                        cap: self.update.stls_size_cap,
                    });
                }
            }
        }
        Ok(())
    }
}

/// One measurement. Fields that do not apply to an experiment are empty in
/// the CSV output. Rows without a trial are aggregates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub grid: usize,
    pub m: usize,
    pub l: usize,
    pub n: usize,
    pub theta: f64,
    pub r: Option<f64>,
    pub snr_db: Option<f64>,
    pub method: Option<MethodKind>,
    pub block_size: Option<usize>,
    pub sigma: Option<f64>,
    pub image: Option<String>,
    pub trial: Option<usize>,
    pub seed: Option<u64>,
    pub iteration: Option<usize>,
    pub metric: String,
    pub value: f64,
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
}

impl ExperimentResult {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Rows with the given metric, in order.
    pub fn metric<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a ResultRow> + 'a {
        self.rows.iter().filter(move |r| r.metric == name)
    }
}

/// Grid point label shared by all rows it produces.
#[derive(Debug, Clone, Default)]
struct Point {
    grid: usize,
    m: usize,
    l: usize,
    n: usize,
    theta: f64,
    r: Option<f64>,
    snr_db: Option<f64>,
    method: Option<MethodKind>,
    block_size: Option<usize>,
    sigma: Option<f64>,
    image: Option<String>,
}

impl Point {
    fn row(&self, trial: Option<(usize, u64)>, iteration: Option<usize>, metric: &str, value: f64) -> ResultRow {
        ResultRow {
            grid: self.grid,
            m: self.m,
            l: self.l,
            n: self.n,
            theta: self.theta,
            r: self.r,
            snr_db: self.snr_db,
            method: self.method,
            block_size: self.block_size,
            sigma: self.sigma,
            image: self.image.clone(),
            trial: trial.map(|t| t.0),
            seed: trial.map(|t| t.1),
            iteration,
            metric: metric.to_string(),
            value,
            seconds: None,
        }
    }
}

/// `f` over `items` on up to `threads` workers, results in input order.
fn par_map<T: Sync, R: Send>(items: &[T], threads: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let threads = threads.clamp(1, items.len().max(1));
    if threads == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let out: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                out.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    out.into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("every item is processed"))
        .collect()
}

fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        0.5 * (v[k - 1] + v[k])
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn run(spec: &ExperimentSpec, threads: usize) -> Result<ExperimentResult> {
    spec.validate()?;
    match spec.kind {
        ExperimentKind::PhaseTransition => run_phase_transition(spec, threads),
        ExperimentKind::LearnCurve => run_learn_curve(spec, threads),
        ExperimentKind::PatternRobustness => run_pattern_robustness(spec, threads),
        ExperimentKind::BlockSizeSweep => run_block_size_sweep(spec, threads),
        ExperimentKind::RuntimeBench => run_runtime_bench(spec),
        ExperimentKind::BoundsTable => run_bounds_table(spec),
        ExperimentKind::Denoise => run_denoise(spec, threads),
    }
}

/// BLOTLESS-LS recovery from the true pattern of exact data. Any failure
/// counts as an unsuccessful trial.
fn exact_recovery_trial(m: usize, n: usize, theta: f64, seed: u64) -> f64 {
    let attempt = || -> Result<f64> {
        let set = gen_training_set(&GenConfig::new(m, m, n, theta, seed))?;
        let (d0, x0) = set.ground_truth.expect("generated sets carry the ground truth");
        let (h, _) = blotless_ls(&set.samples, x0.pattern())?;
        let d = Dictionary::new(dictionary_from_inverse(&h)?)?;
        Ok(recovery_error(&d, &d0)?.r_err)
    };
    attempt().unwrap_or(f64::NAN)
}

/// Per `(m, theta, n)`: trial rows `r_err` and `success`, then
/// `success_rate`. After each `(m, theta)` group come `n_star` (the bound)
/// and `n_sim` (smallest grid `n` whose success rate reaches 0.99, `NaN` if
/// none does), labelled with the group's first grid point.
pub fn run_phase_transition(spec: &ExperimentSpec, threads: usize) -> Result<ExperimentResult> {
    spec.validate()?;
    let mut rows = Vec::new();
    let mut grid = 0;
    for &m in &spec.m {
        for &theta in &spec.theta {
            let first = Point {
                grid,
                m,
                l: m,
                n: spec.n[0],
                theta,
                method: Some(MethodKind::BlotlessLs),
                ..Point::default()
            };
            let mut n_sim = f64::NAN;
            for &n in &spec.n {
                let p = Point {
                    grid,
                    n,
                    ..first.clone()
                };
                let jobs: Vec<(usize, u64)> = (0..spec.trials)
                    .map(|t| (t, trial_seed(spec.base_seed, grid as u64, t as u64)))
                    .collect();
                let errs = par_map(&jobs, threads, |&(_, seed)| exact_recovery_trial(m, n, theta, seed));
                let mut successes = 0;
                for (&(t, seed), &e) in jobs.iter().zip(&errs) {
                    let ok = e < EXACT_TOL;
                    successes += usize::from(ok);
                    rows.push(p.row(Some((t, seed)), None, "r_err", e));
                    rows.push(p.row(Some((t, seed)), None, "success", f64::from(u8::from(ok))));
                }
                let rate = successes as f64 / spec.trials as f64;
                rows.push(p.row(None, None, "success_rate", rate));
                if n_sim.is_nan() && rate >= SUCCESS_LEVEL {
                    n_sim = n as f64;
                }
                grid += 1;
            }
            let bound = compute_bounds(m, theta, spec.epsilon)?;
            rows.push(first.row(None, None, "n_star", bound.n_star));
            rows.push(first.row(None, None, "n_sim", n_sim));
        }
    }
    Ok(ExperimentResult { rows })
}

/// A learning configuration compared at every data point.
#[derive(Debug, Clone)]
struct Series {
    method: UpdateMethod,
    block_size: Option<usize>,
}

/// Learning curves of `series` on shared data. Trial rows per iteration are
/// `r_err` and `objective`; aggregates per iteration are `mean_r_err` and
/// `median_r_err`.
fn learn_curves(spec: &ExperimentSpec, series: &[Series], threads: usize) -> Result<ExperimentResult> {
    let mut rows = Vec::new();
    let mut grid = 0;
    let mut data_point = 0u64;
    for &m in &spec.m {
        for l in spec.atoms(m) {
            for &n in &spec.n {
                for &theta in &spec.theta {
                    for &snr_db in &spec.snr_db {
                        for s in series {
                            let p = Point {
                                grid,
                                m,
                                l,
                                n,
                                theta,
                                snr_db,
                                method: Some(s.method.kind),
                                block_size: s.block_size,
                                ..Point::default()
                            };
                            let seeds: Vec<(usize, u64)> = (0..spec.trials)
                                .map(|t| (t, trial_seed(spec.base_seed, data_point, t as u64)))
                                .collect();
                            let curves = par_map(&seeds, threads, |&(_, seed)| {
                                let mut gen = GenConfig::new(m, l, n, theta, seed);
                                gen.snr_db = snr_db;
                                let set = gen_training_set(&gen)?;
                                let (d0, _) = set
                                    .ground_truth
                                    .as_ref()
                                    .expect("generated sets carry the ground truth");
                                let cfg = LearnConfig {
                                    method: s.method,
                                    omp: OmpConfig::sparsity(spec.sparsity(theta, l)),
                                    n_iterations: spec.n_iterations,
                                    atoms: l,
                                    seed,
                                };
                                learn_tracked(&set.samples, &cfg, Some(d0))
                            });
                            let mut per_iter = vec![Vec::with_capacity(spec.trials); spec.n_iterations];
                            for (&(t, seed), curve) in seeds.iter().zip(curves) {
                                let history = curve?.history;
                                for rec in history {
                                    let e = rec.r_err.unwrap_or(f64::NAN);
                                    per_iter[rec.iteration - 1].push(e);
                                    let mut row = p.row(Some((t, seed)), Some(rec.iteration), "r_err", e);
                                    if spec.record_timing {
                                        row.seconds = Some(rec.seconds);
                                    }
                                    rows.push(row);
                                    rows.push(p.row(Some((t, seed)), Some(rec.iteration), "objective", rec.objective));
                                }
                            }
                            for (k, errs) in per_iter.iter().enumerate() {
                                rows.push(p.row(None, Some(k + 1), "mean_r_err", mean(errs)));
                                rows.push(p.row(None, Some(k + 1), "median_r_err", median(errs)));
                            }
                            grid += 1;
                        }
                        data_point += 1;
                    }
                }
            }
        }
    }
    Ok(ExperimentResult { rows })
}

pub fn run_learn_curve(spec: &ExperimentSpec, threads: usize) -> Result<ExperimentResult> {
    spec.validate()?;
    let series: Vec<Series> = spec
        .methods
        .iter()
        .map(|&k| Series {
            method: UpdateMethod { kind: k, ..spec.update },
            block_size: None,
        })
        .collect();
    learn_curves(spec, &series, threads)
}

/// Learning curves of BLOTLESS-IterTLS per block size, followed by K-SVD as
/// the reference series.
pub fn run_block_size_sweep(spec: &ExperimentSpec, threads: usize) -> Result<ExperimentResult> {
    spec.validate()?;
    let mut series: Vec<Series> = spec
        .block_sizes
        .iter()
        .map(|&b| Series {
            method: UpdateMethod {
                kind: MethodKind::BlotlessItertls,
                block_size: Some(b),
                ..spec.update
            },
            block_size: Some(b),
        })
        .collect();
    series.push(Series {
        method: UpdateMethod::new(MethodKind::Ksvd),
        block_size: None,
    });
    learn_curves(spec, &series, threads)
}

/// One update call per method from a corrupted true pattern.
///
/// All methods start from the same random dictionary `D_init`; the
/// coefficients handed to them are the least-squares fit to `D_init` on the
/// corrupted pattern, as a sparse coder with that pattern would produce.
/// Trial rows are `r_err` (`NaN` when the update fails); aggregates are
/// `median_r_err`.
pub fn run_pattern_robustness(spec: &ExperimentSpec, threads: usize) -> Result<ExperimentResult> {
    spec.validate()?;
    let mut rows = Vec::new();
    let mut grid = 0;
    let mut data_point = 0u64;
    for &m in &spec.m {
        for l in spec.atoms(m) {
            for &n in &spec.n {
                for &theta in &spec.theta {
                    for &r in &spec.r {
                        let seeds: Vec<(usize, u64)> = (0..spec.trials)
                            .map(|t| (t, trial_seed(spec.base_seed, data_point, t as u64)))
                            .collect();
                        let results = par_map(&seeds, threads, |&(_, seed)| -> Result<Vec<f64>> {
                            let set = gen_training_set(&GenConfig::new(m, l, n, theta, seed))?;
                            let (d0, x0) = set
                                .ground_truth
                                .as_ref()
                                .expect("generated sets carry the ground truth");
                            let pattern = corrupt_pattern(x0.pattern(), r, seed)?;
                            let d_init = random_dictionary(m, l, seed, TAG_INIT)?.normalize().0;
                            let x = pattern_coefficients(&d_init, &set.samples, &pattern)?;
                            spec.methods
                                .iter()
                                .map(|&k| {
                                    let method = UpdateMethod { kind: k, ..spec.update };
                                    match update_dictionary(&set.samples, &d_init, &x, &method) {
                                        Ok((d, _)) => Ok(recovery_error(&d, d0)?.r_err),
                                        Err(e) if e.is_numerical() => Ok(f64::NAN),
                                        Err(e) => Err(e),
                                    }
                                })
                                .collect()
                        });
                        let results: Vec<Vec<f64>> = results.into_iter().collect::<Result<_>>()?;
                        for (c, &k) in spec.methods.iter().enumerate() {
                            let p = Point {
                                grid,
                                m,
                                l,
                                n,
                                theta,
                                r: Some(r),
                                method: Some(k),
                                ..Point::default()
                            };
                            let errs: Vec<f64> = results.iter().map(|v| v[c]).collect();
                            for (&(t, seed), &e) in seeds.iter().zip(&errs) {
                                rows.push(p.row(Some((t, seed)), None, "r_err", e));
                            }
                            rows.push(p.row(None, None, "median_r_err", median(&errs)));
                            grid += 1;
                        }
                        data_point += 1;
                    }
                }
            }
        }
    }
    Ok(ExperimentResult { rows })
}

/// Mean wall-clock seconds per learning iteration (sparse coding included).
/// Runs sequentially so that timings do not compete for cores.
pub fn run_runtime_bench(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let mut rows = Vec::new();
    let mut grid = 0;
    let mut data_point = 0u64;
    for &m in &spec.m {
        for l in spec.atoms(m) {
            for &theta in &spec.theta {
                for &n in &spec.n {
                    for &k in &spec.methods {
                        let p = Point {
                            grid,
                            m,
                            l,
                            n,
                            theta,
                            method: Some(k),
                            ..Point::default()
                        };
                        let mut per_trial = Vec::with_capacity(spec.trials);
                        for t in 0..spec.trials {
                            let seed = trial_seed(spec.base_seed, data_point, t as u64);
                            let set = gen_training_set(&GenConfig::new(m, l, n, theta, seed))?;
                            let cfg = LearnConfig {
                                method: UpdateMethod { kind: k, ..spec.update },
                                omp: OmpConfig::sparsity(spec.sparsity(theta, l)),
                                n_iterations: spec.n_iterations,
                                atoms: l,
                                seed,
                            };
                            let t0 = Instant::now();
                            learn(&set.samples, &cfg)?;
                            let secs = t0.elapsed().as_secs_f64() / spec.n_iterations as f64;
                            per_trial.push(secs);
                            let mut row = p.row(Some((t, seed)), None, "seconds_per_iteration", secs);
                            row.seconds = Some(secs);
                            rows.push(row);
                        }
                        let avg = mean(&per_trial);
                        let mut row = p.row(None, None, "mean_seconds_per_iteration", avg);
                        row.seconds = Some(avg);
                        rows.push(row);
                        grid += 1;
                    }
                    data_point += 1;
                }
            }
        }
    }
    Ok(ExperimentResult { rows })
}

/// `n0`, `n1`, `n2`, `n3`, `n_star` and `n_star_rounded` per `(m, theta)`.
pub fn run_bounds_table(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let mut rows = Vec::new();
    let mut grid = 0;
    for &m in &spec.m {
        for &theta in &spec.theta {
            let b = compute_bounds(m, theta, spec.epsilon)?;
            let p = Point {
                grid,
                m,
                l: m,
                theta,
                ..Point::default()
            };
            for (name, v) in [
                ("n0", b.n0),
                ("n1", b.n1),
                ("n2", b.n2),
                ("n3", b.n3),
                ("n_star", b.n_star),
                ("n_star_rounded", b.n_star_rounded as f64),
            ] {
                rows.push(p.row(None, None, name, v));
            }
            grid += 1;
        }
    }
    Ok(ExperimentResult { rows })
}

/// Sorted `*.pgm` files of `dir`.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")));
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!("no .pgm images in {}", dir.display())));
    }
    Ok(paths)
}

/// Dictionary learned from clean patches of `train`.
pub fn train_patch_dictionary(
    train: &[GrayImage],
    spec: &ExperimentSpec,
    method: MethodKind,
    seed: u64,
) -> Result<Dictionary> {
    let patch = spec.patch.patch;
    let (l, n, theta) = (
        spec.l.first().copied().unwrap_or(2 * patch * patch),
        spec.n[0],
        spec.theta[0],
    );
    let y = sample_training_patches(train, n, patch, seed)?;
    let cfg = LearnConfig {
        method: UpdateMethod {
            kind: method,
            ..spec.update
        },
        omp: OmpConfig::sparsity(spec.sparsity(theta, l)),
        n_iterations: spec.n_iterations,
        atoms: l,
        seed,
    };
    Ok(learn(&y, &cfg)?.dictionary)
}

/// Leave-one-out denoising: each image is denoised with dictionaries
/// learned on the other images (on itself when it is the only one). Per
/// `(image, sigma)` the rows are `psnr_noisy` and then `psnr_denoised` for
/// every method.
pub fn run_denoise(spec: &ExperimentSpec, threads: usize) -> Result<ExperimentResult> {
    spec.validate()?;
    let dir = spec
        .images
        .as_ref()
        .ok_or_else(|| Error::Config("the denoising run needs an image directory".into()))?;
    let paths = list_images(dir)?;
    let images: Vec<GrayImage> = paths.iter().map(|p| GrayImage::load(p)).collect::<Result<_>>()?;
    let names: Vec<String> = paths
        .iter()
        .map(|p| {
            p.file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
        .collect();
    let m = spec.patch.patch * spec.patch.patch;
    let l = spec.l.first().copied().unwrap_or(2 * m);

    let mut rows = Vec::new();
    let mut grid = 0;
    for (i, img) in images.iter().enumerate() {
        let train: Vec<GrayImage> = if images.len() == 1 {
            images.clone()
        } else {
            images
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, im)| im.clone())
                .collect()
        };
        let train_seed = mix(spec.base_seed, i as u64);
        let dicts = par_map(&spec.methods, threads, |&k| {
            train_patch_dictionary(&train, spec, k, train_seed)
        });
        let dicts: Vec<Dictionary> = dicts.into_iter().collect::<Result<_>>()?;
        for &sigma in &spec.sigma {
            let p = Point {
                grid,
                m,
                l,
                n: spec.n[0],
                theta: spec.theta[0],
                sigma: Some(sigma),
                image: Some(names[i].clone()),
                ..Point::default()
            };
            let cfg = PatchConfig { sigma, ..spec.patch };
            for t in 0..spec.trials {
                let seed = trial_seed(spec.base_seed, grid as u64, t as u64);
                let noisy = add_gaussian_noise(img, sigma, seed)?;
                rows.push(p.row(Some((t, seed)), None, "psnr_noisy", image_psnr(img, &noisy)?));
                let outs = par_map(&dicts, threads, |d| {
                    denoise(&noisy, d, &cfg).and_then(|o| image_psnr(img, &o))
                });
                for (&k, out) in spec.methods.iter().zip(outs) {
                    let mp = Point {
                        method: Some(k),
                        ..p.clone()
                    };
                    rows.push(mp.row(Some((t, seed)), None, "psnr_denoised", out?));
                }
            }
            grid += 1;
        }
    }
    Ok(ExperimentResult { rows })
}
