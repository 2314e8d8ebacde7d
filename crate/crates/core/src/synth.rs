//! Synthetic instances: Gaussian dictionaries, Bernoulli-Gaussian
//! coefficients, measurement noise at a prescribed SNR, and sparsity-pattern
//! corruption.
//!
//! # Random streams
//!
//! Every generator draws from its own ChaCha8 stream keyed by
//! `(seed, tag)`, so outputs do not depend on what else was generated.
//! The 32-byte ChaCha key is four consecutive outputs of SplitMix64 started
//! at `mix(seed, tag)`, each written little-endian, where
//!
//! ```text
//! splitmix64(x): z = x + 0x9E3779B97F4A7C15;
//!                z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9;
//!                z = (z ^ (z >> 27)) * 0x94D049BB133111EB;
//!                z ^ (z >> 31)                      (wrapping arithmetic)
//! mix(a, b)    = splitmix64(a ^ splitmix64(b))
//! ```
//!
//! Uniforms on `(0, 1]` are `((next_u64 >> 11) + 1) * 2^-53`. Standard
//! normals use Box-Muller on consecutive uniform pairs `(u1, u2)`, emitting
//! `sqrt(-2 ln u1) cos(2 pi u2)` first and `sqrt(-2 ln u1) sin(2 pi u2)` second.
//! Matrices are filled in column-major order.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dictionary, SparseCoeffs, SupportPattern, TrainingSet};
use crate::numerics::{write_matrix, Matrix};

pub const TAG_DICTIONARY: u64 = 0x4449_4354;
pub const TAG_SUPPORT: u64 = 0x5355_5050;
pub const TAG_VALUES: u64 = 0x5641_4c53;
pub const TAG_NOISE: u64 = 0x4e4f_4953;
pub const TAG_CORRUPT: u64 = 0x434f_5252;
/// Initial dictionaries of the learning driver.
pub const TAG_INIT: u64 = 0x494e_4954;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn mix(a: u64, b: u64) -> u64 {
    splitmix64(a ^ splitmix64(b))
}

/// Seed of trial `trial` at grid point `grid`.
pub fn trial_seed(base: u64, grid: u64, trial: u64) -> u64 {
    mix(mix(base, grid), trial)
}

/// Deterministic uniform and Gaussian draws for one `(seed, tag)` stream.
pub struct Stream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl Stream {
    pub fn new(seed: u64, tag: u64) -> Self {
        let mut state = mix(seed, tag);
        let mut key = [0u8; 32];
        for chunk in key.chunks_mut(8) {
            let word = splitmix64(state);
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        Self {
            rng: ChaCha8Rng::from_seed(key),
            spare: None,
        }
    }

    /// Uniform on `(0, 1]`.
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }

    /// Uniform integer in `0..bound` by rejection on the top bits.
    pub fn below(&mut self, bound: usize) -> usize {
        assert!(bound > 0);
        let bound = bound as u64;
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let v = self.rng.next_u64();
            if v < zone {
                return (v % bound) as usize;
            }
        }
    }

    /// `k` distinct indices of `0..len`, via a partial Fisher-Yates shuffle.
    pub fn sample_indices(&mut self, len: usize, k: usize) -> Vec<usize> {
        assert!(k <= len);
        let mut idx: Vec<usize> = (0..len).collect();
        for t in 0..k {
            let s = t + self.below(len - t);
            idx.swap(t, s);
        }
        idx.truncate(k);
        idx
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub m: usize,
    pub l: usize,
    pub n: usize,
    pub theta: f64,
    pub seed: u64,
    #[serde(default)]
    pub snr_db: Option<f64>,
}

impl GenConfig {
    pub fn new(m: usize, l: usize, n: usize, theta: f64, seed: u64) -> Self {
        Self {
            m,
            l,
            n,
            theta,
            seed,
            snr_db: None,
        }
    }

    pub fn with_snr(mut self, snr_db: f64) -> Self {
        self.snr_db = Some(snr_db);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.l == 0 || self.n == 0 {
            return Err(Error::Config("m, l and n must be positive".into()));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::Config(format!("theta = {} must lie in (0, 1)", self.theta)));
        }
        if let Some(s) = self.snr_db {
            if s.is_nan() {
                return Err(Error::Config("snr_db is NaN".into()));
            }
        }
        Ok(())
    }
}

/// `m x l` dictionary with i.i.d. `N(0, 1/m)` entries.
pub fn gen_dictionary(cfg: &GenConfig) -> Result<Dictionary> {
    cfg.validate()?;
    random_dictionary(cfg.m, cfg.l, cfg.seed, TAG_DICTIONARY)
}

/// `N(0, 1/m)` entries drawn column by column from the `(seed, tag)` stream.
pub fn random_dictionary(m: usize, l: usize, seed: u64, tag: u64) -> Result<Dictionary> {
    if m == 0 || l == 0 {
        return Err(Error::Config(format!("dictionary shape {m}x{l}")));
    }
    let mut s = Stream::new(seed, tag);
    let sd = 1.0 / (m as f64).sqrt();
    let mut atoms = Matrix::zeros(m, l);
    for j in 0..l {
        for i in 0..m {
            atoms[(i, j)] = sd * s.gaussian();
        }
    }
    Dictionary::new(atoms)
}

/// `l x n` Bernoulli-Gaussian coefficients; every drawn gate is kept in the pattern.
pub fn gen_coeffs(cfg: &GenConfig) -> Result<SparseCoeffs> {
    cfg.validate()?;
    let mut gates = Stream::new(cfg.seed, TAG_SUPPORT);
    let mut values = Stream::new(cfg.seed, TAG_VALUES);
    let mut x = Matrix::zeros(cfg.l, cfg.n);
    let mut entries = Vec::new();
    for j in 0..cfg.n {
        for i in 0..cfg.l {
            if gates.uniform() <= cfg.theta {
                x[(i, j)] = values.gaussian();
                entries.push((i, j));
            }
        }
    }
    let pattern = SupportPattern::from_entries(cfg.l, cfg.n, entries)?;
    SparseCoeffs::new(x, pattern)
}

/// Adds i.i.d. Gaussian noise scaled so that `10 log10(|signal|^2 / |noise|^2) = snr_db`.
pub fn add_noise(signal: &Matrix, snr_db: f64, seed: u64) -> Result<Matrix> {
    if snr_db == f64::INFINITY {
        return Ok(signal.clone());
    }
    let power = signal.norm_squared();
    if power == 0.0 {
        return Err(Error::DegenerateSignal);
    }
    let mut s = Stream::new(seed, TAG_NOISE);
    let mut w = Matrix::zeros(signal.nrows(), signal.ncols());
    for j in 0..w.ncols() {
        for i in 0..w.nrows() {
            w[(i, j)] = s.gaussian();
        }
    }
    let scale = (power / w.norm_squared() / 10f64.powf(snr_db / 10.0)).sqrt();
    Ok(signal + w * scale)
}

pub fn measured_snr_db(signal: &Matrix, noisy: &Matrix) -> f64 {
    10.0 * (signal.norm_squared() / (noisy - signal).norm_squared()).log10()
}

/// `Y = D0 X0`, plus noise when `snr_db` is set and finite.
pub fn gen_training_set(cfg: &GenConfig) -> Result<TrainingSet> {
    cfg.validate()?;
    let d0 = gen_dictionary(cfg)?;
    let x0 = gen_coeffs(cfg)?;
    let clean = d0.atoms() * x0.values();
    let snr_db = cfg.snr_db.filter(|s| s.is_finite());
    let samples = match snr_db {
        Some(snr) => add_noise(&clean, snr, cfg.seed)?,
        None => clean,
    };
    Ok(TrainingSet {
        samples,
        ground_truth: Some((d0, x0)),
        seed: cfg.seed,
        theta: cfg.theta,
        snr_db,
    })
}

/// Moves `floor(r |Omega|)` entries of the global support to uniformly drawn
/// positions outside it.
pub fn corrupt_pattern(pattern: &SupportPattern, r: f64, seed: u64) -> Result<SupportPattern> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::Config(format!("corruption fraction {r} outside [0, 1]")));
    }
    let size = pattern.size();
    // The epsilon absorbs representation error such as 0.29 * 100 = 28.999...
    let moved = ((r * size as f64) + 1e-9).floor() as usize;
    let (l, n) = (pattern.l(), pattern.n());
    let available = l * n - size;
    if moved > available {
        return Err(Error::InsufficientComplement {
            needed: moved,
            available,
        });
    }
    if moved == 0 {
        return Ok(pattern.clone());
    }
    let support: Vec<(usize, usize)> = pattern.entries().collect();
    let outside: Vec<(usize, usize)> = (0..l)
        .flat_map(|i| pattern.complement(i).into_iter().map(move |j| (i, j)))
        .collect();
    let mut s = Stream::new(seed, TAG_CORRUPT);
    let mut drop = vec![false; support.len()];
    for k in s.sample_indices(support.len(), moved) {
        drop[k] = true;
    }
    let added = s.sample_indices(outside.len(), moved);
    let kept = support.iter().zip(&drop).filter(|(_, &d)| !d).map(|(&e, _)| e);
    SupportPattern::from_entries(l, n, kept.chain(added.into_iter().map(|k| outside[k])))
}

#[derive(Serialize)]
struct Sidecar<'a> {
    m: usize,
    l: Option<usize>,
    n: usize,
    theta: f64,
    seed: u64,
    snr_db: Option<f64>,
    files: Vec<&'a str>,
}

/// Writes `<prefix>.y.txt` and a `<prefix>.json` sidecar, plus
/// `<prefix>.d0.txt`, `<prefix>.x0.txt` and `<prefix>.pattern.json` when the
/// ground truth is known.
pub fn export_training_set(set: &TrainingSet, prefix: &Path) -> Result<()> {
    let path = |suffix: &str| {
        let mut p = prefix.as_os_str().to_owned();
        p.push(suffix);
        std::path::PathBuf::from(p)
    };
    write_matrix(BufWriter::new(File::create(path(".y.txt"))?), &set.samples)?;
    let mut files = vec!["y.txt"];
    if let Some((d0, x0)) = &set.ground_truth {
        write_matrix(BufWriter::new(File::create(path(".d0.txt"))?), d0.atoms())?;
        write_matrix(BufWriter::new(File::create(path(".x0.txt"))?), x0.values())?;
        serde_json::to_writer(BufWriter::new(File::create(path(".pattern.json"))?), x0.pattern())?;
        files.extend(["d0.txt", "x0.txt", "pattern.json"]);
    }
    let sidecar = Sidecar {
        m: set.samples.nrows(),
        l: set.ground_truth.as_ref().map(|(d, _)| d.l()),
        n: set.samples.ncols(),
        theta: set.theta,
        seed: set.seed,
        snr_db: set.snr_db,
        files,
    };
    let mut w = BufWriter::new(File::create(path(".json"))?);
    serde_json::to_writer_pretty(&mut w, &sidecar)?;
    writeln!(w)?;
    Ok(())
}
