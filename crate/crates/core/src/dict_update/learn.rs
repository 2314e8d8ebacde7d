//! Alternating sparse coding and dictionary update.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::recovery_error;
use crate::model::{Dictionary, SparseCoeffs};
use crate::numerics::{check_finite, Matrix};
use crate::sparse_coding::{omp_encode_all, OmpConfig};
use crate::synth::{random_dictionary, TAG_INIT};

use super::{blotless_block_update, ksvd_update, mod_update, normalize_pair, objective, MethodKind, UpdateMethod};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    pub method: UpdateMethod,
    pub omp: OmpConfig,
    pub n_iterations: usize,
    /// Number of atoms `l`.
    pub atoms: usize,
    /// Seeds the random initial dictionary.
    pub seed: u64,
}

impl LearnConfig {
    pub fn validate(&self, m: usize) -> Result<()> {
        if self.n_iterations == 0 {
            return Err(Error::Config("n_iterations must be at least 1".into()));
        }
        if self.atoms == 0 {
            return Err(Error::Config("the dictionary needs at least one atom".into()));
        }
        self.omp.validate(self.atoms)?;
        self.method.validate(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `|Y - D X|_F` of the iterate kept after this iteration.
    pub objective: f64,
    pub r_err: Option<f64>,
    pub seconds: f64,
    /// Message of a failed update; the previous dictionary was kept.
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct LearnResult {
    /// Best iterate by objective.
    pub dictionary: Dictionary,
    pub coeffs: SparseCoeffs,
    /// Final iterate, which may differ from the best one.
    pub last_dictionary: Dictionary,
    pub history: Vec<IterationRecord>,
}

pub fn learn(y: &Matrix, cfg: &LearnConfig) -> Result<LearnResult> {
    learn_tracked(y, cfg, None)
}

/// Like [`learn`], also recording the recovery error against `reference`
/// after every iteration.
pub fn learn_tracked(y: &Matrix, cfg: &LearnConfig, reference: Option<&Dictionary>) -> Result<LearnResult> {
    let m = y.nrows();
    cfg.validate(m)?;
    check_finite(y)?;
    if let Some(r) = reference {
        if r.m() != m || r.l() != cfg.atoms {
            return Err(Error::dims(
                "learn",
                format!("reference {}x{} vs {}x{}", r.m(), r.l(), m, cfg.atoms),
            ));
        }
    }
    let mut d = random_dictionary(m, cfg.atoms, cfg.seed, TAG_INIT)?.normalize().0;
    let mut best: Option<(f64, Dictionary, SparseCoeffs)> = None;
    let mut history = Vec::with_capacity(cfg.n_iterations);

    let mut current = f64::NAN;
    for iteration in 1..=cfg.n_iterations {
        let t0 = Instant::now();
        let outcome = omp_encode_all(&d, y, &cfg.omp).and_then(|x| update_dictionary(y, &d, &x, &cfg.method));
        let failure = match outcome {
            Ok((nd, nx)) => {
                current = objective(y, nd.atoms(), &nx);
                if best.as_ref().is_none_or(|b| current < b.0) {
                    best = Some((current, nd.clone(), nx));
                }
                d = nd;
                None
            }
            Err(e) => Some(e.to_string()),
        };
        let seconds = t0.elapsed().as_secs_f64();
        let r_err = match reference {
            Some(r) => Some(recovery_error(&d, r)?.r_err),
            None => None,
        };
        history.push(IterationRecord {
            iteration,
            objective: current,
            r_err,
            seconds,
            failure,
        });
    }

    let last = d.clone();
    let (d, x) = match best {
        Some((_, d, x)) => (d, x),
        None => {
            let x = omp_encode_all(&d, y, &cfg.omp)?;
            (d, x)
        }
    };
    Ok(LearnResult {
        dictionary: d,
        coeffs: x,
        last_dictionary: last,
        history,
    })
}

/// Applies one dictionary update and returns normalized atoms with matching
/// coefficients.
pub fn update_dictionary(
    y: &Matrix,
    d: &Dictionary,
    x: &SparseCoeffs,
    method: &UpdateMethod,
) -> Result<(Dictionary, SparseCoeffs)> {
    match method.kind {
        MethodKind::Mod => {
            let nd = mod_update(y, x)?;
            let mut atoms = nd.into_atoms();
            let mut x = x.clone();
            normalize_pair(&mut atoms, &mut x);
            Ok((Dictionary::new(atoms)?, x))
        }
        MethodKind::Ksvd => {
            let (nd, nx) = ksvd_update(y, d, x)?;
            let mut atoms = nd.into_atoms();
            let mut nx = nx;
            normalize_pair(&mut atoms, &mut nx);
            Ok((Dictionary::new(atoms)?, nx))
        }
        _ => blotless_block_update(y, d, x, method),
    }
}

/// Writes `iteration,objective,r_err,seconds`; `r_err` is empty when no
/// reference was tracked.
pub fn write_history_csv<W: Write>(out: W, history: &[IterationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "objective", "r_err", "seconds"])?;
    for r in history {
        w.write_record([
            r.iteration.to_string(),
            format!("{:e}", r.objective),
            r.r_err.map(|v| format!("{v:e}")).unwrap_or_default(),
            format!("{:.6}", r.seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}
