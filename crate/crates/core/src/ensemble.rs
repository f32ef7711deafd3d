// SPDX-License-Identifier: Apache-2.0

//! Disorder sweeps: per-realization observables, summary statistics,
//! checkpoints and tabular output.
//!
//! Every realization has its own seed, derived from the master seed, the
//! model index, the W index and the realization index, so a single draw can be
//! replayed on its own. Results are reduced in realization order, which makes
//! the output independent of the number of worker threads.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    default_exclusion, excited_state_variance, ground_state_variance, non_polaritonic,
    tail_amplitude, ShapeProfile, TailStats, SHAPE_WINDOW,
};
use crate::dynamics::{
    centre_site, propagate, stationary_tail_stats, stationary_variance, TraceAverage,
    STATIONARY_WINDOW,
};
use crate::error::{Error, Result};
use crate::model::{sample_disorder, ChainSpec, ModelKind, OpenMode, OpenSystemConfig, RNG_ID};
use crate::scalar::Real;
use crate::spectral::{
    eig_chain, energy_gap, project_open, project_rows, ChainSpectrum, HermitianSpectrum, Vectors,
};
use crate::transport::{integrated_transmission, steady_current, transfer_time, CURRENT_FLOOR};

/// Mean, spread and extremes of a sample, with the same for its logarithm.
///
/// Stored as running moments so that partial summaries merge exactly
/// (up to rounding) in any grouping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary<T> {
    pub count: usize,
    pub mean: T,
    m2: T,
    pub min: T,
    pub max: T,
    /// Values entering the log statistics (the positive ones).
    pub log_count: usize,
    pub mean_log: T,
    m2_log: T,
    /// Non-positive values left out of the log statistics.
    pub excluded: usize,
}

impl<T: Real> Default for EnsembleSummary<T> {
    fn default() -> Self {
        Self {
            count: 0,
            mean: T::zero(),
            m2: T::zero(),
            min: T::infinity(),
            max: T::neg_infinity(),
            log_count: 0,
            mean_log: T::zero(),
            m2_log: T::zero(),
            excluded: 0,
        }
    }
}

fn chan<T: Real>(na: usize, ma: T, sa: T, nb: usize, mb: T, sb: T) -> (T, T) {
    let n = na + nb;
    if n == 0 {
        return (T::zero(), T::zero());
    }
    let (fa, fb, f) = (T::of_usize(na), T::of_usize(nb), T::of_usize(n));
    let d = mb - ma;
    (ma + d * fb / f, sa + sb + d * d * fa * fb / f)
}

impl<T: Real> EnsembleSummary<T> {
    pub fn push(&mut self, x: T) {
        let (m, s) = chan(self.count, self.mean, self.m2, 1, x, T::zero());
        self.mean = m;
        self.m2 = s;
        self.count += 1;
        self.min = self.min.min(x);
        self.max = self.max.max(x);
        if x > T::zero() {
            let (m, s) = chan(
                self.log_count,
                self.mean_log,
                self.m2_log,
                1,
                x.ln(),
                T::zero(),
            );
            self.mean_log = m;
            self.m2_log = s;
            self.log_count += 1;
        } else {
            self.excluded += 1;
        }
    }

    pub fn merge(&mut self, o: &Self) {
        let (m, s) = chan(self.count, self.mean, self.m2, o.count, o.mean, o.m2);
        self.mean = m;
        self.m2 = s;
        self.count += o.count;
        self.min = self.min.min(o.min);
        self.max = self.max.max(o.max);
        let (m, s) = chan(
            self.log_count,
            self.mean_log,
            self.m2_log,
            o.log_count,
            o.mean_log,
            o.m2_log,
        );
        self.mean_log = m;
        self.m2_log = s;
        self.log_count += o.log_count;
        self.excluded += o.excluded;
    }

    /// `exp⟨ln x⟩`.
    pub fn typical(&self) -> T {
        if self.log_count == 0 {
            return T::nan();
        }
        self.mean_log.exp()
    }

    /// Population standard deviation.
    pub fn rms(&self) -> T {
        if self.count == 0 {
            return T::nan();
        }
        (self.m2 / T::of_usize(self.count)).max(T::zero()).sqrt()
    }

    pub fn rms_over_mean(&self) -> T {
        self.rms() / self.mean
    }

    pub fn rms_log(&self) -> T {
        if self.log_count == 0 {
            return T::nan();
        }
        (self.m2_log / T::of_usize(self.log_count))
            .max(T::zero())
            .sqrt()
    }

    /// `rms(ln x) / |⟨ln x⟩|`.
    pub fn rms_log_over_abs_mean_log(&self) -> T {
        self.rms_log() / self.mean_log.abs()
    }
}

/// Summary of a nonempty sample.
pub fn summarize<T: Real>(values: &[T]) -> Result<EnsembleSummary<T>> {
    if values.is_empty() {
        return Err(Error::Empty("no values to summarize".into()));
    }
    let mut s = EnsembleSummary::default();
    for &v in values {
        s.push(v);
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observable {
    /// Steady-state current from the transfer time.
    Current,
    /// Integrated transmission with leads of strength ν.
    TInt,
    /// Mean variance of the excited eigenstates (and of the ground state).
    Variance,
    /// Numeric energy gap.
    Gap,
    /// Averaged eigenfunction shape.
    Shape,
    /// Eigenstate tail amplitude.
    Tails,
    /// Wave-packet spreading from the centre site.
    Dynamics,
}

impl Observable {
    pub fn name(self) -> &'static str {
        match self {
            Self::Current => "current",
            Self::TInt => "t_int",
            Self::Variance => "variance",
            Self::Gap => "gap",
            Self::Shape => "shape",
            Self::Tails => "tails",
            Self::Dynamics => "dynamics",
        }
    }
}

/// Number of realizations per sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Realizations {
    Fixed(usize),
    /// `N_r = max(1, round(budget / N))`.
    Budget(usize),
}

impl Realizations {
    pub fn count(self, n_sites: usize) -> usize {
        match self {
            Self::Fixed(r) => r,
            Self::Budget(b) => ((b as f64 / n_sites as f64).round() as usize).max(1),
        }
    }
}

/// Pump, drain and lead rates; source and drain are the chain ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpenRates<T> {
    pub gamma_p: T,
    pub gamma_d: T,
    pub nu: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct SweepConfig<T> {
    pub models: Vec<ChainSpec<T>>,
    pub w_grid: Vec<T>,
    pub realizations: Realizations,
    pub open: OpenRates<T>,
    pub observables: Vec<Observable>,
    pub seed: u64,
    #[serde(default)]
    pub keep_raw: bool,
    #[serde(default = "default_window")]
    pub window_fraction: T,
    /// Time grid for the dynamics observable.
    #[serde(default)]
    pub times: Vec<T>,
    #[serde(default = "default_stationary")]
    pub stationary_window: (T, T),
}

fn default_window<T: Real>() -> T {
    T::lit(SHAPE_WINDOW)
}

fn default_stationary<T: Real>() -> (T, T) {
    (T::lit(STATIONARY_WINDOW.0), T::lit(STATIONARY_WINDOW.1))
}

impl<T: Real + Serialize> SweepConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() || self.w_grid.is_empty() || self.observables.is_empty() {
            return Err(Error::invalid(
                "sweep needs at least one model, one W value and one observable",
            ));
        }
        for m in &self.models {
            m.validate()?;
        }
        if self
            .w_grid
            .iter()
            .any(|w| !(*w >= T::zero()) || !w.is_finite())
        {
            return Err(Error::invalid("W grid values must be finite and >= 0"));
        }
        if self.realizations.count(1) == 0 {
            return Err(Error::invalid(
                "at least one realization per point is required",
            ));
        }
        if self.observables.contains(&Observable::TInt) && !(self.open.nu > T::zero()) {
            return Err(Error::invalid("t_int needs nu > 0"));
        }
        if self.observables.contains(&Observable::Current) && !(self.open.gamma_d > T::zero()) {
            return Err(Error::invalid("current needs gamma_d > 0"));
        }
        if self.observables.contains(&Observable::Dynamics) && self.times.is_empty() {
            return Err(Error::invalid("dynamics needs a time grid"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let js = serde_json::to_vec(self).expect("serializable config");
        hex(&Sha256::digest(&js))
    }
}

fn hex(b: &[u8]) -> String {
    b.iter().map(|x| format!("{x:02x}")).collect()
}

/// Seed of one realization: the first 8 bytes (little endian) of
/// `SHA-256(master ‖ model ‖ w_index ‖ realization)`, all as u64 LE.
pub fn realization_seed(master: u64, model: usize, w_index: usize, realization: usize) -> u64 {
    let mut h = Sha256::new();
    for v in [master, model as u64, w_index as u64, realization as u64] {
        h.update(v.to_le_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

pub const SEED_RULE: &str = "seed = u64_le(sha256(master_le ‖ model_le ‖ w_index_le ‖ realization_le)[0..8]); stream = realization";

/// Observables of one realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord<T> {
    pub seed: u64,
    pub index: u64,
    pub values: BTreeMap<String, T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub seed: u64,
    pub index: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult<T> {
    pub model: usize,
    pub w_index: usize,
    pub w: T,
    pub n_sites: usize,
    pub realizations: usize,
    /// Scalar observables: `current`, `log_current`, `tau`, `t_int`,
    /// `variance`, `ground_variance`, `gap`, `stationary_variance`.
    pub summaries: BTreeMap<String, EnsembleSummary<T>>,
    pub shape: Option<ShapeProfile<T>>,
    pub tails: Option<TailStats<T>>,
    pub dynamics: Option<DynamicsResult<T>>,
    pub exclusions: Vec<Exclusion>,
    pub raw: Option<Vec<RawRecord<T>>>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsResult<T> {
    pub times: Vec<T>,
    /// Variance of the disorder-averaged distribution.
    pub variance: Vec<T>,
    pub stationary_variance: T,
    /// Non-centre site probabilities in the stationary window.
    pub tails: TailStats<T>,
}

struct Partial<T> {
    values: BTreeMap<String, T>,
    shape: Option<ShapeProfile<T>>,
    tails: Option<TailStats<T>>,
    trace: Option<TraceAverage<T>>,
    dyn_tails: Option<TailStats<T>>,
}

fn excludable(e: &Error) -> bool {
    matches!(
        e,
        Error::ZeroWidth { .. } | Error::NoConvergence(_) | Error::PairingFailure(_)
    )
}

fn needs_full(obs: &[Observable]) -> bool {
    obs.iter().any(|o| {
        matches!(
            o,
            Observable::Variance | Observable::Shape | Observable::Tails | Observable::Dynamics
        )
    })
}

fn one_realization<T: Real>(
    cfg: &SweepConfig<T>,
    spec: &ChainSpec<T>,
    w: T,
    seed: u64,
    index: u64,
) -> Result<Partial<T>> {
    let n = spec.n_sites;
    let dis = sample_disorder(spec, w, seed, index)?;
    let open = OpenSystemConfig::edges(n, cfg.open.gamma_p, cfg.open.gamma_d, cfg.open.nu);
    let edges = [open.source_site, open.drain_site];
    let obs = &cfg.observables;
    let has = |o: Observable| obs.contains(&o);
    let transport = has(Observable::Current) || has(Observable::TInt);
    let want = if needs_full(obs) {
        Vectors::Full
    } else if transport {
        Vectors::Rows(&edges)
    } else {
        Vectors::None
    };
    let spectrum = eig_chain(spec, &dis, want)?;
    let mut values = BTreeMap::new();
    if has(Observable::Gap) {
        values.insert(
            "gap".to_string(),
            energy_gap(spectrum.eigenvalues().as_slice().expect("contiguous"))?,
        );
    }
    if transport {
        let project = |mode: OpenMode| match &spectrum {
            ChainSpectrum::Full(h) => project_open(h, &open, mode, &edges),
            ChainSpectrum::Rows(r) => match project_rows(r, &open, mode, &edges) {
                Err(e @ (Error::NoConvergence(_) | Error::PairingFailure(_))) => {
                    log::warn!("rank-one update failed ({e}); recomputing with full eigenvectors");
                    let full = eig_chain(spec, &dis, Vectors::Full)?.into_full()?;
                    project_open(&full, &open, mode, &edges)
                }
                other => other,
            },
            ChainSpectrum::Values(_) => unreachable!(),
        };
        if has(Observable::Current) {
            let p = project(OpenMode::Drain)?;
            let tau = transfer_time(&p, open.source_site, open.drain_site, open.gamma_d)?;
            let i = steady_current(tau, open.gamma_p).max(T::lit(CURRENT_FLOOR));
            values.insert("tau".to_string(), tau);
            values.insert("current".to_string(), i);
        }
        if has(Observable::TInt) {
            let p = project(OpenMode::Scattering)?;
            values.insert(
                "t_int".to_string(),
                integrated_transmission(&p, open.nu, open.source_site, open.drain_site)?,
            );
        }
    }
    let (mut shape, mut tails, mut trace, mut dyn_tails) = (None, None, None, None);
    if let ChainSpectrum::Full(h) = &spectrum {
        let chain = chain_states(spec, h);
        if has(Observable::Variance) {
            let sub = restrict(h, n, &chain);
            values.insert("variance".to_string(), excited_state_variance(&sub, false)?);
            values.insert(
                "ground_variance".to_string(),
                ground_state_variance(&restrict(h, n, &[0])),
            );
        }
        if has(Observable::Shape) {
            let mut p = ShapeProfile::new(n, cfg.window_fraction);
            p.add_states(h.eigenvectors.view(), n, chain.iter().copied())?;
            shape = Some(p);
        }
        if has(Observable::Tails) {
            let sub = restrict(h, n, &chain);
            tails = Some(tail_amplitude(
                &sub,
                default_exclusion(n, spec.omega, w),
                false,
            )?);
        }
        if has(Observable::Dynamics) {
            let tr = propagate(h, centre_site(n), &cfg.times)?;
            let mut acc = TraceAverage::new(&cfg.times, h.eigenvectors.nrows());
            acc.add(&tr)?;
            dyn_tails = Some(stationary_tail_stats(
                &tr,
                centre_site(n),
                cfg.stationary_window,
            ));
            trace = Some(acc);
        }
    }
    Ok(Partial {
        values,
        shape,
        tails,
        trace,
        dyn_tails,
    })
}

/// Indices of the excited states: everything but the lowest state for the
/// long-range chain with γ > 0, everything but the two polaritons for the cavity, all
/// states for the Anderson chain.
fn chain_states<T: Real>(spec: &ChainSpec<T>, h: &HermitianSpectrum<T>) -> Vec<usize> {
    match spec.kind {
        ModelKind::Anderson => (0..h.len()).collect(),
        ModelKind::LongRange if spec.gamma > T::zero() => (1..h.len()).collect(),
        ModelKind::LongRange => (0..h.len()).collect(),
        ModelKind::Cavity => non_polaritonic(h),
    }
}

/// Selected eigenvectors on the first `n` rows, renormalized.
fn restrict<T: Real>(h: &HermitianSpectrum<T>, n: usize, cols: &[usize]) -> HermitianSpectrum<T> {
    let mut v = h.eigenvectors.select(ndarray::Axis(1), cols);
    if v.nrows() > n {
        v = v.slice(ndarray::s![..n, ..]).to_owned();
        for mut c in v.columns_mut() {
            let s = c.iter().map(|x| *x * *x).sum::<T>().sqrt();
            if s > T::zero() {
                c.mapv_inplace(|x| x / s);
            }
        }
    }
    let e = cols.iter().map(|&k| h.eigenvalues[k]).collect();
    HermitianSpectrum {
        eigenvalues: e,
        eigenvectors: v,
    }
}

/// Runs one sweep point.
pub fn run_point<T: Real + Serialize>(
    cfg: &SweepConfig<T>,
    model: usize,
    w_index: usize,
) -> Result<PointResult<T>> {
    let start = Instant::now();
    let spec = &cfg.models[model];
    let w = cfg.w_grid[w_index];
    let nr = cfg.realizations.count(spec.n_sites);
    let jobs: Vec<(u64, u64)> = (0..nr)
        .map(|r| (realization_seed(cfg.seed, model, w_index, r), r as u64))
        .collect();
    let results: Vec<Result<Partial<T>>> = jobs
        .par_iter()
        .map(|&(seed, index)| one_realization(cfg, spec, w, seed, index))
        .collect();

    let mut summaries: BTreeMap<String, EnsembleSummary<T>> = BTreeMap::new();
    let mut shape: Option<ShapeProfile<T>> = None;
    let mut tails: Option<TailStats<T>> = None;
    let mut trace: Option<TraceAverage<T>> = None;
    let mut dyn_tails: Option<TailStats<T>> = None;
    let mut exclusions = Vec::new();
    let mut raw = cfg.keep_raw.then(Vec::new);
    for (&(seed, index), res) in jobs.iter().zip(results) {
        let p = match res {
            Ok(p) => p,
            Err(e) if excludable(&e) => {
                log::warn!("excluded realization seed={seed} index={index} W={w}: {e}");
                exclusions.push(Exclusion {
                    seed,
                    index,
                    reason: e.to_string(),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        for (k, &v) in &p.values {
            summaries.entry(k.clone()).or_default().push(v);
        }
        if let Some(s) = p.shape {
            match &mut shape {
                Some(acc) => acc.merge(&s)?,
                None => shape = Some(s),
            }
        }
        if let Some(t) = p.tails {
            tails.get_or_insert_with(TailStats::default).merge(&t);
        }
        if let Some(t) = p.trace {
            match &mut trace {
                Some(acc) => acc.merge(&t)?,
                None => trace = Some(t),
            }
        }
        if let Some(t) = p.dyn_tails {
            dyn_tails.get_or_insert_with(TailStats::default).merge(&t);
        }
        if let Some(r) = &mut raw {
            r.push(RawRecord {
                seed,
                index,
                values: p.values,
            });
        }
    }
    let dynamics = match trace {
        Some(tr) => {
            let variance = tr.variance();
            let sv = stationary_variance(&tr.times, &variance, cfg.stationary_window)?;
            Some(DynamicsResult {
                times: tr.times,
                variance,
                stationary_variance: sv,
                tails: dyn_tails.unwrap_or_default(),
            })
        }
        None => None,
    };
    Ok(PointResult {
        model,
        w_index,
        w,
        n_sites: spec.n_sites,
        realizations: nr,
        summaries,
        shape,
        tails,
        dynamics,
        exclusions,
        raw,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint<T> {
    pub config_hash: String,
    pub points: Vec<PointResult<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct Manifest<T> {
    pub config: SweepConfig<T>,
    pub config_hash: String,
    pub master_seed: u64,
    pub seed_rule: String,
    pub rng: String,
    pub version: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    /// `(model, w_index, seconds)` per point.
    pub point_seconds: Vec<(usize, usize, f64)>,
    pub exclusions: usize,
    #[serde(default)]
    pub extra: BTreeMap<String, String>,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Where and how a sweep persists its progress.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub resume: bool,
}

pub const CHECKPOINT_FILE: &str = "checkpoint.json";

fn load_checkpoint<T: Real + for<'de> Deserialize<'de>>(
    dir: &Path,
    hash: &str,
) -> Result<Vec<PointResult<T>>> {
    let path = dir.join(CHECKPOINT_FILE);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let cp: Checkpoint<T> = serde_json::from_slice(&fs::read(&path)?)?;
    if cp.config_hash != hash {
        return Err(Error::Checkpoint(format!(
            "{} was written for config {} but the current config hashes to {hash}",
            path.display(),
            cp.config_hash
        )));
    }
    Ok(cp.points)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Runs every (model, W) point in order, calling `on_point` after each one.
/// With an output directory the completed points are checkpointed after each
/// point; with `resume` the points already in the checkpoint are reused.
pub fn run_sweep<T, F>(
    cfg: &SweepConfig<T>,
    opts: &RunOptions,
    mut on_point: F,
) -> Result<Vec<PointResult<T>>>
where
    T: Real + Serialize + for<'de> Deserialize<'de>,
    F: FnMut(&PointResult<T>),
{
    cfg.validate()?;
    let hash = cfg.hash();
    let mut done: Vec<PointResult<T>> = Vec::new();
    if let Some(dir) = &opts.out_dir {
        fs::create_dir_all(dir)?;
        if opts.resume {
            done = load_checkpoint(dir, &hash)?;
        } else if dir.join(CHECKPOINT_FILE).exists() {
            fs::remove_file(dir.join(CHECKPOINT_FILE))?;
        }
    }
    let mut out = Vec::new();
    for m in 0..cfg.models.len() {
        for wi in 0..cfg.w_grid.len() {
            let p = match done.iter().position(|p| p.model == m && p.w_index == wi) {
                Some(i) => done.swap_remove(i),
                None => run_point(cfg, m, wi)?,
            };
            on_point(&p);
            out.push(p);
            if let Some(dir) = &opts.out_dir {
                let cp = Checkpoint {
                    config_hash: hash.clone(),
                    points: out.clone(),
                };
                write_atomic(&dir.join(CHECKPOINT_FILE), &serde_json::to_vec(&cp)?)?;
            }
        }
    }
    Ok(out)
}

/// Manifest of a finished sweep.
pub fn manifest<T: Real + Serialize>(
    cfg: &SweepConfig<T>,
    points: &[PointResult<T>],
    started_unix: f64,
) -> Manifest<T> {
    Manifest {
        config: cfg.clone(),
        config_hash: cfg.hash(),
        master_seed: cfg.seed,
        seed_rule: SEED_RULE.to_string(),
        rng: RNG_ID.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix,
        finished_unix: unix_now(),
        point_seconds: points
            .iter()
            .map(|p| (p.model, p.w_index, p.seconds))
            .collect(),
        exclusions: points.iter().map(|p| p.exclusions.len()).sum(),
        extra: BTreeMap::new(),
    }
}

/// Formats with 17 significant digits.
pub fn fmt17<T: Real>(x: T) -> String {
    format!("{:.16e}", x.as_f64())
}

pub const SUMMARY_HEADER: &str =
    "model,n,omega,gamma,g,w,mean,typical,max,min,rms,rms_over_mean,rms_log_over_abs_mean_log,count,excluded";

fn model_name(k: ModelKind) -> &'static str {
    match k {
        ModelKind::Anderson => "anderson",
        ModelKind::LongRange => "long-range",
        ModelKind::Cavity => "cavity",
    }
}

/// One CSV row per point for the scalar observable `key`.
pub fn summary_csv<T: Real>(cfg: &SweepConfig<T>, points: &[PointResult<T>], key: &str) -> String {
    let mut s = String::new();
    s.push_str(SUMMARY_HEADER);
    s.push('\n');
    for p in points {
        let Some(sum) = p.summaries.get(key) else {
            continue;
        };
        let m = &cfg.models[p.model];
        let g = m.cavity.map(|c| c.g).unwrap_or(T::zero());
        let excluded = p.exclusions.len() + sum.excluded;
        let row = [
            model_name(m.kind).to_string(),
            m.n_sites.to_string(),
            fmt17(m.omega),
            fmt17(m.gamma),
            fmt17(g),
            fmt17(p.w),
            fmt17(sum.mean),
            fmt17(sum.typical()),
            fmt17(sum.max),
            fmt17(sum.min),
            fmt17(sum.rms()),
            fmt17(sum.rms_over_mean()),
            fmt17(sum.rms_log_over_abs_mean_log()),
            sum.count.to_string(),
            excluded.to_string(),
        ];
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// Writes one CSV per scalar observable plus the profile, trace and tail
/// files. Each file starts with `preamble` when given.
pub fn write_outputs<T: Real>(
    dir: &Path,
    cfg: &SweepConfig<T>,
    points: &[PointResult<T>],
    preamble: Option<&str>,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let pre = preamble.map(|p| format!("{p}\n")).unwrap_or_default();
    let mut written = Vec::new();
    let keys: std::collections::BTreeSet<&String> =
        points.iter().flat_map(|p| p.summaries.keys()).collect();
    for k in keys {
        let path = dir.join(format!("{k}.csv"));
        write_atomic(
            &path,
            format!("{pre}{}", summary_csv(cfg, points, k)).as_bytes(),
        )?;
        written.push(path);
    }
    for p in points {
        let tag = format!("m{}_w{}", p.model, p.w_index);
        if let Some(sh) = &p.shape {
            let path = dir.join(format!("shape_{tag}.csv"));
            let mut f = fs::File::create(&path)?;
            write!(f, "{pre}")?;
            writeln!(f, "k,probability")?;
            for (k, v) in sh.points() {
                writeln!(f, "{k},{}", fmt17(v))?;
            }
            written.push(path);
        }
        if let Some(d) = &p.dynamics {
            let path = dir.join(format!("dynamics_{tag}.csv"));
            let mut f = fs::File::create(&path)?;
            write!(f, "{pre}")?;
            writeln!(f, "t,variance")?;
            for (t, v) in d.times.iter().zip(&d.variance) {
                writeln!(f, "{},{}", fmt17(*t), fmt17(*v))?;
            }
            written.push(path);
        }
    }
    let tails: Vec<&PointResult<T>> = points
        .iter()
        .filter(|p| p.tails.is_some() || p.dynamics.is_some())
        .collect();
    if !tails.is_empty() {
        let path = dir.join("tails.csv");
        let mut f = fs::File::create(&path)?;
        write!(f, "{pre}")?;
        writeln!(
            f,
            "model,n,w,eig_average,eig_typical,dyn_average,dyn_typical,stationary_variance"
        )?;
        for p in tails {
            let e = p.tails.unwrap_or_default();
            let (da, dt, sv) = match &p.dynamics {
                Some(d) => (
                    fmt17(d.tails.average()),
                    fmt17(d.tails.typical()),
                    fmt17(d.stationary_variance),
                ),
                None => (String::new(), String::new(), String::new()),
            };
            let (ea, et) = if p.tails.is_some() {
                (fmt17(e.average()), fmt17(e.typical()))
            } else {
                (String::new(), String::new())
            };
            writeln!(
                f,
                "{},{},{},{ea},{et},{da},{dt},{sv}",
                p.model,
                p.n_sites,
                fmt17(p.w)
            )?;
        }
        written.push(path);
    }
    Ok(written)
}

/// Pretty JSON, written atomically.
pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    write_atomic(path, &serde_json::to_vec_pretty(value)?)
}

/// Log-spaced grid of `count` points from `start` to `stop` inclusive.
pub fn log_grid(start: f64, stop: f64, count: usize) -> Result<Vec<f64>> {
    if !(start > 0.0 && stop > 0.0) || count == 0 {
        return Err(Error::invalid(
            "log grid needs positive bounds and count >= 1",
        ));
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    let (a, b) = (start.ln(), stop.ln());
    Ok((0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn two_point_means() {
        let s = summarize(&[E, E.powi(3)]).unwrap();
        assert!((s.typical() - E * E).abs() < 1e-12);
        assert!((s.mean - (E + E.powi(3)) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn singleton_and_pair() {
        let s = summarize(&[4.0f64]).unwrap();
        assert_eq!(
            (s.mean, s.typical(), s.max, s.min, s.rms()),
            (4.0, 4.0, 4.0, 4.0, 0.0)
        );
        let s = summarize(&[1.0f64, 100.0]).unwrap();
        assert!((s.mean - 50.5).abs() < 1e-12);
        assert!((s.typical() - 10.0).abs() < 1e-12);
        assert!((s.rms_over_mean() - 0.980).abs() < 1e-3);
    }

    #[test]
    fn nonpositive_values_are_counted() {
        let s = summarize(&[0.0f64, -1.0, 2.0]).unwrap();
        assert_eq!(s.excluded, 2);
        assert_eq!(s.log_count, 1);
        assert!(summarize::<f64>(&[]).is_err());
    }

    #[test]
    fn merge_matches_whole() {
        let v: Vec<f64> = (1..50)
            .map(|i| (i as f64 * 0.37).sin().abs() + 0.01)
            .collect();
        let whole = summarize(&v).unwrap();
        let mut a = summarize(&v[..7]).unwrap();
        let mut b = summarize(&v[7..30]).unwrap();
        b.merge(&summarize(&v[30..]).unwrap());
        a.merge(&b);
        for (x, y) in [
            (a.mean, whole.mean),
            (a.rms(), whole.rms()),
            (a.typical(), whole.typical()),
            (a.rms_log(), whole.rms_log()),
        ] {
            assert!((x - y).abs() <= 1e-12 * y.abs());
        }
        assert!(whole.typical() <= whole.mean);
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a = realization_seed(1, 0, 0, 0);
        assert_eq!(a, realization_seed(1, 0, 0, 0));
        assert_ne!(a, realization_seed(1, 0, 0, 1));
        assert_ne!(a, realization_seed(1, 0, 1, 0));
        assert_ne!(a, realization_seed(1, 1, 0, 0));
        assert_ne!(a, realization_seed(2, 0, 0, 0));
    }

    #[test]
    fn budget_rule() {
        assert_eq!(Realizations::Budget(1_000_000).count(10_000), 100);
        assert_eq!(Realizations::Budget(1_000_000).count(3_000_000), 1);
        assert_eq!(Realizations::Fixed(7).count(123), 7);
    }

    #[test]
    fn grid() {
        let g = log_grid(1e-2, 1e6, 40).unwrap();
        assert_eq!(g.len(), 40);
        assert!((g[0] - 1e-2).abs() < 1e-15 && (g[39] - 1e6).abs() < 1e-6);
    }
}
