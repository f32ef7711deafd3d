// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write as _;
use std::time::Instant;

use lrchain::analysis::{cavity_longrange_overlap, gap_analytic, thresholds as threshold_set};
use lrchain::dynamics::default_times;
use lrchain::ensemble::{
    fmt17, manifest, realization_seed, run_sweep, write_json, write_outputs, Manifest, Observable,
    OpenRates, PointResult, RunOptions, SweepConfig, SEED_RULE,
};
use lrchain::model::{
    build_hamiltonian, effective_long_range_coupling, sample_disorder, ChainSpec, ModelKind,
    OpenSystemConfig, RNG_ID,
};
use lrchain::spectral::{eig_chain, project_open, Vectors};
use lrchain::transport::{lindblad_steady_current, steady_current, transfer_time};
use lrchain::{Error, OpenMode};
use serde::Serialize;

use crate::settings::{model_name, Model, Resolved, Settings};
use crate::ConfigError;

pub enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::Checkpoint(_) => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

pub struct Context {
    pub settings: Settings,
    pub resume: bool,
    pub argv: Vec<String>,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    argv: &'a [String],
    resolved: &'a Resolved,
    rng: &'static str,
    seed_rule: &'static str,
    version: &'static str,
    started_unix: f64,
    finished_unix: f64,
    wall_seconds: f64,
    sweep: Option<Manifest<f64>>,
}

fn unix_now() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

struct Run<'a> {
    ctx: &'a Context,
    r: Resolved,
    command: &'a str,
    started: f64,
    clock: Instant,
}

impl<'a> Run<'a> {
    fn new(
        ctx: &'a Context,
        command: &'a str,
        default_n: usize,
        default_w: &str,
        default_realizations: usize,
    ) -> Result<Self, Failure> {
        let r = Resolved::from_settings(&ctx.settings, default_n, default_w, default_realizations)?;
        if let Some(t) = r.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build_global()
                .map_err(|e| Failure::Runtime(format!("thread pool: {e}")))?;
        }
        std::fs::create_dir_all(&r.out_dir)?;
        Ok(Run {
            ctx,
            r,
            command,
            started: unix_now(),
            clock: Instant::now(),
        })
    }

    fn finish(&self, sweep: Option<Manifest<f64>>) -> Outcome {
        let m = RunManifest {
            command: self.command,
            argv: &self.ctx.argv,
            resolved: &self.r,
            rng: RNG_ID,
            seed_rule: SEED_RULE,
            version: env!("CARGO_PKG_VERSION"),
            started_unix: self.started,
            finished_unix: unix_now(),
            wall_seconds: self.clock.elapsed().as_secs_f64(),
            sweep,
        };
        write_json(&self.r.out_dir.join("manifest.json"), &m)?;
        eprintln!("wrote {}", self.r.out_dir.display());
        Ok(())
    }

    fn write_csv(&self, name: &str, body: &str) -> Outcome {
        let text = format!("{}\n{body}", self.r.units.header());
        std::fs::write(self.r.out_dir.join(name), text)?;
        Ok(())
    }

    fn sweep(
        &self,
        models: Vec<ChainSpec<f64>>,
        observables: Vec<Observable>,
        times: Vec<f64>,
    ) -> Result<(SweepConfig<f64>, Vec<PointResult<f64>>), Failure> {
        let r = &self.r;
        let cfg = SweepConfig {
            models,
            w_grid: r.w.clone(),
            realizations: r.realizations,
            open: OpenRates {
                gamma_p: r.gamma_p,
                gamma_d: r.gamma_d,
                nu: r.nu,
            },
            observables,
            seed: r.seed,
            keep_raw: false,
            window_fraction: r.window_fraction,
            times,
            stationary_window: lrchain::dynamics::STATIONARY_WINDOW,
        };
        let total = cfg.models.len() * cfg.w_grid.len();
        let mut k = 0;
        let opts = RunOptions {
            out_dir: Some(r.out_dir.clone()),
            resume: self.ctx.resume,
        };
        let points = run_sweep(&cfg, &opts, |p| {
            k += 1;
            let m = &cfg.models[p.model];
            eprintln!(
                "[{k}/{total}] {} N={} W={:.4e}: {} realizations, {} excluded, {:.2}s",
                model_name(m.kind),
                m.n_sites,
                p.w,
                p.realizations,
                p.exclusions.len(),
                p.seconds
            );
        })?;
        write_outputs(&r.out_dir, &cfg, &points, Some(r.units.header()))?;
        Ok((cfg, points))
    }

    fn finish_sweep(&self, cfg: &SweepConfig<f64>, points: &[PointResult<f64>]) -> Outcome {
        self.finish(Some(manifest(cfg, points, self.started)))
    }
}

fn print_summary(cfg: &SweepConfig<f64>, points: &[PointResult<f64>], key: &str, label: &str) {
    println!("model,n,w,{label}_typical,{label}_mean,{label}_min,{label}_max");
    for p in points {
        if let Some(s) = p.summaries.get(key) {
            let m = &cfg.models[p.model];
            println!(
                "{},{},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e}",
                model_name(m.kind),
                m.n_sites,
                p.w,
                s.typical(),
                s.mean,
                s.min,
                s.max
            );
        }
    }
}

/// The cavity model runs together with its long-range counterpart.
fn paired(r: &Resolved) -> Vec<ChainSpec<f64>> {
    let mut out = r.specs();
    if r.model == Model::Cavity {
        for i in 0..r.n.len() {
            let g = r.g.as_ref().expect("validated")[i];
            out.push(ChainSpec::long_range(
                r.n[i],
                r.omega,
                effective_long_range_coupling(g, r.n[i]),
            ));
        }
    }
    out
}

pub fn current(ctx: &Context) -> Outcome {
    let run = Run::new(ctx, "current", 100, "1e-2:1e6:40", 10)?;
    let (cfg, points) = run.sweep(paired(&run.r), vec![Observable::Current], Vec::new())?;
    print_summary(&cfg, &points, "current", "current");
    run.finish_sweep(&cfg, &points)
}

pub fn transmission(ctx: &Context) -> Outcome {
    let run = Run::new(ctx, "transmission", 100, "1e-2:1e6:40", 10)?;
    let (cfg, points) = run.sweep(paired(&run.r), vec![Observable::TInt], Vec::new())?;
    print_summary(&cfg, &points, "t_int", "t_int");
    run.finish_sweep(&cfg, &points)
}

pub fn shape(ctx: &Context) -> Outcome {
    let run = Run::new(ctx, "shape", 1000, "1e-1:1e3:5", 10)?;
    let (cfg, points) = run.sweep(run.r.specs(), vec![Observable::Shape], Vec::new())?;
    println!("model,n,w,states,log_slope,plateau");
    for p in &points {
        let m = &cfg.models[p.model];
        if let Some(s) = &p.shape {
            let h = s.half_width();
            let slope = s.log_slope(1, (h / 10).max(2)).unwrap_or(f64::NAN);
            println!(
                "{},{},{:.6e},{},{:.6e},{:.6e}",
                model_name(m.kind),
                m.n_sites,
                p.w,
                s.count,
                slope,
                s.plateau(h / 2, h)
            );
        }
    }
    run.finish_sweep(&cfg, &points)
}

pub fn tails(ctx: &Context) -> Outcome {
    let run = Run::new(ctx, "tails", 1000, "1e2:1e3:2", 10)?;
    let (cfg, points) = run.sweep(run.r.specs(), vec![Observable::Tails], Vec::new())?;
    println!("model,n,w,average,typical");
    for p in &points {
        let m = &cfg.models[p.model];
        if let Some(t) = &p.tails {
            println!(
                "{},{},{:.6e},{:.6e},{:.6e}",
                model_name(m.kind),
                m.n_sites,
                p.w,
                t.average(),
                t.typical()
            );
        }
    }
    run.finish_sweep(&cfg, &points)
}

pub fn dynamics(ctx: &Context) -> Outcome {
    let run = Run::new(ctx, "dynamics", 1001, "1:1e3:4", 1)?;
    let (cfg, points) = run.sweep(
        run.r.specs(),
        vec![Observable::Dynamics, Observable::Variance],
        default_times(),
    )?;
    println!("model,n,w,stationary_variance,eigenstate_variance");
    for p in &points {
        let m = &cfg.models[p.model];
        let ev = p
            .summaries
            .get("variance")
            .map(|s| s.mean)
            .unwrap_or(f64::NAN);
        if let Some(d) = &p.dynamics {
            println!(
                "{},{},{:.6e},{:.6e},{:.6e}",
                model_name(m.kind),
                m.n_sites,
                p.w,
                d.stationary_variance,
                ev
            );
        }
    }
    run.finish_sweep(&cfg, &points)
}

pub fn gap(ctx: &Context, analytic: bool) -> Outcome {
    let run = Run::new(ctx, "gap", 1000, "1e-2:1e4:13", 10)?;
    let r = &run.r;
    let mut body = String::from("n,gamma,w,gap_analytic\n");
    for &n in &r.n {
        for &w in &r.w {
            let g = gap_analytic(w, n, r.gamma)?;
            if analytic {
                println!("{g:.6}");
            }
            let _ = writeln!(body, "{n},{},{},{}", fmt17(r.gamma), fmt17(w), fmt17(g));
        }
    }
    run.write_csv("gap_analytic.csv", &body)?;
    if analytic {
        return run.finish(None);
    }
    let (cfg, points) = run.sweep(r.specs(), vec![Observable::Gap], Vec::new())?;
    println!("model,n,w,gap_mean,gap_analytic");
    for p in &points {
        let m = &cfg.models[p.model];
        let a = if m.kind == ModelKind::LongRange {
            gap_analytic(p.w, m.n_sites, m.gamma).unwrap_or(f64::NAN)
        } else {
            f64::NAN
        };
        println!(
            "{},{},{:.6e},{:.6e},{:.6e}",
            model_name(m.kind),
            m.n_sites,
            p.w,
            p.summaries["gap"].mean,
            a
        );
    }
    run.finish_sweep(&cfg, &points)
}

pub fn thresholds(ctx: &Context) -> Outcome {
    let run = Run::new(ctx, "thresholds", 1000, "1:1:1", 1)?;
    let r = &run.r;
    let explicit_w = ctx.settings.w.is_some() || ctx.settings.w_grid.is_some();
    let unit = r.units.energy();
    let mut body = String::from("n,omega,gamma,w1,w2,w_gap,w,gamma_gap,xi\n");
    for &n in &r.n {
        let t = threshold_set(n, r.omega, r.gamma, None)?;
        println!(
            "N = {n}, Omega = {} {unit}, gamma = {} {unit}",
            r.omega, r.gamma
        );
        println!("  W1    = {:.4e} {unit}", t.w1);
        println!("  W2    = {:.4e} {unit}", t.w2);
        println!("  W_gap = {:.4e} {unit}", t.w_gap);
        let ws: Vec<Option<f64>> = if explicit_w {
            r.w.iter().map(|&w| Some(w)).collect()
        } else {
            vec![None]
        };
        for w in ws {
            let t = threshold_set(n, r.omega, r.gamma, w)?;
            let (wv, gg, xi) = match w {
                Some(w) => {
                    println!(
                        "  W = {w:.4e} {unit}: gamma_GAP = {:.4e} {unit}, xi = {:.4e} sites",
                        t.gamma_gap.unwrap_or(f64::NAN),
                        t.xi(w)
                    );
                    (
                        fmt17(w),
                        fmt17(t.gamma_gap.unwrap_or(f64::NAN)),
                        fmt17(t.xi(w)),
                    )
                }
                None => (String::new(), String::new(), String::new()),
            };
            let _ = writeln!(
                body,
                "{n},{},{},{},{},{},{wv},{gg},{xi}",
                fmt17(r.omega),
                fmt17(r.gamma),
                fmt17(t.w1),
                fmt17(t.w2),
                fmt17(t.w_gap)
            );
        }
    }
    run.write_csv("thresholds.csv", &body)?;
    run.finish(None)
}

pub fn cavity_compare(ctx: &Context) -> Outcome {
    let mut settings = ctx.settings.clone();
    settings.model = Some(Model::Cavity);
    let ctx2 = Context {
        settings,
        resume: ctx.resume,
        argv: ctx.argv.clone(),
    };
    let run = Run::new(&ctx2, "cavity-compare", 1000, "1e-3:1e3:7", 10)?;
    let r = &run.r;
    let mut body =
        String::from("n,g,gamma_eff,w,polariton_gap,polariton_gap_analytic,max_level_difference\n");
    println!("n,w,polariton_gap,polariton_gap_analytic,max_level_difference");
    for i in 0..r.n.len() {
        let spec = r.spec(Model::Cavity, i);
        let mut grid = vec![0.0];
        grid.extend(r.w.iter().copied());
        for (wi, &w) in grid.iter().enumerate() {
            let dis = sample_disorder(&spec, w, realization_seed(r.seed, i, wi, 0), 0)?;
            let c = cavity_longrange_overlap(&spec, &dis, r.window_fraction)?;
            println!(
                "{},{w:.4e},{:.12e},{:.12e},{:.4e}",
                spec.n_sites, c.polariton_gap, c.polariton_gap_analytic, c.max_level_difference
            );
            let _ = writeln!(
                body,
                "{},{},{},{},{},{},{}",
                spec.n_sites,
                fmt17(c.g),
                fmt17(c.gamma_eff),
                fmt17(w),
                fmt17(c.polariton_gap),
                fmt17(c.polariton_gap_analytic),
                fmt17(c.max_level_difference)
            );
            let mut shape = String::from("k,cavity,long_range\n");
            for ((k, a), (_, b)) in c
                .cavity_shape
                .points()
                .into_iter()
                .zip(c.long_range_shape.points())
            {
                let _ = writeln!(shape, "{k},{},{}", fmt17(a), fmt17(b));
            }
            run.write_csv(&format!("overlay_n{}_w{wi}.csv", spec.n_sites), &shape)?;
        }
    }
    run.write_csv("cavity_compare.csv", &body)?;
    let (cfg, points) = run.sweep(paired(r), vec![Observable::Current], Vec::new())?;
    print_summary(&cfg, &points, "current", "current");
    run.finish_sweep(&cfg, &points)
}

/// Largest accepted relative deviation between the two current evaluations.
const ORACLE_TOLERANCE: f64 = 1e-8;

pub fn oracle_check(ctx: &Context) -> Outcome {
    let mut settings = ctx.settings.clone();
    if settings.n.is_none() {
        settings.n = Some(vec![4, 10, 20, 30, 40]);
    }
    let ctx2 = Context {
        settings,
        resume: ctx.resume,
        argv: ctx.argv.clone(),
    };
    let run = Run::new(&ctx2, "oracle-check", 4, "1e-2:1e6:20", 20)?;
    let r = &run.r;
    let mut body = String::from("n,w,seed,index,lindblad,closed_form,relative_error\n");
    let mut worst = 0.0f64;
    let mut count = 0usize;
    for (i, &n) in r.n.iter().enumerate() {
        let spec = r.spec(r.model, i);
        let open = OpenSystemConfig::edges(n, r.gamma_p, r.gamma_d, 0.0);
        for (wi, &w) in r.w.iter().enumerate() {
            for k in 0..r.realizations.count(n) {
                let seed = realization_seed(r.seed, i, wi, k);
                let dis = sample_disorder(&spec, w, seed, k as u64)?;
                let lind = lindblad_steady_current(&build_hamiltonian(&spec, &dis)?, &open)?;
                let hs = eig_chain(&spec, &dis, Vectors::Full)?.into_full()?;
                let p = project_open(
                    &hs,
                    &open,
                    OpenMode::Drain,
                    &[open.source_site, open.drain_site],
                )?;
                let closed = steady_current(
                    transfer_time(&p, open.source_site, open.drain_site, open.gamma_d)?,
                    open.gamma_p,
                );
                let rel = ((lind - closed) / lind).abs();
                worst = worst.max(rel);
                count += 1;
                let _ = writeln!(
                    body,
                    "{n},{},{seed},{k},{},{},{}",
                    fmt17(w),
                    fmt17(lind),
                    fmt17(closed),
                    fmt17(rel)
                );
            }
        }
    }
    run.write_csv("oracle.csv", &body)?;
    run.finish(None)?;
    println!(
        "{count} realizations, max relative error {worst:.3e} (tolerance {ORACLE_TOLERANCE:e})"
    );
    if worst <= ORACLE_TOLERANCE {
        Ok(())
    } else {
        Err(Failure::Runtime(format!(
            "oracle mismatch: {worst:.3e} > {ORACLE_TOLERANCE:e}"
        )))
    }
}
