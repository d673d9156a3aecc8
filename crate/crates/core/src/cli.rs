//! Command-line driver.
//!
//! Every subcommand resolves its parameters from built-in defaults, then an
//! optional `--config` file of `key=value` lines (`#` starts a comment),
//! then explicit flags. The resolved configuration is embedded in every
//! output so that a run can be reproduced exactly.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::capacity::{
    blahut_arimoto, poisson_sym_kl_cov, poisson_sym_kl_max, poisson_two_point_prior, sandwich, sym_kl_capacity_bound,
    BaOptions, BoundReport, CostConstraint, IidOptions, Method, Prior, SandwichOptions, SymKlOptions,
};
use crate::cascade::{
    analyze_chain, bsc_cascade_capacity, cascade_mi_curve, example1_channel, example1_default_b, prop1_limit,
    rll_growth_rate_bits, write_curve_csv,
};
use crate::channels::{
    ligand_binomial_dmc, make_bsc, make_erasure, make_z, poisson_dmc, uniform_grid, Dmc, LtiPoissonChannel,
    DEFAULT_GRID_POINTS, POISSON_TAIL_TOL,
};
use crate::diffusion::{
    default_dt, default_t_max, simulate_first_hitting, slot_hit_probs, DiffusionMedium, HittingTimeModel, SlotConfig,
};
use crate::error::{Error, Result};
use crate::math::poisson_y_max;
use crate::timing::{
    aign_bounds, delay_selector_iid_lower, delay_selector_root, delay_selector_zero_error, AignParams, DelaySelector,
    DelaySelectorChannel,
};

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 20_240_917;

#[derive(Parser, Debug)]
#[command(name = "molcap", version, about = "Molecular communication channel models and capacity bounds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// File of key=value lines; flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Unit for human-facing numbers (JSON payloads are always in nats).
    #[arg(long, global = true, value_enum)]
    pub base: Option<Base>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Base {
    #[default]
    Bits,
    Nats,
}

impl Base {
    fn convert(self, nats: f64) -> f64 {
        match self {
            Base::Bits => nats / LN_2,
            Base::Nats => nats,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Base::Bits => "bits",
            Base::Nats => "nats",
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Hitting-time law, slot hitting probabilities and optional Monte Carlo check.
    Diffusion {
        #[command(flatten)]
        common: Common,
        /// Transmitter-receiver distance.
        #[arg(long = "d")]
        distance: Option<f64>,
        /// Diffusion coefficient.
        #[arg(long = "D")]
        diffusion: Option<f64>,
        /// Drift velocity towards the receiver (0 for pure diffusion).
        #[arg(long = "v")]
        drift: Option<f64>,
        /// Slot duration.
        #[arg(long = "Ts")]
        slot: Option<f64>,
        /// Last slot index in the tap table.
        #[arg(long = "kmax")]
        kmax: Option<usize>,
        /// Add a Monte Carlo cdf column and a KS statistic.
        #[arg(long = "mc")]
        mc: bool,
        #[arg(long = "paths")]
        paths: Option<usize>,
        /// Euler step of the simulator.
        #[arg(long = "dt")]
        dt: Option<f64>,
        /// Censoring horizon of the simulator.
        #[arg(long = "tmax")]
        tmax: Option<f64>,
        /// Rows of the density table.
        #[arg(long = "points")]
        points: Option<usize>,
    },
    /// Capacity bracket of a memoryless channel (JSON report).
    Capacity {
        #[command(flatten)]
        common: Common,
        /// poisson | bsc | z | erasure | ligand | dmc
        #[arg(long = "model")]
        model: Option<String>,
        /// Crossover / erasure probability.
        #[arg(long = "p")]
        p: Option<f64>,
        /// Average intensity constraint.
        #[arg(long = "Es")]
        average: Option<f64>,
        /// Peak intensity.
        #[arg(long = "A")]
        peak: Option<f64>,
        /// Background intensity.
        #[arg(long = "lam0")]
        background: Option<f64>,
        /// Number of input grid points.
        #[arg(long = "grid")]
        grid: Option<usize>,
        /// Receptor count of the ligand model.
        #[arg(long = "receptors")]
        receptors: Option<u64>,
        /// JSON channel file for --model dmc.
        #[arg(long = "channel")]
        channel: Option<String>,
    },
    /// Block-memoryless sandwich bounds of the LTI-Poisson channel (CSV).
    Sandwich {
        #[command(flatten)]
        common: Common,
        /// Comma-separated taps p_0,p_1,...
        #[arg(long = "taps")]
        taps: Option<String>,
        #[arg(long = "lam0")]
        background: Option<f64>,
        #[arg(long = "A")]
        peak: Option<f64>,
        #[arg(long = "Es")]
        average: Option<f64>,
        /// Comma-separated input intensities.
        #[arg(long = "inputs")]
        inputs: Option<String>,
        /// Comma-separated block lengths.
        #[arg(long = "r")]
        r: Option<String>,
    },
    /// Mutual-information decay along a cascade of identical channels (CSV).
    Cascade {
        #[command(flatten)]
        common: Common,
        /// bsc | example1 | dmc
        #[arg(long = "model")]
        model: Option<String>,
        #[arg(long = "p")]
        p: Option<f64>,
        #[arg(long = "mmax")]
        mmax: Option<usize>,
        /// Truncation of the Example 1 ladder.
        #[arg(long = "L")]
        ladder: Option<usize>,
        #[arg(long = "channel")]
        channel: Option<String>,
    },
    /// Timing channels: delay-selector and AIGN (JSON report).
    Timing {
        #[command(flatten)]
        common: Common,
        /// delay-selector | aign
        #[arg(long = "model")]
        model: Option<String>,
        #[arg(long = "N")]
        n_max: Option<u32>,
        #[arg(long = "delta")]
        delta: Option<usize>,
        /// Slots simulated for the i.i.d. lower bound (0 to skip).
        #[arg(long = "slots")]
        slots: Option<usize>,
        /// Release-time budget of the AIGN channel.
        #[arg(long = "Lambda")]
        budget: Option<f64>,
        #[arg(long = "mu")]
        mu: Option<f64>,
        #[arg(long = "lambda")]
        lambda: Option<f64>,
    },
    /// Quick end-to-end consistency checks.
    Selftest {
        #[command(flatten)]
        common: Common,
    },
}

/// Resolved parameters of one run.
#[derive(Clone, Debug, Default, Serialize)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub params: BTreeMap<String, String>,
    pub seed: u64,
    pub base: Base,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    fn base(&self) -> Base {
        self.base
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.params.get(key).ok_or_else(|| Error::Config(format!("missing parameter {key}")))?;
        raw.parse().map_err(|_| Error::Config(format!("cannot parse {key}={raw}")))
    }

    fn get_list(&self, key: &str) -> Result<Vec<f64>> {
        let raw = self.params.get(key).ok_or_else(|| Error::Config(format!("missing parameter {key}")))?;
        raw.split(',')
            .map(|s| s.trim().parse().map_err(|_| Error::Config(format!("cannot parse {key}={raw}"))))
            .collect()
    }

    fn footer(&self) -> String {
        let mut s = format!("# experiment={}\n# seed={}\n", self.experiment, self.seed);
        for (k, v) in &self.params {
            let _ = writeln!(s, "# {k}={v}");
        }
        s
    }
}

/// Parses `key=value` lines; blank lines and `#` comments are ignored.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value", lineno + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn resolve(
    experiment: &str,
    common: &Common,
    defaults: &[(&str, &str)],
    flags: Vec<(&str, Option<String>)>,
) -> Result<ExperimentConfig> {
    let mut params: BTreeMap<String, String> = defaults.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    let mut seed = DEFAULT_SEED;
    let mut base = common.base;
    if let Some(path) = &common.config {
        for (k, v) in parse_config(&std::fs::read_to_string(path)?)? {
            match k.as_str() {
                "seed" => seed = v.parse().map_err(|_| Error::Config(format!("cannot parse seed={v}")))?,
                "base" if base.is_none() => {
                    base = Some(Base::from_str(&v, true).map_err(|_| Error::Config(format!("unknown base {v}")))?)
                }
                "base" => {}
                _ if params.contains_key(&k) => {
                    params.insert(k, v);
                }
                _ => return Err(Error::Config(format!("unknown key '{k}' for {experiment}"))),
            }
        }
    }
    if let Some(s) = common.seed {
        seed = s;
    }
    for (k, v) in flags {
        if let Some(v) = v {
            params.insert(k.to_string(), v);
        }
    }
    Ok(ExperimentConfig { experiment: experiment.into(), params, seed, base: base.unwrap_or_default(), out: common.out.clone() })
}

fn opt<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(ToString::to_string)
}

fn emit(cfg: &ExperimentConfig, text: &str) -> Result<()> {
    match &cfg.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

/// Outcome of a subcommand: `ok` is false when a tolerance was missed.
pub struct Outcome {
    pub ok: bool,
}

fn cmd_diffusion(cfg: &ExperimentConfig, mc: bool) -> Result<Outcome> {
    let medium = DiffusionMedium::new(cfg.get("D")?, cfg.get("v")?, cfg.get("d")?)?;
    let slots = SlotConfig::new(cfg.get("Ts")?, cfg.get("kmax")?)?;
    let model = medium.hitting_model();
    let taps = slot_hit_probs(&medium, &slots)?;

    let mut tap_csv = String::from("k,t_start,t_end,p_k\n");
    for (k, p) in taps.taps.iter().enumerate() {
        let t0 = k as f64 * slots.slot_len();
        let _ = writeln!(tap_csv, "{k},{t0},{},{p:.15e}", t0 + slots.slot_len());
    }
    let tail_start = (slots.k_max() + 1) as f64 * slots.slot_len();
    let _ = writeln!(tap_csv, "tail,{tail_start},inf,{:.15e}", taps.tail);
    tap_csv.push_str(&cfg.footer());
    let _ = writeln!(tap_csv, "# model={}", model_label(&model));
    let _ = writeln!(tap_csv, "# quadrature_abs_err={:.3e}", taps.abs_err);

    let points: usize = cfg.get("points")?;
    let t_end = tail_start;
    let grid: Vec<f64> = (1..=points).map(|i| t_end * i as f64 / points as f64).collect();
    let samples = if mc {
        let dt = match cfg.params.get("dt").map(String::as_str) {
            Some("auto") | None => default_dt(&medium),
            Some(_) => cfg.get("dt")?,
        };
        let t_max = match cfg.params.get("tmax").map(String::as_str) {
            Some("auto") | None => default_t_max(&medium),
            Some(_) => cfg.get("tmax")?,
        };
        Some(simulate_first_hitting(&medium, cfg.get("paths")?, dt, t_max, cfg.seed)?)
    } else {
        None
    };
    let mut curve = String::from(if mc { "t,pdf,cdf,mc_cdf\n" } else { "t,pdf,cdf\n" });
    for &t in &grid {
        let _ = write!(curve, "{t},{:.15e},{:.15e}", model.pdf(t), model.cdf(t));
        if let Some(s) = &samples {
            let _ = write!(curve, ",{:.15e}", s.empirical_cdf(t));
        }
        curve.push('\n');
    }
    curve.push_str(&cfg.footer());
    if let Some(s) = &samples {
        let _ = writeln!(curve, "# ks={:.6e}", s.ks_distance(&model));
        let _ = writeln!(curve, "# censored_fraction={:.6e}", s.censored_fraction());
    }

    match &cfg.out {
        Some(path) => {
            std::fs::write(path, &tap_csv)?;
            std::fs::write(sibling(path, "_curve.csv"), &curve)?;
        }
        None => print!("{tap_csv}\n{curve}"),
    }
    Ok(Outcome { ok: true })
}

fn model_label(m: &HittingTimeModel) -> String {
    match m {
        HittingTimeModel::Levy { lambda } => format!("levy(lambda={lambda})"),
        HittingTimeModel::InverseGaussian { mu, lambda } => format!("inverse_gaussian(mu={mu},lambda={lambda})"),
    }
}

fn load_dmc(cfg: &ExperimentConfig) -> Result<Dmc> {
    let path: String = cfg.get("channel")?;
    if path.is_empty() {
        return Err(Error::Config("--model dmc needs --channel FILE".into()));
    }
    Dmc::from_json(&std::fs::read_to_string(path)?)
}

fn cmd_capacity(cfg: &ExperimentConfig) -> Result<Outcome> {
    let model: String = cfg.get("model")?;
    let base = cfg.base();
    let ba_opts = BaOptions::default();
    let (report, extra) = if model == "poisson" {
        let (es, a, lam0): (f64, f64, f64) = (cfg.get("Es")?, cfg.get("A")?, cfg.get("lam0")?);
        let closed = poisson_sym_kl_max(es, a, lam0)?;
        let grid = uniform_grid(a, cfg.get("grid")?);
        let y_max = poisson_y_max(a + lam0, POISSON_TAIL_TOL);
        let dmc = poisson_dmc(lam0, &grid, y_max)?;
        let cost = CostConstraint { costs: grid.clone(), budget: es };
        let ba = blahut_arimoto(&dmc, &ba_opts, Some(&cost))?;
        let two_point = poisson_sym_kl_cov(&poisson_two_point_prior(es, a)?, lam0)?;
        let mut report = BoundReport::new(ba.capacity, closed, Method::Ba, Method::SymKlClosed)?;
        report.iterations = Some(ba.iterations);
        report.grid_points = Some(grid.len());
        let extra = json!({
            "ba_upper_nats": ba.upper,
            "two_point_sym_kl_nats": two_point,
            "y_max": y_max,
        });
        (report, extra)
    } else {
        let dmc = match model.as_str() {
            "bsc" => make_bsc(cfg.get("p")?)?,
            "z" => make_z(cfg.get("p")?)?,
            "erasure" => make_erasure(cfg.get("p")?)?,
            "ligand" => ligand_binomial_dmc(cfg.get("receptors")?, &uniform_grid(1.0, cfg.get("grid")?))?,
            "dmc" => load_dmc(cfg)?,
            other => return Err(Error::Config(format!("unknown capacity model '{other}'"))),
        };
        let ba = blahut_arimoto(&dmc, &ba_opts, None)?;
        let sym = sym_kl_capacity_bound(&dmc, None, &SymKlOptions { seed: cfg.seed, ..Default::default() })?;
        let mut report = BoundReport::new(ba.capacity, ba.upper, Method::Ba, Method::Ba)?;
        report.iterations = Some(ba.iterations);
        let extra = json!({ "sym_kl_nats": if sym.value.is_finite() { json!(sym.value) } else { json!("inf") } });
        (report, extra)
    };
    let ok = report.lower <= report.upper + crate::capacity::BOUND_ORDER_TOL;
    eprintln!(
        "capacity in [{:.6}, {:.6}] {}",
        base.convert(report.lower),
        base.convert(report.upper),
        base.label()
    );
    let doc = json!({ "config": cfg, "units": "nats", "report": report, "details": extra });
    emit(cfg, &(serde_json::to_string_pretty(&doc)? + "\n"))?;
    Ok(Outcome { ok })
}

fn cmd_sandwich(cfg: &ExperimentConfig) -> Result<Outcome> {
    let base = cfg.base();
    let ch = LtiPoissonChannel::new(cfg.get_list("taps")?, cfg.get("lam0")?, cfg.get("A")?, cfg.get("Es")?)?;
    let inputs = cfg.get_list("inputs")?;
    let rs: Vec<usize> = cfg.get_list("r")?.into_iter().map(|r| r as usize).collect();
    let opts = SandwichOptions::default();
    let unit = base.label();
    let mut csv = format!("r,lower_{unit},upper_{unit},gap_{unit},super_inputs\n");
    let mut ok = true;
    for &r in &rs {
        let rep = sandwich(&ch, r, &inputs, &opts)?;
        ok &= rep.lower <= rep.upper + crate::capacity::BOUND_ORDER_TOL;
        let _ = writeln!(
            csv,
            "{r},{:.12e},{:.12e},{:.12e},{}",
            base.convert(rep.lower),
            base.convert(rep.upper),
            base.convert(rep.gap()),
            inputs.len().pow((ch.memory_depth() + r) as u32)
        );
    }
    csv.push_str(&cfg.footer());
    emit(cfg, &csv)?;
    Ok(Outcome { ok })
}

fn cmd_cascade(cfg: &ExperimentConfig) -> Result<Outcome> {
    let model: String = cfg.get("model")?;
    let m_max: usize = cfg.get("mmax")?;
    let (p, prior) = match model.as_str() {
        "bsc" => (make_bsc(cfg.get("p")?)?, Prior::uniform(2)),
        "example1" => {
            let l: usize = cfg.get("L")?;
            let mut probs = vec![0.0; l + 1];
            probs[0] = 0.5;
            probs[1] = 0.5;
            (example1_channel(l, &example1_default_b(l))?, Prior::from_probs(probs)?)
        }
        "dmc" => {
            let p = load_dmc(cfg)?;
            let n = p.n_inputs();
            (p, Prior::uniform(n))
        }
        other => return Err(Error::Config(format!("unknown cascade model '{other}'"))),
    };
    let points = cascade_mi_curve(&p, &prior, m_max)?;
    let mut buf = Vec::new();
    write_curve_csv(&points, &mut buf)?;
    let mut text = String::from_utf8(buf).expect("ascii csv");
    text.push_str(&cfg.footer());
    let mut ok = true;
    if model == "bsc" {
        let pp: f64 = cfg.get("p")?;
        let mut worst: f64 = 0.0;
        for pt in &points {
            worst = worst.max((pt.mi / LN_2 - bsc_cascade_capacity(pp, pt.m)?).abs());
        }
        ok = worst <= 1e-8;
        let _ = writeln!(text, "# max_closed_form_deviation_bits={worst:.3e}");
    }
    let limit = prop1_limit(&analyze_chain(&p)?);
    let _ = writeln!(text, "# limit_nats={limit:.12e}");
    emit(cfg, &text)?;
    Ok(Outcome { ok })
}

fn cmd_timing(cfg: &ExperimentConfig) -> Result<Outcome> {
    let model: String = cfg.get("model")?;
    let base = cfg.base();
    let doc = match model.as_str() {
        "delay-selector" => {
            let ds = DelaySelector::new(cfg.get("N")?, cfg.get("delta")?)?;
            let c0 = delay_selector_zero_error(&ds);
            let root = delay_selector_root(&ds);
            eprintln!("zero-error capacity: {:.6} {}", base.convert(c0), base.label());
            let slots: usize = cfg.get("slots")?;
            let iid = if slots > 0 {
                let ch = DelaySelectorChannel::new(ds, None)?;
                let n = ds.n_max as usize + 1;
                let prior = Prior::new((0..n).map(|i| i as f64).collect(), vec![1.0 / n as f64; n])?;
                Some(delay_selector_iid_lower(&ch, &prior, slots, cfg.seed, &IidOptions::default())?)
            } else {
                None
            };
            json!({
                "config": cfg,
                "units": "nats",
                "root": root,
                "polynomial_residual": ds.polynomial(root),
                "zero_error": c0,
                "iid_lower_uniform": iid,
            })
        }
        "aign" => {
            let p = AignParams::new(cfg.get("Lambda")?, cfg.get("mu")?, cfg.get("lambda")?)?;
            let b = aign_bounds(&p)?;
            eprintln!(
                "AIGN capacity in [{:.6}, {:.6}] {}",
                base.convert(b.report.lower),
                base.convert(b.report.upper),
                base.label()
            );
            json!({ "config": cfg, "units": "nats", "bounds": b })
        }
        other => return Err(Error::Config(format!("unknown timing model '{other}'"))),
    };
    emit(cfg, &(serde_json::to_string_pretty(&doc)? + "\n"))?;
    Ok(Outcome { ok: true })
}

fn cmd_selftest(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut checks: Vec<(&str, bool)> = Vec::new();
    let golden = ((1.0 + 5f64.sqrt()) / 2.0).log2();
    let c0 = delay_selector_zero_error(&DelaySelector::new(1, 1)?) / LN_2;
    checks.push(("delay-selector root", (c0 - golden).abs() < 1e-9));
    let ba = blahut_arimoto(&make_bsc(0.1)?, &BaOptions::default(), None)?;
    checks.push(("bsc capacity", (ba.capacity / LN_2 - bsc_cascade_capacity(0.1, 1)?).abs() < 1e-9));
    let closed = poisson_sym_kl_max(1.0, 4.0, 1.0)?;
    checks.push(("poisson sym-kl closed form", (closed - 0.75 * 5f64.ln()).abs() < 1e-12));
    let medium = DiffusionMedium::new(1.0, 1.0, 1.0)?;
    let taps = slot_hit_probs(&medium, &SlotConfig::new(1.0, 10)?)?;
    checks.push(("slot probabilities sum to one", (taps.total() - 1.0).abs() < 1e-9));
    checks.push(("fibonacci growth", (rll_growth_rate_bits(60)? - golden).abs() < 1e-3));
    let mut text = String::new();
    for (name, ok) in &checks {
        let _ = writeln!(text, "[{}] {name}", if *ok { "PASS" } else { "FAIL" });
    }
    emit(cfg, &text)?;
    Ok(Outcome { ok: checks.iter().all(|c| c.1) })
}

/// Parses arguments and runs one subcommand.
pub fn execute(cli: Cli) -> Result<Outcome> {
    let (common, cfg, mc) = match &cli.command {
        Command::Diffusion { common, distance, diffusion, drift, slot, kmax, mc, paths, dt, tmax, points } => {
            let defaults = [
                ("d", "1"),
                ("D", "1"),
                ("v", "1"),
                ("Ts", "1"),
                ("kmax", "10"),
                ("paths", "100000"),
                ("dt", "auto"),
                ("tmax", "auto"),
                ("points", "200"),
            ];
            let flags = vec![
                ("d", opt(distance)),
                ("D", opt(diffusion)),
                ("v", opt(drift)),
                ("Ts", opt(slot)),
                ("kmax", opt(kmax)),
                ("paths", opt(paths)),
                ("dt", opt(dt)),
                ("tmax", opt(tmax)),
                ("points", opt(points)),
            ];
            (common, resolve("diffusion", common, &defaults, flags)?, *mc)
        }
        Command::Capacity { common, model, p, average, peak, background, grid, receptors, channel } => {
            let grid_default = DEFAULT_GRID_POINTS.to_string();
            let defaults = [
                ("model", "poisson"),
                ("p", "0.1"),
                ("Es", "1"),
                ("A", "4"),
                ("lam0", "1"),
                ("grid", grid_default.as_str()),
                ("receptors", "10"),
                ("channel", ""),
            ];
            let flags = vec![
                ("model", opt(model)),
                ("p", opt(p)),
                ("Es", opt(average)),
                ("A", opt(peak)),
                ("lam0", opt(background)),
                ("grid", opt(grid)),
                ("receptors", opt(receptors)),
                ("channel", opt(channel)),
            ];
            (common, resolve("capacity", common, &defaults, flags)?, false)
        }
        Command::Sandwich { common, taps, background, peak, average, inputs, r } => {
            let defaults =
                [("taps", "0.8,0.2"), ("lam0", "0.5"), ("A", "4"), ("Es", "2"), ("inputs", "0,4"), ("r", "1,2,3,4")];
            let flags = vec![
                ("taps", opt(taps)),
                ("lam0", opt(background)),
                ("A", opt(peak)),
                ("Es", opt(average)),
                ("inputs", opt(inputs)),
                ("r", opt(r)),
            ];
            (common, resolve("sandwich", common, &defaults, flags)?, false)
        }
        Command::Cascade { common, model, p, mmax, ladder, channel } => {
            let defaults = [("model", "bsc"), ("p", "0.1"), ("mmax", "20"), ("L", "20"), ("channel", "")];
            let flags = vec![
                ("model", opt(model)),
                ("p", opt(p)),
                ("mmax", opt(mmax)),
                ("L", opt(ladder)),
                ("channel", opt(channel)),
            ];
            (common, resolve("cascade", common, &defaults, flags)?, false)
        }
        Command::Timing { common, model, n_max, delta, slots, budget, mu, lambda } => {
            let defaults = [
                ("model", "delay-selector"),
                ("N", "1"),
                ("delta", "1"),
                ("slots", "0"),
                ("Lambda", "1"),
                ("mu", "1"),
                ("lambda", "0.5"),
            ];
            let flags = vec![
                ("model", opt(model)),
                ("N", opt(n_max)),
                ("delta", opt(delta)),
                ("slots", opt(slots)),
                ("Lambda", opt(budget)),
                ("mu", opt(mu)),
                ("lambda", opt(lambda)),
            ];
            (common, resolve("timing", common, &defaults, flags)?, false)
        }
        Command::Selftest { common } => (common, resolve("selftest", common, &[], vec![])?, false),
    };
    if let Some(n) = common.threads {
        // A pool may already exist when embedded; the cap is best effort.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match cli.command {
        Command::Diffusion { .. } => cmd_diffusion(&cfg, mc),
        Command::Capacity { .. } => cmd_capacity(&cfg),
        Command::Sandwich { .. } => cmd_sandwich(&cfg),
        Command::Cascade { .. } => cmd_cascade(&cfg),
        Command::Timing { .. } => cmd_timing(&cfg),
        Command::Selftest { .. } => cmd_selftest(&cfg),
    }
}

/// Entry point of the `molcap` binary; returns the process exit status.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(Outcome { ok: true }) => 0,
        Ok(Outcome { ok: false }) => {
            eprintln!("error: a tolerance was not met");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_to(args: &[&str], out: &Path) -> i32 {
        let mut full = vec!["molcap"];
        full.extend_from_slice(args);
        let o = out.to_str().unwrap();
        full.extend_from_slice(&["--out", o]);
        run_from(full)
    }

    #[test]
    fn config_parsing() {
        let m = parse_config("# header\nA = 4\n\nEs=1 # trailing\n").unwrap();
        assert_eq!(m.get("A").unwrap(), "4");
        assert_eq!(m.get("Es").unwrap(), "1");
        assert!(parse_config("novalue\n").is_err());
    }

    #[test]
    fn unknown_config_key_rejected_and_flags_win() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "bogus=1\n").unwrap();
        let out = dir.path().join("o.json");
        assert_ne!(run_to(&["capacity", "--config", cfg.to_str().unwrap()], &out), 0);

        std::fs::write(&cfg, "model=bsc\np=0.25\n").unwrap();
        assert_eq!(run_to(&["capacity", "--config", cfg.to_str().unwrap(), "--p", "0.1"], &out), 0);
        let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(doc["config"]["params"]["p"], "0.1");
        let lower = doc["report"]["lower"].as_f64().unwrap() / LN_2;
        assert!((lower - 0.531_004_406).abs() < 1e-8);
    }

    #[test]
    fn diffusion_row_count() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("taps.csv");
        assert_eq!(run_to(&["diffusion", "--d", "1", "--D", "1", "--v", "1", "--Ts", "1", "--kmax", "10"], &out), 0);
        let text = std::fs::read_to_string(&out).unwrap();
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows.len(), 1 + 11 + 1);
        assert!(rows.last().unwrap().starts_with("tail,"));
        let curve = std::fs::read_to_string(dir.path().join("taps_curve.csv")).unwrap();
        assert!(curve.starts_with("t,pdf,cdf\n"));
        assert!(text.contains("inverse_gaussian"));

        assert_eq!(run_to(&["diffusion", "--v", "0"], &out), 0);
        assert!(std::fs::read_to_string(&out).unwrap().contains("levy"));
    }

    #[test]
    fn poisson_capacity_report() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("cap.json");
        assert_eq!(run_to(&["capacity", "--model", "poisson", "--Es", "1", "--A", "4", "--lam0", "1"], &out), 0);
        let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(doc["report"]["method_upper"], "sym_kl_closed");
        let upper = doc["report"]["upper"].as_f64().unwrap();
        assert!((upper - 1.207).abs() < 1e-3);
        assert!(doc["report"]["lower"].as_f64().unwrap() <= upper);
    }

    #[test]
    fn infeasible_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("cap.json");
        assert_ne!(run_to(&["capacity", "--model", "poisson", "--Es", "5", "--A", "4"], &out), 0);
    }

    #[test]
    fn cascade_and_timing_outputs_are_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        assert_eq!(run_to(&["cascade", "--model", "bsc", "--p", "0.1", "--mmax", "20"], &a), 0);
        assert_eq!(run_to(&["cascade", "--model", "bsc", "--p", "0.1", "--mmax", "20"], &b), 0);
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

        let t = dir.path().join("t.json");
        assert_eq!(run_to(&["timing", "--model", "delay-selector", "--N", "1", "--delta", "1"], &t), 0);
        let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&t).unwrap()).unwrap();
        let bits = doc["zero_error"].as_f64().unwrap() / LN_2;
        assert!((bits - 0.6942).abs() < 1e-4);
    }

    #[test]
    fn selftest_passes() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("self.txt");
        assert_eq!(run_to(&["selftest"], &out), 0);
        assert!(!std::fs::read_to_string(&out).unwrap().contains("FAIL"));
    }
}
