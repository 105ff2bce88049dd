mod config;
mod reproduce;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use quadtherm_core::cantor::{build_cantor_system, eta_positive_check, itinerary_of_point, point_from_itinerary};
use quadtherm_core::dynamics::{multiplier_c_derivative, multiplier_c_derivative_fd, period3_orbits};
use quadtherm_core::induced::{bowen_root, enumerate_level_branches, enumerate_return_branches};
use quadtherm_core::precision::parse_real;
use quadtherm_core::pressure::{poincare_series, postcritical_series, tree_pressure, SeriesVerdict};
use quadtherm_core::render::{self, PieceKind, Window};
use quadtherm_core::search::{find_parameter, kn_membership, CertifiedIntervalJson, SearchOptions};
use quadtherm_core::{ItineraryWord, Parameter, RayAngle, TreeMode, Verdict};

use config::{Overrides, RunConfig, PRECISION_ENV};

#[derive(Parser)]
#[command(name = "quadtherm", version, about = "Thermodynamic formalism of real quadratic maps")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    precision: Option<u32>,
    /// Preimage-tree depth `m`.
    #[arg(long, global = true)]
    tree_depth: Option<usize>,
    #[arg(long, global = true)]
    mmax: Option<usize>,
    /// Number of epochs or levels `K`.
    #[arg(long = "big-k", global = true)]
    big_k: Option<usize>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; standard output if absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Real,
    Complex,
}

impl From<Mode> for TreeMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Real => TreeMode::Real,
            Mode::Complex => TreeMode::Complex,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SeriesKind {
    Poincare,
    Postcritical,
}

#[derive(Clone, Copy, ValueEnum)]
enum RenderKind {
    Ray,
    Equi,
    Puzzle,
    Julia,
    ParamRay,
    ParamEqui,
}

#[derive(Subcommand)]
enum Command {
    /// Tree pressure at one or more `t`, as CSV.
    Pressure {
        #[arg(long, allow_hyphen_values = true, default_value = "-2")]
        c: f64,
        #[arg(long, allow_hyphen_values = true, value_delimiter = ',', required = true)]
        t: Vec<f64>,
        #[arg(long, value_enum, default_value = "complex")]
        mode: Mode,
    },
    /// Poincaré or postcritical series with a verdict.
    Series {
        #[arg(long, value_enum)]
        kind: SeriesKind,
        #[arg(long, allow_hyphen_values = true, default_value = "-2")]
        c: String,
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
        #[arg(long, allow_hyphen_values = true)]
        p: f64,
        /// Preperiod for the postcritical series.
        #[arg(long, default_value_t = 2)]
        n: usize,
        /// Compare the sum with this value (log scale).
        #[arg(long, allow_hyphen_values = true)]
        log_threshold: Option<f64>,
        #[arg(long, value_enum, default_value = "real")]
        mode: Mode,
    },
    /// Certified parameter with a prescribed trap itinerary.
    FindParam {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        prefix: String,
    },
    /// Cantor-set coding round trips at a parameter.
    Cantor {
        #[arg(long, allow_hyphen_values = true)]
        c: String,
        #[arg(long)]
        word: Option<String>,
        /// Number of random words of length `--len`.
        #[arg(long)]
        random: Option<usize>,
        #[arg(long, default_value_t = 12)]
        len: usize,
    },
    /// Branch inventory of the first-return map to the central interval.
    Induced {
        #[arg(long, allow_hyphen_values = true)]
        c: String,
        #[arg(long)]
        n: usize,
        /// Enumerate by levels `0..=K` with landing time at most this.
        #[arg(long)]
        mland: Option<usize>,
    },
    /// Root of the two-variable pressure.
    Bowen {
        #[arg(long, allow_hyphen_values = true)]
        c: String,
        #[arg(long)]
        n: usize,
        #[arg(long, allow_hyphen_values = true, value_delimiter = ',', required = true)]
        t: Vec<f64>,
        #[arg(long)]
        mland: Option<usize>,
    },
    /// The period-3 cycles and the `c`-derivatives of their multipliers.
    Multipliers {
        #[arg(long, allow_hyphen_values = true, default_value = "-2")]
        c: String,
        /// Finite-difference step.
        #[arg(long, default_value_t = 1e-8)]
        h: f64,
    },
    /// Rays, equipotentials, puzzle pieces and Julia images.
    Render {
        #[arg(value_enum)]
        kind: RenderKind,
        #[arg(long, allow_hyphen_values = true, default_value_t = -2.0)]
        c: f64,
        /// Imaginary part of `c`.
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        ci: f64,
        #[arg(long)]
        angle: Option<String>,
        #[arg(long, default_value_t = 1e-8)]
        gmin: f64,
        #[arg(long)]
        level: Option<f64>,
        #[arg(long, default_value_t = 256)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        depth: usize,
        #[arg(long, default_value = "center")]
        which: String,
        /// `x_min,x_max,y_min,y_max`.
        #[arg(long, allow_hyphen_values = true, default_value = "-2.2,2.2,-2.2,2.2")]
        window: String,
        /// `WIDTHxHEIGHT`.
        #[arg(long, default_value = "512x512")]
        res: String,
    },
    /// The multiplier derivatives at `c = -2`.
    VerifyAppendix,
    /// Data behind one acceptance criterion.
    Reproduce {
        #[arg(value_enum)]
        target: reproduce::Target,
    },
}

/// How a successful run ended.
pub enum Outcome {
    Done,
    /// The computation finished but could not decide.
    Inconclusive,
}

pub struct Output {
    pub config: RunConfig,
}

impl Output {
    fn write_bytes(&self, bytes: &[u8]) -> Result<(), String> {
        match &self.config.out {
            Some(path) => std::fs::write(path, bytes).map_err(|e| format!("{}: {e}", path.display())),
            None => std::io::stdout().write_all(bytes).map_err(|e| e.to_string()),
        }
    }

    pub fn json(&self, result: impl Serialize) -> Result<(), String> {
        let doc = json!({ "config": self.config, "result": result });
        let mut text = serde_json::to_string_pretty(&doc).map_err(|e| e.to_string())?;
        text.push('\n');
        self.write_bytes(text.as_bytes())
    }

    pub fn csv(&self, header: &[&str], rows: &[Vec<String>]) -> Result<(), String> {
        let mut text = format!("# config={}\n", serde_json::to_string(&self.config).map_err(|e| e.to_string())?);
        text.push_str(&header.join(","));
        text.push('\n');
        for r in rows {
            text.push_str(&r.join(","));
            text.push('\n');
        }
        self.write_bytes(text.as_bytes())
    }

    fn pgm(&self, img: &render::GrayImage) -> Result<(), String> {
        if self.config.out.is_none() {
            return Err("julia images need --out".into());
        }
        let comment = serde_json::to_string(&self.config).map_err(|e| e.to_string())?;
        let mut bytes = format!("P5\n# config={comment}\n{} {}\n255\n", img.width, img.height).into_bytes();
        bytes.extend_from_slice(&img.pixels);
        self.write_bytes(&bytes)
    }
}

pub fn parameter(s: &str, cfg: &RunConfig) -> Result<Parameter, String> {
    let c = parse_real(s, cfg.precision_bits).map_err(|e| e.to_string())?;
    Parameter::new(c).map_err(|e| e.to_string())
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn parse_window(s: &str) -> Result<Window, String> {
    let v: Vec<f64> = s.split(',').map(|x| x.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(err)?;
    match v[..] {
        [a, b, c, d] => Window::new(a, b, c, d).map_err(err),
        _ => Err(format!("window {s:?} needs four numbers")),
    }
}

fn parse_res(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once('x').ok_or_else(|| format!("resolution {s:?} is not WIDTHxHEIGHT"))?;
    Ok((w.parse().map_err(err)?, h.parse().map_err(err)?))
}

fn run(command: Command, out: &Output) -> Result<Outcome, String> {
    let cfg = &out.config;
    match command {
        Command::Pressure { c, t, mode } => {
            let mut rows = Vec::new();
            for t in t {
                let e = tree_pressure(c, t, cfg.tree_depth, mode.into()).map_err(err)?;
                rows.push(vec![
                    format!("{t}"),
                    format!("{:.15e}", e.estimate),
                    format!("{:.6e}", e.error_bar),
                    e.depth.to_string(),
                    e.leaves.to_string(),
                    e.flagged.to_string(),
                ]);
            }
            out.csv(&["t", "estimate", "error_bar", "depth", "leaves", "flagged"], &rows)?;
            Ok(Outcome::Done)
        }
        Command::Series { kind, c, t, p, n, log_threshold, mode } => {
            let report = match kind {
                SeriesKind::Poincare => {
                    let c = parameter(&c, cfg)?.to_f64();
                    let mut r = poincare_series(c, t, p, cfg.tree_depth, mode.into()).map_err(err)?;
                    if let Some(th) = log_threshold {
                        r = quadtherm_core::pressure::classify(r.log_terms, th);
                    }
                    r
                }
                SeriesKind::Postcritical => {
                    let c = parameter(&c, cfg)?;
                    postcritical_series(&c, n, t, p, cfg.big_k, log_threshold.unwrap_or(f64::INFINITY))
                        .map_err(err)?
                }
            };
            let verdict = report.verdict;
            out.json(report)?;
            Ok(if verdict == SeriesVerdict::Inconclusive { Outcome::Inconclusive } else { Outcome::Done })
        }
        Command::FindParam { n, prefix } => {
            let word: ItineraryWord = prefix.parse().map_err(err)?;
            let opts = SearchOptions { precision: cfg.precision_bits, ..Default::default() };
            let found = find_parameter(n, &word, cfg.tol, &opts).map_err(err)?;
            let mid = found.parameter();
            let check = kn_membership(&mid, n, word.len());
            let doubled = parameter(&mid.c.to_string_radix(10, None), &RunConfig {
                precision_bits: 2 * cfg.precision_bits,
                ..cfg.clone()
            })?;
            let recheck = kn_membership(&doubled, n, word.len());
            let agree = check.verdict == recheck.verdict;
            out.json(json!({
                "interval": CertifiedIntervalJson::from(&found),
                "membership": check,
                "membership_doubled_precision": recheck,
            }))?;
            Ok(if check.verdict == Verdict::Verified && agree { Outcome::Done } else { Outcome::Inconclusive })
        }
        Command::Cantor { c, word, random, len } => {
            let c = parameter(&c, cfg)?;
            let sys = build_cantor_system(&c).map_err(err)?;
            let mut words: Vec<ItineraryWord> = Vec::new();
            if let Some(w) = word {
                words.push(w.parse().map_err(err)?);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            for _ in 0..random.unwrap_or(0) {
                words.push(ItineraryWord((0..len).map(|_| rng.gen_range(0..2u8)).collect()));
            }
            let mut trips = Vec::new();
            let mut all_ok = true;
            for w in &words {
                let (x, width) = point_from_itinerary(&sys, w).map_err(err)?;
                let back = itinerary_of_point(&sys, &x, w.len()).map_err(err)?;
                all_ok &= &back == w;
                trips.push(json!({
                    "word": w,
                    "point": x.to_string_radix(10, Some(20)),
                    "cylinder_width": width.to_f64(),
                    "recovered": back,
                }));
            }
            out.json(json!({
                "trap_y": [sys.trap_y.0.to_f64(), sys.trap_y.1.to_f64()],
                "trap_y_tilde": [sys.trap_yt.0.to_f64(), sys.trap_yt.1.to_f64()],
                "p": sys.p.to_f64(),
                "p_tilde": sys.pt.to_f64(),
                "eta": sys.eta.to_f64(),
                "eta_exceeds_one": format!("{:?}", eta_positive_check(&sys)),
                "round_trips": trips,
                "all_recovered": all_ok,
            }))?;
            if all_ok {
                Ok(Outcome::Done)
            } else {
                Err("itinerary round trip failed".into())
            }
        }
        Command::Induced { c, n, mland } => {
            let c = parameter(&c, cfg)?;
            let inv = match mland {
                Some(m) => enumerate_level_branches(&c, n, cfg.big_k, m),
                None => enumerate_return_branches(&c, n, cfg.m_max),
            }
            .map_err(err)?;
            out.json(inv)?;
            Ok(Outcome::Done)
        }
        Command::Bowen { c, n, t, mland } => {
            let c = parameter(&c, cfg)?;
            let inv = match mland {
                Some(m) => enumerate_level_branches(&c, n, cfg.big_k, m),
                None => enumerate_return_branches(&c, n, cfg.m_max),
            }
            .map_err(err)?;
            let roots = t.iter().map(|&t| bowen_root(&inv, t)).collect::<Result<Vec<_>, _>>().map_err(err)?;
            out.json(roots)?;
            Ok(Outcome::Done)
        }
        Command::Multipliers { c, h } => {
            let c = parameter(&c, cfg)?;
            let (p, q) = period3_orbits(&c).map_err(err)?;
            let h = parse_real(&h.to_string(), cfg.precision_bits).map_err(err)?;
            let mut cycles = Vec::new();
            for orbit in [p, q] {
                let exact = multiplier_c_derivative(&c, &orbit).map_err(err)?;
                let fd = multiplier_c_derivative_fd(&c, orbit.label, &h).map_err(err)?;
                cycles.push(json!({
                    "label": orbit.label,
                    "points": orbit.points.iter().map(|x| x.to_f64()).collect::<Vec<_>>(),
                    "multiplier": orbit.multiplier().to_f64(),
                    "d_multiplier_dc": exact.to_f64(),
                    "d_multiplier_dc_fd": fd.to_f64(),
                }));
            }
            out.json(cycles)?;
            Ok(Outcome::Done)
        }
        Command::Render { kind, c, ci, angle, gmin, level, samples, depth, which, window, res } => {
            let cz = Complex64::new(c, ci);
            let angle = || -> Result<RayAngle, String> {
                angle.as_deref().ok_or("--angle is required")?.parse::<RayAngle>().map_err(err)
            };
            let level = || level.ok_or_else(|| "--level is required".to_string());
            match kind {
                RenderKind::Ray => out.json(render::trace_ray_dynamical(cz, angle()?, gmin).map_err(err)?)?,
                RenderKind::ParamRay => out.json(render::trace_ray_parameter(angle()?, gmin).map_err(err)?)?,
                RenderKind::Equi => out.json(render::equipotential(cz, level()?, samples).map_err(err)?)?,
                RenderKind::ParamEqui => out.json(render::equipotential_parameter(level()?, samples).map_err(err)?)?,
                RenderKind::Puzzle => {
                    let which: PieceKind = which.parse().map_err(err)?;
                    out.json(render::puzzle_boundary(cz, depth, which, gmin).map_err(err)?)?
                }
                RenderKind::Julia => {
                    let (w, h) = parse_res(&res)?;
                    out.pgm(&render::julia_image(cz, parse_window(&window)?, w, h).map_err(err)?)?
                }
            }
            Ok(Outcome::Done)
        }
        Command::VerifyAppendix => reproduce::appendix(out),
        Command::Reproduce { target } => reproduce::run(target, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let g = cli.global;
    let flags = Overrides {
        precision_bits: g.precision,
        tree_depth: g.tree_depth,
        m_max: g.mmax,
        big_k: g.big_k,
        tol: g.tol,
        seed: g.seed,
        out: g.out,
    };
    let env = std::env::var(PRECISION_ENV).ok();
    let config = match RunConfig::resolve(env.as_deref(), g.config.as_deref().map(Path::new), &flags) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match run(cli.command, &Output { config }) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Inconclusive) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
