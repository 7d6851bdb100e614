use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Parser;

use crate::error::{Error, Result};
use crate::grid::{PhaseGrid, SpatialGrid};
use crate::model::{ModelContext, PotentialParams};
use crate::quantum::Observable;

/// Parameter presets `(beta, c, delta)` of the five reference cases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CasePreset {
    pub label: char,
    pub beta: f64,
    pub c: f64,
    pub delta: f64,
}

pub const CASES: [CasePreset; 5] = [
    CasePreset { label: 'A', beta: 3.3, c: 1.0, delta: 1.0 },
    CasePreset { label: 'B', beta: 1.0, c: 0.1, delta: 1.0 },
    CasePreset { label: 'C', beta: 1.0, c: 0.1, delta: 0.01 },
    CasePreset { label: 'D', beta: 0.28, c: 1.0, delta: 1.0 },
    CasePreset { label: 'E', beta: 1.0, c: 1.0, delta: 0.1 },
];

impl CasePreset {
    pub fn by_label(label: &str) -> Result<Self> {
        let l = label.trim().to_ascii_uppercase();
        CASES
            .iter()
            .find(|c| l.len() == 1 && l.starts_with(c.label))
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown case '{label}', expected one of A-E")))
    }

    pub fn context(&self, mass_ratio: f64) -> Result<ModelContext> {
        ModelContext::new(PotentialParams::new(self.c, self.delta)?, self.beta, mass_ratio)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Density,
    Correlation,
    Epsilons,
    Convergence,
    Gibbs,
}

impl Command {
    fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "density" => Ok(Command::Density),
            "correlation" => Ok(Command::Correlation),
            "epsilons" => Ok(Command::Epsilons),
            "convergence" => Ok(Command::Convergence),
            "gibbs" => Ok(Command::Gibbs),
            other => Err(Error::Config(format!(
                "unknown command '{other}', expected density | correlation | epsilons | convergence | gibbs"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Density => "density",
            Command::Correlation => "correlation",
            Command::Epsilons => "epsilons",
            Command::Convergence => "convergence",
            Command::Gibbs => "gibbs",
        }
    }
}

/// Fully resolved and validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    /// Preset label, if the model came from one.
    pub case: Option<char>,
    pub beta: f64,
    pub c: f64,
    pub delta: f64,
    pub mass_ratio: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub k: usize,
    pub p_max: f64,
    pub l: usize,
    pub dt: f64,
    pub tau_max: f64,
    pub d_tau: f64,
    pub observable: Observable,
    pub scalar_variants: bool,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub gibbs_x: f64,
    pub gibbs_p: f64,
    pub mass_list: Vec<f64>,
    pub q1_target: Option<f64>,
    pub cases: Vec<char>,
    pub output: PathBuf,
    pub threads: usize,
}

impl RunConfig {
    pub fn context(&self) -> Result<ModelContext> {
        ModelContext::new(PotentialParams::new(self.c, self.delta)?, self.beta, self.mass_ratio)
    }

    pub fn spatial_grid(&self) -> Result<SpatialGrid> {
        SpatialGrid::new(self.x_min, self.x_max, self.k)
    }

    pub fn phase_grid(&self) -> Result<PhaseGrid> {
        PhaseGrid::symmetric(self.x_min, self.x_max, self.p_max, self.l)
    }

    /// Every resolved setting as `# key = value` lines.
    pub fn comment_block(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "# {k} = {v}");
        };
        line("command", self.command.name().into());
        line("case", self.case.map_or("custom".into(), |c| c.to_string()));
        line("model.beta", self.beta.to_string());
        line("model.c", self.c.to_string());
        line("model.delta", self.delta.to_string());
        line("model.M", self.mass_ratio.to_string());
        line("grid.x_min", self.x_min.to_string());
        line("grid.x_max", self.x_max.to_string());
        line("grid.K", self.k.to_string());
        line("phase.p_max", self.p_max.to_string());
        line("phase.L", self.l.to_string());
        line("time.dt", self.dt.to_string());
        line("time.tau_max", self.tau_max.to_string());
        line("time.d_tau", self.d_tau.to_string());
        line("observable", self.observable.to_string());
        line("scalar_variants", self.scalar_variants.to_string());
        line("paths.n_paths", self.n_paths.to_string());
        line("paths.n_steps", self.n_steps.to_string());
        line("paths.seed", self.seed.to_string());
        line("gibbs.x", self.gibbs_x.to_string());
        line("gibbs.p", self.gibbs_p.to_string());
        line("masses", list(&self.mass_list));
        line("convergence.q1", self.q1_target.map_or("none".into(), |q| q.to_string()));
        line("epsilons.cases", self.cases.iter().collect());
        line("threads", self.threads.to_string());
        s
    }
}

#[derive(Parser, Debug, Default)]
#[command(
    name = "mfmd",
    about = "Quantum reference and classical molecular dynamics observables for a two-state model",
    version
)]
struct Cli {
    /// Command to run: density | correlation | epsilons | convergence | gibbs
    #[arg(value_name = "COMMAND")]
    command_pos: Option<String>,
    #[arg(long)]
    command: Option<String>,
    /// Flat `key = value` configuration file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Parameter preset A-E.
    #[arg(long)]
    case: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    c: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    /// Nucleus to electron mass ratio.
    #[arg(long = "M", allow_negative_numbers = true)]
    mass_ratio: Option<f64>,
    #[arg(long, alias = "x_min", allow_negative_numbers = true)]
    x_min: Option<f64>,
    #[arg(long, alias = "x_max", allow_negative_numbers = true)]
    x_max: Option<f64>,
    /// Number of spatial grid segments.
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long, alias = "p_max", allow_negative_numbers = true)]
    p_max: Option<f64>,
    /// Number of phase grid segments on each axis.
    #[arg(long = "L")]
    l: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    dt: Option<f64>,
    #[arg(long, alias = "tau_max", allow_negative_numbers = true)]
    tau_max: Option<f64>,
    #[arg(long, alias = "d_tau", allow_negative_numbers = true)]
    d_tau: Option<f64>,
    /// p or x
    #[arg(long)]
    observable: Option<String>,
    /// Also compute quantum correlations on the scalar surfaces lambda* and lambda_0.
    #[arg(long)]
    scalar_variants: bool,
    #[arg(long, alias = "n_paths")]
    n_paths: Option<usize>,
    #[arg(long, alias = "n_steps")]
    n_steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, allow_negative_numbers = true)]
    x: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    p: Option<f64>,
    /// Comma-separated mass ratios for convergence and gibbs.
    #[arg(long)]
    masses: Option<String>,
    /// Pin the excited-state probability by adjusting delta (convergence).
    #[arg(long, allow_negative_numbers = true)]
    q1: Option<f64>,
    /// Comma-separated preset labels for epsilons.
    #[arg(long)]
    cases: Option<String>,
    /// Output directory.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads; falls back to MFMD_THREADS, then to all cores.
    #[arg(long, env = "MFMD_THREADS")]
    threads: Option<usize>,
}

/// Result of reading the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum Invocation {
    Run(Box<RunConfig>),
    /// Help or version text to print.
    Info(String),
}

const KNOWN_KEYS: &[&str] = &[
    "command",
    "case",
    "model.beta",
    "model.c",
    "model.delta",
    "model.M",
    "grid.x_min",
    "grid.x_max",
    "grid.K",
    "phase.p_max",
    "phase.L",
    "time.dt",
    "time.tau_max",
    "time.d_tau",
    "observable",
    "scalar_variants",
    "paths.n_paths",
    "paths.n_steps",
    "paths.seed",
    "gibbs.x",
    "gibbs.p",
    "masses",
    "convergence.q1",
    "epsilons.cases",
    "output",
    "threads",
];

/// Reads a flat `key = value` file. Blank lines and `#` comments are skipped.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, (usize, String)>> {
    let mut out = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", no + 1)))?;
        let k = k.trim();
        if !KNOWN_KEYS.contains(&k) {
            return Err(Error::Config(format!("line {}: unknown key '{k}'", no + 1)));
        }
        out.insert(k.to_string(), (no + 1, v.trim().to_string()));
    }
    Ok(out)
}

struct Layer {
    file: BTreeMap<String, (usize, String)>,
}

impl Layer {
    fn get<T: std::str::FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::Config(format!("line {line}: cannot parse '{v}' for key '{key}'"))),
        }
    }
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Config(format!("cannot parse '{t}' in {what}"))))
        .collect()
}

/// Default momentum cutoff: the Gaussian `exp(-beta p^2/2)` is below `e^{-30}` at the edge.
pub fn default_p_max(beta: f64) -> f64 {
    6.0f64.max((60.0 / beta).sqrt())
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

/// Parses command-line arguments (the first item is the program name).
pub fn parse_invocation<I, S>(args: I) -> Result<Invocation>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Ok(Invocation::Info(e.to_string())),
                _ => Err(Error::Config(e.to_string().trim().to_string())),
            };
        }
    };
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            parse_config_text(&text)?
        }
        None => BTreeMap::new(),
    };
    resolve(cli, Layer { file }).map(|c| Invocation::Run(Box::new(c)))
}

/// Parses arguments into a run configuration; help requests are errors here.
pub fn parse_config<I, S>(args: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    match parse_invocation(args)? {
        Invocation::Run(c) => Ok(*c),
        Invocation::Info(text) => Err(Error::Config(text)),
    }
}

fn resolve(cli: Cli, f: Layer) -> Result<RunConfig> {
    let command_text = f
        .get::<String>("command", cli.command.or(cli.command_pos))?
        .ok_or_else(|| Error::Config("a command is required (density | correlation | epsilons | convergence | gibbs)".into()))?;
    let command = Command::parse(&command_text)?;

    let preset = f.get::<String>("case", cli.case)?.map(|s| CasePreset::by_label(&s)).transpose()?;
    let beta = f.get("model.beta", cli.beta)?.or(preset.map(|p| p.beta));
    let c = f.get("model.c", cli.c)?.or(preset.map(|p| p.c));
    let delta = f.get("model.delta", cli.delta)?.or(preset.map(|p| p.delta));
    let cases_text = f.get::<String>("epsilons.cases", cli.cases)?;

    let (beta, c, delta) = match (beta, c, delta) {
        (Some(b), Some(c), Some(d)) => (b, c, d),
        (None, None, None) if command == Command::Epsilons => (1.0, 1.0, 0.1),
        _ => {
            return Err(Error::Config(
                "model parameters missing: give --case or all of --beta, --c, --delta".into(),
            ))
        }
    };
    let beta = positive("beta", beta)?;
    if !c.is_finite() {
        return Err(Error::Config(format!("c must be finite, got {c}")));
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::Config(format!("delta must be nonnegative, got {delta}")));
    }
    let mass_ratio = positive("M", f.get("model.M", cli.mass_ratio)?.unwrap_or(100.0))?;

    let x_min = f.get("grid.x_min", cli.x_min)?.unwrap_or(-6.0);
    let x_max = f.get("grid.x_max", cli.x_max)?.unwrap_or(6.0);
    if x_min.partial_cmp(&x_max) != Some(std::cmp::Ordering::Less) {
        return Err(Error::Config(format!("grid bounds must satisfy x_min < x_max, got [{x_min}, {x_max}]")));
    }
    let default_k = if command == Command::Epsilons { 24_000 } else { 1200 };
    let k = f.get("grid.K", cli.k)?.unwrap_or(default_k);
    if k < 8 {
        return Err(Error::Config(format!("K must be at least 8, got {k}")));
    }
    let p_max = positive("p_max", f.get("phase.p_max", cli.p_max)?.unwrap_or_else(|| default_p_max(beta)))?;
    let l = f.get("phase.L", cli.l)?.unwrap_or(240);
    if l < 2 || l % 2 != 0 {
        return Err(Error::Config(format!("L must be a positive even number, got {l}")));
    }
    let dt = positive("dt", f.get("time.dt", cli.dt)?.unwrap_or(0.005))?;
    let tau_max = positive("tau_max", f.get("time.tau_max", cli.tau_max)?.unwrap_or(20.0))?;
    let d_tau = positive("d_tau", f.get("time.d_tau", cli.d_tau)?.unwrap_or(0.05))?;
    let ratio = d_tau / dt;
    if (ratio - ratio.round()).abs() > 1e-9 * ratio {
        return Err(Error::Config(format!("d_tau = {d_tau} must be a multiple of dt = {dt}")));
    }
    let ratio = tau_max / d_tau;
    if (ratio - ratio.round()).abs() > 1e-9 * ratio {
        return Err(Error::Config(format!("tau_max = {tau_max} must be a multiple of d_tau = {d_tau}")));
    }
    let observable = match f.get::<String>("observable", cli.observable)? {
        None => Observable::Momentum,
        Some(s) => s.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
    };
    let scalar_variants = cli.scalar_variants || f.get::<bool>("scalar_variants", None)?.unwrap_or(false);
    let n_paths = f.get("paths.n_paths", cli.n_paths)?.unwrap_or(100_000);
    let n_steps = f.get("paths.n_steps", cli.n_steps)?.unwrap_or(256);
    if n_paths < 1 || n_steps < 2 {
        return Err(Error::Config("paths.n_paths must be >= 1 and paths.n_steps >= 2".into()));
    }
    let seed = f.get("paths.seed", cli.seed)?.unwrap_or(0);
    let gibbs_x = f.get("gibbs.x", cli.x)?.unwrap_or(0.3);
    let gibbs_p = f.get("gibbs.p", cli.p)?.unwrap_or(0.5);
    let mass_list = match f.get::<String>("masses", cli.masses)? {
        Some(s) => parse_list(&s, "masses")?,
        None => match command {
            Command::Convergence => vec![100.0, 200.0, 400.0, 800.0],
            _ => vec![mass_ratio],
        },
    };
    for m in &mass_list {
        positive("mass ratio", *m)?;
    }
    if mass_list.is_empty() {
        return Err(Error::Config("mass list is empty".into()));
    }
    let q1_target = f.get("convergence.q1", cli.q1)?;
    if let Some(q) = q1_target {
        if !(q > 0.0 && q < 0.5) {
            return Err(Error::Config(format!("q1 target must lie in (0, 0.5), got {q}")));
        }
    }
    let cases = match cases_text {
        Some(s) => s
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| CasePreset::by_label(t).map(|p| p.label))
            .collect::<Result<Vec<_>>>()?,
        None => match preset {
            Some(p) if command == Command::Epsilons => vec![p.label],
            _ => CASES.iter().map(|c| c.label).collect(),
        },
    };
    let output = f.get::<PathBuf>("output", cli.output)?.unwrap_or_else(|| PathBuf::from("."));
    let threads = match f.get::<usize>("threads", cli.threads)? {
        Some(0) => return Err(Error::Config("threads must be at least 1".into())),
        Some(t) => t,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    Ok(RunConfig {
        command,
        case: preset.map(|p| p.label),
        beta,
        c,
        delta,
        mass_ratio,
        x_min,
        x_max,
        k,
        p_max,
        l,
        dt,
        tau_max,
        d_tau,
        observable,
        scalar_variants,
        n_paths,
        n_steps,
        seed,
        gibbs_x,
        gibbs_p,
        mass_list,
        q1_target,
        cases,
        output,
        threads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<String> {
        std::iter::once("mfmd".to_string()).chain(s.split_whitespace().map(String::from)).collect()
    }

    #[test]
    fn preset_with_overrides() {
        let c = parse_config(args("--case E --M 100 --command correlation --observable p")).unwrap();
        assert_eq!((c.beta, c.c, c.delta, c.mass_ratio), (1.0, 1.0, 0.1, 100.0));
        assert_eq!(c.command, Command::Correlation);
        assert_eq!(c.observable, Observable::Momentum);
        assert_eq!(c.case, Some('E'));
        assert_eq!(c.p_max, 60f64.sqrt());
    }

    #[test]
    fn negative_beta_is_a_config_error() {
        let e = parse_config(args("correlation --case E --beta -1")).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn command_is_required() {
        assert!(matches!(parse_config(args("")), Err(Error::Config(_))));
        assert!(matches!(parse_config(args("--case A")), Err(Error::Config(_))));
    }

    #[test]
    fn help_is_informational() {
        assert!(matches!(parse_invocation(args("--help")).unwrap(), Invocation::Info(_)));
    }

    #[test]
    fn file_values_are_overridden_by_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "# comment\ncommand = density\ncase = B\ngrid.K = 600\nmodel.M = 50 # trailing\n").unwrap();
        let c = parse_config(args(&format!("--config {} --M 75", path.display()))).unwrap();
        assert_eq!(c.command, Command::Density);
        assert_eq!((c.beta, c.c, c.delta), (1.0, 0.1, 1.0));
        assert_eq!(c.k, 600);
        assert_eq!(c.mass_ratio, 75.0);
    }

    #[test]
    fn bad_file_lines_are_located() {
        let e = parse_config_text("command = density\nfoo = 1\n").unwrap_err();
        assert!(e.to_string().contains("line 2"));
        let e = parse_config_text("grid.K 600\n").unwrap_err();
        assert!(e.to_string().contains("line 1"));
    }

    #[test]
    fn time_grid_must_align() {
        assert!(parse_config(args("correlation --case E --dt 0.003 --d_tau 0.05")).is_err());
    }

    #[test]
    fn comment_block_lists_everything() {
        let c = parse_config(args("gibbs --case E --masses 1000,10000")).unwrap();
        let b = c.comment_block();
        assert!(b.lines().all(|l| l.starts_with("# ")));
        assert!(b.contains("# masses = 1000,10000"));
        assert_eq!(b.lines().count(), 25);
    }
}
