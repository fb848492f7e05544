//! Flat `key = value` experiment configuration.
//!
//! One assignment per line, `#` starts a comment, blank lines are ignored.
//! Lists are comma separated; integer lists also accept a half-open range
//! `a..b`. Every key is optional except `task`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::cli::ConfigError;
use crate::quantize::{Alphabet, NoiseShapingConfig, Prescale, Scheme, MAX_BITS};
use crate::pipeline::Method;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    ApproxScan,
    Krr,
    Mmd,
    Footprint,
    Spectral,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::ApproxScan => "approx_scan",
            Task::Krr => "krr",
            Task::Mmd => "mmd",
            Task::Footprint => "footprint",
            Task::Spectral => "spectral",
        }
    }

    pub fn parse(s: &str) -> Option<Task> {
        Some(match s {
            "approx_scan" | "scan" => Task::ApproxScan,
            "krr" => Task::Krr,
            "mmd" => Task::Mmd,
            "footprint" => Task::Footprint,
            "spectral" => Task::Spectral,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MethodId {
    Rff,
    Universal,
    SemiQ,
    StocQ,
    SigmaDelta(usize),
    SigmaDeltaRandom,
    Beta,
}

impl MethodId {
    /// What `methods = all` expands to. Higher-order Sigma-Delta needs its
    /// own λ, so it is only run when listed explicitly.
    pub const ALL: [MethodId; 7] = [
        MethodId::Rff,
        MethodId::Universal,
        MethodId::SemiQ,
        MethodId::StocQ,
        MethodId::SigmaDelta(1),
        MethodId::SigmaDeltaRandom,
        MethodId::Beta,
    ];

    pub fn name(self) -> String {
        match self {
            MethodId::Rff => "rff".into(),
            MethodId::Universal => "universal".into(),
            MethodId::SemiQ => "semiq".into(),
            MethodId::StocQ => "stocq".into(),
            MethodId::SigmaDelta(r) => format!("sigma_delta_r{r}"),
            MethodId::SigmaDeltaRandom => "sigma_delta_random".into(),
            MethodId::Beta => "beta".into(),
        }
    }

    /// Stable tag mixed into per-cell seeds.
    pub fn tag(self) -> u64 {
        match self {
            MethodId::Rff => 1,
            MethodId::Universal => 2,
            MethodId::SemiQ => 3,
            MethodId::StocQ => 4,
            MethodId::SigmaDelta(r) => 100 + r as u64,
            MethodId::SigmaDeltaRandom => 200,
            MethodId::Beta => 300,
        }
    }

    pub fn is_condensed(self) -> bool {
        matches!(
            self,
            MethodId::SigmaDelta(_) | MethodId::SigmaDeltaRandom | MethodId::Beta
        )
    }

    fn parse(s: &str, default_order: usize) -> Option<MethodId> {
        Some(match s {
            "rff" => MethodId::Rff,
            "universal" => MethodId::Universal,
            "semiq" => MethodId::SemiQ,
            "stocq" => MethodId::StocQ,
            "sigma_delta" => MethodId::SigmaDelta(default_order),
            "sigma_delta_random" => MethodId::SigmaDeltaRandom,
            "beta" => MethodId::Beta,
            other => {
                let r: usize = other.strip_prefix("sigma_delta_r")?.parse().ok()?;
                if r == 0 {
                    return None;
                }
                MethodId::SigmaDelta(r)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    ToyPairs { n: usize, dim: usize },
    KrrSynth { n: usize },
    Circle { n: usize, gap: f64 },
    Csv { path: PathBuf, has_target: Option<bool> },
}

impl DataSource {
    /// Input dimension, when known without reading files.
    pub fn dim(&self) -> Option<usize> {
        match self {
            DataSource::ToyPairs { dim, .. } => Some(*dim),
            DataSource::KrrSynth { .. } => Some(5),
            DataSource::Circle { .. } => Some(2),
            DataSource::Csv { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub task: Task,
    pub methods: Vec<MethodId>,
    pub gamma: f64,
    pub dim: Option<usize>,
    pub bits: u8,
    pub lambda: usize,
    /// Per-method `quantizer.lambda.<method>` overrides.
    pub lambda_overrides: BTreeMap<String, usize>,
    pub filter: Vec<f64>,
    pub beta: f64,
    pub prescale: Prescale,
    pub m_sweep: Vec<usize>,
    /// Base seed every cell seed is derived from.
    pub seed: u64,
    /// Replicate indices.
    pub seeds: Vec<u64>,
    pub data: DataSource,
    pub train_fraction: f64,
    pub eta: f64,
    pub level: f64,
    pub permutations: usize,
    pub trials: usize,
    pub spectral_eta: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub output: PathBuf,
}

const KEYS: &[&str] = &[
    "task",
    "methods",
    "kernel.gamma",
    "kernel.dim",
    "quantizer.bits",
    "quantizer.lambda",
    "quantizer.order",
    "quantizer.filter",
    "quantizer.beta",
    "quantizer.prescale",
    "m_sweep",
    "seed",
    "seeds",
    "data",
    "data.n",
    "data.d",
    "data.gap",
    "data.train_fraction",
    "data.csv",
    "data.has_target",
    "krr.eta",
    "mmd.level",
    "mmd.permutations",
    "mmd.trials",
    "spectral.eta",
    "spectral.delta1",
    "spectral.delta2",
    "output",
];

fn err(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError {
        key: key.to_string(),
        message: msg.into(),
    }
}

/// Split text into a key → value map, rejecting unknown and repeated keys.
pub fn parse_assignments(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err("<syntax>", format!("line {}: expected `key = value`", lineno + 1)))?;
        insert(&mut map, key.trim(), value.trim())?;
    }
    Ok(map)
}

fn insert(map: &mut BTreeMap<String, String>, key: &str, value: &str) -> Result<(), ConfigError> {
    let known = KEYS.contains(&key) || key.starts_with("quantizer.lambda.");
    if !known {
        return Err(err(key, "unknown key"));
    }
    if map.insert(key.to_string(), value.to_string()).is_some() {
        return Err(err(key, "key given more than once"));
    }
    Ok(())
}

/// Apply a `key=value` override on top of parsed assignments.
pub fn apply_override(map: &mut BTreeMap<String, String>, assignment: &str) -> Result<(), ConfigError> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| err("<override>", format!("expected key=value, got `{assignment}`")))?;
    map.remove(key.trim());
    insert(map, key.trim(), value.trim())
}

struct Fields(BTreeMap<String, String>);

impl Fields {
    fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| err(key, format!("cannot parse `{v}` as {}", std::any::type_name::<T>()))),
        }
    }

    fn opt<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| err(key, format!("cannot parse `{v}` as {}", std::any::type_name::<T>()))),
        }
    }

    fn str(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| err(key, format!("cannot parse list item `{s}`"))))
        .collect()
}

fn parse_int_list(key: &str, value: &str) -> Result<Vec<u64>, ConfigError> {
    if let Some((a, b)) = value.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| err(key, format!("bad range start `{a}`")))?;
        let b: u64 = b.trim().parse().map_err(|_| err(key, format!("bad range end `{b}`")))?;
        if b <= a {
            return Err(err(key, format!("empty range {a}..{b}")));
        }
        return Ok((a..b).collect());
    }
    parse_list(key, value)
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(err(key, format!("must be positive, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_assignments(parse_assignments(text)?)
    }

    pub fn from_assignments(map: BTreeMap<String, String>) -> Result<Self, ConfigError> {
        let f = Fields(map);
        let task_name = f.str("task").ok_or_else(|| err("task", "missing required key"))?;
        let task = Task::parse(task_name).ok_or_else(|| {
            err("task", format!("unknown task `{task_name}` (approx_scan, krr, mmd, footprint, spectral)"))
        })?;

        let order: usize = f.get("quantizer.order", 1)?;
        if order == 0 {
            return Err(err("quantizer.order", "must be at least 1"));
        }
        let methods = match f.str("methods") {
            None if task == Task::Footprint => MethodId::ALL.to_vec(),
            None => vec![MethodId::Rff, MethodId::StocQ, MethodId::SigmaDelta(1), MethodId::Beta],
            Some("all") => MethodId::ALL.to_vec(),
            Some(list) => {
                let mut out = Vec::new();
                for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    let id = MethodId::parse(name, order)
                        .ok_or_else(|| err("methods", format!("unknown method `{name}`")))?;
                    if out.contains(&id) {
                        return Err(err("methods", format!("method `{name}` listed twice")));
                    }
                    out.push(id);
                }
                if out.is_empty() {
                    return Err(err("methods", "must name at least one method"));
                }
                out
            }
        };

        let bits: u8 = f.get("quantizer.bits", 1)?;
        if bits == 0 || bits > MAX_BITS {
            return Err(err("quantizer.bits", format!("must be in 1..={MAX_BITS}, got {bits}")));
        }
        let lambda: usize = f.get("quantizer.lambda", 4)?;
        if lambda == 0 {
            return Err(err("quantizer.lambda", "must be at least 1"));
        }
        let mut lambda_overrides = BTreeMap::new();
        for (key, value) in f.0.iter().filter(|(k, _)| k.starts_with("quantizer.lambda.")) {
            let name = &key["quantizer.lambda.".len()..];
            let id = MethodId::parse(name, order).ok_or_else(|| err(key, format!("unknown method `{name}`")))?;
            let v: usize = value.parse().map_err(|_| err(key, format!("cannot parse `{value}`")))?;
            if v == 0 {
                return Err(err(key, "must be at least 1"));
            }
            lambda_overrides.insert(id.name(), v);
        }
        let filter: Vec<f64> = match f.str("quantizer.filter") {
            None => vec![1.0],
            Some(v) => parse_list("quantizer.filter", v)?,
        };
        if filter.first() != Some(&1.0) {
            return Err(err("quantizer.filter", "must be non-empty with leading coefficient 1"));
        }
        let beta: f64 = f.get("quantizer.beta", 1.5)?;
        if !(beta > 1.0 && beta < 2.0) {
            return Err(err("quantizer.beta", format!("must lie in (1, 2), got {beta}")));
        }
        let prescale = match f.str("quantizer.prescale").unwrap_or("none") {
            "none" => Prescale::None,
            "auto" => Prescale::Auto,
            other => return Err(err("quantizer.prescale", format!("expected none or auto, got `{other}`"))),
        };

        let gamma = positive("kernel.gamma", f.get("kernel.gamma", default_gamma(task))?)?;
        let dim: Option<usize> = f.opt("kernel.dim")?;

        let m_sweep: Vec<usize> = match f.str("m_sweep") {
            None => vec![1000],
            Some(v) => parse_int_list("m_sweep", v)?.into_iter().map(|x| x as usize).collect(),
        };
        if m_sweep.is_empty() || m_sweep.contains(&0) {
            return Err(err("m_sweep", "must list positive feature counts"));
        }
        let seed: u64 = f.get("seed", 0)?;
        let seeds = match f.str("seeds") {
            None => (0..30).collect(),
            Some(v) => parse_int_list("seeds", v)?,
        };
        if seeds.is_empty() {
            return Err(err("seeds", "must not be empty"));
        }

        let data = parse_data(&f, task)?;
        if let (Some(d), Some(expected)) = (dim, data.dim()) {
            if d != expected {
                return Err(err("kernel.dim", format!("{d} does not match the data dimension {expected}")));
            }
        }
        let train_fraction: f64 = f.get("data.train_fraction", 0.8)?;
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(err("data.train_fraction", format!("must lie in (0, 1), got {train_fraction}")));
        }
        let eta = positive("krr.eta", f.get("krr.eta", 1.0)?)?;
        let level: f64 = f.get("mmd.level", 0.05)?;
        if !(level > 0.0 && level < 1.0) {
            return Err(err("mmd.level", format!("must lie in (0, 1), got {level}")));
        }
        let permutations: usize = f.get("mmd.permutations", 2000)?;
        if permutations == 0 {
            return Err(err("mmd.permutations", "must be at least 1"));
        }
        let trials: usize = f.get("mmd.trials", 100)?;
        if trials == 0 {
            return Err(err("mmd.trials", "must be at least 1"));
        }
        let spectral_eta = positive("spectral.eta", f.get("spectral.eta", 1.0)?)?;
        let delta1: f64 = f.get("spectral.delta1", 0.5)?;
        let delta2: f64 = f.get("spectral.delta2", 0.5)?;
        if delta1 < 0.0 {
            return Err(err("spectral.delta1", "must be non-negative"));
        }
        if delta2 < 0.0 {
            return Err(err("spectral.delta2", "must be non-negative"));
        }
        let output = PathBuf::from(f.str("output").unwrap_or("results"));

        let config = ExperimentConfig {
            task,
            methods,
            gamma,
            dim,
            bits,
            lambda,
            lambda_overrides,
            filter,
            beta,
            prescale,
            m_sweep,
            seed,
            seeds,
            data,
            train_fraction,
            eta,
            level,
            permutations,
            trials,
            spectral_eta,
            delta1,
            delta2,
            output,
        };
        config.check_blocks()?;
        Ok(config)
    }

    pub fn lambda_for(&self, method: MethodId) -> usize {
        self.lambda_overrides.get(&method.name()).copied().unwrap_or(self.lambda)
    }

    pub fn alphabet(&self) -> Alphabet {
        Alphabet::from_bits(self.bits).expect("bits validated at parse time")
    }

    fn lambda_key(&self, method: MethodId) -> String {
        if self.lambda_overrides.contains_key(&method.name()) {
            format!("quantizer.lambda.{}", method.name())
        } else {
            "quantizer.lambda".into()
        }
    }

    /// Every condensed method's λ must divide every m and fit its scheme.
    fn check_blocks(&self) -> Result<(), ConfigError> {
        for &method in self.methods.iter().filter(|m| m.is_condensed()) {
            let lambda = self.lambda_for(method);
            if let MethodId::SigmaDelta(r) = method {
                if !(lambda + r - 1).is_multiple_of(r) {
                    return Err(err(
                        &self.lambda_key(method),
                        format!("λ = {lambda} is not of the form r·λ̃ − r + 1 for {}", method.name()),
                    ));
                }
            }
            if let Some(&m) = self.m_sweep.iter().find(|&&m| m % lambda != 0) {
                return Err(err(
                    "m_sweep",
                    format!("m = {m} is not divisible by λ = {lambda} ({})", self.lambda_key(method)),
                ));
            }
        }
        Ok(())
    }

    /// The concrete approximation method for one cell.
    pub fn method(&self, id: MethodId, m: usize) -> crate::Result<Method> {
        let alphabet = self.alphabet();
        let noise_shaping = |scheme: Scheme| -> crate::Result<Method> {
            let lambda = self.lambda_for(id);
            let config = NoiseShapingConfig::new(scheme, lambda, m / lambda, alphabet.clone())?
                .with_prescale(self.prescale);
            Ok(Method::NoiseShaping(config))
        };
        match id {
            MethodId::Rff => Ok(Method::Rff),
            MethodId::Universal => Ok(Method::Universal),
            MethodId::SemiQ => Ok(Method::SemiQ { alphabet }),
            MethodId::StocQ => Ok(Method::StocQ { alphabet }),
            MethodId::SigmaDelta(order) => noise_shaping(Scheme::SigmaDelta {
                order,
                filter: self.filter.clone(),
            }),
            MethodId::SigmaDeltaRandom => noise_shaping(Scheme::SigmaDeltaRandomized),
            MethodId::Beta => noise_shaping(Scheme::Beta { beta: self.beta }),
        }
    }
}

fn default_gamma(task: Task) -> f64 {
    match task {
        Task::ApproxScan | Task::Krr => 0.2,
        Task::Mmd => 200.0,
        Task::Footprint | Task::Spectral => 1.0,
    }
}

fn parse_data(f: &Fields, task: Task) -> Result<DataSource, ConfigError> {
    let default = match task {
        Task::ApproxScan => "toy_pairs",
        Task::Krr => "krr_synth",
        Task::Mmd | Task::Spectral | Task::Footprint => "circle",
    };
    let name = f.str("data").unwrap_or(default);
    let source = match name {
        "toy_pairs" => DataSource::ToyPairs {
            n: f.get("data.n", 1000)?,
            dim: f.get("data.d", 50)?,
        },
        "krr_synth" => DataSource::KrrSynth { n: f.get("data.n", 1000)? },
        "circle" => {
            let gap: f64 = f.get("data.gap", 0.2)?;
            if !(gap >= 0.0 && gap.is_finite()) {
                return Err(err("data.gap", format!("must be finite and non-negative, got {gap}")));
            }
            DataSource::Circle { n: f.get("data.n", 60)?, gap }
        }
        "csv" => DataSource::Csv {
            path: PathBuf::from(f.str("data.csv").ok_or_else(|| err("data.csv", "required when data = csv"))?),
            has_target: f.opt("data.has_target")?,
        },
        other => return Err(err("data", format!("unknown generator `{other}` (toy_pairs, krr_synth, circle, csv)"))),
    };
    match (&source, task) {
        (DataSource::ToyPairs { .. }, Task::ApproxScan)
        | (DataSource::KrrSynth { .. } | DataSource::Csv { .. }, Task::Krr)
        | (DataSource::Circle { .. }, Task::Mmd)
        | (DataSource::Circle { .. } | DataSource::Csv { .. }, Task::Spectral)
        | (_, Task::Footprint) => {}
        _ => return Err(err("data", format!("`{name}` cannot feed the {} task", task.name()))),
    }
    let n = match source {
        DataSource::ToyPairs { n, dim } => {
            if dim == 0 {
                return Err(err("data.d", "must be at least 1"));
            }
            n
        }
        DataSource::KrrSynth { n } | DataSource::Circle { n, .. } => n,
        // Row count is checked once the file is read.
        DataSource::Csv { .. } => return Ok(source),
    };
    let min = if task == Task::Krr { 2 } else { 1 };
    if n < min {
        return Err(err("data.n", format!("must be at least {min}")));
    }
    Ok(source)
}
