//! Flat `key=value` configuration text.
//!
//! Pairs are separated by whitespace or newlines and `#` starts a comment
//! that runs to the end of the line. Every key may appear at most once.

use std::collections::BTreeMap;
use std::str::FromStr;

use gradstream_core::quantize::k_from_fraction;
use gradstream_core::{Error, PredictorKind, ProblemSpec, QuantizerSpec, Result, RunConfig, StepSchedule};

/// Keys understood by [`parse_config`] and the experiment subcommands.
pub const KEYS: &[&str] = &[
    "scheme",
    "predictor",
    "ef",
    "beta",
    "k",
    "k_frac",
    "delta",
    "d",
    "workers",
    "iters",
    "lr",
    "lr_decay_every",
    "lr_decay_factor",
    "problem",
    "sigma2",
    "seed",
    "blocks",
    "master_beta",
];

/// Keys that describe a full training run.
pub const RUN_KEYS: &[&str] = &[
    "scheme",
    "predictor",
    "ef",
    "beta",
    "k",
    "k_frac",
    "delta",
    "d",
    "workers",
    "iters",
    "lr",
    "lr_decay_every",
    "lr_decay_factor",
    "problem",
    "sigma2",
    "seed",
    "blocks",
];

/// Parsed but not yet interpreted pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Entries {
    map: BTreeMap<String, String>,
}

impl Entries {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("");
            for token in line.split_whitespace() {
                let (key, value) = token
                    .split_once('=')
                    .ok_or_else(|| Error::config(token, "expected key=value"))?;
                if !KEYS.contains(&key) {
                    return Err(Error::config(key, "unknown key"));
                }
                if value.is_empty() {
                    return Err(Error::config(key, "empty value"));
                }
                if map.insert(key.to_string(), value.to_string()).is_some() {
                    return Err(Error::config(key, "given more than once"));
                }
            }
        }
        Ok(Entries { map })
    }

    /// Reject keys outside `allowed`; `context` names the consumer.
    pub fn allow_only(&self, allowed: &[&str], context: &str) -> Result<()> {
        match self.map.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::config(k, format!("not used by {context}"))),
            None => Ok(()),
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.map.insert(key.to_string(), value.to_string());
    }

    pub fn remove(&mut self, key: &str) {
        self.map.remove(key);
    }

    pub fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn parsed<T: FromStr>(&self, key: &str, what: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| v.parse().map_err(|_| Error::config(key, format!("`{v}` is not {what}"))))
            .transpose()
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>> {
        let v: Option<f64> = self.parsed(key, "a number")?;
        match v {
            Some(x) if !x.is_finite() => Err(Error::config(key, "must be finite")),
            other => Ok(other),
        }
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.parsed(key, "a non-negative integer")
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>> {
        self.parsed(key, "a non-negative integer")
    }

    pub fn bool(&self, key: &str) -> Result<Option<bool>> {
        self.parsed(key, "true or false")
    }

    pub fn predictor(&self) -> Result<Option<PredictorKind>> {
        self.raw("predictor")
            .map(|v| match v {
                "zero" => Ok(PredictorKind::Zero),
                "linear" => Ok(PredictorKind::Linear),
                "estk" => Ok(PredictorKind::EstK),
                _ => Err(Error::config("predictor", format!("unknown predictor `{v}`"))),
            })
            .transpose()
    }

    pub fn problem(&self) -> Result<Option<ProblemSpec>> {
        let sigma2 = self.f64("sigma2")?;
        let problem = self
            .raw("problem")
            .map(|v| match v {
                "gaussian" => Ok(ProblemSpec::GaussianStream),
                "quadratic" => Ok(ProblemSpec::quadratic(sigma2.unwrap_or(1.0))),
                "logistic" => Ok(ProblemSpec::logistic()),
                _ => Err(Error::config("problem", format!("unknown problem `{v}`"))),
            })
            .transpose()?;
        if sigma2.is_some() && !matches!(problem, Some(ProblemSpec::NoisyQuadratic { .. })) {
            return Err(Error::config("sigma2", "only applies to problem=quadratic"));
        }
        Ok(problem)
    }

    /// K from `k` or `k_frac`, which exclude each other.
    pub fn k(&self, dim: usize) -> Result<Option<usize>> {
        match (self.usize("k")?, self.f64("k_frac")?) {
            (Some(_), Some(_)) => Err(Error::config("k_frac", "k and k_frac are mutually exclusive")),
            (Some(k), None) => Ok(Some(k)),
            (None, Some(f)) if f > 0.0 && f <= 1.0 => Ok(Some(k_from_fraction(f, dim))),
            (None, Some(_)) => Err(Error::config("k_frac", "must lie in (0, 1]")),
            (None, None) => Ok(None),
        }
    }

    /// Resolve the quantizer; keys missing from the text fall back to `default`.
    pub fn quantizer(&self, dim: usize, default: Option<QuantizerSpec>) -> Result<QuantizerSpec> {
        let scheme = match (self.raw("scheme"), default) {
            (Some(s), _) => s,
            (None, Some(q)) => q.name(),
            (None, None) => return Err(Error::config("scheme", "missing required key")),
        };
        let k = self.k(dim)?;
        let delta = self.f64("delta")?;
        let k_key = if self.has("k_frac") { "k_frac" } else { "k" };
        let default_k = default.and_then(|q| q.k());
        let need_k = || k.or(default_k).ok_or_else(|| Error::config("k", "required by top-k schemes"));
        let q = match scheme {
            "topk" => QuantizerSpec::TopK { k: need_k()? },
            "topkq" => QuantizerSpec::TopKQ { k: need_k()? },
            "scaledsign" => QuantizerSpec::ScaledSign,
            "passthrough" => QuantizerSpec::Passthrough,
            "dithered" => {
                let step = match (delta, default) {
                    (Some(s), _) => s,
                    (None, Some(QuantizerSpec::DitheredUniform { step })) => step,
                    _ => return Err(Error::config("delta", "required by scheme=dithered")),
                };
                QuantizerSpec::DitheredUniform { step }
            }
            other => return Err(Error::config("scheme", format!("unknown scheme `{other}`"))),
        };
        if k.is_some() && !q.is_top_k_family() {
            return Err(Error::config(k_key, format!("does not apply to scheme={scheme}")));
        }
        if delta.is_some() && !matches!(q, QuantizerSpec::DitheredUniform { .. }) {
            return Err(Error::config("delta", format!("does not apply to scheme={scheme}")));
        }
        q.validate(dim).map_err(|e| Error::config(k_key, e.to_string()))?;
        Ok(q)
    }

    pub fn schedule(&self) -> Result<StepSchedule> {
        let lr = self.f64("lr")?.unwrap_or(0.1);
        let every = self.usize("lr_decay_every")?;
        let factor = self.f64("lr_decay_factor")?;
        if factor.is_some() && every.is_none() {
            return Err(Error::config("lr_decay_factor", "needs lr_decay_every"));
        }
        Ok(StepSchedule {
            initial: lr,
            decay_every: every,
            decay_factor: factor.unwrap_or(if every.is_some() { 0.1 } else { 1.0 }),
        })
    }

    pub fn blocks(&self) -> Result<Option<Vec<usize>>> {
        self.raw("blocks")
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        s.parse()
                            .map_err(|_| Error::config("blocks", format!("`{s}` is not a block offset")))
                    })
                    .collect()
            })
            .transpose()
    }

    /// A validated training run. `d` and `scheme` are required.
    pub fn run_config(&self) -> Result<RunConfig> {
        let dim = self.usize("d")?.ok_or_else(|| Error::config("d", "missing required key"))?;
        let mut c = RunConfig::new(dim, self.quantizer(dim, None)?);
        if let Some(beta) = self.f64("beta")? {
            c.beta = beta;
        }
        if let Some(p) = self.predictor()? {
            c.predictor = p;
        }
        if let Some(ef) = self.bool("ef")? {
            c.error_feedback = ef;
        }
        if let Some(n) = self.usize("workers")? {
            c.workers = n;
        }
        if let Some(t) = self.usize("iters")? {
            c.iterations = t;
        }
        if let Some(p) = self.problem()? {
            c.problem = p;
        }
        if let Some(s) = self.u64("seed")? {
            c.seed = s;
        }
        c.schedule = self.schedule()?;
        c.blocks = self.blocks()?;
        c.validate()?;
        Ok(c)
    }
}

/// Parse configuration text into a validated [`RunConfig`].
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let entries = Entries::parse(text)?;
    entries.allow_only(RUN_KEYS, "a training run")?;
    entries.run_config()
}
