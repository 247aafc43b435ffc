//! Structured-text configuration files.
//!
//! The format is sectioned `key = value` lines:
//!
//! ```text
//! [experiment]
//! algorithms = confidence_boost, erm
//! n_grid = 256, 1024
//! replicates = 200
//! delta = 0.05
//! seed = 7
//!
//! [problem]
//! name = sq_ball_2d
//! noise_sigma = 0.1
//! ```
//!
//! A `[section]` header prefixes the keys that follow (`problem.name`);
//! fully qualified dotted keys are also accepted outside any section.
//! `#` and `;` start comments.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::domains::ConvexDomain;
use crate::erm::StepRule;
use crate::harness::{
    AlgorithmSpec, BoostBase, ExperimentConfig, InstanceOverrides, OnlineOverrides,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| {
                    Error::invalid("config", format!("line {}: unterminated section", lineno + 1))
                })?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::invalid("config", format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::invalid("config", format!("line {}: empty key", lineno + 1)));
            }
            let full = if section.is_empty() || key.contains('.') {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            values.insert(full, value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::invalid("config", format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(|s| s.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::invalid("config", format!("{key}: not a number: `{v}`")))
            })
            .transpose()
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>> {
        self.get(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| Error::invalid("config", format!("{key}: not an integer: `{v}`")))
            })
            .transpose()
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>> {
        self.get(key)
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|_| Error::invalid("config", format!("{key}: not an integer: `{v}`")))
            })
            .transpose()
    }

    pub fn get_list(&self, key: &str) -> Option<Vec<String>> {
        self.get(key).map(|v| {
            v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
        })
    }

    pub fn get_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.get_list(key)
            .map(|items| {
                items
                    .iter()
                    .map(|s| {
                        s.parse::<f64>().map_err(|_| {
                            Error::invalid("config", format!("{key}: not a number: `{s}`"))
                        })
                    })
                    .collect()
            })
            .transpose()
    }

    pub fn get_usize_list(&self, key: &str) -> Result<Option<Vec<usize>>> {
        self.get_list(key)
            .map(|items| {
                items
                    .iter()
                    .map(|s| {
                        s.parse::<usize>().map_err(|_| {
                            Error::invalid("config", format!("{key}: not an integer: `{s}`"))
                        })
                    })
                    .collect()
            })
            .transpose()
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find(['#', ';']) {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Environment variable consulted for the default output directory.
pub const OUT_DIR_ENV: &str = "EXPCONCAVE_OUT";

/// Assemble an experiment from a parsed config. Flag-level overrides are
/// applied by the caller afterwards.
pub fn experiment_from_config(cfg: &Config) -> Result<ExperimentConfig> {
    let problem = cfg
        .get("problem.name")
        .ok_or_else(|| Error::invalid("config", "missing required key problem.name"))?;
    let algorithms: Vec<AlgorithmSpec> = cfg
        .get_list("experiment.algorithms")
        .ok_or_else(|| Error::invalid("config", "missing required key experiment.algorithms"))?
        .iter()
        .map(|s| AlgorithmSpec::parse(s))
        .collect::<Result<_>>()?;
    let n_grid = cfg
        .get_usize_list("experiment.n_grid")?
        .ok_or_else(|| Error::invalid("config", "missing required key experiment.n_grid"))?;
    let mut out = ExperimentConfig::new(problem, algorithms, n_grid);
    if let Some(id) = cfg.get("experiment.id") {
        out.experiment_id = id.to_string();
    }
    out.noise_sigma = cfg.get_f64("problem.noise_sigma")?;
    if let Some(r) = cfg.get_usize("experiment.replicates")? {
        out.replicates = r;
    }
    if let Some(d) = cfg.get_f64("experiment.delta")? {
        out.delta = d;
    }
    if let Some(s) = cfg.get_u64("experiment.seed")? {
        out.master_seed = s;
    }
    if let Some(t) = cfg.get_usize("experiment.threads")? {
        out.threads = t;
    }
    out.out_dir = match cfg.get("experiment.out") {
        Some(dir) => PathBuf::from(dir),
        None => default_out_dir(),
    };
    if let Some(m) = cfg.get_usize("solver.max_iters")? {
        out.solver.max_iters = m;
    }
    if let Some(t) = cfg.get_f64("solver.tol")? {
        out.solver.tol = t;
    }
    if let Some(rule) = cfg.get("solver.step_rule") {
        out.solver.step_rule = match rule {
            "backtracking" => StepRule::Backtracking,
            other => match other.strip_prefix("fixed:") {
                Some(step) => StepRule::Fixed(step.parse::<f64>().map_err(|_| {
                    Error::invalid("config", format!("solver.step_rule: bad step `{step}`"))
                })?),
                None => {
                    return Err(Error::invalid(
                        "config",
                        "solver.step_rule must be `backtracking` or `fixed:<step>`",
                    ))
                }
            },
        };
    }
    out.online = OnlineOverrides {
        eta: cfg.get_f64("online.eta")?,
        resolution: cfg.get_usize("online.resolution")?,
        g: cfg.get_f64("online.G")?,
        d: cfg.get_f64("online.D")?,
        nu: cfg.get_f64("online.nu")?,
    };
    out.boost_delta = cfg.get_f64("boost.delta")?;
    if let Some(base) = cfg.get("boost.base") {
        out.boost_base = match base {
            "erm" => BoostBase::Erm,
            "penalized_erm" => BoostBase::PenalizedErm,
            other => {
                return Err(Error::invalid(
                    "config",
                    format!("boost.base must be erm or penalized_erm, got `{other}`"),
                ))
            }
        };
    }
    match cfg.get("msa.prior") {
        None | Some("uniform") => {}
        Some(_) => {
            let weights = cfg.get_f64_list("msa.prior")?.unwrap_or_default();
            if weights.is_empty() {
                return Err(Error::invalid("config", "msa.prior: empty weight list"));
            }
            out.msa_prior = Some(weights);
        }
    }
    out.overrides = InstanceOverrides {
        loss_kind: cfg.get("loss.kind").map(str::to_string),
        loss_eta: cfg.get_f64("loss.eta")?,
        loss_b: cfg.get_f64("loss.B")?,
        loss_l: cfg.get_f64("loss.L")?,
        domain: domain_from_config(cfg)?,
        class_file: cfg.get("msa.class_file").map(PathBuf::from),
    };
    Ok(out)
}

pub fn default_out_dir() -> PathBuf {
    std::env::var(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|_| PathBuf::from("out"))
}

/// Optional feasible-set override from `domain.*` keys.
fn domain_from_config(cfg: &Config) -> Result<Option<ConvexDomain>> {
    let Some(kind) = cfg.get("domain.kind") else {
        return Ok(None);
    };
    let domain = match kind {
        "l2_ball" => {
            let radius = cfg
                .get_f64("domain.radius")?
                .ok_or_else(|| Error::invalid("config", "domain.radius required for l2_ball"))?;
            let center = match cfg.get_f64_list("domain.center")? {
                Some(c) => c,
                None => {
                    let dim = cfg.get_usize("domain.dim")?.ok_or_else(|| {
                        Error::invalid("config", "l2_ball needs domain.center or domain.dim")
                    })?;
                    vec![0.0; dim]
                }
            };
            ConvexDomain::l2_ball(center, radius)?
        }
        "box" => {
            let lo = cfg
                .get_f64_list("domain.lo")?
                .ok_or_else(|| Error::invalid("config", "domain.lo required for box"))?;
            let hi = cfg
                .get_f64_list("domain.hi")?
                .ok_or_else(|| Error::invalid("config", "domain.hi required for box"))?;
            ConvexDomain::box_bounds(lo, hi)?
        }
        "simplex" => {
            let dim = cfg
                .get_usize("domain.dim")?
                .ok_or_else(|| Error::invalid("config", "domain.dim required for simplex"))?;
            ConvexDomain::simplex(dim)?
        }
        other => {
            return Err(Error::invalid(
                "config",
                format!("domain.kind must be l2_ball, box, or simplex, got `{other}`"),
            ))
        }
    };
    Ok(Some(domain))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_dotted_keys() {
        let cfg = Config::parse(
            "# comment\n[problem]\nname = sq_ball_2d  ; trailing\nnoise_sigma = 0.2\n\nexperiment.delta = 0.1\n[experiment]\nalgorithms = erm, confidence_boost\nn_grid = 256, 512\nreplicates = 3\n",
        )
        .unwrap();
        assert_eq!(cfg.get("problem.name"), Some("sq_ball_2d"));
        assert_eq!(cfg.get_f64("problem.noise_sigma").unwrap(), Some(0.2));
        assert_eq!(cfg.get_f64("experiment.delta").unwrap(), Some(0.1));
        let exp = experiment_from_config(&cfg).unwrap();
        assert_eq!(exp.algorithms.len(), 2);
        assert_eq!(exp.n_grid, vec![256, 512]);
        assert_eq!(exp.replicates, 3);
        assert!((exp.delta - 0.1).abs() < 1e-15);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(Config::parse("[unclosed\n").is_err());
        assert!(Config::parse("just a line\n").is_err());
        assert!(Config::parse("= value\n").is_err());
    }

    #[test]
    fn missing_required_keys_are_reported() {
        let cfg = Config::parse("[experiment]\nalgorithms = erm\nn_grid = 8\n").unwrap();
        let err = experiment_from_config(&cfg).unwrap_err();
        assert!(err.to_string().contains("problem.name"));
    }

    #[test]
    fn bad_numbers_name_the_key() {
        let cfg = Config::parse("[experiment]\ndelta = abc\n").unwrap();
        let err = cfg.get_f64("experiment.delta").unwrap_err();
        assert!(err.to_string().contains("experiment.delta"));
    }

    #[test]
    fn expert_csv_roundtrip() {
        use crate::boost::{Expert, ExpertClass};
        let dir = std::env::temp_dir().join(format!("expc_cfg_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("experts.csv");
        std::fs::write(&path, "0.5, 0.2\n-0.3, 0.1\n# comment\n").unwrap();
        let class = ExpertClass::from_csv_file(&path).unwrap();
        assert_eq!(class.len(), 2);
        assert_eq!(class.experts[0], Expert::Linear(vec![0.5, 0.2]));
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn domain_and_loss_overrides_apply_to_the_instance() {
        let cfg = Config::parse(
            "[problem]\nname = sq_interval\n[experiment]\nalgorithms = erm\nn_grid = 32\n\
             [domain]\nkind = box\nlo = -0.5\nhi = 0.5\n[loss]\neta = 0.01\n",
        )
        .unwrap();
        let exp = experiment_from_config(&cfg).unwrap();
        let inst = exp.problem_instance().unwrap();
        assert_eq!(inst.domain.diameter(), 1.0);
        assert_eq!(inst.loss.eta(), 0.01);
        // Narrower domain shrinks the analytic Lipschitz constant.
        assert!(inst.loss.lipschitz() < 3.6);
    }

    #[test]
    fn loss_kind_mismatch_is_rejected() {
        let cfg = Config::parse(
            "[problem]\nname = logistic_2d\n[experiment]\nalgorithms = erm\nn_grid = 32\n\
             [loss]\nkind = squared\n",
        )
        .unwrap();
        let exp = experiment_from_config(&cfg).unwrap();
        assert!(exp.problem_instance().is_err());
    }

    #[test]
    fn class_file_override_attaches_experts() {
        let dir = std::env::temp_dir().join(format!("expc_cls_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("experts.csv");
        std::fs::write(&path, "0.5\n-0.5\n0.0\n").unwrap();
        let cfg = Config::parse(&format!(
            "[problem]\nname = sq_interval\n[experiment]\nalgorithms = pm\nn_grid = 64\n\
             [msa]\nclass_file = {}\n",
            path.display()
        ))
        .unwrap();
        let exp = experiment_from_config(&cfg).unwrap();
        let inst = exp.problem_instance().unwrap();
        let msa = inst.msa().expect("class attached");
        assert_eq!(msa.class.len(), 3);
        assert!(msa.eta > 0.0 && msa.alpha > 0.0 && msa.lipschitz > 0.0);
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn prior_override_parsed() {
        let cfg = Config::parse(
            "[problem]\nname = experts_8\n[experiment]\nalgorithms = pm\nn_grid = 64\n[msa]\nprior = 0.5, 0.3, 0.2\n",
        )
        .unwrap();
        let exp = experiment_from_config(&cfg).unwrap();
        assert_eq!(exp.msa_prior, Some(vec![0.5, 0.3, 0.2]));
    }
}
