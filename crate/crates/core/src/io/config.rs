//! Run configuration in TOML. Unknown keys are rejected at every level.
//!
//! ```toml
//! seed = 3
//! schedule = "pow:8:4"
//! algorithm = "ifb"
//!
//! [problem]
//! kind = "lasso"
//! m = 100
//! n = 256
//! s = 10
//!
//! [solver]
//! tol = 1e-6
//!
//! [output]
//! trace = "trace.csv"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::libsvm::parse_libsvm;
use super::trace_io::TraceFormat;
use super::load_instance;
use crate::error::{Error, Result};
use crate::problems::{
    gen_lasso_data, gen_logistic_data, gen_qp_data, InstanceData, LogisticGenParams, LogisticLipschitz,
};
use crate::schedules::ScheduleKind;
use crate::solver::{Algorithm, SolverOptions};

/// Environment variable naming the default directory for relative dataset paths.
pub const DATA_DIR_ENV: &str = "IFB_DATA_DIR";

fn default_delta_lasso() -> f64 {
    1.0
}

fn default_delta_logistic() -> f64 {
    1e-2
}

/// Where the problem instance comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// Gaussian LASSO with a planted `s`-sparse signal.
    Lasso {
        m: usize,
        n: usize,
        s: usize,
        #[serde(default = "default_delta_lasso")]
        delta: f64,
    },
    /// Synthetic ℓ₁-regularized logistic regression.
    Logistic(LogisticGenParams),
    /// Box-constrained strongly convex QP of dimension `m` (even).
    Qp { m: usize },
    /// ℓ₁-regularized logistic regression on a LIBSVM file.
    Libsvm {
        path: PathBuf,
        #[serde(default = "default_delta_logistic")]
        delta: f64,
        #[serde(default)]
        lipschitz: LogisticLipschitz,
    },
    /// An instance file written by `gen`.
    File { path: PathBuf },
}

impl ProblemSpec {
    /// Materializes the instance; generated kinds are deterministic in `seed`.
    pub fn instance_data(&self, seed: u64) -> Result<InstanceData> {
        match self {
            ProblemSpec::Lasso { m, n, s, delta } => {
                if !(delta.is_finite() && *delta > 0.0) {
                    return Err(Error::invalid("delta must be positive"));
                }
                let mut data = gen_lasso_data(*m, *n, *s, seed)?;
                if let InstanceData::Lasso { delta: d, .. } = &mut data {
                    *d = *delta;
                }
                Ok(data)
            }
            ProblemSpec::Logistic(params) => gen_logistic_data(params, seed),
            ProblemSpec::Qp { m } => gen_qp_data(*m, seed),
            ProblemSpec::Libsvm { path, delta, lipschitz } => {
                let data = parse_libsvm(resolve_data_path(path))?;
                Ok(InstanceData::Logistic {
                    features: data.features.into(),
                    labels: data.labels,
                    delta: *delta,
                    lipschitz: *lipschitz,
                })
            }
            ProblemSpec::File { path } => load_instance(resolve_data_path(path)),
        }
    }
}

/// Relative paths that do not exist under the working directory are looked
/// up under `$IFB_DATA_DIR`.
pub fn resolve_data_path(path: &Path) -> PathBuf {
    if path.is_absolute() || path.exists() {
        return path.to_path_buf();
    }
    match std::env::var_os(DATA_DIR_ENV) {
        Some(dir) if !dir.is_empty() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    pub format: TraceFormat,
}

fn default_schedule() -> ScheduleKind {
    ScheduleKind::FistaClassic
}

fn default_algorithm() -> Algorithm {
    Algorithm::Ifb
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_schedule")]
    pub schedule: ScheduleKind,
    #[serde(default = "default_algorithm")]
    pub algorithm: Algorithm,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub output: OutputSpec,
}

impl RunConfig {
    pub fn new(problem: ProblemSpec) -> Self {
        RunConfig {
            seed: default_seed(),
            schedule: default_schedule(),
            algorithm: default_algorithm(),
            problem,
            solver: SolverOptions::default(),
            output: OutputSpec::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invalid(format!("config not representable: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml_string()?).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.solver.validate()
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{Modification, Restart};

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig::new(ProblemSpec::Logistic(LogisticGenParams::default()));
        cfg.seed = 42;
        cfg.schedule = "pow:0.5:0.5".parse().unwrap();
        cfg.algorithm = Algorithm::Restart;
        cfg.solver.tol = 1e-8;
        cfg.solver.restart = Restart::FixedAdaptive { period: 200 };
        cfg.solver.modification = Modification::Both;
        cfg.solver.x0 = Some(vec![0.1, -0.25]);
        cfg.output.trace = Some("out/t.jsonl".into());
        cfg.output.format = TraceFormat::JsonLines;
        let text = cfg.to_toml_string().unwrap();
        let back = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml_string().unwrap(), text);
    }

    #[test]
    fn every_problem_kind_round_trips() {
        for p in [
            ProblemSpec::Lasso { m: 10, n: 20, s: 3, delta: 0.5 },
            ProblemSpec::Qp { m: 8 },
            ProblemSpec::Libsvm {
                path: "w4a".into(),
                delta: 1e-2,
                lipschitz: LogisticLipschitz::Standard,
            },
            ProblemSpec::File { path: "inst.json".into() },
        ] {
            let cfg = RunConfig::new(p);
            assert_eq!(RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap(), cfg);
        }
    }

    #[test]
    fn minimal_file_takes_defaults() {
        let cfg = RunConfig::from_toml_str("[problem]\nkind = \"qp\"\nm = 4\n").unwrap();
        assert_eq!(cfg.seed, 1);
        assert_eq!(cfg.schedule, ScheduleKind::FistaClassic);
        assert_eq!(cfg.solver, SolverOptions::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        for text in [
            "colour = 1\n[problem]\nkind = \"qp\"\nm = 4\n",
            "[problem]\nkind = \"qp\"\nm = 4\nn = 3\n",
            "[problem]\nkind = \"qp\"\nm = 4\n[solver]\nstep = 1\n",
            "[problem]\nkind = \"logistic\"\nsamples = 4\nwidth = 2\n",
            "[problem]\nkind = \"qp\"\nm = 4\n[output]\npath = \"x\"\n",
        ] {
            assert!(matches!(RunConfig::from_toml_str(text), Err(Error::Parse { .. })), "{text}");
        }
    }

    #[test]
    fn bad_values_rejected() {
        let text = "schedule = \"exp:2\"\n[problem]\nkind = \"qp\"\nm = 4\n";
        assert!(RunConfig::from_toml_str(text).is_err());
        let text = "[problem]\nkind = \"qp\"\nm = 4\n[solver]\nmu = 1.5\n";
        assert!(RunConfig::from_toml_str(text).is_err());
    }

    #[test]
    fn lasso_delta_overrides_generator() {
        let spec = ProblemSpec::Lasso { m: 5, n: 8, s: 2, delta: 0.25 };
        match spec.instance_data(3).unwrap() {
            InstanceData::Lasso { delta, .. } => assert_eq!(delta, 0.25),
            _ => panic!(),
        }
    }
}
