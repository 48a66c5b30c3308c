//! Experiment configuration: TOML files layered over per-experiment defaults.

use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use halfheat::coefficients::CoefficientKind;
use halfheat::oscillation::OscillationCase;
use halfheat::solver::SolverOptions;
use halfheat::Grid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Identities,
    L2,
    LpSweep,
    TailDecay,
    Oscillation,
    Assumptions,
    Solve,
    Oracle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub d: usize,
    pub n_t: usize,
    /// One entry per axis, or a single entry used for every axis.
    pub n_x: Vec<usize>,
    pub l_t: f64,
    pub l_x: Vec<f64>,
}

impl GridSpec {
    fn per_axis<T: Copy>(v: &[T], d: usize, name: &str) -> anyhow::Result<Vec<T>> {
        match v.len() {
            1 => Ok(vec![v[0]; d]),
            n if n == d => Ok(v.to_vec()),
            n => bail!("grid.{name} has {n} entries for d = {d}"),
        }
    }

    pub fn build(&self) -> anyhow::Result<Grid> {
        let n_x = Self::per_axis(&self.n_x, self.d, "n_x")?;
        let l_x = Self::per_axis(&self.l_x, self.d, "l_x")?;
        Ok(Grid::new(self.d, self.n_t, &n_x, self.l_t, &l_x)?)
    }

    /// The same periods with every sample count doubled.
    pub fn doubled(&self) -> Self {
        Self {
            n_t: self.n_t * 2,
            n_x: self.n_x.iter().map(|n| n * 2).collect(),
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSpec {
    #[serde(flatten)]
    pub kind: CoefficientKind,
    pub delta: f64,
    pub roughness_scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSpec {
    /// Expressions for `h`, `g_i` and `f`; empty means seeded band-limited noise.
    pub h: String,
    pub g: Vec<String>,
    pub f: String,
    pub band: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentitiesSpec {
    pub coercivity_fields: usize,
    pub deltas: Vec<f64>,
    pub kinds: Vec<CoefficientKind>,
    pub quadrature_n_t: usize,
    pub quadrature_signals: Vec<String>,
    pub quadrature_truncations: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSweepSpec {
    pub kinds: Vec<CoefficientKind>,
    pub refine: bool,
    pub stability_limit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailSpec {
    pub expression: String,
    pub k_min: u32,
    pub k_max: u32,
    pub slope_limit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillationSpec {
    pub cases: Vec<OscillationCase>,
    pub kappa: Vec<f64>,
    pub outer_radius: f64,
    /// Inner edge of the source support, `|x| ≥ source_radius`.
    pub source_radius: f64,
    pub slope_limit_full: f64,
    pub slope_limit_x1: f64,
    pub local_estimate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionSpec {
    pub r0: f64,
    pub kinds: Vec<CoefficientKind>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub dir: String,
    pub write_fields: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub trials: usize,
    pub lambda: Vec<f64>,
    pub p: Vec<f64>,
    pub grid: GridSpec,
    pub coefficients: CoefficientSpec,
    pub solver: SolverOptions,
    pub data: DataSpec,
    pub identities: IdentitiesSpec,
    pub lp_sweep: LpSweepSpec,
    pub tail: TailSpec,
    pub oscillation: OscillationSpec,
    pub assumptions: AssumptionSpec,
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn default_for(experiment: ExperimentKind) -> Self {
        use CoefficientKind as K;
        let grid = |d, n_t, n_x, l_t, l_x| GridSpec {
            d,
            n_t,
            n_x: vec![n_x],
            l_t,
            l_x: vec![l_x],
        };
        let mut c = Self {
            experiment,
            seed: 1,
            trials: 20,
            lambda: vec![1.0],
            p: vec![2.0],
            grid: grid(1, 64, 64, 4.0, 2.0),
            coefficients: CoefficientSpec {
                kind: K::TimePiecewise { n_jumps: 3 },
                delta: 0.25,
                roughness_scale: 0.25,
            },
            solver: SolverOptions::default(),
            data: DataSpec {
                h: String::new(),
                g: Vec::new(),
                f: String::new(),
                band: 0.25,
            },
            identities: IdentitiesSpec {
                coercivity_fields: 100,
                deltas: vec![0.25, 0.5, 1.0],
                kinds: vec![
                    K::TimePiecewise { n_jumps: 3 },
                    K::X1Piecewise { n_jumps: 3 },
                    K::Checkerboard { epsilon: 0.5 },
                    K::Smooth,
                ],
                quadrature_n_t: 1024,
                quadrature_signals: vec![
                    "cos(4*t)".into(),
                    "sin(3*t) + 0.5*cos(7*t)".into(),
                    "exp(cos(t))".into(),
                ],
                quadrature_truncations: vec![8, 16, 32],
            },
            lp_sweep: LpSweepSpec {
                kinds: vec![K::TimePiecewise { n_jumps: 3 }, K::X1Piecewise { n_jumps: 3 }],
                refine: true,
                stability_limit: 1.5,
            },
            tail: TailSpec {
                expression: "gauss(0, 1)".into(),
                k_min: 2,
                k_max: 6,
                slope_limit: -0.4,
            },
            oscillation: OscillationSpec {
                cases: vec![
                    OscillationCase::CalUTimeCoeffs,
                    OscillationCase::UHeat,
                    OscillationCase::CalUPrimeThetaX1,
                ],
                kappa: vec![4.0, 8.0, 16.0],
                outer_radius: 1.0,
                source_radius: 1.25,
                slope_limit_full: -0.9,
                slope_limit_x1: -0.45,
                local_estimate: true,
            },
            assumptions: AssumptionSpec {
                r0: 0.5,
                kinds: vec![
                    K::Constant,
                    K::TimePiecewise { n_jumps: 3 },
                    K::X1Piecewise { n_jumps: 3 },
                    K::Checkerboard { epsilon: 0.1 },
                    K::Checkerboard { epsilon: 0.2 },
                    K::Checkerboard { epsilon: 0.4 },
                    K::Smooth,
                ],
            },
            output: OutputSpec {
                dir: "out".into(),
                write_fields: false,
            },
        };
        match experiment {
            ExperimentKind::Identities => {
                c.grid = grid(1, 256, 32, std::f64::consts::TAU, 1.0);
                c.lambda = vec![1.0, 4.0];
                c.coefficients.delta = 0.5;
                c.solver.rtol = 1e-12;
            }
            ExperimentKind::L2 => {
                c.trials = 100;
                c.lambda = vec![1.0, 4.0, 16.0, 64.0];
                c.coefficients.kind = K::Constant;
                c.coefficients.delta = 1.0;
            }
            ExperimentKind::LpSweep => {
                c.trials = 1;
                c.lambda = vec![1.0, 4.0, 16.0, 64.0];
                c.p = vec![1.5, 3.0, 4.0];
                c.solver.restart = 20;
            }
            ExperimentKind::TailDecay => {
                c.trials = 1;
                c.grid = grid(1, 2048, 8, 512.0, 1.0);
                c.p = vec![2.0, 4.0];
            }
            ExperimentKind::Oscillation => {
                c.trials = 1;
                c.grid = grid(1, 512, 512, 4.0, 4.0);
                c.solver.rtol = 1e-11;
            }
            ExperimentKind::Assumptions => {
                c.trials = 1;
                c.grid = grid(2, 16, 32, 4.0, 2.0);
                c.coefficients.delta = 0.5;
                c.coefficients.roughness_scale = 0.125;
            }
            ExperimentKind::Solve => {
                c.trials = 1;
                c.output.write_fields = true;
            }
            ExperimentKind::Oracle => {
                c.trials = 1;
                c.coefficients.kind = K::Constant;
                c.output.write_fields = true;
            }
        }
        c
    }

    /// Defaults for `experiment`, overlaid with the tables of a TOML document.
    pub fn from_toml_str(experiment: ExperimentKind, src: &str) -> anyhow::Result<Self> {
        let user: toml::Table = toml::from_str(src).context("invalid config")?;
        let mut base = toml::Table::try_from(Self::default_for(experiment))?;
        merge(&mut base, user);
        base.insert("experiment".into(), toml::Value::try_from(experiment)?);
        let cfg: Self = base.try_into().context("invalid config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(experiment: ExperimentKind, path: &Path) -> anyhow::Result<Self> {
        let src = std::fs::read_to_string(path)
            .map_err(|_| anyhow::anyhow!("config not found: {}", path.display()))?;
        Self::from_toml_str(experiment, &src)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if let Some(p) = self.p.iter().find(|p| !(**p > 1.0 && p.is_finite())) {
            bail!("p = {p} must lie strictly between 1 and infinity");
        }
        if self.lambda.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            bail!("lambda entries must be finite and non-negative");
        }
        self.grid.build()?;
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form, shortened to 16 characters.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(digest)[..16].to_string()
    }
}

fn merge(base: &mut toml::Table, user: toml::Table) {
    for (k, v) in user {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) => merge(b, u),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Independent per-stream seeds derived from the master seed (SplitMix64 finalizer).
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
