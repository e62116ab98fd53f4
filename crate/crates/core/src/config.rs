//! TOML run configuration: `[model]`, `[method]`, `[init]`, `[output]` and
//! an optional `[bench]` table.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::energy::{EnergyModel, GinzburgLandau, GinzburgLandauParams, LandauBrazovskii, LandauBrazovskiiParams};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{read_field, Field, Grid};
use crate::operators::BackendKind;
use crate::saddle::{InitialDirection, Method, SearchConfig};

/// Largest allowed |mean(φ0) − m|.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub method: MethodSection,
    pub init: InitSection,
    #[serde(default)]
    pub output: OutputSection,
    pub bench: Option<BenchSection>,
    /// Directory of the config file; relative field paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// `ginzburg-landau` or `landau-brazovskii`.
    pub name: String,
    pub backend: Option<String>,
    /// Points per axis; the length of the list sets the dimension.
    pub n: Vec<usize>,
    /// Domain lengths; defaults to `[1]` (GL) or `[16π/√3, 8π]` (LB).
    pub length: Option<Vec<f64>>,
    pub mass: Option<f64>,
    pub kappa: Option<f64>,
    pub tau: Option<f64>,
    pub xi: Option<f64>,
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSection {
    pub name: Option<String>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub dt: Option<f64>,
    pub inner_iters: Option<usize>,
    pub inner_tol: Option<f64>,
    pub max_inner_iters: Option<usize>,
    pub outer_tol: Option<f64>,
    pub max_cycles: Option<usize>,
    pub gad_gamma: Option<f64>,
    pub stabilization: Option<f64>,
    pub rank_one_shift: Option<f64>,
    pub minmode_tol: Option<f64>,
    pub minmode_max_iters: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    pub expr: Option<String>,
    pub field: Option<PathBuf>,
    /// `random` (default) or `minmode`; GAD only.
    pub v0: Option<String>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    #[serde(default = "yes")]
    pub fields: bool,
    #[serde(default = "yes")]
    pub trace: bool,
    #[serde(default = "yes")]
    pub summary: bool,
    /// Record wall seconds in `trace.csv`; turn off for byte-reproducible traces.
    #[serde(default = "yes")]
    pub wall_time: bool,
    /// Run the index-1 check on the result and include it in the summary.
    #[serde(default = "yes")]
    pub verify: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: None, fields: true, trace: true, summary: true, wall_time: true, verify: true }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    /// Total translation steps per run.
    pub budgets: Vec<usize>,
    #[serde(default = "default_bench_methods")]
    pub methods: Vec<String>,
    /// Translation steps per cycle; defaults to `method.inner_iters`.
    pub inner_iters: Option<usize>,
    /// Timed repetitions per cell; the minimum is reported.
    #[serde(default = "one")]
    pub repeats: usize,
    /// Named starts; when empty the `[init]` start is timed as `init`.
    #[serde(default)]
    pub inits: Vec<BenchInit>,
}

fn default_bench_methods() -> Vec<String> {
    vec!["imf-projected".into(), "imf-h1".into()]
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchInit {
    pub name: String,
    pub expr: Option<String>,
    pub field: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = RunConfig::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.grid()?;
        cfg.search_config()?;
        if cfg.init.expr.is_some() == cfg.init.field.is_some() {
            return Err(Error::Config("[init] needs exactly one of `expr` or `field`".into()));
        }
        if let Some(b) = &cfg.bench {
            if b.repeats == 0 {
                return Err(Error::Config("[bench] repeats must be at least 1".into()));
            }
            for i in &b.inits {
                if i.expr.is_some() == i.field.is_some() {
                    return Err(Error::Config(format!("bench init {:?} needs exactly one of `expr` or `field`", i.name)));
                }
            }
            for m in &b.methods {
                let m: Method = m.parse()?;
                if !m.is_imf() {
                    return Err(Error::Config(format!("bench compares IMF methods, got {m}")));
                }
            }
        }
        Ok(cfg)
    }

    fn is_lb(&self) -> Result<bool> {
        match self.model.name.as_str() {
            "ginzburg-landau" | "gl" => Ok(false),
            "landau-brazovskii" | "lb" => Ok(true),
            other => Err(Error::Config(format!("unknown model {other:?}"))),
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        let lb = self.is_lb()?;
        let length = match &self.model.length {
            Some(l) => l.clone(),
            None if lb => {
                let pi = std::f64::consts::PI;
                vec![16.0 * pi / 3f64.sqrt(), 8.0 * pi]
            }
            None => vec![1.0; self.model.n.len()],
        };
        Grid::new(&self.model.n, &length)
    }

    pub fn mass(&self) -> Result<f64> {
        Ok(self.model.mass.unwrap_or(if self.is_lb()? { 0.0 } else { 0.6 }))
    }

    pub fn build_model(&self) -> Result<Box<dyn EnergyModel>> {
        let grid = self.grid()?;
        let lb = self.is_lb()?;
        let backend: BackendKind = match &self.model.backend {
            Some(b) => b.parse()?,
            None if lb => BackendKind::Spectral,
            None => BackendKind::FiniteDifference,
        };
        let mass = self.mass()?;
        let m = &self.model;
        if lb {
            if m.kappa.is_some() {
                return Err(Error::Config("kappa is a Ginzburg-Landau parameter".into()));
            }
            let d = LandauBrazovskiiParams::default();
            let params = LandauBrazovskiiParams {
                tau: m.tau.unwrap_or(d.tau),
                xi: m.xi.unwrap_or(d.xi),
                gamma: m.gamma.unwrap_or(d.gamma),
                mass,
            };
            Ok(Box::new(LandauBrazovskii::new(grid, backend, params)?))
        } else {
            if m.tau.is_some() || m.xi.is_some() || m.gamma.is_some() {
                return Err(Error::Config("tau, xi and gamma are Landau-Brazovskii parameters".into()));
            }
            let params = GinzburgLandauParams { kappa: m.kappa.unwrap_or(GinzburgLandauParams::default().kappa), mass };
            Ok(Box::new(GinzburgLandau::new(grid, backend, params)?))
        }
    }

    pub fn search_config(&self) -> Result<SearchConfig> {
        let d = SearchConfig::default();
        let m = &self.method;
        let method: Method = match &m.name {
            Some(n) => n.parse()?,
            None => d.method,
        };
        let v0: InitialDirection = match &self.init.v0 {
            Some(s) => s.parse()?,
            None => d.v0,
        };
        let cfg = SearchConfig {
            method,
            alpha: m.alpha.unwrap_or(d.alpha),
            beta: m.beta.unwrap_or(d.beta),
            dt: m.dt.unwrap_or(d.dt),
            inner_iters: m.inner_iters.unwrap_or(d.inner_iters),
            inner_tol: m.inner_tol.unwrap_or(d.inner_tol),
            max_inner_iters: m.max_inner_iters.unwrap_or(d.max_inner_iters),
            outer_tol: m.outer_tol.unwrap_or(d.outer_tol),
            max_cycles: m.max_cycles.unwrap_or(d.max_cycles),
            gad_gamma: m.gad_gamma.unwrap_or(d.gad_gamma),
            seed: self.init.seed.unwrap_or(d.seed),
            stabilization: m.stabilization.or(d.stabilization),
            rank_one_shift: m.rank_one_shift.or(d.rank_one_shift),
            minmode_tol: m.minmode_tol.unwrap_or(d.minmode_tol),
            minmode_max_iters: m.minmode_max_iters.unwrap_or(d.minmode_max_iters),
            v0,
            wall_time: self.output.wall_time,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The initial field, checked against the grid and the configured mass.
    pub fn initial_field(&self) -> Result<Field> {
        let phi = self.load_init(self.init.expr.as_deref(), self.init.field.as_deref())?;
        self.check_mass(&phi)?;
        Ok(phi)
    }

    /// The named bench initial fields, in config order.
    pub fn bench_fields(&self) -> Result<Vec<(String, Field)>> {
        let bench = self.bench.as_ref().ok_or_else(|| Error::Config("missing [bench] table".into()))?;
        if bench.inits.is_empty() {
            return Ok(vec![("init".into(), self.initial_field()?)]);
        }
        bench
            .inits
            .iter()
            .map(|i| {
                let phi = self.load_init(i.expr.as_deref(), i.field.as_deref())?;
                self.check_mass(&phi)?;
                Ok((i.name.clone(), phi))
            })
            .collect()
    }

    fn load_init(&self, expr: Option<&str>, field: Option<&Path>) -> Result<Field> {
        let grid = self.grid()?;
        match (expr, field) {
            (Some(e), None) => Expr::parse(e)?.sample(grid),
            (None, Some(p)) => {
                let f = read_field(self.resolve(p))?;
                if *f.grid() != grid {
                    return Err(Error::GridMismatch);
                }
                if !f.is_finite() {
                    return Err(Error::NonFinite("initial field"));
                }
                Ok(f)
            }
            _ => Err(Error::Config("an init needs exactly one of `expr` or `field`".into())),
        }
    }

    fn check_mass(&self, phi: &Field) -> Result<()> {
        let m = self.mass()?;
        let mean = phi.mean();
        if (mean - m).abs() > MASS_TOL {
            return Err(Error::Config(format!(
                "initial field has mean {mean:.15} but the model mass is {m} (|difference| must be <= {MASS_TOL:e})"
            )));
        }
        Ok(())
    }

    /// Resolves a path from the config against the config's directory.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}
