use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use finsler_core::algebra::ModelParams;
use finsler_core::metric::MetricKind;
use finsler_core::{FinslerMetricSpec, Point};

/// Rejected configuration; maps to exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

// serde cannot combine `deny_unknown_fields` with the flattened kind
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    #[serde(flatten)]
    pub kind: MetricKind,
    pub dim: usize,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            kind: MetricKind::Funk { sign: 1 },
            dim: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Local error tolerance handed to the integrator.
    pub ode_tol: f64,
    /// Pointwise identities and curvature fits.
    pub residual_tol: f64,
    /// Norm drift and geodesic collinearity.
    pub invariant_tol: f64,
    /// Transport followed by transport along the reversed curve.
    pub inverse_tol: f64,
    /// Relative error of loop-based curvature estimates at the smallest side.
    pub loop_tol: f64,
    /// Smallest accepted log-log slope of the loop residual.
    pub min_order: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ode_tol: 1e-10,
            residual_tol: 1e-6,
            invariant_tol: 1e-8,
            inverse_tol: 1e-7,
            loop_tol: 1e-2,
            min_order: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sampling {
    pub seed: u64,
    /// Random `(x, y)` pairs for pointwise checks.
    pub samples: usize,
    /// Base points are drawn from the ball of this radius.
    pub radius: f64,
    /// Vectors on the indicatrix (or unit sphere) per grid.
    pub grid: usize,
    /// Points used by the more expensive checks (`∇R`, geodesics).
    pub probe_points: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            seed: 0,
            samples: 200,
            radius: 0.6,
            grid: 20,
            probe_points: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransportConfig {
    /// Base point of loops; the origin when absent.
    pub base: Option<Vec<f64>>,
    pub plane: (usize, usize),
    pub side: f64,
    /// Decreasing side lengths for loop-curvature estimates.
    pub sides: Vec<f64>,
    pub geodesic_time: f64,
}

impl Default for TransportConfig {
    fn default() -> Self {
        Self {
            base: None,
            plane: (0, 1),
            side: 0.1,
            sides: vec![0.2, 0.1, 0.05, 0.02],
            geodesic_time: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgebraConfig {
    pub n: usize,
    /// Rational literals such as `"1/2"` or `"-3"`.
    pub c: String,
    pub lambda: String,
    pub p_max: usize,
    /// Defaults to `2 p_max + 2` rounds.
    pub bracket_depth_cap: Option<usize>,
    /// Longest multi-index in the bracket recursion checks.
    pub formula_max_len: u16,
}

impl Default for AlgebraConfig {
    fn default() -> Self {
        Self {
            n: 3,
            c: "1/2".into(),
            lambda: "-1/4".into(),
            p_max: 4,
            bracket_depth_cap: None,
            formula_max_len: 3,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub metric: MetricConfig,
    pub tolerances: Tolerances,
    pub sampling: Sampling,
    pub transport: TransportConfig,
    pub algebra: AlgebraConfig,
    /// Directory for `report.json` and CSV/JSON artifacts.
    pub out: Option<PathBuf>,
}

/// Command-line values that replace fields of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub metric: Option<String>,
    pub dim: Option<usize>,
    pub sign: Option<i8>,
    pub alpha: Option<f64>,
    pub scale: Option<f64>,
    pub samples: Option<usize>,
    pub grid: Option<usize>,
    pub n: Option<usize>,
    pub c: Option<String>,
    pub lambda: Option<String>,
    pub p_max: Option<usize>,
}

fn parse_rational(s: &str, what: &str) -> Result<BigRational, ConfigError> {
    BigRational::from_str(s.trim()).map_err(|_| bad(format!("{what}: `{s}` is not a rational number")))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| bad(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), ConfigError> {
        if let Some(s) = o.seed {
            self.sampling.seed = s;
        }
        if let Some(p) = &o.out {
            self.out = Some(p.clone());
        }
        if let Some(name) = &o.metric {
            self.metric.kind = match name.as_str() {
                "euclidean" => MetricKind::Euclidean,
                "funk" => MetricKind::Funk { sign: 1 },
                "bryant-shen" | "bryant_shen" => MetricKind::BryantShen {
                    alpha: std::f64::consts::FRAC_PI_6,
                },
                other => return Err(bad(format!("unknown metric `{other}`"))),
            };
        }
        if let Some(sign) = o.sign {
            match &mut self.metric.kind {
                MetricKind::Funk { sign: s } => *s = sign,
                _ => return Err(bad("--sign applies to the Funk metric only")),
            }
        }
        if let Some(alpha) = o.alpha {
            match &mut self.metric.kind {
                MetricKind::BryantShen { alpha: a } => *a = alpha,
                _ => return Err(bad("--alpha applies to the Bryant-Shen metric only")),
            }
        }
        if let Some(factor) = o.scale {
            self.metric.kind = MetricKind::Scaled {
                base: Box::new(self.metric.kind.clone()),
                factor,
            };
        }
        if let Some(d) = o.dim {
            self.metric.dim = d;
        }
        if let Some(s) = o.samples {
            self.sampling.samples = s;
        }
        if let Some(g) = o.grid {
            self.sampling.grid = g;
        }
        if let Some(n) = o.n {
            self.algebra.n = n;
        }
        if let Some(c) = &o.c {
            self.algebra.c = c.clone();
        }
        if let Some(l) = &o.lambda {
            self.algebra.lambda = l.clone();
        }
        if let Some(p) = o.p_max {
            self.algebra.p_max = p;
        }
        Ok(())
    }

    /// Checks every invariant and returns the metric.
    pub fn validate(&self) -> Result<FinslerMetricSpec, ConfigError> {
        let t = &self.tolerances;
        for (name, v) in [
            ("ode_tol", t.ode_tol),
            ("residual_tol", t.residual_tol),
            ("invariant_tol", t.invariant_tol),
            ("inverse_tol", t.inverse_tol),
            ("loop_tol", t.loop_tol),
            ("min_order", t.min_order),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(bad(format!("tolerance {name} must be positive, got {v}")));
            }
        }
        let metric = FinslerMetricSpec::new(self.metric.kind.clone(), self.metric.dim)
            .map_err(|e| bad(e.to_string()))?;
        let s = &self.sampling;
        if s.samples == 0 || s.grid == 0 || s.probe_points == 0 {
            return Err(bad("sample, grid and probe counts must be positive"));
        }
        if !(s.radius.is_finite() && s.radius > 0.0) {
            return Err(bad(format!("sampling radius must be positive, got {}", s.radius)));
        }
        metric
            .check_point(&Point::new(
                std::iter::once(s.radius).chain(std::iter::repeat(0.0)).take(metric.dim()).collect(),
            ))
            .map_err(|e| bad(format!("sampling radius {} leaves the domain: {e}", s.radius)))?;
        let tr = &self.transport;
        let (i, j) = tr.plane;
        if i == j || i >= metric.dim() || j >= metric.dim() {
            return Err(bad(format!("plane ({i}, {j}) is not a pair of distinct coordinates")));
        }
        if !(tr.side.is_finite() && tr.side > 0.0) {
            return Err(bad("loop side must be positive"));
        }
        if tr.sides.is_empty() || tr.sides.iter().any(|v| !(*v > 0.0)) || tr.sides.windows(2).any(|w| w[1] >= w[0]) {
            return Err(bad("loop sides must be positive and strictly decreasing"));
        }
        if !(tr.geodesic_time.is_finite() && tr.geodesic_time > 0.0) {
            return Err(bad("geodesic_time must be positive"));
        }
        let base = self.base_point(&metric);
        if base.dim() != metric.dim() {
            return Err(bad("loop base point has the wrong dimension"));
        }
        metric.check_point(&base).map_err(|e| bad(e.to_string()))?;
        self.model_params()?;
        Ok(metric)
    }

    pub fn base_point(&self, metric: &FinslerMetricSpec) -> Point {
        match &self.transport.base {
            Some(b) => Point::new(b.clone()),
            None => Point::zeros(metric.dim()),
        }
    }

    pub fn model_params(&self) -> Result<ModelParams, ConfigError> {
        let a = &self.algebra;
        let c = parse_rational(&a.c, "algebra.c")?;
        let lambda = parse_rational(&a.lambda, "algebra.lambda")?;
        ModelParams::new(a.n, c, lambda).map_err(|e| bad(e.to_string()))
    }
}
