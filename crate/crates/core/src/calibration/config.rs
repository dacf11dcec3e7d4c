use serde::{Deserialize, Serialize};

use super::loss::DEFAULT_CUTOFF;
use crate::error::{invalid, Result};
use crate::sim::{RHestonScheme, DEFAULT_MEAN_REVERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    RBergomi,
    RHeston,
    Bergomi,
    Heston,
}

impl ModelFamily {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rbergomi" => Some(Self::RBergomi),
            "rheston" => Some(Self::RHeston),
            "bergomi" => Some(Self::Bergomi),
            "heston" => Some(Self::Heston),
            _ => None,
        }
    }

    /// Constant parameters besides the correlation, in vector order.
    pub fn base_names(self) -> &'static [&'static str] {
        match self {
            Self::RBergomi => &["hurst", "eta"],
            Self::RHeston => &["hurst", "eta", "kappa"],
            Self::Bergomi => &["eta", "kappa"],
            Self::Heston => &["eta", "kappa", "v0"],
        }
    }

    pub fn default_base_bounds(self) -> Vec<(f64, f64)> {
        match self {
            Self::RBergomi => vec![(0.001, 0.999), (0.001, 5.0)],
            Self::RHeston => vec![(0.001, 0.999), (0.001, 5.0), (0.001, 20.0)],
            Self::Bergomi => vec![(0.001, 30.0), (0.001, 100.0)],
            Self::Heston => vec![(0.001, 20.0), (0.001, 100.0), (0.0001, 4.0)],
        }
    }

    pub fn default_rho_bounds(self) -> (f64, f64) {
        match self {
            Self::RBergomi => (-1.0, 0.0),
            _ => (-1.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoMode {
    #[default]
    Scalar,
    PerMaturity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshConfig {
    Single { steps_per_year: usize },
    /// Fine grid for the first maturity, coarse grid for the others.
    Dual { fine: usize, coarse: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    /// Bounds for the family's base parameters; `None` uses the defaults.
    pub bounds: Option<Vec<(f64, f64)>>,
    pub rho_bounds: Option<(f64, f64)>,
    pub mean_reversion: f64,
    pub cutoff: f64,
    /// Target `|model ATM vol - market ATM vol|` of the level bisection.
    pub bisection_tol: f64,
    pub bisection_max_iter: usize,
    pub level_bounds: (f64, f64),
    pub global_budget: usize,
    pub local_budget: usize,
    pub seed: u64,
    pub n_paths: usize,
    pub mesh: MeshConfig,
    pub rho_mode: RhoMode,
    pub rheston_scheme: RHestonScheme,
    /// Fixed curve value at `t = 0`; `None` keeps the curve flat before the first maturity.
    pub xi0_left: Option<f64>,
    /// Stop the search and return the incumbent after this many seconds.
    pub timeout_seconds: Option<f64>,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            bounds: None,
            rho_bounds: None,
            mean_reversion: DEFAULT_MEAN_REVERSION,
            cutoff: DEFAULT_CUTOFF,
            bisection_tol: 1e-4,
            bisection_max_iter: 60,
            level_bounds: (1e-4, 4.0),
            global_budget: 200,
            local_budget: 100,
            seed: 0,
            n_paths: 100_000,
            mesh: MeshConfig::Dual { fine: 2000, coarse: 300 },
            rho_mode: RhoMode::Scalar,
            rheston_scheme: RHestonScheme::Hqe,
            xi0_left: None,
            timeout_seconds: None,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self, family: ModelFamily) -> Result<()> {
        let base = self.base_bounds(family);
        if base.len() != family.base_names().len() {
            return Err(invalid(format!(
                "{} bounds given, {} parameters to fit",
                base.len(),
                family.base_names().len()
            )));
        }
        let rho = self.rho_bounds(family);
        for (lo, hi) in base.iter().chain(std::iter::once(&rho)) {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(invalid(format!("bounds ({lo}, {hi}) are not ordered")));
            }
        }
        if rho.0 < -1.0 || rho.1 > 1.0 {
            return Err(invalid("correlation bounds must lie in [-1, 1]"));
        }
        let (lo, hi) = self.level_bounds;
        if !(lo > 0.0 && lo < hi) {
            return Err(invalid("level bounds must satisfy 0 < lo < hi"));
        }
        if self.global_budget == 0 {
            return Err(invalid("global budget must be at least 1"));
        }
        if self.n_paths == 0 {
            return Err(invalid("n_paths must be positive"));
        }
        if !(self.mean_reversion >= 0.0) || !(self.cutoff >= 0.0) || !(self.bisection_tol > 0.0) {
            return Err(invalid("mean reversion, cutoff and tolerance must be nonnegative"));
        }
        match self.mesh {
            MeshConfig::Single { steps_per_year } if steps_per_year == 0 => Err(invalid("steps_per_year must be positive")),
            MeshConfig::Dual { fine, coarse } if coarse == 0 || fine < coarse => {
                Err(invalid("dual mesh needs fine >= coarse > 0"))
            }
            _ => Ok(()),
        }
    }

    pub fn base_bounds(&self, family: ModelFamily) -> Vec<(f64, f64)> {
        self.bounds.clone().unwrap_or_else(|| family.default_base_bounds())
    }

    pub fn rho_bounds(&self, family: ModelFamily) -> (f64, f64) {
        self.rho_bounds.unwrap_or_else(|| family.default_rho_bounds())
    }

    /// Search-space bounds: base parameters then one correlation per maturity (or one).
    pub fn search_bounds(&self, family: ModelFamily, n_maturities: usize) -> Vec<(f64, f64)> {
        let mut b = self.base_bounds(family);
        let n_rho = match self.rho_mode {
            RhoMode::Scalar => 1,
            RhoMode::PerMaturity => n_maturities,
        };
        b.extend(std::iter::repeat_n(self.rho_bounds(family), n_rho));
        b
    }
}
