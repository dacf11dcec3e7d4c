//! Flag value parsers and the model flags shared by several commands.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use roughvol::sim::{
    BergomiParams, Correlation, HestonParams, ModelSpec, RBergomiParams, RHestonParams, RHestonScheme, SpotParams,
    VarianceModel,
};
use roughvol::ForwardVarianceCurve;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    Rbergomi,
    Rheston,
    Bergomi,
    Heston,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Hqe,
    Euler,
}

impl From<Scheme> for RHestonScheme {
    fn from(s: Scheme) -> Self {
        match s {
            Scheme::Hqe => RHestonScheme::Hqe,
            Scheme::Euler => RHestonScheme::Euler,
        }
    }
}

/// Variance model given either by flags or by a JSON file.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    /// Variance model.
    #[arg(long, value_enum)]
    pub model: Option<ModelName>,
    /// Model JSON: a model spec, or a calibration result whose `model` is used.
    #[arg(long, conflicts_with = "model")]
    pub model_file: Option<PathBuf>,
    /// Hurst exponent (rough models).
    #[arg(long)]
    pub h: Option<f64>,
    /// Vol-of-vol.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Mean-reversion speed of the variance.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Initial variance (Heston).
    #[arg(long)]
    pub v0: Option<f64>,
    /// Spot-variance correlation.
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    /// Forward variance: `flat:V`, `pw:T1=V1,T2=V2[,left=V0]` or a curve JSON file.
    #[arg(long)]
    pub xi0: Option<String>,
    /// Rough Heston discretization.
    #[arg(long, value_enum, default_value_t)]
    pub scheme: Scheme,
}

fn need(v: Option<f64>, flag: &str, model: ModelName) -> Result<f64, Failure> {
    v.ok_or_else(|| config_err(format!("--{flag} is required for --model {}", model_str(model))))
}

pub fn model_str(m: ModelName) -> &'static str {
    match m {
        ModelName::Rbergomi => "rbergomi",
        ModelName::Rheston => "rheston",
        ModelName::Bergomi => "bergomi",
        ModelName::Heston => "heston",
    }
}

impl ModelArgs {
    /// Builds and validates the model with mean reversion `a`.
    pub fn build(&self, a: f64) -> Result<ModelSpec<f64>, Failure> {
        let spec = match (&self.model_file, self.model) {
            (Some(path), _) => {
                let mut spec = read_model_file(path)?;
                spec.spot.mean_reversion = a;
                if let Some(rho) = self.rho {
                    spec.spot.corr = Correlation::Scalar(rho);
                }
                spec
            }
            (None, Some(m)) => {
                let xi0 = parse_curve(
                    self.xi0
                        .as_deref()
                        .ok_or_else(|| config_err(format!("--xi0 is required for --model {}", model_str(m))))?,
                )?;
                let variance = match m {
                    ModelName::Rbergomi => VarianceModel::RBergomi(RBergomiParams {
                        hurst: need(self.h, "h", m)?,
                        eta: need(self.eta, "eta", m)?,
                        xi0,
                    }),
                    ModelName::Rheston => VarianceModel::RHeston(RHestonParams {
                        hurst: need(self.h, "h", m)?,
                        eta: need(self.eta, "eta", m)?,
                        kappa: need(self.kappa, "kappa", m)?,
                        xi0,
                        scheme: self.scheme.into(),
                    }),
                    ModelName::Bergomi => VarianceModel::Bergomi(BergomiParams {
                        eta: need(self.eta, "eta", m)?,
                        kappa: need(self.kappa, "kappa", m)?,
                        xi0,
                    }),
                    ModelName::Heston => VarianceModel::Heston(HestonParams {
                        eta: need(self.eta, "eta", m)?,
                        kappa: need(self.kappa, "kappa", m)?,
                        v0: need(self.v0, "v0", m)?,
                        vbar: xi0,
                    }),
                };
                ModelSpec::new(variance, SpotParams::new(a, need(self.rho, "rho", m)?))
            }
            (None, None) => return Err(config_err("one of --model or --model-file is required")),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn input_files(&self) -> Vec<PathBuf> {
        let mut files: Vec<PathBuf> = self.model_file.iter().cloned().collect();
        if let Some(x) = &self.xi0 {
            if !x.starts_with("flat:") && !x.starts_with("pw:") {
                files.push(PathBuf::from(x));
            }
        }
        files
    }
}

fn read_json(path: &std::path::Path) -> Result<serde_json::Value, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn read_model_file(path: &std::path::Path) -> Result<ModelSpec<f64>, Failure> {
    let mut value = read_json(path)?;
    if let Some(inner) = value.get_mut("model").filter(|m| m.is_object()) {
        value = inner.take();
    }
    serde_json::from_value(value).map_err(|e| config_err(format!("{}: not a model spec: {e}", path.display())))
}

pub fn parse_curve(s: &str) -> Result<ForwardVarianceCurve<f64>, Failure> {
    if let Some(v) = s.strip_prefix("flat:") {
        return Ok(ForwardVarianceCurve::constant(parse_f64(v)?)?);
    }
    if let Some(body) = s.strip_prefix("pw:") {
        let mut left = None;
        let (mut knots, mut levels) = (Vec::new(), Vec::new());
        for item in body.split(',') {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| config_err(format!("bad curve point {item:?}, expected T=V")))?;
            if k.trim() == "left" {
                left = Some(parse_f64(v)?);
            } else {
                knots.push(parse_f64(k)?);
                levels.push(parse_f64(v)?);
            }
        }
        return Ok(match left {
            Some(l) => ForwardVarianceCurve::new(l, knots, levels)?,
            None => ForwardVarianceCurve::flat_start(knots, levels)?,
        });
    }
    let path = std::path::Path::new(s);
    let curve: ForwardVarianceCurve<f64> = serde_json::from_value(read_json(path)?)
        .map_err(|e| config_err(format!("{}: not a curve: {e}", path.display())))?;
    curve.validate()?;
    Ok(curve)
}

pub fn parse_f64(s: &str) -> Result<f64, Failure> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| config_err(format!("not a number: {s:?}")))
}

/// `lo:hi:n` (inclusive, evenly spaced) or a comma list.
pub fn parse_points(s: &str) -> Result<Vec<f64>, Failure> {
    parse_points_scaled(s, 1.0)
}

/// Drops the binary noise of spacing and scaling (`1.15 * 100` prints as `115`).
fn tidy(x: f64) -> f64 {
    let r = (x * 1e10).round() / 1e10;
    if (r - x).abs() <= 1e-12 * x.abs().max(1.0) {
        r
    } else {
        x
    }
}

/// As [`parse_points`], with every value multiplied by `scale`.
pub fn parse_points_scaled(s: &str, scale: f64) -> Result<Vec<f64>, Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    let points: Vec<f64> = match parts.as_slice() {
        [lo, hi, n] => {
            let (lo, hi) = (parse_f64(lo)?, parse_f64(hi)?);
            let n: usize = n
                .trim()
                .parse()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| config_err(format!("bad point count in {s:?}")))?;
            if n == 1 {
                vec![lo]
            } else {
                (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
            }
        }
        [_] => s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(parse_f64)
            .collect::<Result<_, _>>()?,
        _ => return Err(config_err(format!("expected lo:hi:n or a comma list, got {s:?}"))),
    };
    Ok(points.into_iter().map(|x| tidy(x * scale)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_and_lists() {
        let r = parse_points("0.05:0.40:8").unwrap();
        assert_eq!(r.len(), 8);
        assert_eq!((r[1], r[7]), (0.1, 0.4));
        assert_eq!(parse_points("0,0.5,1,2").unwrap(), vec![0.0, 0.5, 1.0, 2.0]);
        assert!(parse_points("").unwrap().is_empty());
        assert!(parse_points("1:2").is_err());
        assert!(parse_points("1:2:0").is_err());
        assert_eq!(parse_points_scaled("0.85:1.15:7", 100.0).unwrap(), [85.0, 90.0, 95.0, 100.0, 105.0, 110.0, 115.0]);
    }

    #[test]
    fn curves() {
        assert_eq!(parse_curve("flat:0.04").unwrap().eval(3.0), 0.04);
        let c = parse_curve("pw:0.5=0.06,1=0.05,left=0.09").unwrap();
        assert!((c.eval(0.25) - 0.075).abs() < 1e-12);
        assert_eq!(parse_curve("pw:0.5=0.06").unwrap().eval(0.1), 0.06);
        assert!(parse_curve("flat:-1").is_err());
    }

    #[test]
    fn rbergomi_needs_negative_rho() {
        let args = ModelArgs {
            model: Some(ModelName::Rbergomi),
            h: Some(0.1),
            eta: Some(1.5),
            rho: Some(0.2),
            xi0: Some("flat:0.04".into()),
            ..Default::default()
        };
        let err = args.build(0.5).unwrap_err();
        assert!(matches!(err, Failure::Config(ref m) if m.contains("rho < 0")), "{err:?}");
    }
}
