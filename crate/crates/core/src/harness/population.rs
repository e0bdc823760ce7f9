use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::harness::flights::{generate_flights_raw, FlightsParams};
use crate::rng::{self, Role, StreamRng};

/// Synthetic population recipes.
#[derive(Debug, Clone, PartialEq)]
pub enum PopulationKind {
    Normal {
        mu: f64,
        sigma2: f64,
    },
    BivariateNormal {
        mu_x: f64,
        mu_y: f64,
        sigma_x: f64,
        sigma_y: f64,
        sigma_xy: f64,
    },
    /// Regressors are N(0, Sigma) with unit diagonal and
    /// `Sigma[i][j] = cov_decay^|i-j|`; the response is
    /// `beta_0 + sum beta_j x_j + noise`. Rows are written response first.
    RegressionDesign {
        cov_decay: f64,
        beta: Vec<f64>,
        noise_sigma2: f64,
    },
    /// Raw airline-style CSV with a header row; see [`FlightsParams`].
    FlightsSynthetic(FlightsParams),
}

impl PopulationKind {
    pub fn columns(&self) -> Vec<String> {
        match self {
            PopulationKind::Normal { .. } => vec!["x".into()],
            PopulationKind::BivariateNormal { .. } => vec!["x".into(), "y".into()],
            PopulationKind::RegressionDesign { beta, .. } => std::iter::once("y".to_string())
                .chain((1..beta.len()).map(|j| format!("x{j}")))
                .collect(),
            PopulationKind::FlightsSynthetic(_) => crate::harness::flights::RAW_COLUMNS
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            PopulationKind::Normal { mu, sigma2 } => format!("normal:{mu},{sigma2}"),
            PopulationKind::BivariateNormal {
                mu_x,
                mu_y,
                sigma_x,
                sigma_y,
                sigma_xy,
            } => format!("bivariate:{mu_x},{mu_y},{sigma_x},{sigma_y},{sigma_xy}"),
            PopulationKind::RegressionDesign {
                cov_decay,
                beta,
                noise_sigma2,
            } => {
                let b: Vec<String> = beta.iter().map(f64::to_string).collect();
                format!("regression:{};decay={cov_decay};noise={noise_sigma2}", b.join(","))
            }
            PopulationKind::FlightsSynthetic(_) => "flights".into(),
        }
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::config(format!("bad number {v:?} in population spec")))
        })
        .collect()
}

impl std::str::FromStr for PopulationKind {
    type Err = Error;

    /// `normal:MU,SIGMA2`, `bivariate:MUX,MUY,SX,SY,SXY`,
    /// `regression:B0,B1,..[;decay=D][;noise=S2]`, `flights`, or
    /// `example1`..`example5`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let kind = match name.trim() {
            "normal" => match parse_list(args)?.as_slice() {
                &[mu, sigma2] => PopulationKind::Normal { mu, sigma2 },
                _ => return Err(Error::config("normal needs MU,SIGMA2")),
            },
            "bivariate" => match parse_list(args)?.as_slice() {
                &[mu_x, mu_y, sigma_x, sigma_y, sigma_xy] => PopulationKind::BivariateNormal {
                    mu_x,
                    mu_y,
                    sigma_x,
                    sigma_y,
                    sigma_xy,
                },
                _ => return Err(Error::config("bivariate needs MUX,MUY,SX,SY,SXY")),
            },
            "regression" => {
                let mut parts = args.split(';');
                let beta = parse_list(parts.next().unwrap_or(""))?;
                let (mut cov_decay, mut noise_sigma2) = (0.5, 1.0);
                for p in parts {
                    match p.split_once('=') {
                        Some(("decay", v)) => cov_decay = parse_list(v)?[0],
                        Some(("noise", v)) => noise_sigma2 = parse_list(v)?[0],
                        _ => return Err(Error::config(format!("unknown regression option {p:?}"))),
                    }
                }
                PopulationKind::RegressionDesign {
                    cov_decay,
                    beta,
                    noise_sigma2,
                }
            }
            "flights" => PopulationKind::FlightsSynthetic(FlightsParams::default()),
            ex if ex.starts_with("example") => {
                let k: u8 = ex["example".len()..]
                    .parse()
                    .map_err(|_| Error::config(format!("unknown population {s:?}")))?;
                crate::harness::Example::from_number(k)?.population()
            }
            _ => return Err(Error::config(format!("unknown population {s:?}"))),
        };
        kind.validate()?;
        Ok(kind)
    }
}

impl PopulationKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            PopulationKind::Normal { sigma2, .. } if !(*sigma2 > 0.0) => {
                Err(Error::config("sigma2 must be positive"))
            }
            PopulationKind::BivariateNormal {
                sigma_x,
                sigma_y,
                sigma_xy,
                ..
            } => {
                if !(*sigma_x > 0.0 && *sigma_y > 0.0) || sigma_xy.abs() >= sigma_x * sigma_y {
                    Err(Error::config("bivariate covariance is not positive definite"))
                } else {
                    Ok(())
                }
            }
            PopulationKind::RegressionDesign {
                beta,
                noise_sigma2,
                cov_decay,
            } => {
                if beta.len() < 2 {
                    return Err(Error::config("regression needs an intercept and a slope"));
                }
                if !(*noise_sigma2 >= 0.0) {
                    return Err(Error::config("noise variance must be non-negative"));
                }
                decay_cholesky(beta.len() - 1, *cov_decay).map(|_| ())
            }
            _ => Ok(()),
        }
    }
}

fn decay_cholesky(p: usize, decay: f64) -> Result<DMatrix<f64>> {
    let sigma = DMatrix::from_fn(p, p, |i, j| decay.powi((i as i32 - j as i32).abs()));
    sigma
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::config("regressor covariance is not positive definite"))
}

/// A population plus the seed of its data stream.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSpec {
    pub kind: PopulationKind,
    pub seed: u64,
}

/// Draws numeric rows of a population.
pub struct RowGenerator {
    kind: PopulationKind,
    chol: Option<DMatrix<f64>>,
    rng: StreamRng,
}

impl RowGenerator {
    pub fn new(kind: &PopulationKind, rng: StreamRng) -> Result<Self> {
        kind.validate()?;
        let chol = match kind {
            PopulationKind::RegressionDesign { beta, cov_decay, .. } => {
                Some(decay_cholesky(beta.len() - 1, *cov_decay)?)
            }
            PopulationKind::FlightsSynthetic(_) => {
                return Err(Error::config("flights data is generated as raw CSV"))
            }
            _ => None,
        };
        Ok(RowGenerator {
            kind: kind.clone(),
            chol,
            rng,
        })
    }

    fn z(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn next_row(&mut self, out: &mut Vec<f64>) {
        out.clear();
        match self.kind {
            PopulationKind::Normal { mu, sigma2 } => {
                let z = self.z();
                out.push(mu + sigma2.sqrt() * z);
            }
            PopulationKind::BivariateNormal {
                mu_x,
                mu_y,
                sigma_x,
                sigma_y,
                sigma_xy,
            } => {
                let rho = sigma_xy / (sigma_x * sigma_y);
                let (z1, z2) = (self.z(), self.z());
                out.push(mu_x + sigma_x * z1);
                out.push(mu_y + sigma_y * (rho * z1 + (1.0 - rho * rho).sqrt() * z2));
            }
            PopulationKind::RegressionDesign {
                ref beta,
                noise_sigma2,
                ..
            } => {
                let rng = &mut self.rng;
                let z = DVector::from_fn(beta.len() - 1, |_, _| rng.sample::<f64, _>(StandardNormal));
                let eps: f64 = rng.sample(StandardNormal);
                let x = self.chol.as_ref().expect("cholesky factor") * z;
                let y = beta[0]
                    + beta[1..].iter().zip(x.iter()).map(|(b, v)| b * v).sum::<f64>()
                    + noise_sigma2.sqrt() * eps;
                out.push(y);
                out.extend(x.iter());
            }
            PopulationKind::FlightsSynthetic(_) => unreachable!("rejected in new"),
        }
    }
}

/// Fixed-point store format: sign, at least two integer digits, six
/// fractional digits (`+01.500000`). Values below 100 in magnitude give a
/// constant field width of ten bytes.
pub fn format_field(out: &mut String, x: f64) {
    let _ = write!(out, "{x:+010.6}");
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedDataset {
    pub path: PathBuf,
    pub rows: u64,
    pub columns: Vec<String>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// Write a `key=value` sidecar next to `path`.
pub fn write_sidecar(path: &Path, entries: &[(&str, String)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(sidecar_path(path))?);
    for (k, v) in entries {
        writeln!(w, "{k}={v}")?;
    }
    w.flush()?;
    Ok(())
}

/// Stream `rows` records of `spec` to `path` plus a sidecar. Numeric
/// populations produce a headerless store; the flights population produces
/// a raw CSV with a header that must go through
/// [`preprocess_flights`](crate::harness::preprocess_flights).
pub fn generate_dataset(spec: &PopulationSpec, rows: u64, path: &Path) -> Result<GeneratedDataset> {
    if rows == 0 {
        return Err(Error::config("row count must be positive"));
    }
    let data_rng = rng::stream(spec.seed, Role::Data, 0);
    let columns = spec.kind.columns();
    match &spec.kind {
        PopulationKind::FlightsSynthetic(params) => {
            generate_flights_raw(params, rows, data_rng, path)?;
        }
        kind => write_numeric_store(kind, rows, data_rng, path)?,
    }
    write_sidecar(
        path,
        &[
            ("columns", columns.join(",")),
            ("rows", rows.to_string()),
            ("population", spec.kind.describe()),
            ("seed", spec.seed.to_string()),
            ("number_format", "%+010.6f".into()),
            (
                "header_row",
                matches!(spec.kind, PopulationKind::FlightsSynthetic(_)).to_string(),
            ),
        ],
    )?;
    Ok(GeneratedDataset {
        path: path.to_path_buf(),
        rows,
        columns,
    })
}

pub(crate) fn write_numeric_store(
    kind: &PopulationKind,
    rows: u64,
    data_rng: StreamRng,
    path: &Path,
) -> Result<()> {
    let mut gen = RowGenerator::new(kind, data_rng)?;
    let mut w = BufWriter::with_capacity(256 * 1024, File::create(path)?);
    let mut row = Vec::new();
    let mut line = String::with_capacity(128);
    for _ in 0..rows {
        gen.next_row(&mut row);
        line.clear();
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            format_field(&mut line, *v);
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.flush()?;
    Ok(())
}
