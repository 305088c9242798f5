//! Synthetic 2D targets and CSV sample files.
//!
//! CSV files hold one sample per row, comma separated, with an optional
//! single header row (detected when the first row does not parse as
//! numbers). Written files carry no header and 17 significant digits, so a
//! save/load round trip reproduces every coordinate exactly.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::metrics::EmpiricalDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dataset {
    SwissRoll,
    Gaussians8,
    Gaussians25,
    /// Isotropic Gaussian, the usual flow initialization.
    GaussianInit,
}

impl Dataset {
    pub const ALL: [Dataset; 4] = [
        Dataset::SwissRoll,
        Dataset::Gaussians8,
        Dataset::Gaussians25,
        Dataset::GaussianInit,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Dataset::SwissRoll => "swiss_roll",
            Dataset::Gaussians8 => "gaussians8",
            Dataset::Gaussians25 => "gaussians25",
            Dataset::GaussianInit => "gaussian_init",
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Dataset::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| invalid(format!("unknown dataset '{s}'")))
    }
}

/// Generator parameters. All are configurable; the defaults give targets of
/// radius about 2 around the origin.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DatasetParams {
    /// Outer radius of the Swiss roll.
    pub scale: f64,
    /// Gaussian jitter added to Swiss roll points.
    pub jitter: f64,
    /// Circle radius of the 8-Gaussians centers.
    pub radius: f64,
    /// Component standard deviation of both mixtures.
    pub std: f64,
    /// Grid spacing of the 25-Gaussians centers.
    pub spacing: f64,
    /// Standard deviation of the initialization Gaussian.
    pub init_scale: f64,
    /// Assign sample `i` to component `i mod K` instead of drawing components.
    pub stratified: bool,
}

impl Default for DatasetParams {
    fn default() -> Self {
        Self {
            scale: 2.0,
            jitter: 0.05,
            radius: 2.0,
            std: 0.05,
            spacing: 1.0,
            init_scale: 1.0,
            stratified: false,
        }
    }
}

impl DatasetParams {
    /// Sets one parameter from a `key=value` pair, as given on the command line.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if key == "stratified" {
            self.stratified = match value {
                "1" | "true" => true,
                "0" | "false" => false,
                _ => return Err(invalid(format!("stratified must be true/false, got '{value}'"))),
            };
            return Ok(());
        }
        let v: f64 = value
            .parse()
            .map_err(|_| invalid(format!("parameter {key}: '{value}' is not a number")))?;
        let slot = match key {
            "scale" => &mut self.scale,
            "jitter" => &mut self.jitter,
            "radius" | "R" => &mut self.radius,
            "std" | "s" => &mut self.std,
            "spacing" | "g" => &mut self.spacing,
            "init_scale" => &mut self.init_scale,
            _ => return Err(invalid(format!("unknown dataset parameter '{key}'"))),
        };
        *slot = v;
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("scale", self.scale),
            ("radius", self.radius),
            ("spacing", self.spacing),
            ("init_scale", self.init_scale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("jitter", self.jitter), ("std", self.std)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Centers of the 8-Gaussians mixture, equally spaced on a circle.
pub fn gaussians8_centers(radius: f64) -> Vec<[f64; 2]> {
    (0..8)
        .map(|k| {
            let a = k as f64 * std::f64::consts::FRAC_PI_4;
            [radius * a.cos(), radius * a.sin()]
        })
        .collect()
}

/// Centers of the 25-Gaussians mixture, a 5x5 grid centered at the origin.
pub fn gaussians25_centers(spacing: f64) -> Vec<[f64; 2]> {
    (0..25)
        .map(|k| [(k / 5) as f64 - 2.0, (k % 5) as f64 - 2.0])
        .map(|[a, b]| [a * spacing, b * spacing])
        .collect()
}

/// Draws `n` samples of `dataset`. Deterministic given `seed`.
///
/// * Swiss roll: `t ~ U[1.5 pi, 4.5 pi]`, point `scale (t cos t, t sin t) / (4.5 pi)`
///   plus isotropic jitter, so radii span `[scale / 3, scale]`.
/// * 8 / 25 Gaussians: isotropic components with standard deviation `std`.
/// * Gaussian init: `init_scale` times a standard normal.
pub fn generate(dataset: Dataset, n: usize, seed: u64, params: &DatasetParams) -> Result<EmpiricalDistribution> {
    if n == 0 {
        return Err(invalid("sample count must be positive"));
    }
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = move |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let mut data = Vec::with_capacity(2 * n);
    match dataset {
        Dataset::SwissRoll => {
            let t_max = 4.5 * std::f64::consts::PI;
            for _ in 0..n {
                let t = rng.random_range(1.5 * std::f64::consts::PI..t_max);
                let x = params.scale * t * t.cos() / t_max + params.jitter * normal(&mut rng);
                let y = params.scale * t * t.sin() / t_max + params.jitter * normal(&mut rng);
                data.extend([x, y]);
            }
        }
        Dataset::Gaussians8 | Dataset::Gaussians25 => {
            let centers = if dataset == Dataset::Gaussians8 {
                gaussians8_centers(params.radius)
            } else {
                gaussians25_centers(params.spacing)
            };
            for i in 0..n {
                let k = if params.stratified {
                    i % centers.len()
                } else {
                    rng.random_range(0..centers.len())
                };
                let c = centers[k];
                let x = c[0] + params.std * normal(&mut rng);
                let y = c[1] + params.std * normal(&mut rng);
                data.extend([x, y]);
            }
        }
        Dataset::GaussianInit => {
            for _ in 0..2 * n {
                data.push(params.init_scale * normal(&mut rng));
            }
        }
    }
    EmpiricalDistribution::uniform(data, 2)
}

/// Reads samples from a CSV file; see the module docs for the format.
pub fn load_csv(path: impl AsRef<Path>) -> Result<EmpiricalDistribution> {
    read_csv(File::open(path)?)
}

pub fn read_csv<R: Read>(reader: R) -> Result<EmpiricalDistribution> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut data = Vec::new();
    let mut dim = None;
    for (k, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Csv {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(k as u64 + 1, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if k == 0 => continue,
            Err(_) => {
                return Err(Error::Csv {
                    line,
                    message: format!("malformed row '{}'", record.iter().collect::<Vec<_>>().join(",")),
                })
            }
        };
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Csv {
                line,
                message: "non-finite value".into(),
            });
        }
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(Error::Csv {
                    line,
                    message: format!("expected {d} columns, found {}", row.len()),
                })
            }
            _ => {}
        }
        data.extend(row);
    }
    let dim = dim.ok_or(Error::Csv {
        line: 0,
        message: "no samples".into(),
    })?;
    EmpiricalDistribution::uniform(data, dim)
}

/// Writes samples to a CSV file with 17 significant digits.
pub fn save_csv(path: impl AsRef<Path>, dist: &EmpiricalDistribution) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_csv(&mut out, dist)?;
    out.flush()?;
    Ok(())
}

pub fn write_csv<W: Write>(out: &mut W, dist: &EmpiricalDistribution) -> Result<()> {
    for row in dist.points() {
        let line: Vec<String> = row.iter().map(|v| format_f64(*v)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

/// `v` with 17 significant digits in scientific notation.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}
