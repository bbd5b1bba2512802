//! Detector response matrix `M[mu][n] = p(n | mu)` on the integer μ grid.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::exact::{coherent_click_distribution, total_variation, ClickDistribution};
use crate::mc::{derive_seed, simulate_batch, PulseSource};

const CSV_MAGIC: &str = "# binflux-matrix v1";

/// Allowed drift of a row sum away from one.
pub const ROW_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Exact,
    MonteCarlo { shots: u64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "points", rename_all = "snake_case")]
pub enum Support {
    All,
    Points(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RowProvenance {
    Exact,
    MonteCarlo { shots: u64, seed: u64 },
    Interpolated { mu_lo: usize, mu_hi: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseMatrix {
    pub mu_max: usize,
    pub bins: usize,
    pub method: Method,
    pub support: Support,
    pub fingerprint: String,
    pub rows: Vec<Vec<f64>>,
    pub provenance: Vec<RowProvenance>,
}

impl ResponseMatrix {
    pub fn row(&self, mu: usize) -> ClickDistribution {
        ClickDistribution { probs: self.rows[mu].clone(), source: PulseSource::Coherent { mu: mu as f64 } }
    }

    /// Column `n`: likelihood of `n` clicks as a function of μ.
    pub fn column(&self, n: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[n]).collect()
    }

    /// μ values whose rows were computed directly (not interpolated).
    pub fn support_points(&self) -> Vec<usize> {
        self.provenance
            .iter()
            .enumerate()
            .filter(|(_, p)| !matches!(p, RowProvenance::Interpolated { .. }))
            .map(|(mu, _)| mu)
            .collect()
    }

    pub fn verify_fingerprint(&self, config: &SystemConfig) -> Result<()> {
        let expected = config.fingerprint();
        if expected != self.fingerprint {
            return Err(Error::FingerprintMismatch { expected, found: self.fingerprint.clone() });
        }
        Ok(())
    }

    /// Largest |row sum - 1| over all rows.
    pub fn max_normalization_error(&self) -> f64 {
        self.rows.iter().map(|r| (r.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
    }
}

fn compute_row(config: &SystemConfig, mu: usize, method: Method) -> Result<(Vec<f64>, RowProvenance)> {
    let weights = config.bin_weights()?;
    match method {
        Method::Exact => {
            let d = coherent_click_distribution(mu as f64, &weights, &config.detector)?;
            Ok((d.probs, RowProvenance::Exact))
        }
        Method::MonteCarlo { shots, seed } => {
            let row_seed = derive_seed(seed, mu as u64);
            let src = PulseSource::Coherent { mu: mu as f64 };
            let batch = simulate_batch(&src, &weights, &config.detector, shots, row_seed, false)?;
            Ok((batch.histogram.probabilities(), RowProvenance::MonteCarlo { shots, seed }))
        }
    }
}

/// Build rows `0..=mu_max`. With `Support::Points` only the listed rows (plus
/// the grid ends 0 and `mu_max`) are computed; the rest are interpolated.
pub fn build_matrix(config: &SystemConfig, mu_max: usize, method: Method, support: Support) -> Result<ResponseMatrix> {
    config.validate()?;
    if mu_max == 0 {
        return Err(Error::Input("mu_max must be at least 1".into()));
    }
    if let Method::MonteCarlo { shots: 0, .. } = method {
        return Err(Error::Input("Monte Carlo rows need at least one shot".into()));
    }
    let computed: Vec<usize> = match &support {
        Support::All => (0..=mu_max).collect(),
        Support::Points(points) => {
            if let Some(p) = points.iter().find(|&&p| p > mu_max) {
                return Err(Error::Input(format!("support point {p} lies above mu_max={mu_max}")));
            }
            let mut pts = points.clone();
            pts.extend([0, mu_max]);
            pts.sort_unstable();
            pts.dedup();
            pts
        }
    };

    let direct: Vec<(Vec<f64>, RowProvenance)> =
        computed.par_iter().map(|&mu| compute_row(config, mu, method)).collect::<Result<_>>()?;

    let bins = config.bins();
    let mut rows = vec![Vec::new(); mu_max + 1];
    let mut provenance = vec![RowProvenance::Exact; mu_max + 1];
    for (&mu, (row, prov)) in computed.iter().zip(direct) {
        rows[mu] = row;
        provenance[mu] = prov;
    }
    for pair in computed.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        for mu in lo + 1..hi {
            rows[mu] = blend(&rows[lo], &rows[hi], lo, hi, mu);
            provenance[mu] = RowProvenance::Interpolated { mu_lo: lo, mu_hi: hi };
        }
    }
    let support = match support {
        Support::All => Support::All,
        Support::Points(_) => Support::Points(computed),
    };
    Ok(ResponseMatrix { mu_max, bins, method, support, fingerprint: config.fingerprint(), rows, provenance })
}

fn blend(a: &[f64], b: &[f64], lo: usize, hi: usize, mu: usize) -> Vec<f64> {
    let t = (mu - lo) as f64 / (hi - lo) as f64;
    let mut row: Vec<f64> = a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect();
    let s: f64 = row.iter().sum();
    row.iter_mut().for_each(|x| *x /= s);
    row
}

/// Per-n linear interpolation between the support rows bracketing `mu`,
/// renormalized.
pub fn interpolate_row(m: &ResponseMatrix, mu: usize) -> Result<ClickDistribution> {
    let support = m.support_points();
    let (lo, hi) = (support[0], *support.last().unwrap());
    if mu < lo || mu > hi {
        return Err(Error::Extrapolation { mu, lo, hi });
    }
    let k = support.partition_point(|&s| s < mu);
    if support[k] == mu {
        return Ok(m.row(mu));
    }
    let (a, b) = (support[k - 1], support[k]);
    Ok(ClickDistribution {
        probs: blend(&m.rows[a], &m.rows[b], a, b, mu),
        source: PulseSource::Coherent { mu: mu as f64 },
    })
}

/// Total-variation distance between every interpolated row of `m` and the
/// exact row for the same μ.
pub fn interpolation_error(config: &SystemConfig, m: &ResponseMatrix) -> Result<Vec<(usize, f64)>> {
    let weights = config.bin_weights()?;
    m.provenance
        .iter()
        .enumerate()
        .filter(|(_, p)| matches!(p, RowProvenance::Interpolated { .. }))
        .map(|(mu, _)| {
            let exact = coherent_click_distribution(mu as f64, &weights, &config.detector)?;
            Ok((mu, total_variation(&exact.probs, &m.rows[mu])))
        })
        .collect()
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Exact => write!(f, "exact"),
            Method::MonteCarlo { shots, seed } => write!(f, "mc(shots={shots};seed={seed})"),
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "exact" {
            return Ok(Method::Exact);
        }
        let inner =
            s.strip_prefix("mc(").and_then(|r| r.strip_suffix(')')).ok_or_else(|| format!("unknown method `{s}`"))?;
        let (mut shots, mut seed) = (None, None);
        for kv in inner.split(';') {
            match kv.split_once('=') {
                Some(("shots", v)) => shots = v.parse().ok(),
                Some(("seed", v)) => seed = v.parse().ok(),
                _ => return Err(format!("bad method field `{kv}`")),
            }
        }
        match (shots, seed) {
            (Some(shots), Some(seed)) => Ok(Method::MonteCarlo { shots, seed }),
            _ => Err(format!("method `{s}` needs integer shots and seed")),
        }
    }
}

fn method_tag(m: &ResponseMatrix) -> String {
    match &m.support {
        Support::All => m.method.to_string(),
        Support::Points(p) => {
            let pts: Vec<String> = p.iter().map(|x| x.to_string()).collect();
            format!("{}@{}", m.method, pts.join("|"))
        }
    }
}

/// CSV encoding: one header comment line, then `mu,p0,...,pB` rows with
/// 17 significant digits.
pub fn to_csv(m: &ResponseMatrix) -> String {
    let mut out = format!(
        "{CSV_MAGIC}, fingerprint={}, mu_max={}, bins={}, method={}\n",
        m.fingerprint,
        m.mu_max,
        m.bins,
        method_tag(m)
    );
    for (mu, row) in m.rows.iter().enumerate() {
        write!(out, "{mu}").unwrap();
        for p in row {
            write!(out, ",{p:.16e}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn from_csv(text: &str, path: &Path) -> Result<ResponseMatrix> {
    let err = |line: usize, msg: String| Error::Parse { path: path.to_path_buf(), line, msg };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let rest = header
        .strip_prefix(CSV_MAGIC)
        .and_then(|r| r.strip_prefix(", "))
        .ok_or_else(|| err(1, format!("expected header starting with `{CSV_MAGIC}, `")))?;

    let (mut fingerprint, mut mu_max, mut bins, mut tag) = (None, None, None, None);
    for field in rest.split(", ") {
        let (k, v) = field.split_once('=').ok_or_else(|| err(1, format!("malformed header field `{field}`")))?;
        match k {
            "fingerprint" => fingerprint = Some(v.to_string()),
            "mu_max" => mu_max = Some(v.parse::<usize>().map_err(|e| err(1, format!("mu_max: {e}")))?),
            "bins" => bins = Some(v.parse::<usize>().map_err(|e| err(1, format!("bins: {e}")))?),
            "method" => tag = Some(v.to_string()),
            other => return Err(err(1, format!("unknown header field `{other}`"))),
        }
    }
    let missing = |f: &str| err(1, format!("header lacks `{f}`"));
    let fingerprint = fingerprint.ok_or_else(|| missing("fingerprint"))?;
    let mu_max = mu_max.ok_or_else(|| missing("mu_max"))?;
    let bins = bins.ok_or_else(|| missing("bins"))?;
    let tag = tag.ok_or_else(|| missing("method"))?;

    let (method_str, points) = match tag.split_once('@') {
        Some((m, p)) => {
            let pts = p
                .split('|')
                .map(|x| x.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| err(1, format!("support points: {e}")))?;
            (m, Some(pts))
        }
        None => (tag.as_str(), None),
    };
    let method: Method = method_str.parse().map_err(|e| err(1, e))?;

    let mut rows = Vec::with_capacity(mu_max + 1);
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let mu: usize = cells.next().unwrap().parse().map_err(|e| err(lineno, format!("field 0 (mu): {e}")))?;
        if mu != rows.len() {
            return Err(err(lineno, format!("expected mu={}, found {mu}", rows.len())));
        }
        let row = cells
            .enumerate()
            .map(|(i, c)| c.parse::<f64>().map_err(|e| err(lineno, format!("field {} (p{i}): {e}", i + 1))))
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != bins + 1 {
            return Err(err(lineno, format!("expected {} probabilities, found {}", bins + 1, row.len())));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > ROW_NORM_TOL || row.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(err(lineno, format!("row mu={mu} is not a probability distribution (sum {s})")));
        }
        rows.push(row);
    }
    if rows.len() != mu_max + 1 {
        return Err(err(
            text.lines().count(),
            format!("expected {} rows, found {} (truncated?)", mu_max + 1, rows.len()),
        ));
    }

    let direct = |_: usize| match method {
        Method::Exact => RowProvenance::Exact,
        Method::MonteCarlo { shots, seed } => RowProvenance::MonteCarlo { shots, seed },
    };
    let (support, provenance) = match points {
        None => (Support::All, (0..=mu_max).map(direct).collect()),
        Some(pts) => {
            if pts.first() != Some(&0) || pts.last() != Some(&mu_max) || pts.windows(2).any(|w| w[0] >= w[1]) {
                return Err(err(1, "support points must increase from 0 to mu_max".into()));
            }
            let mut prov: Vec<RowProvenance> = (0..=mu_max).map(direct).collect();
            for w in pts.windows(2) {
                for p in prov.iter_mut().take(w[1]).skip(w[0] + 1) {
                    *p = RowProvenance::Interpolated { mu_lo: w[0], mu_hi: w[1] };
                }
            }
            (Support::Points(pts), prov)
        }
    };
    Ok(ResponseMatrix { mu_max, bins, method, support, fingerprint, rows, provenance })
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Write as JSON when the path ends in `.json`, CSV otherwise.
pub fn save_matrix(m: &ResponseMatrix, path: &Path) -> Result<()> {
    if is_json(path) {
        fs::write(path, serde_json::to_string_pretty(m)?)?;
    } else {
        fs::write(path, to_csv(m))?;
    }
    Ok(())
}

pub fn load_matrix(path: &Path) -> Result<ResponseMatrix> {
    let text = fs::read_to_string(path)?;
    if is_json(path) {
        let m: ResponseMatrix = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            msg: e.to_string(),
        })?;
        if m.rows.len() != m.mu_max + 1 || m.provenance.len() != m.mu_max + 1 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                msg: "row count does not match mu_max".into(),
            });
        }
        Ok(m)
    } else {
        from_csv(&text, path)
    }
}
