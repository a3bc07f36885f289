//! Lock-step distances between equal-length series: point `i` of one series
//! is only ever compared with point `i` of the other.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use chrono::NaiveDate;
use thiserror::Error;

use crate::binning::{normalize_profile, BinConfig, BinError, DayProfile};
use crate::ingest::Direction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DistanceKind {
    /// Euclidean norm of the difference.
    #[default]
    L2,
    /// Sum of absolute differences.
    L1,
    /// `1 - cos(a, b)`.
    Cosine,
    /// `1 - corr(a, b)`, in `[0, 2]`.
    Pearson,
}

impl DistanceKind {
    pub const ALL: [DistanceKind; 4] = [
        DistanceKind::L2,
        DistanceKind::L1,
        DistanceKind::Cosine,
        DistanceKind::Pearson,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DistanceKind::L2 => "L2",
            DistanceKind::L1 => "L1",
            DistanceKind::Cosine => "COSINE",
            DistanceKind::Pearson => "PEARSON",
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DistanceKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DistanceKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown distance {s:?} (L2, L1, COSINE, PEARSON)"))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimilarityError {
    #[error("length mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("empty series")]
    Empty,
    #[error("PEARSON distance undefined for a constant series")]
    DegenerateVariance,
    #[error("COSINE distance undefined for a zero vector")]
    ZeroVector,
    #[error("profiles mix {0} and {1}")]
    IncompatibleConfig(String, String),
    #[error("profile {key}: {source}")]
    Profile { key: ProfileKey, source: BinError },
    #[error("pair ({a}, {b}): {source}")]
    Pair {
        a: ProfileKey,
        b: ProfileKey,
        source: Box<SimilarityError>,
    },
    #[error("need at least 2 series, got {0}")]
    InsufficientSupport(usize),
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn distance(a: &[f64], b: &[f64], kind: DistanceKind) -> Result<f64, SimilarityError> {
    if a.len() != b.len() {
        return Err(SimilarityError::Dimension(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(SimilarityError::Empty);
    }
    let d = match kind {
        DistanceKind::L2 => a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt(),
        DistanceKind::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        DistanceKind::Cosine => {
            let (na, nb) = (dot(a, a), dot(b, b));
            if na == 0.0 || nb == 0.0 {
                return Err(SimilarityError::ZeroVector);
            }
            // sqrt(na * nb) rather than sqrt(na) * sqrt(nb): exact 0 for a == b
            (1.0 - dot(a, b) / (na * nb).sqrt()).max(0.0)
        }
        DistanceKind::Pearson => {
            let n = a.len() as f64;
            let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
            let ca: Vec<f64> = a.iter().map(|x| x - ma).collect();
            let cb: Vec<f64> = b.iter().map(|y| y - mb).collect();
            let (va, vb) = (dot(&ca, &ca), dot(&cb, &cb));
            if va == 0.0 || vb == 0.0 {
                return Err(SimilarityError::DegenerateVariance);
            }
            (1.0 - dot(&ca, &cb) / (va * vb).sqrt()).clamp(0.0, 2.0)
        }
    };
    Ok(d)
}

/// Row/column label of a similarity matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProfileKey {
    pub date: NaiveDate,
    pub direction: Direction,
}

impl fmt::Display for ProfileKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.date.format("%Y-%m-%d"), self.direction)
    }
}

impl From<&DayProfile> for ProfileKey {
    fn from(p: &DayProfile) -> Self {
        ProfileKey {
            date: p.date,
            direction: p.direction,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub keys: Vec<ProfileKey>,
    pub kind: DistanceKind,
    pub normalized: bool,
    pub values: Vec<Vec<f64>>,
}

impl SimilarityMatrix {
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Labeled CSV: the first row and first column hold the keys.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<W> {
        write!(out, "{}", self.kind)?;
        for k in &self.keys {
            write!(out, ",{k}")?;
        }
        writeln!(out)?;
        for (k, row) in self.keys.iter().zip(&self.values) {
            write!(out, "{k}")?;
            for v in row {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        out.flush()?;
        Ok(out)
    }
}

fn check_shared_config(profiles: &[DayProfile]) -> Result<Option<BinConfig>, SimilarityError> {
    let Some(first) = profiles.first() else {
        return Ok(None);
    };
    for p in profiles {
        if p.config != first.config {
            return Err(SimilarityError::IncompatibleConfig(
                first.config.to_string(),
                p.config.to_string(),
            ));
        }
        if p.direction != first.direction {
            return Err(SimilarityError::IncompatibleConfig(
                first.direction.to_string(),
                p.direction.to_string(),
            ));
        }
    }
    Ok(Some(first.config))
}

/// Distances between every pair of profiles. Only the upper triangle is
/// computed; the lower triangle mirrors it.
pub fn pairwise_matrix(
    profiles: &[DayProfile],
    kind: DistanceKind,
    normalize: bool,
) -> Result<SimilarityMatrix, SimilarityError> {
    check_shared_config(profiles)?;
    let keys: Vec<ProfileKey> = profiles.iter().map(ProfileKey::from).collect();
    let series = profiles
        .iter()
        .map(|p| {
            if normalize {
                normalize_profile(p).map_err(|source| SimilarityError::Profile {
                    key: p.into(),
                    source,
                })
            } else {
                Ok(p.counts.iter().map(|&c| c as f64).collect())
            }
        })
        .collect::<Result<Vec<Vec<f64>>, _>>()?;

    let n = series.len();
    let mut values = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let d = distance(&series[i], &series[j], kind).map_err(|e| SimilarityError::Pair {
                a: keys[i],
                b: keys[j],
                source: Box::new(e),
            })?;
            values[i][j] = d;
            values[j][i] = d;
        }
    }
    Ok(SimilarityMatrix {
        keys,
        kind,
        normalized: normalize,
        values,
    })
}

/// Mean of the strictly upper triangle (mean pairwise distance).
pub fn coherence(matrix: &SimilarityMatrix) -> Result<f64, SimilarityError> {
    let n = matrix.len();
    if n < 2 {
        return Err(SimilarityError::InsufficientSupport(n));
    }
    let sum: f64 = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| matrix.values[i][j])
        .sum();
    Ok(sum / (n * (n - 1) / 2) as f64)
}
