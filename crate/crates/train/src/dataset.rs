//! Two-dimensional toy classification datasets.

use std::fmt;
use std::str::FromStr;

use bngeom_core::io::{fmt_f64, Table};
use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Result, TrainError};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub seed: u64,
    pub x: Array2<f64>,
    pub y: Vec<usize>,
    pub classes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DatasetKind {
    TwoMoons,
    GaussQuantiles,
    RandomUniform,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 3] = [DatasetKind::GaussQuantiles, DatasetKind::TwoMoons, DatasetKind::RandomUniform];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::TwoMoons => "two-moons",
            DatasetKind::GaussQuantiles => "gauss-quantiles",
            DatasetKind::RandomUniform => "random-uniform",
        }
    }

    pub fn classes(self) -> usize {
        match self {
            DatasetKind::GaussQuantiles => 5,
            _ => 2,
        }
    }

    /// Center and radius of the square window that covers the bulk of the data.
    pub fn window(self) -> ([f64; 2], f64) {
        match self {
            DatasetKind::GaussQuantiles => ([0.0, 0.0], 1.0),
            DatasetKind::TwoMoons => ([0.5, 0.5], 1.5),
            DatasetKind::RandomUniform => ([2.0, 2.0], 2.5),
        }
    }

    /// Default generator settings: 0.1 noise for the moons.
    pub fn generate(self, n: usize, seed: u64) -> Result<Dataset> {
        match self {
            DatasetKind::TwoMoons => gen_two_moons(n, 0.1, seed),
            DatasetKind::GaussQuantiles => gen_gaussian_quantiles(n, 5, seed),
            DatasetKind::RandomUniform => gen_random_uniform(n, seed),
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetKind {
    type Err = TrainError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-moons" | "moons" => Ok(DatasetKind::TwoMoons),
            "gauss-quantiles" | "gaussian-quantiles" => Ok(DatasetKind::GaussQuantiles),
            "random-uniform" | "uniform" => Ok(DatasetKind::RandomUniform),
            other => Err(TrainError::InvalidConfig(format!("unknown dataset {other:?}"))),
        }
    }
}

fn linspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = if n > 1 { (b - a) / (n - 1) as f64 } else { 0.0 };
    (0..n).map(move |i| a + step * i as f64)
}

/// Two interleaved half circles: the outer one `(cos t, sin t)` labelled 0
/// and the inner one `(1 - cos t, 0.5 - sin t)` labelled 1, `t` evenly
/// spaced on `[0, pi]`, plus isotropic Gaussian noise; rows are shuffled.
pub fn gen_two_moons(n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(TrainError::InvalidConfig("two moons needs n >= 2".into()));
    }
    if !(noise >= 0.0) {
        return Err(TrainError::InvalidConfig("noise must be nonnegative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_out = n / 2;
    let n_in = n - n_out;
    let pi = std::f64::consts::PI;
    let mut pts: Vec<([f64; 2], usize)> = Vec::with_capacity(n);
    pts.extend(linspace(0.0, pi, n_out).map(|t| ([t.cos(), t.sin()], 0)));
    pts.extend(linspace(0.0, pi, n_in).map(|t| ([1.0 - t.cos(), 0.5 - t.sin()], 1)));
    pts.shuffle(&mut rng);
    if noise > 0.0 {
        let normal = Normal::new(0.0, noise).expect("valid std");
        for (p, _) in &mut pts {
            p[0] += normal.sample(&mut rng);
            p[1] += normal.sample(&mut rng);
        }
    }
    Ok(from_points("two-moons", seed, pts, 2))
}

/// Standard 2D Gaussian draws labelled by the rank of their radius:
/// sorted radii are cut into `classes` bins of (near) equal size.
pub fn gen_gaussian_quantiles(n: usize, classes: usize, seed: u64) -> Result<Dataset> {
    if classes < 2 || n < classes {
        return Err(TrainError::InvalidConfig("need n >= classes >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("valid std");
    let raw: Vec<[f64; 2]> = (0..n).map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let ra = raw[a][0].powi(2) + raw[a][1].powi(2);
        let rb = raw[b][0].powi(2) + raw[b][1].powi(2);
        ra.total_cmp(&rb)
    });
    let mut label = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        label[i] = rank * classes / n;
    }
    let pts = raw.into_iter().zip(label).collect();
    Ok(from_points("gauss-quantiles", seed, pts, classes))
}

/// Uniform points on `[-0.5, 4.5]^2`, labelled 1 above the line `x1 + x2 = 4`.
pub fn gen_random_uniform(n: usize, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(TrainError::InvalidConfig("random uniform needs n >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = (0..n)
        .map(|_| {
            let p = [rng.random_range(-0.5..4.5), rng.random_range(-0.5..4.5)];
            let y = usize::from(p[0] + p[1] > 4.0);
            (p, y)
        })
        .collect();
    Ok(from_points("random-uniform", seed, pts, 2))
}

fn from_points(name: &str, seed: u64, pts: Vec<([f64; 2], usize)>, classes: usize) -> Dataset {
    let mut x = Array2::zeros((pts.len(), 2));
    let mut y = Vec::with_capacity(pts.len());
    for (i, (p, l)) in pts.into_iter().enumerate() {
        x[[i, 0]] = p[0];
        x[[i, 1]] = p[1];
        y.push(l);
    }
    Dataset {
        name: name.into(),
        seed,
        x,
        y,
        classes,
    }
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn centroid(&self) -> Array1<f64> {
        self.x.mean_axis(Axis(0)).expect("nonempty dataset")
    }

    /// Per-class centroids and class proportions; empty classes are `None`.
    pub fn class_centroids(&self) -> Vec<Option<(Array1<f64>, f64)>> {
        (0..self.classes)
            .map(|c| {
                let idx: Vec<usize> = (0..self.len()).filter(|&i| self.y[i] == c).collect();
                if idx.is_empty() {
                    return None;
                }
                let sub = self.x.select(Axis(0), &idx);
                Some((sub.mean_axis(Axis(0)).unwrap(), idx.len() as f64 / self.len() as f64))
            })
            .collect()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            seed: self.seed,
            x: self.x.select(Axis(0), idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            classes: self.classes,
        }
    }

    /// Holds out `ceil(frac * n)` samples chosen by a permutation seeded
    /// with the dataset seed; returns `(train, validation)`.
    pub fn split(&self, frac: f64) -> (Dataset, Dataset) {
        let n = self.len();
        let n_val = ((frac * n as f64).ceil() as usize).min(n);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed ^ 0x5EED_5EED));
        let (val, train) = perm.split_at(n_val);
        let mut train = train.to_vec();
        let mut val = val.to_vec();
        train.sort_unstable();
        val.sort_unstable();
        (self.subset(&train), self.subset(&val))
    }

    /// Random rows without replacement.
    pub fn sample_rows<R: Rng>(&self, m: usize, rng: &mut R) -> Array2<f64> {
        let mut perm: Vec<usize> = (0..self.len()).collect();
        perm.shuffle(rng);
        perm.truncate(m.min(self.len()));
        self.x.select(Axis(0), &perm)
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["x1", "x2", "label"]);
        for (row, &l) in self.x.rows().into_iter().zip(&self.y) {
            t.push(vec![fmt_f64(row[0]), fmt_f64(row[1]), l.to_string()]);
        }
        t
    }

    /// Inverse of [`Dataset::to_table`]; the class count is `max label + 1`.
    pub fn from_table(name: &str, seed: u64, t: &Table) -> Result<Dataset> {
        let col = |c: &str| {
            t.column(c)
                .ok_or_else(|| TrainError::InvalidConfig(format!("dataset table lacks column {c:?}")))
        };
        let (c1, c2, cl) = (col("x1")?, col("x2")?, col("label")?);
        let bad = |what: &str, i: usize| TrainError::InvalidConfig(format!("row {}: bad {what}", i + 1));
        let mut x = Array2::zeros((t.len(), 2));
        let mut y = Vec::with_capacity(t.len());
        for (i, row) in t.rows.iter().enumerate() {
            x[[i, 0]] = row[c1].parse::<f64>().map_err(|_| bad("x1", i))?;
            x[[i, 1]] = row[c2].parse::<f64>().map_err(|_| bad("x2", i))?;
            y.push(row[cl].parse::<usize>().map_err(|_| bad("label", i))?);
        }
        if y.is_empty() || x.iter().any(|v| !v.is_finite()) {
            return Err(TrainError::InvalidConfig("dataset must be nonempty and finite".into()));
        }
        let classes = y.iter().max().map_or(0, |m| m + 1);
        Ok(Dataset {
            name: name.into(),
            seed,
            x,
            y,
            classes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_moons_lie_on_circles() {
        let d = gen_two_moons(200, 0.0, 4).unwrap();
        for (p, &l) in d.x.rows().into_iter().zip(&d.y) {
            let (cx, cy) = if l == 0 { (0.0, 0.0) } else { (1.0, 0.5) };
            let r = ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt();
            assert!((r - 1.0).abs() < 1e-12);
        }
        assert_eq!(d.y.iter().filter(|&&l| l == 0).count(), 100);
    }

    #[test]
    fn quantile_classes_are_balanced() {
        let d = gen_gaussian_quantiles(200, 5, 1).unwrap();
        for c in 0..5 {
            assert_eq!(d.y.iter().filter(|&&l| l == c).count(), 40);
        }
    }

    #[test]
    fn split_sizes() {
        let d = gen_random_uniform(200, 0).unwrap();
        let (tr, va) = d.split(0.25);
        assert_eq!((tr.len(), va.len()), (150, 50));
    }

    #[test]
    fn names_parse() {
        for k in DatasetKind::ALL {
            assert_eq!(k.as_str().parse::<DatasetKind>().unwrap(), k);
        }
    }
}
