//! Flag value grammars and input loading shared by the subcommands.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bngeom_core::batchnorm::{batch_content_id, freeze_batch};
use bngeom_core::enumerate::SliceMap;
use bngeom_core::io::{read_matrix_csv, Checkpoint, Table};
use bngeom_core::{FrozenBatch, Mode, Network, Window};
use bngeom_train::Dataset;
use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};

use crate::error::{CliError, Result};
use crate::manifest::ExperimentManifest;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_floats(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            let v: f64 = t.trim().parse().map_err(|_| usage(format!("{what}: {t:?} is not a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(usage(format!("{what}: {t:?} is not finite")))
            }
        })
        .collect()
}

/// `x0,y0,r`: a square window of half-width `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec {
    pub center: [f64; 2],
    pub radius: f64,
}

impl FromStr for WindowSpec {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        let v = parse_floats(s, "--window")?;
        if v.len() != 3 {
            return Err(usage("--window expects x0,y0,r"));
        }
        if !(v[2] > 0.0) {
            return Err(usage("--window radius must be positive"));
        }
        Ok(Self {
            center: [v[0], v[1]],
            radius: v[2],
        })
    }
}

impl WindowSpec {
    pub fn window(&self) -> Window<f64> {
        Window::new(Array1::from(self.center.to_vec()), self.radius).expect("validated radius")
    }
}

impl fmt::Display for WindowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?},{:?},{:?}", self.center[0], self.center[1], self.radius)
    }
}

impl Serialize for WindowSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Plane in input space: `p1;p2;o` (two basis columns and an origin, each
/// comma-separated), or `random:SEED;o` for a seeded random orthonormal pair.
#[derive(Debug, Clone, PartialEq)]
pub enum SliceSpec {
    Explicit { p1: Vec<f64>, p2: Vec<f64>, origin: Vec<f64> },
    Random { seed: u64, origin: Vec<f64> },
}

impl FromStr for SliceSpec {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(';').collect();
        if let Some(seed) = parts[0].strip_prefix("random:") {
            if parts.len() != 2 {
                return Err(usage("--slice random:SEED;o1,...,oD"));
            }
            let seed = seed.parse().map_err(|_| usage(format!("--slice: bad seed {seed:?}")))?;
            return Ok(SliceSpec::Random {
                seed,
                origin: parse_floats(parts[1], "--slice origin")?,
            });
        }
        if parts.len() != 3 {
            return Err(usage("--slice expects p1;p2;origin"));
        }
        let p1 = parse_floats(parts[0], "--slice p1")?;
        let p2 = parse_floats(parts[1], "--slice p2")?;
        let origin = parse_floats(parts[2], "--slice origin")?;
        if p1.len() != origin.len() || p2.len() != origin.len() {
            return Err(usage("--slice vectors must share one dimension"));
        }
        Ok(SliceSpec::Explicit { p1, p2, origin })
    }
}

impl fmt::Display for SliceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
        match self {
            SliceSpec::Explicit { p1, p2, origin } => write!(f, "{};{};{}", join(p1), join(p2), join(origin)),
            SliceSpec::Random { seed, origin } => write!(f, "random:{seed};{}", join(origin)),
        }
    }
}

impl Serialize for SliceSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl SliceSpec {
    pub fn slice_map(&self) -> Result<SliceMap<f64>> {
        match self {
            SliceSpec::Explicit { p1, p2, origin } => {
                let d = origin.len();
                let mut basis = Array2::zeros((d, 2));
                for i in 0..d {
                    basis[[i, 0]] = p1[i];
                    basis[[i, 1]] = p2[i];
                }
                Ok(SliceMap::new(basis, Array1::from(origin.clone()))?)
            }
            SliceSpec::Random { seed, origin } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok(SliceMap::random_orthonormal(Array1::from(origin.clone()), &mut rng))
            }
        }
    }
}

/// `nobn`, `eval`, or `frozen:<batch.csv>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModeSpec {
    NoBn,
    Eval,
    Frozen(PathBuf),
}

impl FromStr for ModeSpec {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nobn" => Ok(ModeSpec::NoBn),
            "eval" => Ok(ModeSpec::Eval),
            _ => match s.strip_prefix("frozen:") {
                Some(p) if !p.is_empty() => Ok(ModeSpec::Frozen(PathBuf::from(p))),
                _ => Err(usage(format!("--mode must be nobn, eval or frozen:<batch.csv>, got {s:?}"))),
            },
        }
    }
}

impl fmt::Display for ModeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeSpec::NoBn => f.write_str("nobn"),
            ModeSpec::Eval => f.write_str("eval"),
            ModeSpec::Frozen(p) => {
                let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                write!(f, "frozen:{name}")
            }
        }
    }
}

impl Serialize for ModeSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// A mode whose frozen statistics, if any, have been computed.
#[derive(Debug, Clone)]
pub enum ResolvedMode {
    NoBn,
    Eval,
    Frozen(FrozenBatch<f64>),
}

impl ResolvedMode {
    pub fn mode(&self) -> Mode<'_, f64> {
        match self {
            ResolvedMode::NoBn => Mode::NoBn,
            ResolvedMode::Eval => Mode::BnEval,
            ResolvedMode::Frozen(f) => Mode::BnFrozen(f),
        }
    }

    pub fn batch_id(&self) -> &str {
        match self {
            ResolvedMode::Frozen(f) => &f.batch_id,
            _ => "",
        }
    }
}

impl ModeSpec {
    /// Loads and freezes the batch for `frozen:` and registers it as an input.
    pub fn resolve(&self, net: &Network<f64>, manifest: &mut ExperimentManifest) -> Result<ResolvedMode> {
        match self {
            ModeSpec::NoBn => Ok(ResolvedMode::NoBn),
            ModeSpec::Eval => {
                if !net.has_bn() {
                    return Err(usage("--mode eval needs a network with BN"));
                }
                Ok(ResolvedMode::Eval)
            }
            ModeSpec::Frozen(path) => {
                if !net.has_bn() {
                    return Err(usage("--mode frozen needs a network with BN"));
                }
                manifest.add_input("mode", path)?;
                let batch = read_matrix_csv(path)?;
                let id = batch_content_id(batch.view());
                Ok(ResolvedMode::Frozen(freeze_batch(net, batch.view(), id)?))
            }
        }
    }
}

pub fn load_checkpoint(path: &Path, flag: &str, manifest: &mut ExperimentManifest) -> Result<Checkpoint> {
    manifest.add_input(flag, path)?;
    Ok(Checkpoint::load(path)?)
}

/// Dataset CSV with columns `x1,x2,label`.
pub fn load_dataset(path: &Path, flag: &str, manifest: &mut ExperimentManifest) -> Result<Dataset> {
    manifest.add_input(flag, path)?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let table = Table::from_csv(&text)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".into());
    Ok(Dataset::from_table(&name, 0, &table)?)
}

/// 1-based layer list, defaulting to every hidden layer.
pub fn layer_list(layers: &[usize], net: &Network<f64>) -> Result<Vec<usize>> {
    if layers.is_empty() {
        return Ok((0..net.num_hidden()).collect());
    }
    layers
        .iter()
        .map(|&l| {
            if l == 0 || l > net.num_hidden() {
                Err(usage(format!("layer {l} not in 1..={}", net.num_hidden())))
            } else {
                Ok(l - 1)
            }
        })
        .collect()
}
