//! Checkpoint and table formats.
//!
//! Checkpoints are JSON documents of the form
//!
//! ```text
//! {
//!   "format": "bngeom-checkpoint",
//!   "version": 1,
//!   "metadata": {"seed": u64, "epoch": int, "dataset": str, "widths": [int],
//!                "use_bn": bool, "manifest": str | null},
//!   "input_dim": int,
//!   "activation": {"breakpoints": [f], "slopes": [f], "intercepts": [f]},
//!   "layers": [
//!     {"in_dim": int, "out_dim": int, "weight": [f, row-major], "bias": [f],
//!      "bn": {"gamma": [f], "beta": [f], "eps": f, "momentum": f,
//!             "running_mean": [f], "running_var": [f]} | null},
//!     ...
//!   ]
//! }
//! ```
//!
//! The last entry of `layers` is the linear output layer and never carries
//! BN. Floats are written with 17 significant digits, which round-trips
//! every `f64` exactly.
//!
//! Tables are CSV files whose first line may be a `# manifest <hash>`
//! comment; readers skip lines starting with `#`.

use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::batchnorm::BatchNormSlot;
use crate::cpa::{CpaActivation, HiddenBlock, LinearLayer, Network};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "bngeom-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub epoch: usize,
    pub dataset: String,
    pub widths: Vec<usize>,
    pub use_bn: bool,
    #[serde(default)]
    pub manifest: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub net: Network<f64>,
}

#[derive(Serialize, Deserialize)]
struct ActivationRecord {
    breakpoints: Vec<f64>,
    slopes: Vec<f64>,
    intercepts: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct BnRecord {
    gamma: Vec<f64>,
    beta: Vec<f64>,
    eps: f64,
    momentum: f64,
    running_mean: Vec<f64>,
    running_var: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct LayerRecord {
    in_dim: usize,
    out_dim: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
    bn: Option<BnRecord>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointRecord {
    format: String,
    version: u32,
    metadata: CheckpointMeta,
    input_dim: usize,
    activation: ActivationRecord,
    layers: Vec<LayerRecord>,
}

fn layer_record(l: &LinearLayer<f64>, bn: Option<&BatchNormSlot<f64>>) -> LayerRecord {
    LayerRecord {
        in_dim: l.in_dim(),
        out_dim: l.out_dim(),
        weight: l.weight.iter().copied().collect(),
        bias: l.bias.to_vec(),
        bn: bn.map(|s| BnRecord {
            gamma: s.gamma.to_vec(),
            beta: s.beta.to_vec(),
            eps: s.eps,
            momentum: s.momentum,
            running_mean: s.running_mean.to_vec(),
            running_var: s.running_var.to_vec(),
        }),
    }
}

fn linear_from(r: &LayerRecord) -> Result<LinearLayer<f64>> {
    let w = Array2::from_shape_vec((r.out_dim, r.in_dim), r.weight.clone())
        .map_err(|e| Error::Format(format!("weight shape: {e}")))?;
    LinearLayer::new(w, Array1::from(r.bias.clone()))
}

/// Writes floats in scientific notation with 17 significant digits.
struct ExactFloats<'a>(PrettyFormatter<'a>);

impl Formatter for ExactFloats<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        let net = &self.net;
        let mut layers: Vec<LayerRecord> = net
            .blocks()
            .iter()
            .map(|b| layer_record(&b.linear, b.bn.as_ref()))
            .collect();
        layers.push(layer_record(net.output(), None));
        let act = net.activation();
        let rec = CheckpointRecord {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            metadata: self.meta.clone(),
            input_dim: net.input_dim(),
            activation: ActivationRecord {
                breakpoints: act.breakpoints().to_vec(),
                slopes: act.slopes().to_vec(),
                intercepts: act.intercepts().to_vec(),
            },
            layers,
        };
        let all_finite = rec.layers.iter().all(|l| {
            l.weight.iter().chain(&l.bias).all(|v| v.is_finite())
                && l.bn.as_ref().is_none_or(|b| {
                    b.gamma
                        .iter()
                        .chain(&b.beta)
                        .chain(&b.running_mean)
                        .chain(&b.running_var)
                        .all(|v| v.is_finite())
                })
        });
        if !all_finite {
            return Err(Error::NonFinite("checkpoint parameters".into()));
        }
        let mut buf = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut buf, ExactFloats(PrettyFormatter::with_indent(b" ")));
        rec.serialize(&mut ser)?;
        buf.push(b'\n');
        String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: CheckpointRecord = serde_json::from_str(text)?;
        if rec.format != CHECKPOINT_FORMAT {
            return Err(Error::Format(format!("unknown format tag {:?}", rec.format)));
        }
        if rec.version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {}", rec.version)));
        }
        let act = CpaActivation::new(
            rec.activation.breakpoints,
            rec.activation.slopes,
            rec.activation.intercepts,
        )?;
        let Some((out, hidden)) = rec.layers.split_last() else {
            return Err(Error::Format("checkpoint has no layers".into()));
        };
        if out.bn.is_some() {
            return Err(Error::Format("output layer cannot carry BN".into()));
        }
        let mut blocks = Vec::with_capacity(hidden.len());
        for r in hidden {
            let bn = r.bn.as_ref().map(|b| BatchNormSlot {
                gamma: Array1::from(b.gamma.clone()),
                beta: Array1::from(b.beta.clone()),
                eps: b.eps,
                momentum: b.momentum,
                running_mean: Array1::from(b.running_mean.clone()),
                running_var: Array1::from(b.running_var.clone()),
            });
            blocks.push(HiddenBlock {
                linear: linear_from(r)?,
                bn,
            });
        }
        let net = Network::new(blocks, linear_from(out)?, act)?;
        if net.input_dim() != rec.input_dim {
            return Err(Error::Format(format!(
                "input_dim {} disagrees with first layer ({})",
                rec.input_dim,
                net.input_dim()
            )));
        }
        Ok(Self { meta: rec.metadata, net })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// A CSV table held in memory as formatted cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// CSV text, preceded by a `# manifest` line when a hash is given.
    pub fn to_csv(&self, manifest: Option<&str>) -> Result<String> {
        let mut buf = Vec::new();
        if let Some(h) = manifest {
            writeln!(buf, "# manifest {h}")?;
        }
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&self.header)?;
            for r in &self.rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn write(&self, path: &Path, manifest: Option<&str>) -> Result<()> {
        std::fs::write(path, self.to_csv(manifest)?)?;
        Ok(())
    }

    /// Parses CSV text with a header row, skipping `#` comment lines.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .has_headers(true)
            .from_reader(text.as_bytes());
        let header = r.headers()?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec?.iter().map(String::from).collect());
        }
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// Numeric matrix from a header-less CSV file, one sample per row.
pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_matrix_csv(&text)
}

pub fn parse_matrix_csv(text: &str) -> Result<Array2<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec?;
        if cols.is_some_and(|c| c != rec.len()) {
            return Err(Error::Format(format!("row {} has {} fields", rows + 1, rec.len())));
        }
        cols = Some(rec.len());
        for f in rec.iter() {
            data.push(f.parse::<f64>().map_err(|e| Error::Format(format!("row {}: {f:?}: {e}", rows + 1)))?);
        }
        rows += 1;
    }
    let cols = cols.ok_or(Error::EmptyBatch)?;
    Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Format(e.to_string()))
}

/// Header-less CSV text of a matrix, lossless.
pub fn matrix_to_csv(m: &Array2<f64>, manifest: Option<&str>) -> String {
    let mut s = String::new();
    if let Some(h) = manifest {
        s.push_str(&format!("# manifest {h}\n"));
    }
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn sample_net() -> Network<f64> {
        let mut bn = BatchNormSlot::new(3);
        bn.gamma = array![0.1 + 0.2, -1.0 / 3.0, 7e-300];
        bn.running_var = array![1.0 / 7.0, 2.0, 0.0];
        Network::new(
            vec![HiddenBlock {
                linear: LinearLayer::new(
                    array![[0.1, std::f64::consts::PI], [-2.5e-17, 1.0], [3.0, 1e300]],
                    array![1.0 / 3.0, 0.0, -0.0],
                )
                .unwrap(),
                bn: Some(bn),
            }],
            LinearLayer::new(array![[1.0, 2.0, 3.0]], array![0.5]).unwrap(),
            CpaActivation::leaky_relu(0.01),
        )
        .unwrap()
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let ck = Checkpoint {
            meta: CheckpointMeta {
                seed: 7,
                epoch: 3,
                dataset: "two-moons".into(),
                widths: vec![3],
                use_bn: true,
                manifest: None,
            },
            net: sample_net(),
        };
        let text = ck.to_json().unwrap();
        let back = Checkpoint::from_json(&text).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn rejects_wrong_format() {
        let text = Checkpoint {
            meta: CheckpointMeta {
                seed: 0,
                epoch: 0,
                dataset: String::new(),
                widths: vec![3],
                use_bn: false,
                manifest: None,
            },
            net: sample_net(),
        }
        .to_json()
        .unwrap()
        .replace(CHECKPOINT_FORMAT, "other");
        assert!(Checkpoint::from_json(&text).is_err());
    }

    #[test]
    fn tables_round_trip() {
        let mut t = Table::new(["a", "b"]);
        t.push(vec![fmt_f64(0.1 + 0.2), "x,y".into()]);
        let text = t.to_csv(Some("abc")).unwrap();
        assert!(text.starts_with("# manifest abc\n"));
        let back = Table::from_csv(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.rows[0][0].parse::<f64>().unwrap(), 0.1 + 0.2);
    }

    #[test]
    fn matrix_round_trip() {
        let m = array![[1.0 / 3.0, -2e-20], [5.0, 1e300]];
        assert_eq!(parse_matrix_csv(&matrix_to_csv(&m, Some("h"))).unwrap(), m);
    }
}
