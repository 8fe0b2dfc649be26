//! Binary checkpoints: one JSON header line, then the arrays named in the
//! header as little-endian `f64`, column-major, in header order.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use anyhow::{bail, Context};
use omac_core::features::{BasisLayout, MatrixBasis, RffBasis};
use omac_core::models::{BilinearModel, DeepConfig, DeepModel, Model, ModelKind, SuperpositionModel};
use omac_core::{Matrix, Vector};
use serde::{Deserialize, Serialize};

const MAGIC: &str = "omac-checkpoint";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArraySpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisMeta {
    pub prefix: String,
    pub output_dim: usize,
    pub layout: BasisLayout,
    pub sigma: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub version: u32,
    /// `rff`, `superposition`, `bilinear` or `deep`.
    pub kind: String,
    pub arrays: Vec<ArraySpec>,
    #[serde(default)]
    pub bases: Vec<BasisMeta>,
    #[serde(default)]
    pub spectral_bound: Option<f64>,
    #[serde(default)]
    pub output_dim: Option<usize>,
}

/// Header plus its arrays in order.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: Header,
    pub data: Vec<Matrix>,
}

impl Checkpoint {
    fn new(kind: &str) -> Self {
        Self {
            header: Header {
                format: MAGIC.into(),
                version: VERSION,
                kind: kind.into(),
                arrays: Vec::new(),
                bases: Vec::new(),
                spectral_bound: None,
                output_dim: None,
            },
            data: Vec::new(),
        }
    }

    fn push(&mut self, name: impl Into<String>, m: Matrix) {
        self.header.arrays.push(ArraySpec {
            name: name.into(),
            rows: m.nrows(),
            cols: m.ncols(),
        });
        self.data.push(m);
    }

    fn push_vec(&mut self, name: impl Into<String>, v: &Vector) {
        self.push(name, Matrix::from_column_slice(v.len(), 1, v.as_slice()));
    }

    fn get(&self, name: &str) -> anyhow::Result<&Matrix> {
        let k = self
            .header
            .arrays
            .iter()
            .position(|a| a.name == name)
            .with_context(|| format!("checkpoint has no array {name:?}"))?;
        Ok(&self.data[k])
    }

    fn get_vec(&self, name: &str) -> anyhow::Result<Vector> {
        let m = self.get(name)?;
        Ok(Vector::from_column_slice(m.as_slice()))
    }

    pub fn write<W: Write>(&self, mut out: W) -> anyhow::Result<()> {
        serde_json::to_writer(&mut out, &self.header)?;
        out.write_all(b"\n")?;
        for m in &self.data {
            for v in m.iter() {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read<R: Read>(input: R) -> anyhow::Result<Self> {
        let mut reader = BufReader::new(input);
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let header: Header = serde_json::from_str(line.trim_end()).context("checkpoint header")?;
        if header.format != MAGIC || header.version != VERSION {
            bail!("unsupported checkpoint {} v{}", header.format, header.version);
        }
        let mut data = Vec::with_capacity(header.arrays.len());
        let mut buf = [0u8; 8];
        for a in &header.arrays {
            let mut values = Vec::with_capacity(a.rows * a.cols);
            for _ in 0..a.rows * a.cols {
                reader.read_exact(&mut buf).context("truncated checkpoint")?;
                values.push(f64::from_le_bytes(buf));
            }
            data.push(Matrix::from_vec(a.rows, a.cols, values));
        }
        if reader.read(&mut buf)? != 0 {
            bail!("trailing bytes after checkpoint arrays");
        }
        Ok(Self { header, data })
    }

    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        Self::read(std::fs::File::open(path).with_context(|| format!("open {}", path.display()))?)
    }
}

fn push_basis(ck: &mut Checkpoint, prefix: &str, basis: &MatrixBasis) {
    let rff = basis.rff();
    ck.header.bases.push(BasisMeta {
        prefix: prefix.into(),
        output_dim: basis.output_dim(),
        layout: basis.layout(),
        sigma: rff.sigma(),
        seed: rff.seed(),
    });
    ck.push(format!("{prefix}.omega"), rff.omega().clone());
    ck.push_vec(format!("{prefix}.phases"), rff.phases());
}

fn read_basis(ck: &Checkpoint, prefix: &str) -> anyhow::Result<MatrixBasis> {
    let meta = ck
        .header
        .bases
        .iter()
        .find(|b| b.prefix == prefix)
        .with_context(|| format!("checkpoint has no basis {prefix:?}"))?;
    let rff = RffBasis::from_parts(
        ck.get(&format!("{prefix}.omega"))?.clone(),
        ck.get_vec(&format!("{prefix}.phases"))?,
        meta.sigma,
        meta.seed,
    )?;
    Ok(MatrixBasis::new(rff, meta.output_dim, meta.layout))
}

/// The `Ω`, `b` sidecar of one RFF basis.
pub fn rff_checkpoint(basis: &MatrixBasis) -> Checkpoint {
    let mut ck = Checkpoint::new("rff");
    push_basis(&mut ck, "y", basis);
    ck
}

pub fn rff_from_checkpoint(ck: &Checkpoint) -> anyhow::Result<MatrixBasis> {
    if ck.header.kind != "rff" {
        bail!("expected an rff checkpoint, found {}", ck.header.kind);
    }
    read_basis(ck, "y")
}

pub fn model_checkpoint(model: &ModelKind) -> Checkpoint {
    match model {
        ModelKind::Superposition(m) => {
            let mut ck = Checkpoint::new("superposition");
            push_basis(&mut ck, "y1", m.y1());
            push_basis(&mut ck, "y2", m.y2());
            ck.push_vec("theta", m.theta());
            ck.push_vec("c", m.latent());
            ck
        }
        ModelKind::Bilinear(m) => {
            let mut ck = Checkpoint::new("bilinear");
            push_basis(&mut ck, "y", m.basis());
            ck.push("theta", m.theta().clone());
            ck.push_vec("c", m.latent());
            ck
        }
        ModelKind::Deep(m) => {
            let mut ck = Checkpoint::new("deep");
            ck.header.spectral_bound = Some(m.spectral_bound());
            ck.header.output_dim = Some(m.output_dim());
            for (k, layer) in m.layers().iter().enumerate() {
                ck.push(format!("layer{k}.w"), layer.w.clone());
                ck.push_vec(format!("layer{k}.b"), &layer.b);
                ck.push_vec(format!("layer{k}.u"), &layer.u);
            }
            ck.push_vec("c", m.latent());
            ck
        }
    }
}

pub fn model_from_checkpoint(ck: &Checkpoint) -> anyhow::Result<ModelKind> {
    let c = ck.get_vec("c")?;
    let mut model = match ck.header.kind.as_str() {
        "superposition" => {
            let mut m = SuperpositionModel::new(read_basis(ck, "y1")?, read_basis(ck, "y2")?)?;
            m.set_meta_params(ck.get("theta")?.as_slice())?;
            ModelKind::Superposition(m)
        }
        "bilinear" => {
            let mut m = BilinearModel::new(read_basis(ck, "y")?, c.len());
            m.set_theta(ck.get("theta")?.clone())?;
            ModelKind::Bilinear(m)
        }
        "deep" => {
            let n_layers = ck.header.arrays.iter().filter(|a| a.name.ends_with(".w")).count();
            if n_layers == 0 {
                bail!("deep checkpoint without layers");
            }
            let weights: Vec<&Matrix> = (0..n_layers)
                .map(|k| ck.get(&format!("layer{k}.w")))
                .collect::<anyhow::Result<_>>()?;
            let mut m = DeepModel::new(&DeepConfig {
                input_dim: weights[0].ncols(),
                output_dim: ck.header.output_dim.context("deep checkpoint needs output_dim")?,
                latent_dim: c.len(),
                hidden: weights[..n_layers - 1].iter().map(|w| w.nrows()).collect(),
                spectral_bound: ck.header.spectral_bound.context("deep checkpoint needs spectral_bound")?,
                seed: 0,
            })?;
            for (k, layer) in m.layers_mut().iter_mut().enumerate() {
                layer.w = weights[k].clone();
                layer.b = ck.get_vec(&format!("layer{k}.b"))?;
                layer.u = ck.get_vec(&format!("layer{k}.u"))?;
            }
            ModelKind::Deep(m)
        }
        other => bail!("unknown checkpoint kind {other:?}"),
    };
    model.set_latent(c)?;
    Ok(model)
}
