//! Binary file formats. All integers and floats are little-endian.
//!
//! ```text
//! FVEC1  "FVEC1\0" | u32 N | u32 D | N*D f32 (row-major)
//! DENS1  "DENS1\0" | u32 N | u32 k | u32 n | N f64
//! MLPW1  "MLPW1\0" | u8 A | A * u8 activation code | u32 L | L * u32 layer size
//!        | for each of the L-1 layers: out*in f32 weights (row-major), out f32 biases
//! ```
//!
//! In MLPW1, `A = L - 1`: one activation code per weight layer, the last one
//! being the output activation. Decoders read the whole buffer up front and
//! reject bad magic, truncation, trailing bytes and sizes that overflow.

use std::fs;
use std::path::Path;

use crate::density::DensityConfig;
use crate::error::{Error, Result};
use crate::gan::GanPair;
use crate::linalg::Matrix;
use crate::mlp::{Activation, Layer, Mlp};

pub const FVEC_MAGIC: &[u8; 6] = b"FVEC1\0";
pub const DENS_MAGIC: &[u8; 6] = b"DENS1\0";
pub const MLPW_MAGIC: &[u8; 6] = b"MLPW1\0";

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], magic: &[u8; 6], what: &'static str) -> Result<Self> {
        if buf.len() < magic.len() || &buf[..magic.len()] != magic {
            return Err(Error::Format(format!("{what}: bad magic")));
        }
        Ok(Reader { buf, pos: magic.len(), what })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format(format!("{}: truncated at byte {}", self.what, self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    /// Checks that `count` items of `width` bytes remain, without overflow.
    fn expect_remaining(&self, count: usize, width: usize) -> Result<()> {
        let need = count
            .checked_mul(width)
            .ok_or_else(|| Error::Format(format!("{}: declared size overflows", self.what)))?;
        if self.buf.len() - self.pos < need {
            return Err(Error::Format(format!("{}: truncated payload", self.what)));
        }
        Ok(())
    }

    fn f32s(&mut self, count: usize) -> Result<Vec<f32>> {
        self.expect_remaining(count, 4)?;
        let bytes = self.take(count * 4)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        self.expect_remaining(count, 8)?;
        let bytes = self.take(count * 8)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!("{}: {} trailing bytes", self.what, self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} does not fit in u32")))
}

pub fn encode_fvec(m: &Matrix) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(14 + m.data().len() * 4);
    out.extend_from_slice(FVEC_MAGIC);
    out.extend_from_slice(&to_u32(m.rows(), "row count")?.to_le_bytes());
    out.extend_from_slice(&to_u32(m.cols(), "column count")?.to_le_bytes());
    for v in m.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_fvec(buf: &[u8]) -> Result<Matrix> {
    let mut r = Reader::new(buf, FVEC_MAGIC, "FVEC1")?;
    let n = r.u32()? as usize;
    let d = r.u32()? as usize;
    let count = n
        .checked_mul(d)
        .ok_or_else(|| Error::Format("FVEC1: declared size overflows".into()))?;
    let data = r.f32s(count)?;
    r.finish()?;
    Matrix::new(n, d, data)
}

/// Densities together with the k-NN configuration that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityFile {
    pub densities: Vec<f64>,
    pub k: u32,
    pub n: u32,
}

impl DensityFile {
    pub fn new(densities: Vec<f64>, cfg: &DensityConfig) -> Result<Self> {
        Ok(DensityFile {
            densities,
            k: to_u32(cfg.k, "k")?,
            n: cfg.n,
        })
    }
}

pub fn encode_dens(f: &DensityFile) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(18 + f.densities.len() * 8);
    out.extend_from_slice(DENS_MAGIC);
    out.extend_from_slice(&to_u32(f.densities.len(), "density count")?.to_le_bytes());
    out.extend_from_slice(&f.k.to_le_bytes());
    out.extend_from_slice(&f.n.to_le_bytes());
    for v in &f.densities {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_dens(buf: &[u8]) -> Result<DensityFile> {
    let mut r = Reader::new(buf, DENS_MAGIC, "DENS1")?;
    let n_items = r.u32()? as usize;
    let k = r.u32()?;
    let n = r.u32()?;
    let densities = r.f64s(n_items)?;
    r.finish()?;
    Ok(DensityFile { densities, k, n })
}

pub fn encode_mlpw(net: &Mlp) -> Result<Vec<u8>> {
    let layers = net.layers();
    let mut out = Vec::new();
    out.extend_from_slice(MLPW_MAGIC);
    let a = u8::try_from(layers.len()).map_err(|_| Error::Format("more than 255 layers".into()))?;
    out.push(a);
    for l in layers {
        out.push(l.activation().code());
    }
    let sizes = net.layer_sizes();
    out.extend_from_slice(&to_u32(sizes.len(), "layer count")?.to_le_bytes());
    for s in sizes {
        out.extend_from_slice(&to_u32(s, "layer size")?.to_le_bytes());
    }
    for l in layers {
        for v in l.weights().iter().chain(l.biases()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_mlpw(buf: &[u8]) -> Result<Mlp> {
    let mut r = Reader::new(buf, MLPW_MAGIC, "MLPW1")?;
    let a = r.u8()? as usize;
    let mut acts = Vec::with_capacity(a);
    for _ in 0..a {
        let code = r.u8()?;
        acts.push(Activation::from_code(code).ok_or_else(|| Error::Format(format!("MLPW1: unknown activation code {code}")))?);
    }
    let l = r.u32()? as usize;
    if l < 2 || l != a + 1 {
        return Err(Error::Format(format!("MLPW1: {l} layer sizes for {a} activation codes")));
    }
    r.expect_remaining(l, 4)?;
    let sizes: Vec<usize> = (0..l).map(|_| r.u32().map(|v| v as usize)).collect::<Result<_>>()?;
    let mut layers = Vec::with_capacity(a);
    for (i, act) in acts.into_iter().enumerate() {
        let (inp, out) = (sizes[i], sizes[i + 1]);
        let count = inp
            .checked_mul(out)
            .ok_or_else(|| Error::Format("MLPW1: layer size overflows".into()))?;
        let w = r.f32s(count)?;
        let b = r.f32s(out)?;
        layers.push(Layer::new(inp, out, act, w, b).map_err(|e| Error::Format(format!("MLPW1: {e}")))?);
    }
    r.finish()?;
    Mlp::from_layers(layers)
}

pub fn write_fvec(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    Ok(fs::write(path, encode_fvec(m)?)?)
}

pub fn read_fvec(path: impl AsRef<Path>) -> Result<Matrix> {
    decode_fvec(&fs::read(path)?)
}

pub fn write_dens(path: impl AsRef<Path>, f: &DensityFile) -> Result<()> {
    Ok(fs::write(path, encode_dens(f)?)?)
}

pub fn read_dens(path: impl AsRef<Path>) -> Result<DensityFile> {
    decode_dens(&fs::read(path)?)
}

pub fn write_mlpw(path: impl AsRef<Path>, net: &Mlp) -> Result<()> {
    Ok(fs::write(path, encode_mlpw(net)?)?)
}

pub fn read_mlpw(path: impl AsRef<Path>) -> Result<Mlp> {
    decode_mlpw(&fs::read(path)?)
}

pub const GENERATOR_FILE: &str = "generator.mlpw";
pub const CRITIC_FILE: &str = "discriminator.mlpw";

/// Writes a GAN checkpoint directory (generator and critic weights; optimizer
/// state is not persisted).
pub fn save_gan(dir: impl AsRef<Path>, pair: &GanPair) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_mlpw(dir.join(GENERATOR_FILE), &pair.generator)?;
    write_mlpw(dir.join(CRITIC_FILE), &pair.critic)
}

/// Loads a checkpoint directory with fresh optimizers at the given learning rates.
pub fn load_gan(dir: impl AsRef<Path>, generator_lr: f64, critic_lr: f64) -> Result<GanPair> {
    let dir = dir.as_ref();
    GanPair::from_nets(
        read_mlpw(dir.join(GENERATOR_FILE))?,
        read_mlpw(dir.join(CRITIC_FILE))?,
        generator_lr,
        critic_lr,
    )
}

/// Reads a generator from either a checkpoint directory or a single MLPW1 file.
pub fn read_generator(path: impl AsRef<Path>) -> Result<Mlp> {
    let p = path.as_ref();
    if p.is_dir() {
        read_mlpw(p.join(GENERATOR_FILE))
    } else {
        read_mlpw(p)
    }
}

/// Reads numeric CSV, one sample per row. A first row that does not parse
/// as numbers is treated as a header.
pub fn read_csv_features(path: impl AsRef<Path>) -> Result<Matrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Format(format!("CSV: {e}")))?;
    let mut rows: Vec<Vec<f32>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(format!("CSV: {e}")))?;
        let parsed: std::result::Result<Vec<f32>, _> = rec.iter().map(str::parse::<f32>).collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(Error::Format(format!("CSV row {}: {e}", i + 1))),
        }
    }
    let cols = rows.first().map_or(0, Vec::len);
    Matrix::from_rows(&rows, cols)
}

/// Reads features by extension: `.csv` as CSV, anything else as FVEC1.
pub fn read_features(path: impl AsRef<Path>) -> Result<Matrix> {
    let p = path.as_ref();
    if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        read_csv_features(p)
    } else {
        read_fvec(p)
    }
}
