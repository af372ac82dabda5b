//! Random transmission-matrix models of the scattering medium.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dft, gram_transpose, qr, ComplexMatrix, DftMatrix, RngStream, StreamRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MediumKind {
    /// Lossless medium, Haar-distributed unitary.
    #[serde(rename = "unitary")]
    HaarUnitary,
    /// Lossy sub-block, i.i.d. circular Gaussian entries.
    #[serde(rename = "gaussian")]
    GaussianIID,
    /// Single random phase screen.
    #[serde(rename = "thin")]
    ThinDiffuser,
}

impl MediumKind {
    pub fn label(self) -> &'static str {
        match self {
            MediumKind::HaarUnitary => "unitary",
            MediumKind::GaussianIID => "gaussian",
            MediumKind::ThinDiffuser => "thin",
        }
    }

    pub fn is_unitary(self) -> bool {
        // the thin diffuser is a diagonal unitary
        matches!(self, MediumKind::HaarUnitary | MediumKind::ThinDiffuser)
    }
}

impl fmt::Display for MediumKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for MediumKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unitary" => Ok(MediumKind::HaarUnitary),
            "gaussian" => Ok(MediumKind::GaussianIID),
            "thin" => Ok(MediumKind::ThinDiffuser),
            other => Err(Error::InvalidInput(format!(
                "unknown medium model '{other}' (expected unitary, gaussian or thin)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MediumModel {
    pub kind: MediumKind,
    pub n: usize,
    pub seed: RngStream,
}

impl MediumModel {
    pub fn new(kind: MediumKind, n: usize, seed: RngStream) -> Self {
        Self { kind, n, seed }
    }
}

/// An immutable `n × n` medium plus lazily derived products.
pub struct TransmissionMatrix {
    model: MediumModel,
    matrix: ComplexMatrix,
    dft: OnceLock<DftMatrix>,
    j: OnceLock<ComplexMatrix>,
    t_tilde: OnceLock<ComplexMatrix>,
    t_prime: OnceLock<ComplexMatrix>,
}

impl fmt::Debug for TransmissionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransmissionMatrix")
            .field("model", &self.model)
            .finish_non_exhaustive()
    }
}

impl TransmissionMatrix {
    /// Wraps an explicit matrix, e.g. one loaded from disk or built in a test.
    pub fn from_matrix(model: MediumModel, matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() || matrix.rows() != model.n || model.n == 0 {
            return Err(Error::InvalidDimension(format!(
                "medium of {} modes cannot hold a {:?} matrix",
                model.n,
                matrix.shape()
            )));
        }
        if !matrix.is_finite() {
            return Err(Error::NonFinite("TransmissionMatrix::from_matrix"));
        }
        Ok(Self {
            model,
            matrix,
            dft: OnceLock::new(),
            j: OnceLock::new(),
            t_tilde: OnceLock::new(),
            t_prime: OnceLock::new(),
        })
    }

    pub fn model(&self) -> &MediumModel {
        &self.model
    }

    pub fn n(&self) -> usize {
        self.model.n
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dft(&self) -> &DftMatrix {
        self.dft.get_or_init(|| dft(self.model.n).expect("n >= 1 checked on construction"))
    }

    /// `J = T Tᵀ`, exactly symmetric.
    pub fn j(&self) -> &ComplexMatrix {
        self.j.get_or_init(|| gram_transpose(&self.matrix))
    }

    /// `T̃ = 𝓕 T`.
    pub fn t_tilde(&self) -> &ComplexMatrix {
        self.t_tilde.get_or_init(|| {
            crate::numerics::matmul(self.dft(), &self.matrix).expect("square operands")
        })
    }

    /// `T' = T̃ Tᵀ = 𝓕 J`.
    pub fn t_prime(&self) -> &ComplexMatrix {
        self.t_prime
            .get_or_init(|| crate::numerics::matmul(self.dft(), self.j()).expect("square operands"))
    }

    /// Row `k` of `T̃` in O(n²), without forming the full product.
    pub fn t_tilde_row(&self, k: usize) -> Vec<Complex64> {
        if let Some(full) = self.t_tilde.get() {
            return full.row(k).to_vec();
        }
        self.matrix
            .matvec_transpose(self.dft().row(k))
            .expect("dimensions agree")
    }

    /// Row `k` of `T'` in O(n²).
    pub fn t_prime_row(&self, k: usize) -> Vec<Complex64> {
        if let Some(full) = self.t_prime.get() {
            return full.row(k).to_vec();
        }
        let tt = self.t_tilde_row(k);
        self.matrix.matvec(&tt).expect("dimensions agree")
    }
}

/// Draws a medium; deterministic in `(kind, n, seed)`.
pub fn generate(model: MediumModel) -> Result<TransmissionMatrix> {
    let n = model.n;
    if n == 0 {
        return Err(Error::InvalidDimension("medium with zero modes".into()));
    }
    let mut rng = model.seed.rng();
    let matrix = match model.kind {
        MediumKind::HaarUnitary => haar_unitary_from(n, &mut rng),
        MediumKind::GaussianIID => {
            // variance 1/n per entry: E Σ_m |t_mn|² = 1 for every column
            let scale = 1.0 / (n as f64).sqrt();
            ComplexMatrix::from_fn(n, n, |_, _| rng.complex_gaussian() * scale)
        }
        MediumKind::ThinDiffuser => {
            let diag: Vec<Complex64> = (0..n).map(|_| Complex64::from_polar(1.0, rng.phase())).collect();
            ComplexMatrix::from_diagonal(&diag)
        }
    };
    TransmissionMatrix::from_matrix(model, matrix)
}

/// Haar-distributed unitary via QR of a complex Ginibre matrix.
pub fn haar_unitary(n: usize, rng: RngStream) -> Result<ComplexMatrix> {
    if n == 0 {
        return Err(Error::InvalidDimension("Haar unitary of size zero".into()));
    }
    Ok(haar_unitary_from(n, &mut rng.rng()))
}

fn haar_unitary_from(n: usize, rng: &mut StreamRng) -> ComplexMatrix {
    loop {
        let ginibre = ComplexMatrix::from_fn(n, n, |_, _| rng.complex_gaussian());
        let qr::QrFactors { q, r_diagonal } = qr::householder_qr(&ginibre);
        if r_diagonal.iter().any(|r| r.norm() < 1e-300) {
            continue;
        }
        // fix the phase freedom of QR so R has a positive diagonal;
        // only then is Q Haar distributed
        let phases: Vec<Complex64> = r_diagonal.iter().map(|r| r / r.norm()).collect();
        return ComplexMatrix::from_fn(n, n, |i, j| q[(i, j)] * phases[j]);
    }
}

/// Mean column power τ = (1/n) Σ_mn |t_mn|².
pub fn total_transmission(t: &TransmissionMatrix) -> f64 {
    let m = t.matrix();
    m.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>() / m.cols() as f64
}

// ---------------------------------------------------------------------------
// Matrix dumps: binary (default) or JSON, interleaved (re, im), row-major.

const DUMP_MAGIC: &[u8; 8] = b"QWFSTM01";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DumpHeader {
    kind: MediumKind,
    n: usize,
    seed: RngStream,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonDump {
    kind: MediumKind,
    n: usize,
    seed: RngStream,
    data: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DumpFormat {
    Binary,
    Json,
}

impl DumpFormat {
    /// JSON for `*.json`, binary otherwise.
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => DumpFormat::Json,
            _ => DumpFormat::Binary,
        }
    }
}

fn interleave(m: &ComplexMatrix) -> Vec<f64> {
    m.as_slice().iter().flat_map(|z| [z.re, z.im]).collect()
}

fn deinterleave(n: usize, data: &[f64]) -> Result<ComplexMatrix> {
    if data.len() != 2 * n * n {
        return Err(Error::Format(format!(
            "expected {} doubles for n = {n}, found {}",
            2 * n * n,
            data.len()
        )));
    }
    let entries = data.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
    ComplexMatrix::from_vec(n, n, entries)
}

pub fn write_dump<W: Write>(t: &TransmissionMatrix, format: DumpFormat, mut out: W) -> Result<()> {
    let model = t.model();
    match format {
        DumpFormat::Binary => {
            let header = serde_json::to_vec(&DumpHeader {
                kind: model.kind,
                n: model.n,
                seed: model.seed,
            })
            .map_err(|e| Error::Format(e.to_string()))?;
            out.write_all(DUMP_MAGIC)?;
            out.write_all(&(header.len() as u64).to_le_bytes())?;
            out.write_all(&header)?;
            let mut buf = Vec::with_capacity(16 * model.n * model.n);
            for x in interleave(t.matrix()) {
                buf.extend_from_slice(&x.to_le_bytes());
            }
            out.write_all(&buf)?;
        }
        DumpFormat::Json => {
            let dump = JsonDump {
                kind: model.kind,
                n: model.n,
                seed: model.seed,
                data: interleave(t.matrix()),
            };
            serde_json::to_writer(&mut out, &dump).map_err(|e| Error::Format(e.to_string()))?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn read_dump<R: Read>(format: DumpFormat, mut input: R) -> Result<TransmissionMatrix> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    match format {
        DumpFormat::Binary => {
            if bytes.len() < 16 || &bytes[..8] != DUMP_MAGIC {
                return Err(Error::Format("missing QWFSTM01 magic".into()));
            }
            let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
            let body = &bytes[16..];
            if body.len() < header_len {
                return Err(Error::Format("truncated header".into()));
            }
            let header: DumpHeader = serde_json::from_slice(&body[..header_len])
                .map_err(|e| Error::Format(e.to_string()))?;
            let payload = &body[header_len..];
            if payload.len() % 8 != 0 {
                return Err(Error::Format("payload is not a whole number of doubles".into()));
            }
            let data: Vec<f64> = payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            let matrix = deinterleave(header.n, &data)?;
            TransmissionMatrix::from_matrix(MediumModel::new(header.kind, header.n, header.seed), matrix)
        }
        DumpFormat::Json => {
            let dump: JsonDump =
                serde_json::from_slice(&bytes).map_err(|e| Error::Format(e.to_string()))?;
            let matrix = deinterleave(dump.n, &dump.data)?;
            TransmissionMatrix::from_matrix(MediumModel::new(dump.kind, dump.n, dump.seed), matrix)
        }
    }
}

pub fn save_dump(t: &TransmissionMatrix, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_dump(t, DumpFormat::for_path(path), &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_dump(path: &Path) -> Result<TransmissionMatrix> {
    let file = std::fs::File::open(path)?;
    read_dump(DumpFormat::for_path(path), std::io::BufReader::new(file))
}
