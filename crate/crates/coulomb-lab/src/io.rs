//! Binary blobs for fields and decomposition certificates.
//!
//! Layout: 16-byte magic, `u64` LE header length, JSON header, little-endian
//! payload, SHA-256 of everything before it.

use crate::config::MetricConfig;
use crate::error::{Error, Result};
use crate::forms::{conductor_project, FormField};
use crate::geometry::DomainGrid;
use crate::lie::Algebra;
use crate::span::{CompactForm, CubeChart, Decomposition, SpanCertificate, SpanTerm};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use std::sync::Arc;

pub const FIELD_MAGIC: [u8; 16] = *b"COULOMBLAB\0FLD01";
pub const CERT_MAGIC: [u8; 16] = *b"COULOMBLAB\0CRT01";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub n_lat: usize,
    pub n_norm: usize,
    pub metric: MetricConfig,
    pub algebra: String,
}

impl GridHeader {
    fn of(f: &FormField) -> Result<GridHeader> {
        let g = f.grid();
        Ok(GridHeader {
            n_lat: g.n_lat,
            n_norm: g.n_norm,
            metric: MetricConfig::from_family(&g.spec.family)?,
            algebra: f.algebra().name().to_string(),
        })
    }

    pub fn build(&self) -> Result<(Arc<DomainGrid>, Arc<Algebra>)> {
        let alg = match self.algebra.as_str() {
            "su2" => Algebra::su2(),
            "u1" => Algebra::real_line(),
            other => return Err(Error::Integrity(format!("unknown algebra {other:?}"))),
        };
        Ok((DomainGrid::build(self.metric.spec(), self.n_lat, self.n_norm)?, alg))
    }
}

fn seal(magic: &[u8; 16], header: &impl Serialize, payload: &[u8]) -> Result<Vec<u8>> {
    let head = serde_json::to_vec(header).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let mut buf = Vec::with_capacity(16 + 8 + head.len() + payload.len() + 32);
    buf.extend_from_slice(magic);
    buf.extend_from_slice(&(head.len() as u64).to_le_bytes());
    buf.extend_from_slice(&head);
    buf.extend_from_slice(payload);
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    Ok(buf)
}

/// Checks magic and checksum; returns the header bytes and the payload.
fn open<'a>(magic: &[u8; 16], buf: &'a [u8]) -> Result<(&'a [u8], &'a [u8])> {
    if buf.len() < 16 + 8 + 32 {
        return Err(Error::Integrity("file is truncated".into()));
    }
    if &buf[..16] != magic {
        return Err(Error::Integrity("bad magic".into()));
    }
    let (body, sum) = buf.split_at(buf.len() - 32);
    if Sha256::digest(body).as_slice() != sum {
        return Err(Error::Integrity("checksum mismatch".into()));
    }
    let hl = u64::from_le_bytes(body[16..24].try_into().unwrap()) as usize;
    if 24 + hl > body.len() {
        return Err(Error::Integrity("header length exceeds file".into()));
    }
    Ok((&body[24..24 + hl], &body[24 + hl..]))
}

fn header<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<T> {
    serde_json::from_slice(bytes).map_err(|e| Error::Integrity(format!("header: {e}")))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Integrity("payload is shorter than the header declares".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self.take(8 * n)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn u32s(&mut self, n: usize) -> Result<Vec<u32>> {
        Ok(self.take(4 * n)?.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Integrity("trailing payload bytes".into()));
        }
        Ok(())
    }
}

fn put_f64s(out: &mut Vec<u8>, v: &[f64]) {
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

fn put_u32s(out: &mut Vec<u8>, v: &[u32]) {
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

#[derive(Serialize, Deserialize)]
struct FieldHeader {
    grid: GridHeader,
    degree: usize,
}

pub fn field_to_bytes(f: &FormField) -> Result<Vec<u8>> {
    let mut payload = Vec::with_capacity(8 * f.data().len());
    put_f64s(&mut payload, f.data());
    seal(&FIELD_MAGIC, &FieldHeader { grid: GridHeader::of(f)?, degree: f.degree() }, &payload)
}

pub fn field_from_bytes(buf: &[u8]) -> Result<FormField> {
    let (h, p) = open(&FIELD_MAGIC, buf)?;
    let h: FieldHeader = header(h)?;
    let (grid, alg) = h.grid.build()?;
    let mut r = Reader { buf: p, pos: 0 };
    let n = grid.nodes() * crate::forms::ncomp(h.degree) * alg.dim();
    let data = r.f64s(n)?;
    r.finish()?;
    FormField::from_data(&grid, &alg, h.degree, data)
}

pub fn save_field(path: &Path, f: &FormField) -> Result<()> {
    Ok(std::fs::write(path, field_to_bytes(f)?)?)
}

pub fn load_field(path: &Path) -> Result<FormField> {
    field_from_bytes(&std::fs::read(path)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermManifest {
    pub chart: CubeChart,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub alpha_nodes: usize,
    pub beta_nodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerManifest {
    pub cbc: bool,
    pub reconstruction_error: f64,
    pub divergence_residual: f64,
    pub cbc_trace: f64,
    pub cbc_trace_raw: f64,
    pub support_tail: f64,
    pub compatibility: f64,
    pub terms: Vec<TermManifest>,
}

/// Recorded numbers of a decomposition, stored as the certificate header.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateManifest {
    pub grid: GridHeader,
    pub u_sup: f64,
    pub t0_residual: f64,
    pub kernel_residual: f64,
    pub reconstruction_error: f64,
    pub total_residual: f64,
    pub scale: f64,
    pub partition_defect: f64,
    pub layers: Vec<LayerManifest>,
}

/// A reloaded certificate: `w = Δ(g − f)` and its span layers.
#[derive(Clone, Debug)]
pub struct CertificateFile {
    pub manifest: CertificateManifest,
    pub w: FormField,
    pub layers: Vec<SpanCertificate>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Reverification {
    /// Recomputed `‖Σ_all[αᵢ·βᵢ] − w‖_∞`.
    pub reconstruction_error: f64,
    pub layer_errors: Vec<f64>,
    pub divergence: f64,
    /// Every recomputed number equals the recorded one bit for bit.
    pub exact: bool,
}

impl CertificateFile {
    /// Recomputes the reconstruction errors from the stored forms.
    pub fn reverify(&self) -> Result<Reverification> {
        let mut total = FormField::zeros(self.w.grid(), self.w.algebra(), 0)?;
        let mut layer_errors = Vec::new();
        let mut divergence: f64 = 0.0;
        let mut exact = true;
        for (l, m) in self.layers.iter().zip(&self.manifest.layers) {
            let e = l.recheck()?;
            exact &= e.to_bits() == m.reconstruction_error.to_bits();
            layer_errors.push(e);
            divergence = divergence.max(l.recheck_divergence()?);
            total.axpy(1.0, &l.sum()?)?;
        }
        let r = conductor_project(&total.sub(&self.w)?).sup_norm();
        exact &= r.to_bits() == self.manifest.reconstruction_error.to_bits();
        Ok(Reverification { reconstruction_error: r, layer_errors, divergence, exact })
    }
}

pub fn certificate_to_bytes(d: &Decomposition) -> Result<Vec<u8>> {
    let mut payload = Vec::new();
    put_f64s(&mut payload, d.w.data());
    let mut layers = Vec::new();
    for l in &d.layers {
        put_f64s(&mut payload, l.target.data());
        let mut terms = Vec::new();
        for t in &l.terms {
            for f in [&t.alpha, &t.beta] {
                put_u32s(&mut payload, &f.nodes);
                put_f64s(&mut payload, &f.values);
            }
            terms.push(TermManifest {
                chart: t.chart,
                left: t.left.clone(),
                right: t.right.clone(),
                alpha_nodes: t.alpha.nodes.len(),
                beta_nodes: t.beta.nodes.len(),
            });
        }
        layers.push(LayerManifest {
            cbc: l.cbc,
            reconstruction_error: l.reconstruction_error,
            divergence_residual: l.divergence_residual,
            cbc_trace: l.cbc_trace,
            cbc_trace_raw: l.cbc_trace_raw,
            support_tail: l.support_tail,
            compatibility: l.compatibility,
            terms,
        });
    }
    let manifest = CertificateManifest {
        grid: GridHeader::of(&d.w)?,
        u_sup: d.u.sup(),
        t0_residual: d.boundary_layer.t0_residual,
        kernel_residual: d.kernel_residual,
        reconstruction_error: d.reconstruction_error,
        total_residual: d.total_residual,
        scale: d.scale,
        partition_defect: d.partition_defect,
        layers,
    };
    seal(&CERT_MAGIC, &manifest, &payload)
}

pub fn certificate_from_bytes(buf: &[u8]) -> Result<CertificateFile> {
    let (h, p) = open(&CERT_MAGIC, buf)?;
    let manifest: CertificateManifest = header(h)?;
    let (grid, alg) = manifest.grid.build()?;
    let dim = alg.dim();
    let mut r = Reader { buf: p, pos: 0 };
    let w = FormField::from_data(&grid, &alg, 0, r.f64s(grid.nodes() * dim)?)?;
    let mut layers = Vec::new();
    for m in &manifest.layers {
        let target = FormField::from_data(&grid, &alg, 0, r.f64s(grid.nodes() * dim)?)?;
        let mut terms = Vec::new();
        for t in &m.terms {
            let mut read = |n: usize| -> Result<CompactForm> {
                let nodes = r.u32s(n)?;
                let values = r.f64s(n * 3 * dim)?;
                let c = CompactForm { degree: 1, nodes, values };
                c.to_dense(&grid, &alg)?;
                Ok(c)
            };
            let alpha = read(t.alpha_nodes)?;
            let beta = read(t.beta_nodes)?;
            terms.push(SpanTerm { alpha, beta, chart: t.chart, left: t.left.clone(), right: t.right.clone() });
        }
        layers.push(SpanCertificate {
            target,
            terms,
            reconstruction_error: m.reconstruction_error,
            divergence_residual: m.divergence_residual,
            cbc: m.cbc,
            cbc_trace: m.cbc_trace,
            cbc_trace_raw: m.cbc_trace_raw,
            support_tail: m.support_tail,
            compatibility: m.compatibility,
        });
    }
    r.finish()?;
    Ok(CertificateFile { manifest, w, layers })
}

pub fn save_certificate(path: &Path, d: &Decomposition) -> Result<()> {
    Ok(std::fs::write(path, certificate_to_bytes(d)?)?)
}

pub fn load_certificate(path: &Path) -> Result<CertificateFile> {
    certificate_from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::MetricSpec;
    use crate::span::decompose_gauge_element;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn field_blob_round_trip_and_corruption() {
        let g = DomainGrid::build(MetricSpec::warped(vec![0.0, 0.5]), 8, 9).unwrap();
        let alg = Algebra::su2();
        let f = FormField::random_smooth(&g, &alg, 1, &mut ChaCha8Rng::seed_from_u64(1), true).unwrap();
        let bytes = field_to_bytes(&f).unwrap();
        assert_eq!(&bytes[..16], &FIELD_MAGIC);
        let back = field_from_bytes(&bytes).unwrap();
        assert_eq!(back.data(), f.data());
        assert_eq!(back.grid().spec.family, g.spec.family);
        let mut bad = bytes.clone();
        bad[40] ^= 1;
        assert!(matches!(field_from_bytes(&bad), Err(Error::Integrity(_))));
        assert!(matches!(field_from_bytes(&bytes[..bytes.len() - 1]), Err(Error::Integrity(_))));
        let mut wrong = bytes;
        wrong[0] = b'X';
        assert!(matches!(field_from_bytes(&wrong), Err(Error::Integrity(_))));
    }

    #[test]
    fn zero_field_certificate() {
        let g = DomainGrid::build(MetricSpec::flat(), 8, 17).unwrap();
        let f = FormField::zeros(&g, &Algebra::su2(), 0).unwrap();
        let d = decompose_gauge_element(&f).unwrap();
        let c = certificate_from_bytes(&certificate_to_bytes(&d).unwrap()).unwrap();
        assert_eq!(c.manifest.total_residual, 0.0);
        assert!(c.layers.iter().all(|l| l.terms.is_empty()));
        let r = c.reverify().unwrap();
        assert!(r.exact && r.reconstruction_error == 0.0);
    }
}
