//! Binary checkpoint format.
//!
//! ```text
//! magic "PEDNETCK" | u32 version | u64 header length | JSON header | f64 blocks
//! ```
//!
//! All integers and floats are little-endian. The header names each block
//! and its length; blocks follow in the same order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ArchitectureSpec, Geometry, Network};
use crate::encoder::FeatureScaler;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"PEDNETCK";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub network: Network,
    pub scaler: Option<FeatureScaler>,
    /// Fingerprint of the reference structure the inputs were encoded with.
    pub reference: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    spec: ArchitectureSpec,
    geometry: Geometry,
    reference: Option<String>,
    blocks: Vec<(String, usize)>,
}

fn write_f64s(out: &mut impl Write, v: &[f64]) -> Result<()> {
    for x in v {
        out.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_f64s(input: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    input
        .read_exact(&mut buf)
        .map_err(|e| Error::Checkpoint(format!("truncated parameter block: {e}")))?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

impl Checkpoint {
    pub fn write_to(&self, out: &mut impl Write) -> Result<()> {
        let mut blocks = vec![("params".to_string(), self.network.params.len())];
        if let Some(s) = &self.scaler {
            blocks.push(("scaler_min".into(), s.min.len()));
            blocks.push(("scaler_max".into(), s.max.len()));
        }
        let header = Header {
            version: VERSION,
            spec: self.network.spec.clone(),
            geometry: self.network.geometry.clone(),
            reference: self.reference.clone(),
            blocks,
        };
        let json = serde_json::to_vec(&header)?;
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&(json.len() as u64).to_le_bytes())?;
        out.write_all(&json)?;
        write_f64s(out, &self.network.params)?;
        if let Some(s) = &self.scaler {
            write_f64s(out, &s.min)?;
            write_f64s(out, &s.max)?;
        }
        Ok(())
    }

    pub fn read_from(input: &mut impl Read) -> Result<Checkpoint> {
        let mut magic = [0u8; 8];
        input
            .read_exact(&mut magic)
            .map_err(|_| Error::Checkpoint("file too short".into()))?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file".into()));
        }
        let mut word = [0u8; 4];
        input.read_exact(&mut word)?;
        let version = u32::from_le_bytes(word);
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let mut len = [0u8; 8];
        input.read_exact(&mut len)?;
        let len = u64::from_le_bytes(len) as usize;
        let mut json = vec![0u8; len];
        input.read_exact(&mut json)?;
        let header: Header = serde_json::from_slice(&json)?;
        let mut params = None;
        let mut min = None;
        let mut max = None;
        for (name, n) in &header.blocks {
            let v = read_f64s(input, *n)?;
            match name.as_str() {
                "params" => params = Some(v),
                "scaler_min" => min = Some(v),
                "scaler_max" => max = Some(v),
                other => return Err(Error::Checkpoint(format!("unknown block {other}"))),
            }
        }
        let params = params.ok_or_else(|| Error::Checkpoint("missing params block".into()))?;
        let scaler = match (min, max) {
            (Some(min), Some(max)) => Some(FeatureScaler { min, max }),
            (None, None) => None,
            _ => return Err(Error::Checkpoint("incomplete scaler".into())),
        };
        Ok(Checkpoint {
            network: Network::from_parts(header.spec, header.geometry, params)?,
            scaler,
            reference: header.reference,
        })
    }
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    ck.write_to(&mut f)?;
    f.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::read_from(&mut std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tests::pedigree_geometry;

    #[test]
    fn round_trip_is_bit_exact() {
        let net = Network::init(ArchitectureSpec::cnn(), pedigree_geometry(1)).unwrap();
        let ck = Checkpoint {
            network: net,
            scaler: Some(FeatureScaler {
                min: vec![0.1, -3.0],
                max: vec![1.0 / 3.0, 7.25],
            }),
            reference: Some("ref".into()),
        };
        let mut bytes = Vec::new();
        ck.write_to(&mut bytes).unwrap();
        let back = Checkpoint::read_from(&mut bytes.as_slice()).unwrap();
        assert_eq!(back, ck);
        let x: Vec<f64> = (0..183).map(|i| (i as f64).sin()).collect();
        assert_eq!(
            back.network.predict(&x).unwrap().to_bits(),
            ck.network.predict(&x).unwrap().to_bits()
        );
        assert!(Checkpoint::read_from(&mut &bytes[..20]).is_err());
        assert!(Checkpoint::read_from(&mut &b"garbage!"[..]).is_err());
    }
}
