//! Binary model files.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic        8 bytes  "VSDLNET\0"
//! version      u32      = 1
//! net_count    u32
//! per network:
//!   layer_count u32
//!   per layer:
//!     input     u32
//!     output    u32
//!     activation u8  (0 identity, 1 relu, 2 softmax)
//!     reserved  3 bytes, zero
//!     weight    output*input f64, row-major (row = output unit)
//!     bias      output f64
//! checksum     32 bytes SHA-256 of every preceding byte
//! ```

use std::io::{Read, Write};

use ndarray::{Array1, Array2};
use sha2::{Digest, Sha256};

use super::{Activation, Dense, Mlp};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"VSDLNET\0";
pub const VERSION: u32 = 1;

pub fn encode_networks(nets: &[&Mlp]) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(nets.len() as u32).to_le_bytes());
    for net in nets {
        buf.extend_from_slice(&(net.layers.len() as u32).to_le_bytes());
        for layer in &net.layers {
            buf.extend_from_slice(&(layer.input_dim() as u32).to_le_bytes());
            buf.extend_from_slice(&(layer.output_dim() as u32).to_le_bytes());
            buf.push(layer.activation.code());
            buf.extend_from_slice(&[0, 0, 0]);
            for v in layer.weight.iter().chain(layer.bias.iter()) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    buf
}

pub fn write_networks<W: Write>(mut w: W, nets: &[&Mlp]) -> Result<()> {
    w.write_all(&encode_networks(nets))?;
    w.flush()?;
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::ModelFormat("truncated file".into()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::ModelFormat("size overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn decode_networks(data: &[u8]) -> Result<Vec<Mlp>> {
    if data.len() < MAGIC.len() + 8 + 32 {
        return Err(Error::ModelFormat("file too short".into()));
    }
    let (body, checksum) = data.split_at(data.len() - 32);
    if Sha256::digest(body).as_slice() != checksum {
        return Err(Error::ModelFormat("checksum mismatch".into()));
    }
    let mut c = Cursor { data: body, pos: 0 };
    if c.take(8)? != MAGIC {
        return Err(Error::ModelFormat("bad magic".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::ModelFormat(format!("unsupported version {version}")));
    }
    let count = c.u32()? as usize;
    let mut nets = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let layers = c.u32()? as usize;
        let mut dense = Vec::with_capacity(layers.min(64));
        for _ in 0..layers {
            let input = c.u32()? as usize;
            let output = c.u32()? as usize;
            let header = c.take(4)?;
            let activation = Activation::from_code(header[0])
                .ok_or_else(|| Error::ModelFormat(format!("unknown activation code {}", header[0])))?;
            let weight = Array2::from_shape_vec((output, input), c.f64s(output * input)?)
                .map_err(|e| Error::ModelFormat(e.to_string()))?;
            let bias = Array1::from(c.f64s(output)?);
            dense.push(Dense { weight, bias, activation });
        }
        nets.push(Mlp::from_layers(dense).map_err(|e| Error::ModelFormat(e.to_string()))?);
    }
    if c.pos != body.len() {
        return Err(Error::ModelFormat("trailing bytes".into()));
    }
    Ok(nets)
}

pub fn read_networks<R: Read>(mut r: R) -> Result<Vec<Mlp>> {
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    decode_networks(&data)
}
