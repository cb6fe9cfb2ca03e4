//! Versioned binary checkpoint.
//!
//! Little-endian layout: magic `DTNCKPT1` (8 bytes), kind `u8` (0 TTN,
//! 1 MERA), `m: u32`, `k: u32`, scheme `u8` (0 per-qubit, 1 per-node),
//! `p: f64`, data-layer dephasing `u8`, then every node's packed Hermitian
//! generator as `f64` (diagonal, then upper triangle as re/im pairs) in
//! node order.

use std::fs;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};

use super::{AncillaScheme, ModelKind, Network, NetworkTopology};
use crate::linalg::HermitianParam;
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DTNCKPT1";
const HEADER: usize = 8 + 1 + 4 + 4 + 1 + 8 + 1;

pub fn write_checkpoint(net: &Network) -> Vec<u8> {
    let t = net.topology();
    let mut out = Vec::with_capacity(HEADER + 8 * t.parameter_count());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.push(match t.kind {
        ModelKind::Ttn => 0,
        ModelKind::Mera => 1,
    });
    out.extend_from_slice(&(t.m as u32).to_le_bytes());
    out.extend_from_slice(&(t.k as u32).to_le_bytes());
    out.push(match t.scheme {
        AncillaScheme::PerQubit => 0,
        AncillaScheme::PerNode => 1,
    });
    out.extend_from_slice(&t.p.to_le_bytes());
    out.push(u8::from(t.dephase_data_layer));
    for h in net.params() {
        for x in h.packed() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<Network> {
    if bytes.len() < HEADER || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a DTNCKPT1 checkpoint".into()));
    }
    let kind = match bytes[8] {
        0 => ModelKind::Ttn,
        1 => ModelKind::Mera,
        b => return Err(Error::Format(format!("unknown model kind {b}"))),
    };
    let m = LittleEndian::read_u32(&bytes[9..13]) as usize;
    let k = LittleEndian::read_u32(&bytes[13..17]) as usize;
    let scheme = match bytes[17] {
        0 => AncillaScheme::PerQubit,
        1 => AncillaScheme::PerNode,
        b => return Err(Error::Format(format!("unknown ancilla scheme {b}"))),
    };
    let p = LittleEndian::read_f64(&bytes[18..26]);
    let dephase_data = bytes[26] != 0;
    let topo = NetworkTopology::build(kind, m, k, scheme)?.with_dephasing(p)?.with_data_dephasing(dephase_data);
    let expected = HEADER + 8 * topo.parameter_count();
    if bytes.len() != expected {
        return Err(Error::Format(format!("checkpoint has {} bytes, expected {expected}", bytes.len())));
    }
    let mut offset = HEADER;
    let mut params = Vec::with_capacity(topo.nodes.len());
    for node in &topo.nodes {
        let n = node.dim() * node.dim();
        let packed: Vec<f64> = (0..n).map(|i| LittleEndian::read_f64(&bytes[offset + 8 * i..])).collect();
        offset += 8 * n;
        params.push(HermitianParam::from_packed(node.dim(), packed)?);
    }
    Network::with_params(topo, params)
}

pub fn save_checkpoint(net: &Network, path: &Path) -> Result<()> {
    fs::write(path, write_checkpoint(net)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Network> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::testing::random_hermitian;
    use rand::SeedableRng;

    #[test]
    fn roundtrip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for topo in [
            NetworkTopology::ttn(8, 1, AncillaScheme::PerQubit).unwrap().with_dephasing(0.4).unwrap(),
            NetworkTopology::ttn(4, 2, AncillaScheme::PerNode).unwrap().with_data_dephasing(false),
            NetworkTopology::mera(8, 0).unwrap(),
        ] {
            let params = topo.nodes.iter().map(|n| random_hermitian(&mut rng, n.dim(), 0.3)).collect();
            let net = Network::with_params(topo, params).unwrap();
            let bytes = write_checkpoint(&net);
            assert_eq!(&bytes[..8], b"DTNCKPT1");
            let back = read_checkpoint(&bytes).unwrap();
            assert_eq!(back.topology(), net.topology());
            assert_eq!(back.params(), net.params());
            assert!(read_checkpoint(&bytes[..bytes.len() - 8]).is_err());
        }
        assert!(read_checkpoint(b"nonsense").is_err());
    }
}
