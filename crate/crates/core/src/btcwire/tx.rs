use serde::{Deserialize, Serialize};

use super::script::{op_return_payload, script_pushes};
use super::{write_varint, AuthorityAddress, Reader, WireError};
use crate::hashmerkle::{hash160, sha256d, Digest32};

const MAX_SCRIPT_LEN: u64 = 10_000;
const MAX_IO_COUNT: u64 = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OutPoint {
    pub txid: Digest32,
    pub vout: u32,
}

impl OutPoint {
    /// The all-zero outpoint that coinbase inputs reference.
    pub const NULL: OutPoint = OutPoint { txid: Digest32::ZERO, vout: u32::MAX };

    pub fn is_null(&self) -> bool {
        *self == Self::NULL
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxIn {
    pub prev_out: OutPoint,
    #[serde(with = "hex_bytes")]
    pub script_sig: Vec<u8>,
    pub sequence: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxOut {
    pub value: u64,
    #[serde(with = "hex_bytes")]
    pub script_pubkey: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawTransaction {
    pub version: i32,
    pub inputs: Vec<TxIn>,
    pub outputs: Vec<TxOut>,
    pub lock_time: u32,
}

impl RawTransaction {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        self.write(&mut out);
        out
    }

    pub fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.version.to_le_bytes());
        write_varint(out, self.inputs.len() as u64);
        for input in &self.inputs {
            out.extend_from_slice(&input.prev_out.txid.0);
            out.extend_from_slice(&input.prev_out.vout.to_le_bytes());
            write_varint(out, input.script_sig.len() as u64);
            out.extend_from_slice(&input.script_sig);
            out.extend_from_slice(&input.sequence.to_le_bytes());
        }
        write_varint(out, self.outputs.len() as u64);
        for output in &self.outputs {
            out.extend_from_slice(&output.value.to_le_bytes());
            write_varint(out, output.script_pubkey.len() as u64);
            out.extend_from_slice(&output.script_pubkey);
        }
        out.extend_from_slice(&self.lock_time.to_le_bytes());
    }

    pub fn encoded_len(&self) -> usize {
        use super::varint_len;
        let ins: usize = self
            .inputs
            .iter()
            .map(|i| 36 + varint_len(i.script_sig.len() as u64) + i.script_sig.len() + 4)
            .sum();
        let outs: usize = self
            .outputs
            .iter()
            .map(|o| 8 + varint_len(o.script_pubkey.len() as u64) + o.script_pubkey.len())
            .sum();
        4 + varint_len(self.inputs.len() as u64)
            + ins
            + varint_len(self.outputs.len() as u64)
            + outs
            + 4
    }

    /// Parse exactly one transaction; trailing bytes are an error.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let tx = Self::read(&mut r)?;
        r.finish()?;
        Ok(tx)
    }

    pub fn read(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let version = r.i32_le()?;
        let n_in = r.length(MAX_IO_COUNT)?;
        let mut inputs = Vec::with_capacity(n_in);
        for _ in 0..n_in {
            let txid = r.digest()?;
            let vout = r.u32_le()?;
            let script_sig = r.var_bytes(MAX_SCRIPT_LEN)?.to_vec();
            let sequence = r.u32_le()?;
            inputs.push(TxIn { prev_out: OutPoint { txid, vout }, script_sig, sequence });
        }
        let n_out = r.length(MAX_IO_COUNT)?;
        let mut outputs = Vec::with_capacity(n_out);
        for _ in 0..n_out {
            let value = r.u64_le()?;
            let script_pubkey = r.var_bytes(MAX_SCRIPT_LEN)?.to_vec();
            outputs.push(TxOut { value, script_pubkey });
        }
        let lock_time = r.u32_le()?;
        Ok(RawTransaction { version, inputs, outputs, lock_time })
    }

    pub fn from_hex(s: &str) -> Result<Self, WireError> {
        let bytes = hex::decode(s.trim()).map_err(|e| WireError::Format(e.to_string()))?;
        Self::from_bytes(&bytes)
    }

    pub fn txid(&self) -> Digest32 {
        sha256d(&self.to_bytes())
    }

    pub fn is_coinbase(&self) -> bool {
        self.inputs.len() == 1 && self.inputs[0].prev_out.is_null()
    }

    pub fn output_value(&self) -> u64 {
        self.outputs.iter().map(|o| o.value).sum()
    }
}

/// Root carried by the first `OP_RETURN` output.
pub fn extract_commit_root(tx: &RawTransaction) -> Result<Digest32, WireError> {
    let script = tx
        .outputs
        .iter()
        .map(|o| o.script_pubkey.as_slice())
        .find(|s| s.first() == Some(&0x6a))
        .ok_or(WireError::NotACommitment)?;
    let payload = op_return_payload(script).ok_or(WireError::NotACommitment)?;
    Digest32::from_slice(payload).map_err(|_| WireError::NotACommitment)
}

/// `true` iff some input carries, in the P2PKH `<sig> <pubkey>` position, a
/// public key hashing to `addr`. Signatures are not checked here.
pub fn tx_spends_from(tx: &RawTransaction, addr: &AuthorityAddress) -> bool {
    tx.inputs.iter().any(|input| match script_pushes(&input.script_sig).as_deref() {
        Some([_sig, pubkey]) if matches!(pubkey.len(), 33 | 65) => {
            hash160(pubkey) == *addr.pubkey_hash()
        }
        _ => false,
    })
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}
