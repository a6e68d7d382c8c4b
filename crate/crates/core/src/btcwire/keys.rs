use k256::ecdsa::signature::hazmat::{PrehashSigner, PrehashVerifier};
use k256::ecdsa::{Signature, SigningKey, VerifyingKey};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::script::{p2pkh_pubkey_hash, push_data, script_pushes};
use super::{op_return_script, AuthorityAddress, OutPoint, RawTransaction, TxIn, TxOut, WireError};
use crate::hashmerkle::{hash160, sha256d, Digest32};

pub const SIGHASH_ALL: u32 = 1;

/// A secp256k1 signing key for a P2PKH address. Public keys are compressed.
#[derive(Clone)]
pub struct AuthorityKey {
    inner: SigningKey,
}

impl AuthorityKey {
    pub fn generate<R: RngCore>(rng: &mut R) -> Self {
        loop {
            let mut secret = [0u8; 32];
            rng.fill_bytes(&mut secret);
            if let Ok(key) = Self::from_secret_bytes(&secret) {
                return key;
            }
        }
    }

    pub fn from_secret_bytes(secret: &[u8; 32]) -> Result<Self, WireError> {
        let inner = SigningKey::from_bytes(secret.into()).map_err(|e| WireError::Key(e.to_string()))?;
        Ok(AuthorityKey { inner })
    }

    pub fn from_secret_hex(s: &str) -> Result<Self, WireError> {
        let bytes = hex::decode(s.trim()).map_err(|e| WireError::Key(e.to_string()))?;
        let arr: [u8; 32] = bytes.try_into().map_err(|_| WireError::Key("expected 32 bytes".into()))?;
        Self::from_secret_bytes(&arr)
    }

    pub fn secret_hex(&self) -> String {
        hex::encode(self.inner.to_bytes())
    }

    pub fn public_key(&self) -> [u8; 33] {
        let point = self.inner.verifying_key().to_encoded_point(true);
        point.as_bytes().try_into().expect("compressed SEC1 point is 33 bytes")
    }

    pub fn address(&self) -> AuthorityAddress {
        AuthorityAddress::from_pubkey_hash(hash160(&self.public_key()))
    }

    /// Deterministic (RFC 6979) low-S signature over a precomputed digest, DER encoded.
    pub fn sign_digest(&self, digest: &Digest32) -> Vec<u8> {
        let sig: Signature = self.inner.sign_prehash(digest.as_bytes()).expect("32-byte prehash");
        let sig = sig.normalize_s().unwrap_or(sig);
        sig.to_der().as_bytes().to_vec()
    }
}

impl std::fmt::Debug for AuthorityKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "AuthorityKey({})", self.address())
    }
}

/// A spendable output controlled by the authority key.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Funding {
    pub outpoint: OutPoint,
    pub value: u64,
}

/// Legacy signature hash of input `index` against `prev_script`.
pub fn legacy_sighash(tx: &RawTransaction, index: usize, prev_script: &[u8], hash_type: u32) -> Digest32 {
    let mut copy = tx.clone();
    for (i, input) in copy.inputs.iter_mut().enumerate() {
        input.script_sig = if i == index { prev_script.to_vec() } else { Vec::new() };
    }
    let mut bytes = copy.to_bytes();
    bytes.extend_from_slice(&hash_type.to_le_bytes());
    sha256d(&bytes)
}

/// Fill input `index` with `<sig||SIGHASH_ALL> <pubkey>` spending a P2PKH output of `key`.
pub fn sign_p2pkh_input(tx: &mut RawTransaction, index: usize, key: &AuthorityKey) {
    let prev_script = key.address().script_pubkey();
    let digest = legacy_sighash(tx, index, &prev_script, SIGHASH_ALL);
    let mut sig = key.sign_digest(&digest);
    sig.push(SIGHASH_ALL as u8);
    let mut script_sig = Vec::with_capacity(107);
    push_data(&mut script_sig, &sig);
    push_data(&mut script_sig, &key.public_key());
    tx.inputs[index].script_sig = script_sig;
}

/// Check the P2PKH spend of input `index`: the pushed public key must hash
/// to the output's key hash and the signature must verify over the legacy
/// SIGHASH_ALL digest.
pub fn verify_p2pkh_input(tx: &RawTransaction, index: usize, prev_script: &[u8]) -> bool {
    let Some(expected) = p2pkh_pubkey_hash(prev_script) else { return false };
    let Some(input) = tx.inputs.get(index) else { return false };
    let pushes = script_pushes(&input.script_sig);
    let Some(&[sig, pubkey]) = pushes.as_deref() else { return false };
    if hash160(pubkey) != expected {
        return false;
    }
    let Some((&hash_type, der)) = sig.split_last() else { return false };
    if u32::from(hash_type) != SIGHASH_ALL {
        return false;
    }
    let (Ok(vk), Ok(sig)) = (VerifyingKey::from_sec1_bytes(pubkey), Signature::from_der(der)) else {
        return false;
    };
    let digest = legacy_sighash(tx, index, prev_script, SIGHASH_ALL);
    vk.verify_prehash(digest.as_bytes(), &sig).is_ok()
}

/// Build and sign the canonical commitment transaction: one input spending
/// `funding`, output 0 `OP_RETURN <root>`, output 1 the change to `change`.
pub fn build_commit_tx(
    root: &[u8],
    funding: &Funding,
    key: &AuthorityKey,
    change: &AuthorityAddress,
    fee: u64,
) -> Result<RawTransaction, WireError> {
    if root.len() != 32 {
        return Err(WireError::Format(format!("commit root must be 32 bytes, got {}", root.len())));
    }
    // zero-value change is rejected along with outright underfunding
    if funding.value <= fee {
        return Err(WireError::Funding { available: funding.value, required: fee.saturating_add(1) });
    }
    let mut tx = RawTransaction {
        version: 1,
        inputs: vec![TxIn { prev_out: funding.outpoint, script_sig: Vec::new(), sequence: u32::MAX }],
        outputs: vec![
            TxOut { value: 0, script_pubkey: op_return_script(root) },
            TxOut { value: funding.value - fee, script_pubkey: change.script_pubkey() },
        ],
        lock_time: 0,
    };
    sign_p2pkh_input(&mut tx, 0, key);
    Ok(tx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::btcwire::{extract_commit_root, tx_spends_from};
    use rand::SeedableRng;

    fn funding() -> Funding {
        Funding { outpoint: OutPoint { txid: Digest32([1; 32]), vout: 0 }, value: 100_000 }
    }

    #[test]
    fn commit_tx_shape() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let key = AuthorityKey::generate(&mut rng);
        let root = Digest32([0xab; 32]);
        let tx = build_commit_tx(root.as_bytes(), &funding(), &key, &key.address(), 1_000).unwrap();
        assert_eq!(tx.outputs.len(), 2);
        assert_eq!(&tx.outputs[0].script_pubkey[..2], &[0x6a, 0x20]);
        assert_eq!(tx.outputs[1].value, 99_000);
        assert!((233..=237).contains(&tx.to_bytes().len()));
        assert_eq!(extract_commit_root(&tx).unwrap(), root);
        assert!(tx_spends_from(&tx, &key.address()));
        assert!(verify_p2pkh_input(&tx, 0, &key.address().script_pubkey()));

        let other = AuthorityKey::generate(&mut rng);
        assert!(!tx_spends_from(&tx, &other.address()));
        assert!(!verify_p2pkh_input(&tx, 0, &other.address().script_pubkey()));
    }

    #[test]
    fn tampered_tx_fails_signature() {
        let key = AuthorityKey::from_secret_bytes(&[7; 32]).unwrap();
        let mut tx = build_commit_tx(&[0; 32], &funding(), &key, &key.address(), 10).unwrap();
        tx.outputs[1].value += 1;
        assert!(!verify_p2pkh_input(&tx, 0, &key.address().script_pubkey()));
    }

    #[test]
    fn funding_errors() {
        let key = AuthorityKey::from_secret_bytes(&[7; 32]).unwrap();
        let f = funding();
        assert!(matches!(
            build_commit_tx(&[0; 32], &f, &key, &key.address(), f.value + 1),
            Err(WireError::Funding { .. })
        ));
        // fee == funding value would leave a zero-value change output
        assert!(matches!(
            build_commit_tx(&[0; 32], &f, &key, &key.address(), f.value),
            Err(WireError::Funding { .. })
        ));
        assert!(matches!(
            build_commit_tx(&[0; 20], &f, &key, &key.address(), 1),
            Err(WireError::Format(_))
        ));
    }

    #[test]
    fn secret_hex_round_trip() {
        let key = AuthorityKey::from_secret_bytes(&[9; 32]).unwrap();
        let back = AuthorityKey::from_secret_hex(&key.secret_hex()).unwrap();
        assert_eq!(back.public_key(), key.public_key());
        assert!(AuthorityKey::from_secret_bytes(&[0; 32]).is_err());
    }
}
