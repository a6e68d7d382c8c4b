use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{p2pkh_script, WireError};

const P2PKH_VERSION: u8 = 0x00;

/// Classic P2PKH address; the authority's root of trust.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct AuthorityAddress {
    pubkey_hash: [u8; 20],
}

impl AuthorityAddress {
    pub fn from_pubkey_hash(pubkey_hash: [u8; 20]) -> Self {
        AuthorityAddress { pubkey_hash }
    }

    pub fn pubkey_hash(&self) -> &[u8; 20] {
        &self.pubkey_hash
    }

    /// Base58Check with version byte `0x00`.
    pub fn encode(&self) -> String {
        bs58::encode(self.pubkey_hash)
            .with_check_version(P2PKH_VERSION)
            .into_string()
    }

    pub fn decode(s: &str) -> Result<Self, WireError> {
        let bytes = bs58::decode(s.trim())
            .with_check(Some(P2PKH_VERSION))
            .into_vec()
            .map_err(|e| WireError::Address(e.to_string()))?;
        // with_check keeps the version byte and strips the checksum
        match bytes.as_slice() {
            [P2PKH_VERSION, rest @ ..] if rest.len() == 20 => {
                Ok(AuthorityAddress { pubkey_hash: rest.try_into().expect("20 bytes") })
            }
            _ => Err(WireError::Address(format!("expected 21 payload bytes, got {}", bytes.len()))),
        }
    }

    pub fn script_pubkey(&self) -> Vec<u8> {
        p2pkh_script(&self.pubkey_hash)
    }
}

impl fmt::Display for AuthorityAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encode())
    }
}

impl fmt::Debug for AuthorityAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AuthorityAddress({})", self.encode())
    }
}

impl FromStr for AuthorityAddress {
    type Err = WireError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::decode(s)
    }
}

impl Serialize for AuthorityAddress {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.encode())
    }
}

impl<'de> Deserialize<'de> for AuthorityAddress {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        AuthorityAddress::decode(&s).map_err(serde::de::Error::custom)
    }
}
