//! Golden vectors produced by `fixtures/gen_fixtures.py`.

use contour::btcwire::{
    self, build_commit_tx, check_pow, extract_commit_root, legacy_sighash, op_return_script,
    read_varint, tx_spends_from, write_varint, AuthorityAddress, AuthorityKey, BlockHeader, Funding,
    OutPoint, RawTransaction, WireError, SIGHASH_ALL,
};
use contour::hashmerkle::{
    bitcoin_tx_branch, bitcoin_tx_root, hash160, statement_root, verify_bitcoin_tx_branch,
    verify_statement_branch, Digest32, MerkleBranch, StatementTree,
};
use serde_json::Value;

fn fixtures() -> Value {
    let text = include_str!("fixtures/wire.json");
    serde_json::from_str(text).unwrap()
}

fn digest(v: &Value) -> Digest32 {
    Digest32::from_hex(v.as_str().unwrap()).unwrap()
}

fn digests(v: &Value) -> Vec<Digest32> {
    v.as_array().unwrap().iter().map(digest).collect()
}

fn bytes(v: &Value) -> Vec<u8> {
    hex::decode(v.as_str().unwrap()).unwrap()
}

#[test]
fn statement_tree_matches_hand_oracle() {
    let f = &fixtures()["statement"];
    let leaves = digests(&f["leaves"]);

    assert_eq!(statement_root(&leaves[..1]).unwrap(), digest(&f["single_leaf_root"]));

    let tree4 = StatementTree::build(leaves[..4].to_vec()).unwrap();
    assert_eq!(tree4.root(), digest(&f["root4"]));
    let b = tree4.branch(2).unwrap();
    assert_eq!(b.siblings, digests(&f["branch4_index2"]));
    assert!(verify_statement_branch(&leaves[2], &b, &tree4.root()));

    let tree6 = StatementTree::build(leaves.clone()).unwrap();
    assert_eq!(tree6.root(), digest(&f["root6"]));
    assert_eq!(tree6.depth(), 3);
    let b5 = tree6.branch(5).unwrap();
    // leaf 5's parent is promoted at level 1, so it has two siblings, not three
    assert_eq!(b5.siblings, digests(&f["branch6_index5"]));
    assert!(verify_statement_branch(&leaves[5], &b5, &tree6.root()));
    let b0 = tree6.branch(0).unwrap();
    assert_eq!(b0.siblings, digests(&f["branch6_index0"]));

    // same siblings under the wrong index: path direction matters
    let moved = MerkleBranch { leaf_index: 4, siblings: b5.siblings.clone() };
    assert!(!verify_statement_branch(&leaves[5], &moved, &tree6.root()));
}

#[test]
fn bitcoin_tree_matches_hand_oracle() {
    let f = &fixtures()["bitcoin_tree"];
    let txids = digests(&f["txids"]);
    let root = bitcoin_tx_root(&txids).unwrap();
    assert_eq!(root, digest(&f["root3"]));
    let b = bitcoin_tx_branch(&txids, 2).unwrap();
    assert_eq!(b.siblings, digests(&f["branch3_index2"]));
    assert!(verify_bitcoin_tx_branch(&txids[2], &b, &root));
    let mut bad = b.clone();
    bad.siblings[1].0[0] ^= 1;
    assert!(!verify_bitcoin_tx_branch(&txids[2], &bad, &root));
}

#[test]
fn genesis_block_hashes() {
    let f = &fixtures()["genesis"];
    let header = BlockHeader::from_bytes(&bytes(&f["header"])).unwrap();
    assert_eq!(header.to_bytes().to_vec(), bytes(&f["header"]));
    assert_eq!(header.block_hash(), digest(&f["hash"]));
    assert_eq!(
        header.block_hash().to_reversed_hex(),
        "000000000019d6689c085ae165831e934ff763ae46a2a6c172b3f1b60a8ce26f"
    );
    assert_eq!(check_pow(&header), Ok(true));

    let coinbase = RawTransaction::from_bytes(&bytes(&f["coinbase_tx"])).unwrap();
    assert!(coinbase.is_coinbase());
    assert_eq!(coinbase.to_bytes(), bytes(&f["coinbase_tx"]));
    assert_eq!(coinbase.txid(), digest(&f["coinbase_txid"]));
    assert_eq!(header.merkle_root, coinbase.txid());
    assert_eq!(bitcoin_tx_root(&[coinbase.txid()]).unwrap(), header.merkle_root);

    assert_eq!(hex::encode(hash160(&bytes(&f["pubkey"]))), f["pubkey_hash"].as_str().unwrap());
}

#[test]
fn genesis_header_fails_pow_after_nonce_search() {
    let f = &fixtures()["genesis"];
    let mut header = BlockHeader::from_bytes(&bytes(&f["header"])).unwrap();
    // at mainnet difficulty the very next nonce already misses the target
    header.nonce = header.nonce.wrapping_add(1);
    assert_eq!(check_pow(&header), Ok(false));
}

#[test]
fn varint_golden_encodings() {
    for case in fixtures()["varints"].as_array().unwrap() {
        let value: u64 = case["value"].as_str().unwrap().parse().unwrap();
        let encoded = bytes(&case["encoded"]);
        let mut out = Vec::new();
        write_varint(&mut out, value);
        assert_eq!(out, encoded, "value {value}");
        assert_eq!(read_varint(&encoded).unwrap(), (value, encoded.len()));
    }
}

#[test]
fn base58check_addresses() {
    for case in fixtures()["addresses"].as_array().unwrap() {
        let pkh: [u8; 20] = bytes(&case["pubkey_hash"]).try_into().unwrap();
        let text = case["address"].as_str().unwrap();
        let addr = AuthorityAddress::from_pubkey_hash(pkh);
        assert_eq!(addr.encode(), text);
        assert_eq!(AuthorityAddress::decode(text).unwrap(), addr);
    }
}

#[test]
fn base58check_rejects_every_single_character_corruption() {
    const ALPHABET: &str = "123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz";
    let text = fixtures()["genesis"]["address"].as_str().unwrap().to_string();
    for (i, original) in text.char_indices() {
        for c in ALPHABET.chars().filter(|&c| c != original) {
            let mut corrupted = text.clone();
            corrupted.replace_range(i..i + 1, &c.to_string());
            assert!(AuthorityAddress::decode(&corrupted).is_err(), "{corrupted} decoded");
        }
    }
}

#[test]
fn op_return_script_golden() {
    let f = &fixtures()["op_return"];
    assert_eq!(op_return_script(&bytes(&f["root"])), bytes(&f["script"]));
}

#[test]
fn commit_tx_matches_independent_signer() {
    let f = &fixtures()["commit"];
    let key = AuthorityKey::from_secret_hex(f["secret_key"].as_str().unwrap()).unwrap();
    assert_eq!(key.public_key().to_vec(), bytes(&f["pubkey"]));
    assert_eq!(key.address().encode(), f["address"].as_str().unwrap());

    let funding = Funding {
        outpoint: OutPoint { txid: digest(&f["funding_txid"]), vout: f["funding_vout"].as_u64().unwrap() as u32 },
        value: f["funding_value"].as_u64().unwrap(),
    };
    let root = digest(&f["root"]);
    let tx = build_commit_tx(root.as_bytes(), &funding, &key, &key.address(), f["fee"].as_u64().unwrap())
        .unwrap();

    let mut unsigned = tx.clone();
    unsigned.inputs[0].script_sig.clear();
    let sighash = legacy_sighash(&unsigned, 0, &key.address().script_pubkey(), SIGHASH_ALL);
    assert_eq!(sighash, digest(&f["sighash"]));

    // RFC 6979 nonces make both signers produce the same bytes
    assert_eq!(hex::encode(tx.to_bytes()), f["tx"].as_str().unwrap());
    assert_eq!(tx.txid(), digest(&f["txid"]));
    assert_eq!(tx.to_bytes().len() as u64, f["size"].as_u64().unwrap());
    assert!(btcwire::verify_p2pkh_input(&tx, 0, &key.address().script_pubkey()));

    let parsed = RawTransaction::from_hex(f["tx"].as_str().unwrap()).unwrap();
    assert_eq!(extract_commit_root(&parsed).unwrap(), root);
    assert!(tx_spends_from(&parsed, &key.address()));
}

#[test]
fn non_commitment_fixtures() {
    let f = &fixtures();
    let addr = AuthorityAddress::decode(f["commit"]["address"].as_str().unwrap()).unwrap();
    let nc = &f["not_commitments"];

    let short = RawTransaction::from_bytes(&bytes(&nc["short_op_return"])).unwrap();
    assert_eq!(extract_commit_root(&short), Err(WireError::NotACommitment));

    let payment = RawTransaction::from_bytes(&bytes(&nc["payment"])).unwrap();
    assert_eq!(extract_commit_root(&payment), Err(WireError::NotACommitment));
    assert!(tx_spends_from(&payment, &addr));

    let garbage = RawTransaction::from_bytes(&bytes(&nc["garbage_script_sig"])).unwrap();
    assert!(!tx_spends_from(&garbage, &addr));
}
