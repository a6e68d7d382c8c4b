//! Property tests over the wire formats, trees, parsers and cost model.

use contour::auditor::{check_inclusion, staleness_alarm, ArchState, AuditorPolicy, HeaderStore, Reject, Staleness};
use contour::authority::{parse_manifest, render_manifest, Batch, BatchEntry};
use contour::btcwire::{read_varint, write_varint, BlockHeader, OutPoint, RawTransaction, TxIn, TxOut};
use contour::costmodel::{electricity_cost_per_block, rigs_required_exact, MiningParams};
use contour::debfeed::parse_packages;
use contour::hashmerkle::{
    bitcoin_tx_branch, bitcoin_tx_root, ceil_log2, sha256, sha256d, statement_root, verify_bitcoin_tx_branch,
    verify_statement_branch, Digest32, StatementTree,
};
use contour::scenarios::funded_chain;
use contour::{Execution, InclusionProof};
use proptest::prelude::*;

fn digest() -> impl Strategy<Value = Digest32> {
    any::<[u8; 32]>().prop_map(Digest32)
}

fn leaves(max: usize) -> impl Strategy<Value = Vec<Digest32>> {
    (1..=max).prop_flat_map(|n| {
        // distinct cheap leaves; the tree does not care where they came from
        any::<u64>().prop_map(move |seed| (0..n as u64).map(|i| sha256(&(seed ^ i).to_le_bytes())).collect())
    })
}

/// Bitcoin's duplicate-last merkle root, written out level by level.
fn reference_tx_root(hashes: &[Digest32]) -> Digest32 {
    let mut level = hashes.to_vec();
    while level.len() > 1 {
        if level.len() % 2 == 1 {
            level.push(*level.last().unwrap());
        }
        level = level
            .chunks(2)
            .map(|p| {
                let mut buf = [0u8; 64];
                buf[..32].copy_from_slice(p[0].as_bytes());
                buf[32..].copy_from_slice(p[1].as_bytes());
                sha256d(&buf)
            })
            .collect();
    }
    level[0]
}

fn tx_strategy() -> impl Strategy<Value = RawTransaction> {
    let input = (digest(), any::<u32>(), prop::collection::vec(any::<u8>(), 0..300), any::<u32>())
        .prop_map(|(txid, vout, script_sig, sequence)| TxIn { prev_out: OutPoint { txid, vout }, script_sig, sequence });
    let output = (any::<u64>(), prop::collection::vec(any::<u8>(), 0..300))
        .prop_map(|(value, script_pubkey)| TxOut { value, script_pubkey });
    (
        any::<i32>(),
        prop::collection::vec(input, 0..4),
        prop::collection::vec(output, 0..4),
        any::<u32>(),
    )
        .prop_map(|(version, inputs, outputs, lock_time)| RawTransaction { version, inputs, outputs, lock_time })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn statement_branches_verify_and_detect_tampering(
        leaves in leaves(4096),
        pick in any::<prop::sample::Index>(),
        flip in any::<(prop::sample::Index, u8)>(),
    ) {
        let tree = StatementTree::build(leaves.clone()).unwrap();
        let root = tree.root();
        prop_assert_eq!(root, statement_root(&leaves).unwrap());
        let i = pick.index(leaves.len());
        let branch = tree.branch(i).unwrap();
        prop_assert!(branch.siblings.len() as u32 <= ceil_log2(leaves.len()));
        prop_assert!(verify_statement_branch(&leaves[i], &branch, &root));

        let mut wrong_leaf = leaves[i];
        wrong_leaf.0[flip.0.index(32)] ^= flip.1 | 1;
        prop_assert!(!verify_statement_branch(&wrong_leaf, &branch, &root));
        if !branch.siblings.is_empty() {
            let mut bad = branch.clone();
            let s = flip.0.index(bad.siblings.len());
            bad.siblings[s].0[flip.1 as usize % 32] ^= 0x80;
            prop_assert!(!verify_statement_branch(&leaves[i], &bad, &root));
        }
    }

    #[test]
    fn parallel_tree_matches_sequential(leaves in leaves(4096)) {
        let seq = StatementTree::build_with(leaves.clone(), Execution::Sequential).unwrap();
        let par = StatementTree::build_with(leaves, Execution::Parallel).unwrap();
        prop_assert_eq!(seq.root(), par.root());
    }

    #[test]
    fn tx_tree_matches_reference(hashes in leaves(700), pick in any::<prop::sample::Index>()) {
        let root = bitcoin_tx_root(&hashes).unwrap();
        prop_assert_eq!(root, reference_tx_root(&hashes));
        let i = pick.index(hashes.len());
        let branch = bitcoin_tx_branch(&hashes, i).unwrap();
        prop_assert!(verify_bitcoin_tx_branch(&hashes[i], &branch, &root));
        let j = (i + 1) % hashes.len();
        if hashes[j] != hashes[i] {
            prop_assert!(!verify_bitcoin_tx_branch(&hashes[j], &branch, &root));
        }
    }

    #[test]
    fn header_round_trip(version in any::<i32>(), prev in digest(), merkle in digest(),
                         timestamp in any::<u32>(), bits in any::<u32>(), nonce in any::<u32>()) {
        let h = BlockHeader { version, prev_hash: prev, merkle_root: merkle, timestamp, bits, nonce };
        let bytes = h.to_bytes();
        prop_assert_eq!(bytes.len(), 80);
        prop_assert_eq!(BlockHeader::from_bytes(&bytes).unwrap(), h);
    }

    #[test]
    fn tx_round_trip(tx in tx_strategy()) {
        let bytes = tx.to_bytes();
        prop_assert_eq!(bytes.len(), tx.encoded_len());
        prop_assert_eq!(RawTransaction::from_bytes(&bytes).unwrap(), tx);
        prop_assert!(RawTransaction::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn varint_round_trip(n in any::<u64>()) {
        let mut out = Vec::new();
        write_varint(&mut out, n);
        prop_assert_eq!(read_varint(&out).unwrap(), (n, out.len()));
    }

    #[test]
    fn parsers_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..600)) {
        let _ = InclusionProof::from_bytes(&bytes);
        let _ = RawTransaction::from_bytes(&bytes);
        let _ = HeaderStore::from_bytes(&bytes);
        let _ = parse_packages(&bytes);
        let text = String::from_utf8_lossy(&bytes);
        let _ = parse_manifest(&text);
        let _ = text.parse::<ArchState>();
        let mut proof_like = b"CNTR\x01".to_vec();
        proof_like.extend_from_slice(&bytes);
        let _ = InclusionProof::from_bytes(&proof_like);
    }

    #[test]
    fn manifest_round_trip(entries in prop::collection::vec((digest(), "[a-z0-9_./+-]{1,40}"), 0..50)) {
        let entries: Vec<BatchEntry> = entries.into_iter().map(|(digest, filename)| BatchEntry { digest, filename }).collect();
        prop_assert_eq!(parse_manifest(&render_manifest(&entries)).unwrap(), entries);
    }

    #[test]
    fn cost_scales_linearly(scale in 0.01f64..100.0, secs in 1.0f64..1e7) {
        let p = MiningParams::december_2017();
        let scaled = MiningParams { difficulty: p.difficulty * scale, ..p };
        let base = electricity_cost_per_block(&p).unwrap();
        let ratio = electricity_cost_per_block(&scaled).unwrap() / base;
        prop_assert!((ratio - scale).abs() / scale < 1e-9);
        // rigs times seconds is the work of one block, whatever the deadline
        let work = rigs_required_exact(&p, secs).unwrap() * secs;
        let reference = rigs_required_exact(&p, 1.0).unwrap();
        prop_assert!((work - reference).abs() / reference < 1e-9);
    }

    #[test]
    fn staleness_boundary(arrival in 0u64..1u64 << 40, limit in 1u64..100_000, extra in 0u64..1000) {
        let store = HeaderStore::from_checkpoint_at(Digest32::ZERO, 0, arrival);
        let mut policy = AuditorPolicy::new(funded_chain(0, 1).unwrap().1.address());
        policy.max_block_interval = limit;
        prop_assert_eq!(staleness_alarm(&store, &policy, arrival + limit), Staleness::Ok { gap: limit });
        let late = arrival + limit + 1 + extra;
        let is_suspected = matches!(staleness_alarm(&store, &policy, late), Staleness::EclipseSuspected { .. });
        prop_assert!(is_suspected);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Commit then prove then verify accepts every statement, for any batch.
    #[test]
    fn pipeline_accepts_every_statement(n in 1usize..300, seed in any::<u64>(), extra in 0u64..4) {
        let (mut chain, mut wallet) = funded_chain(seed, 1).unwrap();
        let mut batch = Batch::new();
        for i in 0..n {
            batch.add_statement(sha256(format!("{seed} {i}").as_bytes()), format!("pool/f{i}.deb")).unwrap();
        }
        batch.commit(&mut chain, &mut wallet, 10_000).unwrap();
        chain.advance(1 + 6 + extra, 600);
        let block = batch.locate(&chain, 0).unwrap().unwrap();
        let mut store = HeaderStore::from_checkpoint(chain.genesis_hash(), 0);
        store.sync(&chain, 0).unwrap();
        let policy = AuditorPolicy::new(wallet.address());
        let proofs = batch.prove_all(&block, Execution::Parallel).unwrap();
        prop_assert_eq!(proofs.len(), n);
        for (entry, proof) in batch.entries().iter().zip(&proofs) {
            let decoded = InclusionProof::from_bytes(&proof.to_bytes()).unwrap();
            prop_assert_eq!(&decoded, proof);
            prop_assert_eq!(check_inclusion(&store, &policy, &entry.digest, &decoded), Ok(()));
        }
        // a statement that was never added is refused
        let stranger = sha256(b"not in any batch");
        prop_assert_eq!(check_inclusion(&store, &policy, &stranger, &proofs[0]), Err(Reject::BadStatementPath));
    }
}
