//! Scripted adversary scenarios over the simulated chain.
//!
//! Each scenario is deterministic for a given seed and returns a summary
//! the CLI prints and the tests assert on.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archivist::{Archive, ArchiveServer, ArchivistError};
use crate::auditor::{
    check_arch_state, check_inclusion, fetch_arch_state, staleness_alarm, ArchState, AuditError, AuditorPolicy, Coverage,
    HeaderStore, Reject, Staleness,
};
use crate::authority::{write_manifest, AuthorityError, Batch, Disclosure, Wallet};
use crate::hashmerkle::{sha256, Digest32};
use crate::monitor::{check_all, get_commits, report, Availability, DirSource, Layout, MonitorError, Report};
use crate::par::Execution;
use crate::simchain::{Chain, SimChainConfig, SimError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Chain(#[from] SimError),
    #[error(transparent)]
    Authority(#[from] AuthorityError),
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error(transparent)]
    Archivist(#[from] ArchivistError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("scenario invariant broken: {0}")]
    Broken(String),
}

const FEE: u64 = 10_000;

/// A chain with a funded authority wallet, `warmup` blocks past genesis.
pub fn funded_chain(seed: u64, warmup: u64) -> Result<(Chain, Wallet), ScenarioError> {
    let mut chain = Chain::new(SimChainConfig { rng_seed: seed, ..Default::default() })?;
    let key = chain.scenario_key(1);
    let funding = chain.faucet(&key.address(), 100_000_000);
    chain.advance(warmup.max(1), 600);
    Ok((chain, Wallet::new(key, Some(funding))))
}

fn commit_block(chain: &mut Chain, wallet: &mut Wallet, batch: &mut Batch, interval: u32) -> Result<u64, ScenarioError> {
    batch.commit(chain, wallet, FEE)?;
    chain.advance(1, interval);
    let height = chain.height();
    batch.locate(&*chain, height)?.ok_or_else(|| ScenarioError::Broken("commitment not mined".into()))?;
    Ok(height)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SplitViewOutcome {
    pub fork_height: u64,
    pub rogue_digest: Digest32,
    pub adversary_blocks: u64,
    pub adversary_block_interval: u32,
    /// Auditor following the honest chain.
    pub honest_verdict: Result<(), Reject>,
    /// Auditor that only ever saw the adversary's branch.
    pub eclipsed_verdict: Result<(), Reject>,
    /// Staleness just before the next adversary block would arrive.
    pub eclipsed_staleness: Staleness,
    pub honest_staleness: Staleness,
    /// Seconds after the eclipse began when the alarm first fires.
    pub alarm_after_secs: u64,
}

/// The authority forks the chain, commits a rogue statement on its private
/// branch, mines the commitment plus `k` confirmations at one block per
/// `adversary_interval` seconds, and serves that branch to one auditor.
pub fn split_view(seed: u64, k: u64, adversary_interval: u32) -> Result<SplitViewOutcome, ScenarioError> {
    let (mut honest, mut wallet) = funded_chain(seed, 3)?;
    let policy = AuditorPolicy { k_confirmations: k, ..AuditorPolicy::new(wallet.address()) };

    let mut public = Batch::new();
    public.add_statement(sha256(b"public release"), "pool/public.deb")?;
    commit_block(&mut honest, &mut wallet, &mut public, 600)?;
    honest.advance(k, 600);

    let fork_height = honest.height();
    let eclipse_start = u64::from(honest.tip().header.timestamp);
    let mut fork = honest.fork_at(fork_height)?;
    let mut rogue_wallet = wallet.clone();

    // both auditors are in sync when the eclipse begins
    let mut honest_store = HeaderStore::from_checkpoint_at(honest.genesis_hash(), 0, eclipse_start);
    honest_store.sync(&honest, eclipse_start)?;
    let mut eclipsed_store = honest_store.clone();

    let rogue_digest = sha256(b"backdoored build");
    let mut rogue = Batch::new();
    rogue.add_statement(rogue_digest, "pool/public.deb")?;
    let rogue_height = commit_block(&mut fork, &mut rogue_wallet, &mut rogue, adversary_interval)?;
    fork.advance(k, adversary_interval);
    let adversary_blocks = fork.height() - fork_height;

    // honest network keeps its 10-minute cadence over the same period
    let attack_secs = adversary_blocks * u64::from(adversary_interval);
    honest.advance(attack_secs / 600, 600);

    // each auditor syncs as blocks reach it, on its local clock
    let mut alarm_after = None;
    let mut last_arrival = eclipse_start;
    for height in fork_height + 1..=fork.height() {
        let arrival = u64::from(fork.block_ref_at(height)?.header.timestamp);
        let probe = last_arrival + policy.max_block_interval + 1;
        if alarm_after.is_none() && probe < arrival {
            if let Staleness::EclipseSuspected { .. } = staleness_alarm(&eclipsed_store, &policy, probe) {
                alarm_after = Some(probe - eclipse_start);
            }
        }
        eclipsed_store.append(&fork.block_ref_at(height)?.header, arrival)?;
        last_arrival = arrival;
    }
    for height in fork_height + 1..=honest.height() {
        let header = honest.block_ref_at(height)?.header;
        honest_store.append(&header, u64::from(header.timestamp))?;
    }

    let block = fork.block_ref_at(rogue_height)?;
    let proof = rogue.prove_digest(block, &rogue_digest)?;
    let now = last_arrival + u64::from(adversary_interval) - 1;
    Ok(SplitViewOutcome {
        fork_height,
        rogue_digest,
        adversary_blocks,
        adversary_block_interval: adversary_interval,
        honest_verdict: check_inclusion(&honest_store, &policy, &rogue_digest, &proof),
        eclipsed_verdict: check_inclusion(&eclipsed_store, &policy, &rogue_digest, &proof),
        eclipsed_staleness: staleness_alarm(&eclipsed_store, &policy, now),
        honest_staleness: staleness_alarm(&honest_store, &policy, u64::from(honest.tip().header.timestamp) + 600),
        alarm_after_secs: alarm_after.ok_or_else(|| ScenarioError::Broken("staleness alarm never fired".into()))?,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WithholdingOutcome {
    pub published_height: u64,
    pub withheld_height: u64,
    pub statuses: Vec<Availability>,
    pub covered_tip: ArchState,
    /// The withheld statement's proof still verifies on chain.
    pub withheld_proof_verdict: Result<(), Reject>,
    pub withheld_coverage: Coverage,
    pub published_coverage: Coverage,
    pub report: Report,
}

/// Two batches are committed; the manifest for the second is never
/// published. A monitor, an archivist (over HTTP) and an auditor react.
pub fn withholding(seed: u64, work_dir: &Path) -> Result<WithholdingOutcome, ScenarioError> {
    let (mut chain, mut wallet) = funded_chain(seed, 2)?;
    let publish_dir = work_dir.join("published");
    fs::create_dir_all(&publish_dir)?;

    let publish = |batch: &mut Batch, tag: &str, release: bool| -> Result<(), ScenarioError> {
        for i in 0..3 {
            let name = format!("pool/main/{tag}/{tag}_{i}.0_amd64.deb");
            let bytes = format!("{tag} build {i}").into_bytes();
            batch.add_statement(sha256(&bytes), name.clone())?;
            if release {
                let path = publish_dir.join(&name);
                fs::create_dir_all(path.parent().expect("nested path"))?;
                fs::write(path, bytes)?;
            }
        }
        Ok(())
    };
    let mut published = Batch::new();
    publish(&mut published, "libfoo", true)?;
    let published_height = commit_block(&mut chain, &mut wallet, &mut published, 600)?;
    write_manifest(&published, &publish_dir, Disclosure::Immediate, 0)?;

    let mut withheld = Batch::new();
    publish(&mut withheld, "libbar", false)?;
    let withheld_height = commit_block(&mut chain, &mut wallet, &mut withheld, 600)?;
    chain.advance(6, 600);

    let data = DirSource::new(&publish_dir, Layout::Authority);
    let addr = wallet.address();
    let records = get_commits(&chain, &addr, 0, chain.height(), Execution::Parallel)?;
    let checked = check_all(&records, &data, Execution::Parallel);
    let statuses = checked.iter().map(|r| r.availability.unwrap_or(Availability::MissingData)).collect();
    let manifests = BTreeMap::from([(published.root()?, published.entries().to_vec())]);
    let report = report(&checked, &manifests);

    let genesis = ArchState { block_hash: chain.genesis_hash(), height: 0 };
    let archive = Archive::open(work_dir.join("archive"), genesis)?;
    let archive = Arc::new(RwLock::new(archive));
    archive.write().unwrap_or_else(|p| p.into_inner()).run_round(&chain, &addr, &data, Execution::Parallel)?;
    let server = ArchiveServer::start("127.0.0.1:0", Arc::clone(&archive), 1)?;
    let state = fetch_arch_state(&server.url())?;
    drop(server);

    let mut store = HeaderStore::from_checkpoint(chain.genesis_hash(), 0);
    store.sync(&chain, u64::from(chain.tip().header.timestamp))?;
    let policy = AuditorPolicy::new(addr);
    let withheld_proof = withheld.prove_inclusion(chain.block_ref_at(withheld_height)?, 0)?;
    let published_proof = published.prove_inclusion(chain.block_ref_at(published_height)?, 0)?;
    Ok(WithholdingOutcome {
        published_height,
        withheld_height,
        statuses,
        covered_tip: state,
        withheld_proof_verdict: check_inclusion(&store, &policy, &withheld.entries()[0].digest, &withheld_proof),
        withheld_coverage: check_arch_state(&store, &state, &withheld_proof)?,
        published_coverage: check_arch_state(&store, &state, &published_proof)?,
        report,
    })
}
