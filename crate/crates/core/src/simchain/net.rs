//! Local-socket transport so roles can run as separate processes.
//!
//! Every message is a 4-byte big-endian length followed by a JSON body.
//! Requests: `headers_after`, `tip_height`, `block_at`, `submit_tx`.
//! Blocks and transactions travel as hex of their wire bytes.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{Block, BlockSource, Chain, HeaderSource, SimError, TxSubmitter};
use crate::btcwire::{BlockHeader, RawTransaction};
use crate::hashmerkle::Digest32;

const MAX_MESSAGE: u32 = 64 << 20;

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Request {
    HeadersAfter { from: Digest32 },
    TipHeight,
    BlockAt { height: u64 },
    SubmitTx { tx: String },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Response {
    Headers(Vec<String>),
    Height(u64),
    Block(String),
    Txid(Digest32),
    Error(String),
}

pub fn write_message<W: Write, T: Serialize>(w: &mut W, msg: &T) -> std::io::Result<Vec<u8>> {
    let body = serde_json::to_vec(msg).expect("message serializes");
    w.write_all(&(body.len() as u32).to_be_bytes())?;
    w.write_all(&body)?;
    w.flush()?;
    Ok(body)
}

pub fn read_message<R: Read, T: for<'de> Deserialize<'de>>(r: &mut R) -> std::io::Result<T> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let len = u32::from_be_bytes(len);
    if len > MAX_MESSAGE {
        return Err(std::io::Error::new(std::io::ErrorKind::InvalidData, "message too large"));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body)?;
    serde_json::from_slice(&body).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}

/// Answer one request against `chain`.
pub fn handle(chain: &Mutex<Chain>, req: Request) -> Response {
    let mut chain = chain.lock().unwrap_or_else(|p| p.into_inner());
    let result = match req {
        Request::HeadersAfter { from } => chain
            .headers_after(&from)
            .map(|hs| Response::Headers(hs.iter().map(|h| hex::encode(h.to_bytes())).collect())),
        Request::TipHeight => Ok(Response::Height(chain.height())),
        Request::BlockAt { height } => chain.block_ref_at(height).map(|b| Response::Block(hex::encode(b.to_bytes()))),
        Request::SubmitTx { tx } => RawTransaction::from_hex(&tx)
            .map_err(SimError::from)
            .and_then(|tx| chain.submit(&tx))
            .map(Response::Txid),
    };
    result.unwrap_or_else(|e| Response::Error(e.to_string()))
}

/// Serve `chain` on `listener` until the listener fails. One thread per connection.
pub fn serve(listener: TcpListener, chain: Arc<Mutex<Chain>>) -> std::io::Result<()> {
    for stream in listener.incoming() {
        let mut stream = stream?;
        let chain = Arc::clone(&chain);
        std::thread::spawn(move || {
            while let Ok(req) = read_message::<_, Request>(&mut stream) {
                let resp = handle(&chain, req);
                if write_message(&mut stream, &resp).is_err() {
                    break;
                }
            }
        });
    }
    Ok(())
}

/// Client side of [`serve`]. Every outbound request body is kept in a
/// transcript so tests can check what a role revealed to the network.
pub struct RemoteChain {
    stream: Mutex<TcpStream>,
    transcript: Mutex<Vec<Vec<u8>>>,
}

impl RemoteChain {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self, SimError> {
        let stream = TcpStream::connect(addr).map_err(|e| SimError::Transport(e.to_string()))?;
        Ok(RemoteChain { stream: Mutex::new(stream), transcript: Mutex::new(Vec::new()) })
    }

    /// Raw bytes of every request sent so far.
    pub fn transcript(&self) -> Vec<Vec<u8>> {
        self.transcript.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }

    fn call(&self, req: &Request) -> Result<Response, SimError> {
        let transport = |e: std::io::Error| SimError::Transport(e.to_string());
        let mut stream = self.stream.lock().unwrap_or_else(|p| p.into_inner());
        let sent = write_message(&mut *stream, req).map_err(transport)?;
        self.transcript.lock().unwrap_or_else(|p| p.into_inner()).push(sent);
        let resp: Response = read_message(&mut *stream).map_err(transport)?;
        match resp {
            Response::Error(e) if e.starts_with("transaction rejected") => {
                Err(SimError::Rejected(e.trim_start_matches("transaction rejected: ").to_string()))
            }
            Response::Error(e) => Err(SimError::Transport(e)),
            other => Ok(other),
        }
    }

    fn unexpected(resp: Response) -> SimError {
        SimError::Transport(format!("unexpected response {resp:?}"))
    }
}

fn decode_hex(s: &str) -> Result<Vec<u8>, SimError> {
    hex::decode(s).map_err(|e| SimError::Transport(e.to_string()))
}

impl HeaderSource for RemoteChain {
    fn headers_after(&self, from: &Digest32) -> Result<Vec<BlockHeader>, SimError> {
        match self.call(&Request::HeadersAfter { from: *from })? {
            Response::Headers(hs) => hs.iter().map(|h| Ok(BlockHeader::from_bytes(&decode_hex(h)?)?)).collect(),
            other => Err(Self::unexpected(other)),
        }
    }
}

impl BlockSource for RemoteChain {
    fn tip_height(&self) -> Result<u64, SimError> {
        match self.call(&Request::TipHeight)? {
            Response::Height(h) => Ok(h),
            other => Err(Self::unexpected(other)),
        }
    }

    fn block_at(&self, height: u64) -> Result<Block, SimError> {
        match self.call(&Request::BlockAt { height })? {
            Response::Block(b) => Ok(Block::from_bytes(&decode_hex(&b)?)?),
            other => Err(Self::unexpected(other)),
        }
    }
}

impl TxSubmitter for RemoteChain {
    fn submit_tx(&mut self, tx: &RawTransaction) -> Result<Digest32, SimError> {
        match self.call(&Request::SubmitTx { tx: hex::encode(tx.to_bytes()) })? {
            Response::Txid(id) => Ok(id),
            other => Err(Self::unexpected(other)),
        }
    }
}
