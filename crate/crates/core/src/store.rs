//! On-disk layout of a network:
//!
//! ```text
//! <root>/network.json            ledger config and logical clock
//! <root>/ledger/<channel>.jsonl  block log, one canonical block per line
//! <root>/ledger/<channel>.hash   state hash after the last block
//! <root>/events/<channel>.jsonl  delivered events (only when enabled)
//! <root>/.lock                   held for the duration of a command
//! ```
//!
//! The base ledger is stored under its channel name like every other
//! channel.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ledger::{read_log, replay, write_log, Block, LedgerConfig, LedgerError, Network, SimClock, BASE_CHANNEL};

const MANIFEST: &str = "network.json";
const LOCK: &str = ".lock";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("no network in {0} (run `network init` first)")]
    NotInitialized(PathBuf),
    #[error("a network already exists in {0}")]
    AlreadyInitialized(PathBuf),
    #[error("data directory {0} is locked by another command")]
    Locked(PathBuf),
    #[error("bad manifest: {0}")]
    Manifest(String),
    #[error("state hash of {channel} is {replayed} but {recorded} was recorded")]
    StateHashMismatch {
        channel: String,
        recorded: String,
        replayed: String,
    },
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("io error on {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl StoreError {
    pub fn code(&self) -> &str {
        match self {
            Self::NotInitialized(_) => "not-initialized",
            Self::AlreadyInitialized(_) => "already-initialized",
            Self::Locked(_) => "locked",
            Self::Manifest(_) => "bad-manifest",
            Self::StateHashMismatch { .. } => "state-hash-mismatch",
            Self::Ledger(e) => e.code(),
            Self::Io { .. } => "io-error",
        }
    }

    /// Tampering or corruption found while checking stored logs.
    pub fn is_verification_failure(&self) -> bool {
        matches!(
            self,
            Self::StateHashMismatch { .. }
                | Self::Ledger(
                    LedgerError::BrokenHashChain { .. }
                        | LedgerError::MalformedLog { .. }
                        | LedgerError::ReplayDivergence { .. }
                )
        )
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> StoreError + '_ {
    move |e| StoreError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    config: LedgerConfig,
    clock: SimClock,
}

/// Exclusive lock on a data directory, released on drop.
pub struct DirLock {
    _file: File,
}

#[derive(Clone, Debug)]
pub struct DataDir {
    root: PathBuf,
}

impl DataDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn ledger_path(&self, channel: &str) -> PathBuf {
        self.root.join("ledger").join(format!("{channel}.jsonl"))
    }

    pub fn hash_path(&self, channel: &str) -> PathBuf {
        self.root.join("ledger").join(format!("{channel}.hash"))
    }

    pub fn events_path(&self, channel: &str) -> PathBuf {
        self.root.join("events").join(format!("{channel}.jsonl"))
    }

    pub fn is_initialized(&self) -> bool {
        self.root.join(MANIFEST).exists()
    }

    /// Creates the directory if needed and takes the command lock.
    pub fn lock(&self) -> Result<DirLock, StoreError> {
        fs::create_dir_all(&self.root).map_err(io_err(&self.root))?;
        let path = self.root.join(LOCK);
        let file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&path)
            .map_err(io_err(&path))?;
        match file.try_lock() {
            Ok(()) => Ok(DirLock { _file: file }),
            Err(fs::TryLockError::WouldBlock) => Err(StoreError::Locked(self.root.clone())),
            Err(fs::TryLockError::Error(e)) => Err(io_err(&path)(e)),
        }
    }

    /// Starts a new network here. Refuses if one exists.
    pub fn init(&self, config: LedgerConfig, clock: SimClock) -> Result<Network, StoreError> {
        if self.is_initialized() {
            return Err(StoreError::AlreadyInitialized(self.root.clone()));
        }
        let net = Network::new(config);
        self.save(&net, &clock, false)?;
        Ok(net)
    }

    /// Rebuilds the network by replaying every stored log.
    pub fn load(&self) -> Result<(Network, SimClock), StoreError> {
        let manifest = self.read_manifest()?;
        let base = self.read_blocks(BASE_CHANNEL)?;
        let mut channels = BTreeMap::new();
        for name in self.stored_channels()? {
            if name != BASE_CHANNEL {
                let blocks = self.read_blocks(&name)?;
                channels.insert(name, blocks);
            }
        }
        let net = Network::from_logs(manifest.config, base, channels)?;
        Ok((net, manifest.clock))
    }

    /// Writes the manifest, every block log and hash file, and appends newly
    /// delivered events when `events` is set.
    pub fn save(&self, net: &Network, clock: &SimClock, events: bool) -> Result<(), StoreError> {
        let manifest = Manifest {
            config: net.config().clone(),
            clock: *clock,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        write_atomic(&self.root.join(MANIFEST), text.as_bytes())?;
        let mut names = vec![BASE_CHANNEL.to_string()];
        names.extend(net.channel_names());
        for name in names {
            let blocks = net.blocks(&name)?;
            let mut buf = Vec::new();
            write_log(&mut buf, &blocks).expect("writing to memory");
            write_atomic(&self.ledger_path(&name), &buf)?;
            let hash = net.state_hash(&name)? + "\n";
            write_atomic(&self.hash_path(&name), hash.as_bytes())?;
            if events {
                self.append_events(net, &name)?;
            }
        }
        Ok(())
    }

    fn append_events(&self, net: &Network, channel: &str) -> Result<(), StoreError> {
        let path = self.events_path(channel);
        let written = match File::open(&path) {
            Ok(f) => BufReader::new(f).lines().count(),
            Err(_) => 0,
        };
        let events = net.events(channel)?;
        if events.len() <= written {
            return Ok(());
        }
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        let mut out = BufWriter::new(file);
        for event in &events[written..] {
            let line = serde_json::to_string(event).expect("event serializes");
            writeln!(out, "{line}").map_err(io_err(&path))?;
        }
        out.flush().map_err(io_err(&path))
    }

    /// Channel names that have a stored log, base ledger included.
    pub fn stored_channels(&self) -> Result<Vec<String>, StoreError> {
        let dir = self.root.join("ledger");
        let mut names = Vec::new();
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let entry = entry.map_err(io_err(&dir))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some(channel) = name.strip_suffix(".jsonl") {
                names.push(channel.to_string());
            }
        }
        names.sort();
        Ok(names)
    }

    pub fn read_blocks(&self, channel: &str) -> Result<Vec<Block>, StoreError> {
        let path = self.ledger_path(channel);
        let file = File::open(&path).map_err(io_err(&path))?;
        Ok(read_log(BufReader::new(file))?)
    }

    /// Replays one stored log and checks it against the recorded state
    /// hash. Returns the replayed hash.
    pub fn verify_channel(&self, channel: &str) -> Result<String, StoreError> {
        let blocks = self.read_blocks(channel)?;
        let replayed = replay(&blocks)?.state_hash_hex();
        let path = self.hash_path(channel);
        let recorded = fs::read_to_string(&path).map_err(io_err(&path))?;
        let recorded = recorded.trim_end();
        if recorded != replayed {
            return Err(StoreError::StateHashMismatch {
                channel: channel.to_string(),
                recorded: recorded.to_string(),
                replayed,
            });
        }
        Ok(replayed)
    }

    fn read_manifest(&self) -> Result<Manifest, StoreError> {
        let path = self.root.join(MANIFEST);
        if !path.exists() {
            return Err(StoreError::NotInitialized(self.root.clone()));
        }
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|e| StoreError::Manifest(e.to_string()))
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}
