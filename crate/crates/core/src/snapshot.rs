//! Per-realization state snapshots and their flat binary layout.
//!
//! `snapshots.bin` is a sequence of records
//! `realization_id: u32 | step: u32 | ρ[n]: f64 | q[n]: f64`, all little-endian,
//! sorted by `(realization_id, step)`. `snapshots.manifest` is a `key = value`
//! text sidecar naming the grid size, the step → time map and the config hash.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use crate::error::{Result, SimError};
use crate::gas::ConservedField;

pub const DATA_FILE: &str = "snapshots.bin";
pub const MANIFEST_FILE: &str = "snapshots.manifest";
const FORMAT_TAG: &str = "stoch-euler-snapshots-v1";

#[derive(Debug, Default)]
pub struct SnapshotStore {
    n_cells: usize,
    tau: f64,
    states: Mutex<BTreeMap<(u32, u32), ConservedField>>,
}

impl SnapshotStore {
    pub fn new(n_cells: usize, tau: f64) -> Self {
        Self { n_cells, tau, states: Mutex::new(BTreeMap::new()) }
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Safe to call from several workers; a repeated key overwrites.
    pub fn insert(&self, realization_id: u32, step: u32, field: &ConservedField) -> Result<()> {
        if field.len() != self.n_cells {
            return Err(SimError::InvalidConfig(format!(
                "snapshot has {} cells, store expects {}",
                field.len(),
                self.n_cells
            )));
        }
        self.states
            .lock()
            .expect("snapshot store poisoned")
            .insert((realization_id, step), field.clone());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.states.lock().expect("snapshot store poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, realization_id: u32, step: u32) -> Option<ConservedField> {
        self.states
            .lock()
            .expect("snapshot store poisoned")
            .get(&(realization_id, step))
            .cloned()
    }

    /// Distinct recorded steps, ascending.
    pub fn steps(&self) -> Vec<u32> {
        let map = self.states.lock().expect("snapshot store poisoned");
        let mut s: Vec<u32> = map.keys().map(|&(_, k)| k).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn realizations(&self) -> Vec<u32> {
        let map = self.states.lock().expect("snapshot store poisoned");
        let mut r: Vec<u32> = map.keys().map(|&(id, _)| id).collect();
        r.dedup();
        r
    }

    /// All states recorded at `step`, in realization order.
    pub fn at_step(&self, step: u32) -> Vec<(u32, ConservedField)> {
        self.states
            .lock()
            .expect("snapshot store poisoned")
            .iter()
            .filter(|((_, k), _)| *k == step)
            .map(|((id, _), f)| (*id, f.clone()))
            .collect()
    }

    pub fn time_of(&self, step: u32) -> f64 {
        step as f64 * self.tau
    }

    /// Step whose time is closest to `t`.
    pub fn nearest_step(&self, t: f64) -> Option<u32> {
        self.steps().into_iter().min_by(|&a, &b| {
            (self.time_of(a) - t).abs().total_cmp(&(self.time_of(b) - t).abs())
        })
    }

    pub fn write(&self, dir: &Path, config_hash: &str) -> Result<()> {
        fs::create_dir_all(dir)?;
        let map = self.states.lock().expect("snapshot store poisoned");
        let mut out = BufWriter::new(fs::File::create(dir.join(DATA_FILE))?);
        for (&(id, step), f) in map.iter() {
            out.write_all(&id.to_le_bytes())?;
            out.write_all(&step.to_le_bytes())?;
            for v in f.rho.iter().chain(&f.q) {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        out.flush()?;
        drop(map);

        let steps = self.steps();
        let mut m = String::new();
        m.push_str(&format!("format = {FORMAT_TAG}\n"));
        m.push_str(&format!("n_cells = {}\n", self.n_cells));
        m.push_str(&format!("record_bytes = {}\n", record_bytes(self.n_cells)));
        m.push_str(&format!("records = {}\n", self.len()));
        m.push_str(&format!("tau = {:.17e}\n", self.tau));
        m.push_str(&format!("config_hash = {config_hash}\n"));
        let join = |it: Vec<String>| it.join(" ");
        m.push_str(&format!(
            "realizations = {}\n",
            join(self.realizations().iter().map(|r| r.to_string()).collect())
        ));
        m.push_str(&format!("steps = {}\n", join(steps.iter().map(|s| s.to_string()).collect())));
        m.push_str(&format!(
            "times = {}\n",
            join(steps.iter().map(|&s| format!("{:.17e}", self.time_of(s))).collect())
        ));
        fs::write(dir.join(MANIFEST_FILE), m)?;
        Ok(())
    }

    /// Reads a store written by [`SnapshotStore::write`]; returns it with the config hash.
    pub fn read(dir: &Path) -> Result<(Self, String)> {
        let manifest = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        let mut keys = BTreeMap::new();
        for line in manifest.lines() {
            if let Some((k, v)) = line.split_once('=') {
                keys.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let get = |k: &str| {
            keys.get(k)
                .cloned()
                .ok_or_else(|| SimError::Io(format!("manifest is missing `{k}`")))
        };
        if get("format")? != FORMAT_TAG {
            return Err(SimError::Io("unrecognized snapshot format".into()));
        }
        let parse_err = |k: &str| SimError::Io(format!("manifest field `{k}` is malformed"));
        let n_cells: usize = get("n_cells")?.parse().map_err(|_| parse_err("n_cells"))?;
        let tau: f64 = get("tau")?.parse().map_err(|_| parse_err("tau"))?;
        let hash = get("config_hash")?;

        let bytes = fs::read(dir.join(DATA_FILE))?;
        let rb = record_bytes(n_cells);
        if bytes.len() % rb != 0 {
            return Err(SimError::Io(format!(
                "snapshot data length {} is not a multiple of {rb}",
                bytes.len()
            )));
        }
        let store = Self::new(n_cells, tau);
        for rec in bytes.chunks_exact(rb) {
            let id = u32::from_le_bytes(rec[0..4].try_into().unwrap());
            let step = u32::from_le_bytes(rec[4..8].try_into().unwrap());
            let vals: Vec<f64> = rec[8..]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let (rho, q) = vals.split_at(n_cells);
            store.insert(id, step, &ConservedField { rho: rho.to_vec(), q: q.to_vec() })?;
        }
        Ok((store, hash))
    }
}

pub fn record_bytes(n_cells: usize) -> usize {
    8 + 16 * n_cells
}
