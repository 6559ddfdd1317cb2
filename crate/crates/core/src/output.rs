//! Result serialization: artifacts are collected in memory, then written
//! with a `manifest.json` listing path, schema, size and SHA-256 of each.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coefficients::FrameProvider;
use crate::error::{Error, Result};
use crate::grid::{fmt_f64, read_snapshot, snapshot_bytes};
use crate::scenario::{parse_scenario, Scenario};
use crate::solver::{Ledger, SolverState, Trajectory};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";
pub const SCENARIO_FILE: &str = "scenario.toml";

pub mod schema {
    pub const SCENARIO: &str = "scenario-toml/1";
    pub const SNAPSHOT_BIN: &str = "snapshot-bin/1";
    pub const SNAPSHOT_CSV: &str = "snapshot-csv/1";
    pub const LEDGER: &str = "ledger-csv/1";
    pub const DISTANCES: &str = "distances-csv/1";
    pub const RESIDUALS: &str = "residuals-csv/1";
    pub const REPORT: &str = "report-json/1";
    pub const SERIES: &str = "series-csv/1";
    pub const PROFILE: &str = "profile-csv/1";
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub schema: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub command: String,
    pub config_hash: String,
    pub artifacts: Vec<Artifact>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn find_schema<'a>(&'a self, schema: &'a str) -> impl Iterator<Item = &'a Artifact> + 'a {
        self.artifacts.iter().filter(move |a| a.schema == schema)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Artifacts keyed by relative path, so iteration order is the path order.
#[derive(Clone, Debug, Default)]
pub struct OutputSet {
    files: BTreeMap<String, (String, Vec<u8>)>,
}

impl OutputSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, path: impl Into<String>, schema: &str, bytes: impl Into<Vec<u8>>) {
        self.files.insert(path.into(), (schema.to_string(), bytes.into()));
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn get(&self, path: &str) -> Option<&[u8]> {
        self.files.get(path).map(|(_, b)| b.as_slice())
    }

    pub fn manifest(&self, command: &str, config: &str) -> Manifest {
        Manifest {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            config_hash: sha256_hex(config.as_bytes()),
            artifacts: self
                .files
                .iter()
                .map(|(path, (schema, bytes))| Artifact { path: path.clone(), schema: schema.clone(), bytes: bytes.len() as u64, sha256: sha256_hex(bytes) })
                .collect(),
        }
    }

    /// Writes every artifact under `dir` followed by the manifest.
    /// `config` is the text whose hash identifies the inputs.
    pub fn write(&self, dir: &Path, command: &str, config: &str) -> Result<Manifest> {
        std::fs::create_dir_all(dir)?;
        for (path, (_, bytes)) in &self.files {
            let target = dir.join(path);
            if let Some(parent) = target.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(target, bytes)?;
        }
        let manifest = self.manifest(command, config);
        std::fs::write(dir.join(MANIFEST), manifest.to_json())?;
        Ok(manifest)
    }
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(dir.join(MANIFEST)).map_err(|e| Error::Parse { context: dir.join(MANIFEST).display().to_string(), message: e.to_string() })?;
    serde_json::from_str(&text).map_err(|e| Error::Parse { context: MANIFEST.into(), message: e.to_string() })
}

/// `x,rho,v,p` rows for one snapshot.
pub fn snapshot_csv(s: &SolverState) -> String {
    let g = s.grid();
    let mut out = String::from("x,rho,v,p\n");
    for i in 0..g.n_cells() {
        out.push_str(&format!("{},{},{},{}\n", fmt_f64(g.center(i)), fmt_f64(s.rho.values[i]), fmt_f64(s.v.values[i]), fmt_f64(s.p.values[i])));
    }
    out
}

/// Snapshots (binary and CSV) and the mass ledger under `prefix`.
pub fn add_trajectory(set: &mut OutputSet, prefix: &str, traj: &Trajectory) {
    for (i, s) in traj.snapshots.iter().enumerate() {
        set.add(format!("{prefix}snapshots/{i:04}.bin"), schema::SNAPSHOT_BIN, snapshot_bytes(&s.rho));
        set.add(format!("{prefix}snapshots/{i:04}.csv"), schema::SNAPSHOT_CSV, snapshot_csv(s));
    }
    set.add(format!("{prefix}ledger.csv"), schema::LEDGER, traj.ledger.to_csv());
}

/// Numeric rows under a literal header line.
pub fn series_csv(header: &str, rows: &[Vec<f64>]) -> String {
    let mut s = format!("{header}\n");
    for r in rows {
        s.push_str(&r.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    s
}

/// A run directory as written by `simulate`: scenario plus snapshots.
pub struct RunDir {
    pub manifest: Manifest,
    pub scenario: Scenario,
    pub trajectory: Trajectory,
}

/// Reloads a run directory; snapshots are rebuilt from the binary files
/// with `v` and `p` recomputed from the stored density.
pub fn read_run(dir: &Path) -> Result<RunDir> {
    let manifest = read_manifest(dir)?;
    let scen_path = dir.join(SCENARIO_FILE);
    let text = std::fs::read_to_string(&scen_path).map_err(|e| Error::Parse { context: scen_path.display().to_string(), message: e.to_string() })?;
    let scenario = parse_scenario(&text, &scen_path.display().to_string(), Some(dir))?;
    let provider = FrameProvider::new(&scenario.coefficients()?, &scenario.grid()?)?;
    let mut config = scenario.solver_config();
    let mut snapshots = Vec::new();
    for a in manifest.find_schema(schema::SNAPSHOT_BIN) {
        let bytes = std::fs::read(dir.join(&a.path))?;
        if sha256_hex(&bytes) != a.sha256 {
            return Err(Error::Parse { context: a.path.clone(), message: "checksum does not match the manifest".into() });
        }
        let rho = read_snapshot(bytes.as_slice())?;
        let m = provider.frame(rho.t)?.m;
        snapshots.push(SolverState::new(rho, &m, config.k));
    }
    config.output_times = snapshots.iter().map(|s| s.t).collect();
    let trajectory = Trajectory { config, snapshots, ledger: Ledger::default() };
    Ok(RunDir { manifest, scenario, trajectory })
}
