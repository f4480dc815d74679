//! Run manifest and output file writers.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use qring::config::Config;
use qring::ensemble::fmt_f64;
use qring::integrator::{DiagnosticsLog, Snapshot};
use qring::Grid;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Serialize)]
struct HashedInputs<'a> {
    command: &'a str,
    code_version: &'a str,
    config: &'a Config,
}

/// SHA-256 of everything that determines the outputs of `command`.
pub fn input_hash(command: &str, config: &Config) -> String {
    let inputs = HashedInputs {
        command,
        code_version: CODE_VERSION,
        config,
    };
    let bytes = serde_json::to_vec(&inputs).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))
}

pub fn unix_time() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub code_version: String,
    pub hash: String,
    pub master_seed: u64,
    pub config: Config,
    pub threads: usize,
    pub started_at: f64,
    pub finished_at: f64,
    /// Wall time of each trial in output order, in seconds.
    pub trial_wall_times: Vec<f64>,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: &str, config: &Config, master_seed: u64) -> Self {
        Self {
            command: command.to_string(),
            code_version: CODE_VERSION.to_string(),
            hash: input_hash(command, config),
            master_seed,
            config: config.clone(),
            threads: rayon::current_num_threads(),
            started_at: unix_time(),
            finished_at: f64::NAN,
            trial_wall_times: Vec::new(),
            outputs: Vec::new(),
        }
    }
}

/// Creates files inside one directory and remembers every path.
pub struct OutDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>,
    ) -> io::Result<()> {
        let path = self.root.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        body(&mut w)?;
        w.flush()?;
        self.written.push(path);
        Ok(())
    }

    /// Writes the manifest last, listing itself among the outputs.
    pub fn finish(mut self, mut manifest: RunManifest) -> io::Result<Vec<PathBuf>> {
        let path = self.root.join("manifest.json");
        self.written.push(path.clone());
        manifest.outputs = self.written.clone();
        manifest.finished_at = unix_time();
        let mut w = BufWriter::new(File::create(&path)?);
        serde_json::to_writer_pretty(&mut w, &manifest)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(self.written)
    }
}

fn opt(x: Option<f64>) -> String {
    fmt_f64(x.unwrap_or(f64::NAN))
}

/// Long-format snapshot table, one row per (time, grid point).
pub fn write_snapshots(
    w: &mut impl Write,
    hash: &str,
    grid: &Grid,
    snapshots: &[Snapshot],
) -> io::Result<()> {
    writeln!(w, "# manifest_hash={hash}")?;
    writeln!(w, "step,time,theta,phi2,psi0_sq,psi0_sq_initial")?;
    let initial = snapshots.first().and_then(|s| s.system_density.as_ref());
    for s in snapshots {
        for (j, &theta) in grid.points().iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                s.step,
                fmt_f64(s.time),
                fmt_f64(theta),
                fmt_f64(s.phi2[j]),
                opt(s.system_density.as_ref().map(|d| d[j])),
                opt(initial.map(|d| d[j])),
            )?;
        }
    }
    Ok(())
}

pub fn write_diagnostics(w: &mut impl Write, hash: &str, log: &DiagnosticsLog) -> io::Result<()> {
    writeln!(w, "# manifest_hash={hash}")?;
    writeln!(w, "step,time,energy,max_norm_error")?;
    for d in &log.samples {
        writeln!(
            w,
            "{},{},{},{}",
            d.step,
            fmt_f64(d.time),
            fmt_f64(d.energy),
            fmt_f64(d.max_norm_error)
        )?;
    }
    Ok(())
}
