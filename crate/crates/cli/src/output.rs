use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::Result;
use serde::Serialize;
use serde_json::json;

use gsema_core::error::GsemaError;

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| GsemaError::io(dir, e))?;
    Ok(())
}

pub fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| GsemaError::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| GsemaError::io(path, e))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(std::io::Error::other)?;
        writeln!(w)
    })
}

/// Wall-clock time per stage. Kept out of the run metadata so that file
/// stays byte-identical across reruns.
pub struct Stopwatch {
    last: Instant,
    laps: Vec<(&'static str, f64)>,
}

impl Stopwatch {
    pub fn start() -> Self {
        Self {
            last: Instant::now(),
            laps: Vec::new(),
        }
    }

    pub fn lap(&mut self, stage: &'static str) {
        let now = Instant::now();
        self.laps.push((stage, (now - self.last).as_secs_f64()));
        self.last = now;
    }

    pub fn report(&self, threads: usize) -> serde_json::Value {
        let stages: Vec<_> = self
            .laps
            .iter()
            .map(|(stage, secs)| json!({ "stage": stage, "seconds": secs }))
            .collect();
        json!({
            "threads": rayon::current_num_threads(),
            "threads_requested": threads,
            "total_seconds": self.laps.iter().map(|l| l.1).sum::<f64>(),
            "stages": stages,
        })
    }
}
