use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::pipeline::MetricsRow;

pub const METRICS_HEADER: &str =
    "update,env_steps,mean_reward,collisions,eval_return,mean_modulation,\
actor_loss,critic_loss,entropy,clip_fraction,approx_kl";

/// 17 significant digits, enough to recover every `f64` exactly.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn format_row(row: &MetricsRow) -> String {
    let f = format_float;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}\n",
        row.update,
        row.env_steps,
        f(row.mean_reward),
        row.collisions,
        f(row.eval_return),
        row.mean_modulation.map(f).unwrap_or_default(),
        f(row.actor_loss),
        f(row.critic_loss),
        f(row.entropy),
        f(row.clip_fraction),
        f(row.approx_kl),
    )
}

/// Appends one complete line per update and flushes it immediately, so an
/// interrupted run leaves a parseable prefix.
#[derive(Debug)]
pub struct MetricsWriter {
    path: PathBuf,
    file: File,
}

impl MetricsWriter {
    /// Creates (truncating) the file and writes the header.
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let mut file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        file.write_all(format!("{METRICS_HEADER}\n").as_bytes())
            .and_then(|_| file.flush())
            .map_err(|e| Error::io(&path, e))?;
        Ok(MetricsWriter { path, file })
    }

    pub fn append(&mut self, row: &MetricsRow) -> Result<()> {
        self.file
            .write_all(format_row(row).as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

fn parse_line(line: &str, lineno: usize) -> Result<MetricsRow> {
    let bad = |what: &str| Error::Argument(format!("metrics line {lineno}: {what}"));
    let cols: Vec<&str> = line.split(',').collect();
    if cols.len() != 11 {
        return Err(bad(&format!("expected 11 columns, found {}", cols.len())));
    }
    let float = |i: usize| {
        cols[i]
            .parse::<f64>()
            .map_err(|_| bad(&format!("bad number {:?}", cols[i])))
    };
    let int = |i: usize| {
        cols[i]
            .parse::<u64>()
            .map_err(|_| bad(&format!("bad integer {:?}", cols[i])))
    };
    Ok(MetricsRow {
        update: int(0)? as usize,
        env_steps: int(1)?,
        mean_reward: float(2)?,
        collisions: int(3)?,
        eval_return: float(4)?,
        mean_modulation: if cols[5].is_empty() {
            None
        } else {
            Some(float(5)?)
        },
        actor_loss: float(6)?,
        critic_loss: float(7)?,
        entropy: float(8)?,
        clip_fraction: float(9)?,
        approx_kl: float(10)?,
    })
}

/// Reads every complete row. A trailing line without its newline (a write
/// cut short) is ignored.
pub fn read_metrics(path: impl AsRef<Path>) -> Result<Vec<MetricsRow>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.split_inclusive('\n');
    match lines.next() {
        Some(h) if h.trim_end() == METRICS_HEADER => {}
        _ => {
            return Err(Error::Argument(format!(
                "{} has no metrics header",
                path.display()
            )))
        }
    }
    lines
        .enumerate()
        .filter(|(_, l)| l.ends_with('\n'))
        .map(|(i, l)| parse_line(l.trim_end(), i + 2))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(i: usize, modulation: Option<f64>) -> MetricsRow {
        MetricsRow {
            update: i,
            env_steps: 8000 * (i as u64 + 1),
            mean_reward: 0.1 / 3.0 + i as f64,
            collisions: 17 + i as u64,
            eval_return: -1.0 / 7.0,
            mean_modulation: modulation,
            actor_loss: 1e-300,
            critic_loss: 123456.789,
            entropy: 2.0f64.sqrt(),
            clip_fraction: 0.0,
            approx_kl: f64::MIN_POSITIVE,
        }
    }

    #[test]
    fn three_updates_four_lines_exact_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let mut w = MetricsWriter::create(&path).unwrap();
        let rows = vec![row(0, None), row(1, Some(0.3)), row(2, Some(1.0 / 3.0))];
        for r in &rows {
            w.append(r).unwrap();
        }
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(read_metrics(&path).unwrap(), rows);
    }

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(-2.5), "-2.5000000000000000e0");
    }

    #[test]
    fn truncated_tail_keeps_prefix() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let mut w = MetricsWriter::create(&path).unwrap();
        w.append(&row(0, None)).unwrap();
        let mut f = fs::OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"1,16000,3.0e0,1").unwrap();
        assert_eq!(read_metrics(&path).unwrap().len(), 1);
    }

    #[test]
    fn unwritable_path_fails_at_create() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, b"x").unwrap();
        assert!(matches!(
            MetricsWriter::create(blocker.join("m.csv")),
            Err(Error::Io { .. })
        ));
    }
}
