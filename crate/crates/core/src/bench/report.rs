//! Human-readable summary and plot-ready CSVs from a finished run
//! directory. A pure function of the directory contents.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use super::eval::{read_metrics, MetricsRow};
use super::train::read_bank;
use crate::marl::read_curve;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct Report {
    pub summary: String,
    pub files: Vec<PathBuf>,
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "incomplete run: {} is missing",
            path.display()
        )))
    }
}

pub fn metrics_table(rows: &[MetricsRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<18} {:>16} {:>16} {:>14} {:>16} {:>9}",
        "Method", "AverVolDevia", "AverPowLoss", "AverObjValue", "MaxVolDevia", "InBand"
    );
    let _ = writeln!(
        s,
        "{:<18} {:>16} {:>16} {:>14} {:>16} {:>9}",
        "", "(p.u.)", "(MW)", "", "(p.u.)", "(%)"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<18} {:>16.6} {:>16.6} {:>14.6} {:>16.6} {:>9.2}",
            r.method,
            r.aver_vol_devia,
            r.aver_pow_loss,
            r.aver_obj_value,
            r.max_vol_devia,
            100.0 * r.in_band_fraction
        );
    }
    s
}

/// Writes `report/summary.txt`, `report/metrics.csv`, `report/curves.csv`
/// and, when evaluation recorded them, `report/voltages.csv`.
pub fn cmd_report(run: &Path) -> Result<Report> {
    let config = run.join("config.toml");
    let bank_path = run.join("train").join("bank.json");
    let metrics_path = run.join("eval").join("metrics.csv");
    for p in [&config, &bank_path, &metrics_path] {
        require(p)?;
    }
    let bank = read_bank(run)?;
    let rows = read_metrics(&metrics_path)?;
    let dir = run.join("report");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut files = Vec::new();

    let curves_path = dir.join("curves.csv");
    let mut curves = String::from("delay_index,delay_s,episode,mean_reward,r_ll,r_vd,phi\n");
    let mut final_rewards = Vec::new();
    for e in &bank {
        let path = run.join(&e.curve);
        require(&path)?;
        let curve =
            read_curve(&path).map_err(|err| Error::Config(format!("{}: {err}", path.display())))?;
        for c in &curve {
            let _ = writeln!(
                curves,
                "{},{},{},{},{},{},{}",
                e.index, e.delay_s, c.episode, c.mean_reward, c.r_ll, c.r_vd, c.phi
            );
        }
        let tail = &curve[curve.len().saturating_sub(50)..];
        let mean = tail.iter().map(|c| c.mean_reward).sum::<f64>() / tail.len().max(1) as f64;
        final_rewards.push((e.index, e.delay_s, curve.len(), mean));
    }
    write_file(&curves_path, curves.as_bytes())?;
    files.push(curves_path);

    let metrics_copy = dir.join("metrics.csv");
    write_file(&metrics_copy, &read_bytes(&metrics_path)?)?;
    files.push(metrics_copy);

    let voltages = run.join("eval").join("voltages.csv");
    if voltages.exists() {
        let copy = dir.join("voltages.csv");
        write_file(&copy, &read_bytes(&voltages)?)?;
        files.push(copy);
    }

    let mut summary = String::new();
    let _ = writeln!(summary, "Run: {}\n", run.display());
    let _ = writeln!(summary, "Test-segment metrics\n");
    summary.push_str(&metrics_table(&rows));
    let _ = writeln!(
        summary,
        "\nTraining (mean reward over the last 50 episodes)\n"
    );
    let _ = writeln!(
        summary,
        "{:>6} {:>10} {:>9} {:>14}",
        "index", "delay (s)", "episodes", "final reward"
    );
    for (k, d, n, r) in &final_rewards {
        let _ = writeln!(summary, "{k:>6} {d:>10.3} {n:>9} {r:>14.6}");
    }
    let summary_path = dir.join("summary.txt");
    write_file(&summary_path, summary.as_bytes())?;
    files.push(summary_path);
    Ok(Report { summary, files })
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}
