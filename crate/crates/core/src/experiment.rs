//! Accuracy-versus-dephasing sweeps: per-run records, aggregates, CSV and SVG.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DatasetSpec, PreparedDataset};
use crate::network::{AncillaScheme, ModelKind, Network, NetworkTopology, DEFAULT_WIDTH_CAP};
use crate::train::{default_hyper, train, Hyper, TrainConfig, P_GRID};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSpec {
    pub model: ModelKind,
    pub scheme: AncillaScheme,
    pub data: DatasetSpec,
    pub p_grid: Vec<f64>,
    pub k_list: Vec<usize>,
    pub runs: usize,
    pub base_seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub dephase_data_layer: bool,
    /// Replaces the tabulated `(std, lr)` in every cell.
    pub hyper_override: Option<Hyper>,
    pub width_cap: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            model: ModelKind::Ttn,
            scheme: AncillaScheme::PerQubit,
            data: DatasetSpec::default(),
            p_grid: P_GRID.to_vec(),
            k_list: vec![0],
            runs: 5,
            base_seed: 0,
            epochs: 30,
            batch_size: 250,
            dephase_data_layer: true,
            hyper_override: None,
            width_cap: DEFAULT_WIDTH_CAP,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 || self.p_grid.is_empty() || self.k_list.is_empty() {
            return Err(Error::Config("sweep needs at least one run, rate and ancilla count".into()));
        }
        if let Some(p) = self.p_grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::RateOutOfRange(*p));
        }
        Ok(())
    }

    /// Seed of cell `(p_index, k, run)`; distinct cells get unrelated seeds.
    pub fn cell_seed(&self, p_index: usize, k: usize, run: usize) -> u64 {
        let mut z = self.base_seed
            ^ (p_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
            ^ (k as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
            ^ (run as u64).wrapping_mul(0x1656_67B1_9E37_79F9);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn hyper(&self, k: usize, p: f64) -> Result<Hyper> {
        match self.hyper_override {
            Some(h) => Ok(h),
            None => default_hyper(
                self.data.dataset,
                self.data.grouping,
                self.model,
                self.scheme,
                k,
                p,
                self.dephase_data_layer,
            ),
        }
    }

    pub fn train_config(&self, k: usize, p: f64, seed: u64) -> Result<TrainConfig> {
        let h = self.hyper(k, p)?;
        Ok(TrainConfig {
            learning_rate: h.learning_rate,
            init_std: h.init_std,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed,
            p,
            dephase_data_layer: self.dephase_data_layer,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Diverged,
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: String,
    pub dataset: String,
    pub grouping: String,
    pub p: f64,
    pub k: usize,
    pub scheme: String,
    pub run: usize,
    pub seed: u64,
    pub test_accuracy: f64,
    pub val_accuracy: f64,
    pub epochs: usize,
    pub wall_seconds: f64,
    pub status: RunStatus,
}

/// Mean and standard error of one `(p, k)` cell over its completed runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub p: f64,
    pub k: usize,
    pub completed: usize,
    pub diverged: usize,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub records: Vec<RunRecord>,
    pub summaries: Vec<CellSummary>,
}

/// Sample mean and `s / sqrt(n)` with the `n - 1` sample deviation; zero
/// spread for a single value.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Trains one cell. Divergence becomes a record, other errors propagate.
pub fn run_cell(
    spec: &SweepSpec,
    data: &PreparedDataset,
    p: f64,
    k: usize,
    run: usize,
    seed: u64,
) -> Result<RunRecord> {
    let start = Instant::now();
    let topo = NetworkTopology::build(spec.model, data.feature_count, k, spec.scheme)?;
    let mut net = Network::with_width_cap(topo, spec.width_cap)?;
    let cfg = spec.train_config(k, p, seed)?;
    let record = |test_accuracy, val_accuracy, epochs, status| RunRecord {
        model: spec.model.name().into(),
        dataset: spec.data.dataset.dir_name().into(),
        grouping: spec.data.grouping.name().into(),
        p,
        k,
        scheme: spec.scheme.name().into(),
        run,
        seed,
        test_accuracy,
        val_accuracy,
        epochs,
        wall_seconds: start.elapsed().as_secs_f64(),
        status,
    };
    match train(&mut net, data, &cfg) {
        Ok(r) => Ok(record(r.test_accuracy, r.best_val_accuracy, cfg.epochs, RunStatus::Ok)),
        Err(Error::Diverged { epoch }) => Ok(record(f64::NAN, f64::NAN, epoch, RunStatus::Diverged)),
        Err(e) => Err(e),
    }
}

pub fn summarize(records: &[RunRecord]) -> Vec<CellSummary> {
    let mut keys: Vec<(f64, usize)> = Vec::new();
    for r in records {
        if !keys.iter().any(|&(p, k)| p == r.p && k == r.k) {
            keys.push((r.p, r.k));
        }
    }
    keys.into_iter()
        .map(|(p, k)| {
            let cell: Vec<&RunRecord> = records.iter().filter(|r| r.p == p && r.k == k).collect();
            let acc: Vec<f64> = cell.iter().filter(|r| r.status == RunStatus::Ok).map(|r| r.test_accuracy).collect();
            let (mean, stderr) = mean_stderr(&acc);
            CellSummary { p, k, completed: acc.len(), diverged: cell.len() - acc.len(), mean, stderr }
        })
        .collect()
}

/// Runs every `(k, p, run)` cell, in parallel across cells.
pub fn run_sweep(spec: &SweepSpec, data: &PreparedDataset) -> Result<SweepResult> {
    run_sweep_with(spec, data, |_| {})
}

pub fn run_sweep_with(
    spec: &SweepSpec,
    data: &PreparedDataset,
    on_record: impl Fn(&RunRecord) + Sync,
) -> Result<SweepResult> {
    spec.validate()?;
    let cells: Vec<(usize, usize, usize)> = spec
        .k_list
        .iter()
        .flat_map(|&k| (0..spec.p_grid.len()).flat_map(move |pi| (0..spec.runs).map(move |run| (k, pi, run))))
        .collect();
    for &k in &spec.k_list {
        for &p in &spec.p_grid {
            spec.hyper(k, p)?;
        }
    }
    let records = cells
        .par_iter()
        .map(|&(k, pi, run)| {
            let r = run_cell(spec, data, spec.p_grid[pi], k, run, spec.cell_seed(pi, k, run))?;
            on_record(&r);
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    let summaries = summarize(&records);
    Ok(SweepResult { records, summaries })
}

pub fn write_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| Error::Format(e.to_string()))?;
    for r in records {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Format(e.to_string()))?;
    r.deserialize().map(|row| row.map_err(|e| Error::Format(e.to_string()))).collect()
}

/// Least-squares slope of the mean accuracy against `p` for one `k`.
pub fn trend_slope(summaries: &[CellSummary], k: usize) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        summaries.iter().filter(|s| s.k == k && s.completed > 0).map(|s| (s.p, s.mean)).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Accuracy against `p`: one polyline per `k` with one-standard-error bars and
/// a dotted line at the `(p = 0, k = 0)` mean.
pub fn render_svg(summaries: &[CellSummary], title: &str) -> String {
    let (w, h, ml, mr, mt, mb) = (640.0, 420.0, 70.0, 110.0, 40.0, 55.0);
    let ok: Vec<&CellSummary> = summaries.iter().filter(|s| s.completed > 0).collect();
    let (mut lo, mut hi) = ok
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.mean - s.stderr), hi.max(s.mean + s.stderr)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.1).max(0.005);
    let (lo, hi) = ((lo - pad).max(0.0), (hi + pad).min(1.0));
    let x = |p: f64| ml + p * (w - ml - mr);
    let y = |a: f64| mt + (hi - a) / (hi - lo) * (h - mt - mb);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        (ml + w - mr) / 2.0,
        escape(title)
    );
    let (x0, x1, y0, y1) = (x(0.0), x(1.0), y(lo), y(hi));
    let _ = writeln!(s, r#"<path d="M{x0:.1},{y1:.1} V{y0:.1} H{x1:.1}" fill="none" stroke="black"/>"#);
    for i in 0..=5 {
        let p = i as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<line x1="{0:.1}" y1="{y0:.1}" x2="{0:.1}" y2="{1:.1}" stroke="black"/><text x="{0:.1}" y="{2:.1}" text-anchor="middle">{p:.1}</text>"#,
            x(p),
            y0 + 5.0,
            y0 + 18.0
        );
        let a = lo + (hi - lo) * p;
        let _ = writeln!(
            s,
            r#"<line x1="{x0:.1}" y1="{0:.1}" x2="{1:.1}" y2="{0:.1}" stroke="black"/><text x="{2:.1}" y="{3:.1}" text-anchor="end">{a:.3}</text>"#,
            y(a),
            x0 - 5.0,
            x0 - 8.0,
            y(a) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">dephasing probability p</text>"#,
        (x0 + x1) / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(16,{:.1}) rotate(-90)" text-anchor="middle">test accuracy</text>"#,
        (y0 + y1) / 2.0
    );

    if let Some(r) = ok.iter().find(|c| c.p == 0.0 && c.k == 0) {
        let _ = writeln!(
            s,
            r#"<line x1="{x0:.1}" y1="{0:.1}" x2="{x1:.1}" y2="{0:.1}" stroke="gray" stroke-dasharray="2,3"/>"#,
            y(r.mean)
        );
    }
    let mut ks: Vec<usize> = ok.iter().map(|c| c.k).collect();
    ks.sort_unstable();
    ks.dedup();
    for (ci, &k) in ks.iter().enumerate() {
        let color = PALETTE[ci % PALETTE.len()];
        let mut pts: Vec<&&CellSummary> = ok.iter().filter(|c| c.k == k).collect();
        pts.sort_by(|a, b| a.p.total_cmp(&b.p));
        let line: Vec<String> = pts.iter().map(|c| format!("{:.1},{:.1}", x(c.p), y(c.mean))).collect();
        let _ =
            writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, line.join(" "));
        for c in &pts {
            let (cx, top, bot) = (x(c.p), y(c.mean + c.stderr), y(c.mean - c.stderr));
            let _ = writeln!(
                s,
                r#"<path d="M{cx:.1},{top:.1} V{bot:.1} M{:.1},{top:.1} H{:.1} M{:.1},{bot:.1} H{:.1}" stroke="{color}"/><circle cx="{cx:.1}" cy="{:.1}" r="3" fill="{color}"/>"#,
                cx - 3.0,
                cx + 3.0,
                cx - 3.0,
                cx + 3.0,
                y(c.mean)
            );
        }
        let ly = mt + 18.0 * ci as f64 + 10.0;
        let _ = writeln!(
            s,
            r#"<line x1="{0:.1}" y1="{ly:.1}" x2="{1:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{2:.1}" y="{3:.1}">{k} ancilla{4}</text>"#,
            x1 + 12.0,
            x1 + 32.0,
            x1 + 38.0,
            ly + 4.0,
            if k == 1 { "" } else { "s" }
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::EncodedSample;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn record(p: f64, k: usize, run: usize, acc: f64, status: RunStatus) -> RunRecord {
        RunRecord {
            model: "ttn".into(),
            dataset: "mnist".into(),
            grouping: "three-five".into(),
            p,
            k,
            scheme: "per-qubit".into(),
            run,
            seed: run as u64,
            test_accuracy: acc,
            val_accuracy: acc,
            epochs: 1,
            wall_seconds: 0.0,
            status,
        }
    }

    #[test]
    fn stderr_formula() {
        let (m, se) = mean_stderr(&[0.90, 0.92, 0.94]);
        assert!((m - 0.92).abs() < 1e-15);
        assert!((se - 0.02 / 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(mean_stderr(&[0.5]), (0.5, 0.0));
    }

    #[test]
    fn diverged_runs_excluded() {
        let recs = vec![
            record(0.0, 0, 0, 0.9, RunStatus::Ok),
            record(0.0, 0, 1, f64::NAN, RunStatus::Diverged),
            record(0.0, 0, 2, 0.8, RunStatus::Ok),
            record(1.0, 0, 0, 0.7, RunStatus::Ok),
        ];
        let s = summarize(&recs);
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].completed, s[0].diverged), (2, 1));
        assert!((s[0].mean - 0.85).abs() < 1e-15);
        assert!(trend_slope(&s, 0).unwrap() < 0.0);
    }

    #[test]
    fn csv_columns_and_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.csv");
        let recs = vec![record(0.0, 0, 0, 0.9, RunStatus::Ok), record(1.0, 2, 1, f64::NAN, RunStatus::Diverged)];
        write_csv(&recs, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(
            "model,dataset,grouping,p,k,scheme,run,seed,test_accuracy,val_accuracy,epochs,wall_seconds,status\n"
        ));
        assert!(!text.contains('\r'));
        let back = read_csv(&path).unwrap();
        assert_eq!(back[0], recs[0]);
        assert_eq!(back[1].status, RunStatus::Diverged);
    }

    #[test]
    fn svg_has_curve_per_k_and_reference() {
        let recs: Vec<RunRecord> = [0, 1]
            .into_iter()
            .flat_map(|k| [0.0, 0.5, 1.0].map(|p| record(p, k, 0, 0.9 - 0.1 * p + 0.01 * k as f64, RunStatus::Ok)))
            .collect();
        let svg = render_svg(&summarize(&recs), "a < b");
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("stroke-dasharray").count(), 1);
        assert!(svg.contains("a &lt; b"));
        assert_eq!(svg, render_svg(&summarize(&recs), "a < b"));
    }

    #[test]
    fn seeds_distinct_and_stable() {
        let spec = SweepSpec::default();
        let mut seen = std::collections::HashSet::new();
        for pi in 0..7 {
            for k in 0..4 {
                for run in 0..5 {
                    assert!(seen.insert(spec.cell_seed(pi, k, run)));
                }
            }
        }
        assert_eq!(spec.cell_seed(1, 2, 3), SweepSpec::default().cell_seed(1, 2, 3));
        assert!(SweepSpec { runs: 0, ..SweepSpec::default() }.validate().is_err());
        assert!(SweepSpec { p_grid: vec![1.5], ..SweepSpec::default() }.validate().is_err());
    }

    #[test]
    fn tiny_sweep_rows_and_rerun() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut gen = |n: usize| -> Vec<EncodedSample> {
            (0..n)
                .map(|_| {
                    let f: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
                    let l = u8::from(f[0] > 0.5);
                    EncodedSample::new(f, l).unwrap()
                })
                .collect()
        };
        let data = PreparedDataset { feature_count: 8, train: gen(60), validation: gen(20), test: gen(20) };
        let spec = SweepSpec { p_grid: vec![0.0, 1.0], runs: 1, epochs: 2, batch_size: 20, ..SweepSpec::default() };
        let res = run_sweep(&spec, &data).unwrap();
        assert_eq!(res.records.len(), 2);
        let r = &res.records[1];
        let again = run_cell(&spec, &data, r.p, r.k, r.run, r.seed).unwrap();
        assert_eq!(again.test_accuracy.to_bits(), r.test_accuracy.to_bits());
    }
}
