//! Parameter sweeps over (λ, E, s, L) with checkpointing and phase tables.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::criteria::{single_site_test, theorem1_lhs, theorem2_lhs, Criterion, CriterionReport};
use crate::error::{Error, Result};
use crate::lattice::{Region, Site};
use crate::moments::SamplingPlan;
use crate::resolvent::SpectralPoint;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellCoord {
    pub lambda: f64,
    pub energy: f64,
    pub s: f64,
    pub l: u32,
}

/// Grid points in λ-major, then E, s, L order.
pub fn grid(cfg: &Config) -> Vec<CellCoord> {
    let sc = &cfg.scan;
    let mut out = Vec::with_capacity(sc.lambda.len() * sc.energy.len() * sc.s.len() * sc.l.len());
    for &lambda in &sc.lambda {
        for &energy in &sc.energy {
            for &s in &sc.s {
                for &l in &sc.l {
                    out.push(CellCoord { lambda, energy, s, l });
                }
            }
        }
    }
    out
}

/// First eight bytes of SHA-256 over the master seed and the coordinates.
pub fn cell_seed(master_seed: u64, c: &CellCoord) -> u64 {
    let mut h = Sha256::new();
    h.update(b"anderson-certify/cell");
    h.update(master_seed.to_le_bytes());
    for v in [c.lambda, c.energy, c.s] {
        h.update(v.to_bits().to_le_bytes());
    }
    h.update(u64::from(c.l).to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Done,
    Failed,
    Pending,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanCell {
    pub index: usize,
    pub coord: CellCoord,
    pub seed: u64,
    pub status: CellStatus,
    pub report: Option<CriterionReport>,
    pub error: Option<String>,
    pub wall_time_s: f64,
}

impl ScanCell {
    fn pending(index: usize, coord: CellCoord, seed: u64) -> Self {
        ScanCell {
            index,
            coord,
            seed,
            status: CellStatus::Pending,
            report: None,
            error: None,
            wall_time_s: 0.0,
        }
    }
}

/// The region of a cell: Λ_L, or {O} for the single-site test.
pub fn cell_region(cfg: &Config, c: &CellCoord) -> Result<Region> {
    match cfg.criterion()? {
        Criterion::SingleSite => Region::from_sites(cfg.scan.dim, [Site::origin(cfg.scan.dim)]),
        _ => Region::cube(cfg.scan.dim, c.l),
    }
}

/// Evaluates one cell exactly as a standalone criterion check would.
pub fn evaluate_cell(cfg: &Config, c: &CellCoord, seed: u64) -> Result<CriterionReport> {
    let model = cfg.model(c.lambda)?;
    let constants = cfg.constants(c.s)?;
    let region = Arc::new(cell_region(cfg, c)?);
    let z = SpectralPoint::new(c.energy, cfg.scan.eta);
    let plan = SamplingPlan {
        seed,
        ..cfg.plan()
    };
    let opts = cfg.eval_options();
    match cfg.criterion()? {
        Criterion::Bulk => theorem1_lhs(&model, &region, z, &constants, &plan, &opts),
        Criterion::AllSubsets => {
            let strategy = cfg.subset_strategy(&region)?;
            theorem2_lhs(&model, &region, z, &constants, &strategy, &plan, &opts)
        }
        Criterion::SingleSite => single_site_test(&model, c.energy, cfg.scan.dim, &constants),
    }
}

/// One line of the phase table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub lambda: f64,
    #[serde(rename = "E")]
    pub energy: f64,
    pub s: f64,
    #[serde(rename = "L")]
    pub l: u32,
    pub theorem: String,
    pub lhs: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    /// certified, not_certified, inconclusive, failed or pending.
    pub verdict: String,
    pub rigor: Option<String>,
    pub seed: u64,
}

impl PhaseRow {
    pub fn from_cell(cell: &ScanCell, theorem: Criterion) -> Self {
        let c = &cell.coord;
        let (lhs, ci_low, ci_high, verdict, rigor) = match (&cell.status, &cell.report) {
            (CellStatus::Done, Some(r)) => (
                Some(r.lhs),
                Some(r.ci_low),
                Some(r.ci_high),
                r.verdict.as_str().to_string(),
                Some(r.rigor.as_str().to_string()),
            ),
            (CellStatus::Pending, _) => (None, None, None, "pending".into(), None),
            _ => (None, None, None, "failed".into(), None),
        };
        PhaseRow {
            lambda: c.lambda,
            energy: c.energy,
            s: c.s,
            l: c.l,
            theorem: theorem.as_str().into(),
            lhs,
            ci_low,
            ci_high,
            verdict,
            rigor,
            seed: cell.seed,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictCounts {
    pub certified: usize,
    pub not_certified: usize,
    pub inconclusive: usize,
    pub failed: usize,
    pub pending: usize,
}

impl VerdictCounts {
    pub fn total(&self) -> usize {
        self.certified + self.not_certified + self.inconclusive + self.failed + self.pending
    }

    pub fn tally(rows: &[PhaseRow]) -> Self {
        let mut c = VerdictCounts::default();
        for r in rows {
            match r.verdict.as_str() {
                "certified" => c.certified += 1,
                "not_certified" => c.not_certified += 1,
                "inconclusive" => c.inconclusive += 1,
                "pending" => c.pending += 1,
                _ => c.failed += 1,
            }
        }
        c
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanSummary {
    pub code_version: String,
    pub config: Config,
    pub n_cells: usize,
    pub counts: VerdictCounts,
    pub complete: bool,
    /// Constants carry a recorded source; without one verdicts are provisional.
    pub constants_verified: bool,
}

/// Writes the CSV phase table and the JSON summary.
pub fn emit_phase_table(cells: &[ScanCell], cfg: &Config, csv_path: &Path, json_path: &Path) -> Result<ScanSummary> {
    let theorem = cfg.criterion()?;
    let rows: Vec<PhaseRow> = cells.iter().map(|c| PhaseRow::from_cell(c, theorem)).collect();
    write_phase_csv(&rows, csv_path)?;
    let counts = VerdictCounts::tally(&rows);
    let summary = ScanSummary {
        code_version: CODE_VERSION.into(),
        config: cfg.clone(),
        n_cells: rows.len(),
        complete: counts.pending == 0,
        counts,
        constants_verified: cfg.criteria.constants_source.is_some(),
    };
    let mut f = BufWriter::new(File::create(json_path)?);
    serde_json::to_writer_pretty(&mut f, &summary)?;
    writeln!(f)?;
    f.flush()?;
    Ok(summary)
}

const CSV_HEADER: [&str; 11] = [
    "lambda", "E", "s", "L", "theorem", "lhs", "ci_low", "ci_high", "verdict", "rigor", "seed",
];

pub fn write_phase_csv(rows: &[PhaseRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(CSV_HEADER)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_phase_csv(path: &Path) -> Result<Vec<PhaseRow>> {
    let mut out = Vec::new();
    for row in csv::Reader::from_path(path)?.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ScanOptions {
    /// Stop after evaluating this many new cells; the rest stay pending.
    pub max_new_cells: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct ScanOutcome {
    pub cells: Vec<ScanCell>,
    pub summary: ScanSummary,
    pub newly_evaluated: usize,
    pub resumed: usize,
}

/// Entries of an existing checkpoint that match the current grid.
fn load_checkpoint(path: &Path, cells: &[ScanCell]) -> Result<Vec<Option<ScanCell>>> {
    let mut done = vec![None; cells.len()];
    if !path.exists() {
        return Ok(done);
    }
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        let Ok(cell) = serde_json::from_str::<ScanCell>(&line) else {
            log::warn!("skipping unreadable checkpoint line");
            continue;
        };
        match cells.get(cell.index) {
            Some(c) if c.seed == cell.seed && c.coord == cell.coord => {
                let i = cell.index;
                done[i] = Some(cell);
            }
            _ => log::warn!("checkpoint entry {} does not match the grid; recomputing", cell.index),
        }
    }
    Ok(done)
}

fn append_line(f: &mut File, cell: &ScanCell) -> Result<()> {
    let mut line = serde_json::to_string(cell)?;
    line.push('\n');
    f.write_all(line.as_bytes())?;
    f.flush()?;
    Ok(())
}

/// Runs every pending cell, streaming finished cells to the checkpoint in
/// grid order, then writes the phase table.
pub fn run_scan(cfg: &Config, opts: &ScanOptions) -> Result<ScanOutcome> {
    cfg.validate()?;
    let theorem = cfg.criterion()?;
    let mut cells: Vec<ScanCell> = grid(cfg)
        .into_iter()
        .enumerate()
        .map(|(i, c)| ScanCell::pending(i, c, cell_seed(cfg.scan.master_seed, &c)))
        .collect();

    let ckpt = &cfg.output.checkpoint;
    let previous = load_checkpoint(ckpt, &cells)?;
    let mut f = File::create(ckpt)?;
    let mut resumed = 0;
    for (slot, prev) in cells.iter_mut().zip(previous) {
        if let Some(p) = prev {
            append_line(&mut f, &p)?;
            *slot = p;
            resumed += 1;
        }
    }
    drop(f);
    let mut f = OpenOptions::new().append(true).open(ckpt)?;

    let mut todo: Vec<usize> = cells
        .iter()
        .filter(|c| c.status == CellStatus::Pending)
        .map(|c| c.index)
        .collect();
    if let Some(m) = opts.max_new_cells {
        todo.truncate(m);
    }

    let workers = cfg.parallelism();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    log::info!(
        "scan: {} cells, {} resumed, {} to evaluate, criterion {}, {} workers",
        cells.len(),
        resumed,
        todo.len(),
        theorem.as_str(),
        workers
    );
    let mut newly_evaluated = 0;
    for chunk in todo.chunks(workers) {
        let finished: Vec<ScanCell> = pool.install(|| {
            chunk
                .par_iter()
                .map(|&i| {
                    let mut cell = cells[i].clone();
                    let t0 = Instant::now();
                    match evaluate_cell(cfg, &cell.coord, cell.seed) {
                        Ok(r) => {
                            cell.status = CellStatus::Done;
                            cell.report = Some(r);
                        }
                        Err(e) => {
                            log::warn!("cell {i} failed: {e}");
                            cell.status = CellStatus::Failed;
                            cell.error = Some(e.to_string());
                        }
                    }
                    cell.wall_time_s = t0.elapsed().as_secs_f64();
                    cell
                })
                .collect()
        });
        for cell in finished {
            append_line(&mut f, &cell)?;
            let i = cell.index;
            cells[i] = cell;
            newly_evaluated += 1;
        }
    }

    let summary = emit_phase_table(&cells, cfg, &cfg.output.csv, &cfg.output.json)?;
    Ok(ScanOutcome {
        cells,
        summary,
        newly_evaluated,
        resumed,
    })
}
