//! Aggregates raw run records into the three presentation artifacts — the
//! per-dataset summary table, RMSE-vs-S curves and critical-diagram data —
//! plus the file writers for them. Every number here is recomputed from the
//! records; reports carry no independent state.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::{RunRecord, Variant};
use crate::regressors::RegressorKind;
use crate::stats::{
    friedman_mean_ranks, paired_t_test, win_tie_loss, ComparisonCell, FriedmanStat, Outcome,
    RankSummary, WinTieLoss,
};

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes records as JSON lines. Output is byte-deterministic for equal
/// record content.
pub fn write_records(path: &Path, records: &[RunRecord]) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(record).map_err(|e| Error::Serialization(e.to_string()))?;
        writeln!(out, "{line}").map_err(io_err(path))?;
    }
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let file = File::open(path).map_err(io_err(path))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (number, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RunRecord = serde_json::from_str(&line).map_err(|e| Error::ParseRow {
            line: number as u64 + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

fn ordered_datasets(records: &[RunRecord]) -> Vec<String> {
    let set: BTreeSet<&str> = records.iter().map(|r| r.dataset.as_str()).collect();
    set.into_iter().map(String::from).collect()
}

/// Regressor kinds in first-appearance order.
fn ordered_regressors(records: &[RunRecord]) -> Vec<RegressorKind> {
    let mut out = Vec::new();
    for record in records {
        if !out.contains(&record.regressor) {
            out.push(record.regressor);
        }
    }
    out
}

fn fold_mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Paired per-fold test RMSEs of one (dataset, regressor) cell at `s`.
fn paired_fold_rmses(
    records: &[RunRecord],
    dataset: &str,
    regressor: RegressorKind,
    s: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut native: Vec<(usize, f64)> = records
        .iter()
        .filter(|r| {
            r.dataset == dataset && r.regressor == regressor && r.variant == Variant::Native
        })
        .map(|r| (r.fold, r.test_rmse))
        .collect();
    let mut augmented: Vec<(usize, f64)> = records
        .iter()
        .filter(|r| {
            r.dataset == dataset
                && r.regressor == regressor
                && r.variant == Variant::Augmented
                && r.s == Some(s)
        })
        .map(|r| (r.fold, r.test_rmse))
        .collect();
    native.sort_by_key(|&(fold, _)| fold);
    augmented.sort_by_key(|&(fold, _)| fold);
    if native.is_empty() || native.len() != augmented.len() {
        return Err(Error::NoMatchingRecords(format!(
            "dataset '{dataset}' regressor {regressor:?} s = {s}: {} native vs {} augmented folds",
            native.len(),
            augmented.len()
        )));
    }
    if native
        .iter()
        .zip(&augmented)
        .any(|((fa, _), (fb, _))| fa != fb)
    {
        return Err(Error::NoMatchingRecords(format!(
            "dataset '{dataset}' regressor {regressor:?} s = {s}: unpaired folds"
        )));
    }
    Ok((
        native.into_iter().map(|(_, v)| v).collect(),
        augmented.into_iter().map(|(_, v)| v).collect(),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub dataset: String,
    pub regressor: RegressorKind,
    pub cell: ComparisonCell,
}

/// The Table-2-shaped summary for one S value: per (dataset x regressor)
/// fold-mean RMSEs with the paired-t significance call, a mean footer and a
/// win/tie/loss footer.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub s: usize,
    pub regressors: Vec<RegressorKind>,
    pub rows: Vec<SummaryRow>,
    pub mean_native: Vec<f64>,
    pub mean_aug: Vec<f64>,
    pub wtl: Vec<WinTieLoss>,
}

pub fn build_summary_table(records: &[RunRecord], s: usize) -> Result<SummaryTable> {
    if !records
        .iter()
        .any(|r| r.variant == Variant::Augmented && r.s == Some(s))
    {
        return Err(Error::NoMatchingRecords(format!("no records with s = {s}")));
    }
    let regressors = ordered_regressors(records);
    let datasets = ordered_datasets(records);

    let mut rows = Vec::new();
    for dataset in &datasets {
        for &regressor in &regressors {
            let (native, augmented) = paired_fold_rmses(records, dataset, regressor, s)?;
            let t = paired_t_test(&augmented, &native)?;
            rows.push(SummaryRow {
                dataset: dataset.clone(),
                regressor,
                cell: ComparisonCell::new(fold_mean(&native), fold_mean(&augmented), t.p),
            });
        }
    }

    let mut mean_native = Vec::new();
    let mut mean_aug = Vec::new();
    let mut wtl = Vec::new();
    for &regressor in &regressors {
        let cells: Vec<ComparisonCell> = rows
            .iter()
            .filter(|r| r.regressor == regressor)
            .map(|r| r.cell.clone())
            .collect();
        mean_native.push(fold_mean(
            &cells.iter().map(|c| c.native_rmse_mean).collect::<Vec<_>>(),
        ));
        mean_aug.push(fold_mean(
            &cells.iter().map(|c| c.aug_rmse_mean).collect::<Vec<_>>(),
        ));
        wtl.push(win_tie_loss(&cells));
    }

    Ok(SummaryTable {
        s,
        regressors,
        rows,
        mean_native,
        mean_aug,
        wtl,
    })
}

/// Long-format CSV: one row per (dataset, regressor), then `mean` and
/// `win_tie_loss` footer rows per regressor (counts as `w/t/l`).
pub fn write_summary_csv(path: &Path, table: &SummaryTable) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    let err = io_err(path);
    writeln!(
        out,
        "dataset,regressor,native_rmse,aug_rmse,p_value,significant,outcome"
    )
    .map_err(&err)?;
    for row in &table.rows {
        let outcome = match row.cell.outcome {
            Outcome::Win => "win",
            Outcome::Tie => "tie",
            Outcome::Loss => "loss",
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.dataset,
            row.regressor.label(),
            row.cell.native_rmse_mean,
            row.cell.aug_rmse_mean,
            row.cell.p_value,
            row.cell.outcome != Outcome::Tie,
            outcome
        )
        .map_err(&err)?;
    }
    for (i, &regressor) in table.regressors.iter().enumerate() {
        writeln!(
            out,
            "mean,{},{},{},,,",
            regressor.label(),
            table.mean_native[i],
            table.mean_aug[i]
        )
        .map_err(&err)?;
    }
    for (i, &regressor) in table.regressors.iter().enumerate() {
        let wtl = &table.wtl[i];
        writeln!(
            out,
            "win_tie_loss,{},,,,,{}/{}/{}",
            regressor.label(),
            wtl.wins,
            wtl.ties,
            wtl.losses
        )
        .map_err(&err)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SCurvePoint {
    pub s: usize,
    pub train_rmse: f64,
    pub test_rmse: f64,
}

/// RMSE versus S for one (regressor, dataset), with the native performance
/// as constant baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct SCurve {
    pub regressor: RegressorKind,
    pub dataset: String,
    pub points: Vec<SCurvePoint>,
    pub native_train_rmse: f64,
    pub native_test_rmse: f64,
}

pub fn build_s_curve(
    records: &[RunRecord],
    regressor: RegressorKind,
    dataset: &str,
) -> Result<SCurve> {
    let selected: Vec<&RunRecord> = records
        .iter()
        .filter(|r| r.dataset == dataset && r.regressor == regressor)
        .collect();
    if selected.is_empty() {
        return Err(Error::NoMatchingRecords(format!(
            "dataset '{dataset}' regressor {regressor:?}"
        )));
    }
    let native: Vec<&&RunRecord> = selected
        .iter()
        .filter(|r| r.variant == Variant::Native)
        .collect();
    if native.is_empty() {
        return Err(Error::NoMatchingRecords(format!(
            "no native records for dataset '{dataset}' regressor {regressor:?}"
        )));
    }
    let native_train_rmse = fold_mean(&native.iter().map(|r| r.train_rmse).collect::<Vec<_>>());
    let native_test_rmse = fold_mean(&native.iter().map(|r| r.test_rmse).collect::<Vec<_>>());

    let s_values: BTreeSet<usize> = selected.iter().filter_map(|r| r.s).collect();
    if s_values.is_empty() {
        return Err(Error::NoMatchingRecords(format!(
            "no augmented records for dataset '{dataset}' regressor {regressor:?}"
        )));
    }
    let mut points = Vec::new();
    for s in s_values {
        let at_s: Vec<&&RunRecord> = selected.iter().filter(|r| r.s == Some(s)).collect();
        points.push(SCurvePoint {
            s,
            train_rmse: fold_mean(&at_s.iter().map(|r| r.train_rmse).collect::<Vec<_>>()),
            test_rmse: fold_mean(&at_s.iter().map(|r| r.test_rmse).collect::<Vec<_>>()),
        });
    }
    Ok(SCurve {
        regressor,
        dataset: dataset.to_string(),
        points,
        native_train_rmse,
        native_test_rmse,
    })
}

/// Plain x/y plot data: one row per S, native baselines repeated on every
/// row so any plotting tool can draw the dotted reference lines.
pub fn write_s_curve_tsv(path: &Path, curve: &SCurve) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    let err = io_err(path);
    writeln!(
        out,
        "s\taug_train_rmse\taug_test_rmse\tnative_train_rmse\tnative_test_rmse"
    )
    .map_err(&err)?;
    for point in &curve.points {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            point.s,
            point.train_rmse,
            point.test_rmse,
            curve.native_train_rmse,
            curve.native_test_rmse
        )
        .map_err(&err)?;
    }
    Ok(())
}

/// Critical-diagram data: variants sorted by mean rank, the critical
/// difference, and maximal groups of variants whose rank span is below it.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalDiagram {
    /// `(label, mean_rank)` sorted ascending by rank (rank 1 = best).
    pub variants: Vec<(String, f64)>,
    pub cd: f64,
    /// Inclusive index ranges into `variants`.
    pub groups: Vec<(usize, usize)>,
}

pub fn build_critical_diagram(rank: &RankSummary, labels: &[String]) -> Result<CriticalDiagram> {
    if labels.len() != rank.mean_ranks.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} ranks",
            labels.len(),
            rank.mean_ranks.len()
        )));
    }
    let mut variants: Vec<(String, f64)> = labels
        .iter()
        .cloned()
        .zip(rank.mean_ranks.iter().copied())
        .collect();
    variants.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));

    // maximal runs of consecutive variants with rank span < cd
    let mut groups: Vec<(usize, usize)> = Vec::new();
    for start in 0..variants.len() {
        let mut end = start;
        while end + 1 < variants.len() && variants[end + 1].1 - variants[start].1 < rank.cd {
            end += 1;
        }
        if groups.last().is_some_and(|&(_, last_end)| end <= last_end) {
            continue; // contained in the previous group
        }
        groups.push((start, end));
    }
    Ok(CriticalDiagram {
        variants,
        cd: rank.cd,
        groups,
    })
}

/// Builds the block x variant RMSE table behind the critical diagram.
///
/// Variants are `<regressor>` (native) and `<regressor>+` (augmented at the
/// requested S). With two or more datasets the blocks are per-dataset fold
/// means, as in the reference methodology; a single dataset falls back to
/// per-fold RMSEs as paired blocks.
pub fn build_rank_table(
    records: &[RunRecord],
    s: usize,
) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let regressors = ordered_regressors(records);
    if regressors.is_empty() {
        return Err(Error::NoMatchingRecords("no records".into()));
    }
    let datasets = ordered_datasets(records);
    let mut labels = Vec::new();
    for &r in &regressors {
        labels.push(r.label().to_string());
        labels.push(format!("{}+", r.label()));
    }

    let mut table: Vec<Vec<f64>> = Vec::new();
    if datasets.len() >= 2 {
        for dataset in &datasets {
            let mut row = Vec::new();
            for &regressor in &regressors {
                let (native, augmented) = paired_fold_rmses(records, dataset, regressor, s)?;
                row.push(fold_mean(&native));
                row.push(fold_mean(&augmented));
            }
            table.push(row);
        }
    } else {
        let dataset = &datasets[0];
        let mut per_regressor: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        for &regressor in &regressors {
            per_regressor.push(paired_fold_rmses(records, dataset, regressor, s)?);
        }
        let folds = per_regressor[0].0.len();
        if per_regressor.iter().any(|(n, a)| n.len() != folds || a.len() != folds) {
            return Err(Error::NoMatchingRecords(
                "regressors cover different fold sets".into(),
            ));
        }
        for fold in 0..folds {
            let mut row = Vec::new();
            for (native, augmented) in &per_regressor {
                row.push(native[fold]);
                row.push(augmented[fold]);
            }
            table.push(row);
        }
    }
    Ok((labels, table))
}

/// Convenience: rank table -> Friedman ranks -> diagram.
pub fn critical_diagram_from_records(
    records: &[RunRecord],
    s: usize,
) -> Result<(CriticalDiagram, FriedmanStat)> {
    let (labels, table) = build_rank_table(records, s)?;
    let (rank, stat) = friedman_mean_ranks(&table)?;
    Ok((build_critical_diagram(&rank, &labels)?, stat))
}

/// One row per variant plus `#`-prefixed header lines carrying the critical
/// difference and omnibus statistics.
pub fn write_critical_diagram_tsv(
    path: &Path,
    diagram: &CriticalDiagram,
    stat: &FriedmanStat,
) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    let err = io_err(path);
    writeln!(out, "# cd={}", diagram.cd).map_err(&err)?;
    writeln!(
        out,
        "# friedman_chi_square={} iman_davenport_f={}",
        stat.chi_square, stat.iman_davenport_f
    )
    .map_err(&err)?;
    writeln!(out, "variant\tmean_rank\tgroups").map_err(&err)?;
    for (index, (label, rank)) in diagram.variants.iter().enumerate() {
        let groups: Vec<String> = diagram
            .groups
            .iter()
            .enumerate()
            .filter(|(_, &(start, end))| index >= start && index <= end)
            .map(|(g, _)| g.to_string())
            .collect();
        writeln!(out, "{label}\t{rank}\t{}", groups.join(",")).map_err(&err)?;
    }
    Ok(())
}

/// Writes the full default report set for a finished run; returns the paths
/// written, records file first.
pub fn write_default_reports(
    out_dir: &Path,
    records: &[RunRecord],
    s_values: &[usize],
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut written = Vec::new();

    let records_path = out_dir.join("records.jsonl");
    write_records(&records_path, records)?;
    written.push(records_path);

    for &s in s_values {
        let path = out_dir.join(format!("summary_s{s}.csv"));
        write_summary_csv(&path, &build_summary_table(records, s)?)?;
        written.push(path);
    }

    for regressor in ordered_regressors(records) {
        for dataset in ordered_datasets(records) {
            let curve = build_s_curve(records, regressor, &dataset)?;
            let path = out_dir.join(format!("scurve_{}_{}.tsv", regressor.label(), dataset));
            write_s_curve_tsv(&path, &curve)?;
            written.push(path);
        }
    }

    if let Some(&s) = s_values.last() {
        let (diagram, stat) = critical_diagram_from_records(records, s)?;
        let path = out_dir.join("critical_diagram.tsv");
        write_critical_diagram_tsv(&path, &diagram, &stat)?;
        written.push(path);
    }
    Ok(written)
}
