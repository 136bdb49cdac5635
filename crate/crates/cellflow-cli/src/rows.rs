//! Output shaping: CSV rows, terminal tables, and the engine-gap report.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use cellflow_core::config::EngineChoice;
use serde_json::json;

use crate::exec::{ClassRow, EngineReport};

pub const CSV_HEADER: [&str; 10] = [
    "sweep_value",
    "engine",
    "cell_id",
    "class",
    "E_N",
    "gamma",
    "H",
    "gamma_ratio",
    "ci_halfwidth",
    "status",
];

/// One evaluated (sweep point, engine) pair; failures carry the status
/// text so sweeps keep going.
#[derive(Debug)]
pub struct PointResult {
    pub point: usize,
    pub sweep_value: Option<f64>,
    pub engine: EngineChoice,
    pub outcome: Result<EngineReport, String>,
}

/// Twelve significant digits, scientific; reproducible independent of
/// locale and magnitude.
pub fn fmt_sig(x: f64) -> String {
    format!("{x:.11e}")
}

/// Flat CSV: one row per cell and class, failure rows with empty KPI
/// fields and the error in the status column. Row order follows the input.
pub fn write_csv<W: Write>(writer: W, results: &[PointResult]) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(CSV_HEADER)?;
    for result in results {
        let sweep = result
            .sweep_value
            .map(|v| v.to_string())
            .unwrap_or_default();
        match &result.outcome {
            Ok(report) => {
                for cell in &report.cells {
                    for row in &cell.classes {
                        out.write_record([
                            sweep.clone(),
                            result.engine.name().to_string(),
                            cell.cell.to_string(),
                            row.class.clone(),
                            fmt_sig(row.e_n),
                            fmt_sig(row.gamma),
                            fmt_sig(row.h),
                            fmt_sig(row.gamma / cell.capacity),
                            row.ci.map(|ci| fmt_sig(ci.gamma)).unwrap_or_default(),
                            "ok".to_string(),
                        ])?;
                    }
                }
            }
            Err(status) => {
                out.write_record([
                    sweep,
                    result.engine.name().to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    status.clone(),
                ])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Human table for one engine: KPIs per class and cell, throughput in
/// Mbit/s, then the diagnostics line.
pub fn print_report(engine: EngineChoice, report: &EngineReport) {
    println!("engine: {engine}");
    for cell in &report.cells {
        if report.cells.len() > 1 {
            println!("  cell {}", cell.cell);
        }
        println!(
            "  {:<12} {:>22} {:>22} {:>22}",
            "class", "E(N)", "gamma (Mbit/s)", "H"
        );
        for row in &cell.classes {
            match row.ci {
                None => println!(
                    "  {:<12} {:>22.6e} {:>22.6e} {:>22.6e}",
                    row.class,
                    row.e_n,
                    row.gamma / 1e6,
                    row.h
                ),
                Some(ci) => println!(
                    "  {:<12} {:>12.4e}{:>10} {:>12.4e}{:>10} {:>12.4e}{:>10}",
                    row.class,
                    row.e_n,
                    format!("±{:.1e}", ci.e_n),
                    row.gamma / 1e6,
                    format!("±{:.1e}", ci.gamma / 1e6),
                    row.h,
                    format!("±{:.1e}", ci.h),
                ),
            }
        }
        if let Some(p) = cell.empty_probability {
            println!("  P(empty) = {p:.6e}");
        }
    }
    println!("  [{}]", report.diagnostics);
    println!();
}

fn rel_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Short per-KPI gap line against the first engine's report, printed when
/// a solve runs several engines. Joined on position; extra cells in one
/// report are ignored.
pub fn print_gaps(base_engine: EngineChoice, base: &EngineReport, report: &EngineReport) {
    let mut gaps = [0.0_f64; 3];
    for (a, b) in base.cells.iter().zip(&report.cells) {
        for (ra, rb) in a.classes.iter().zip(&b.classes) {
            gaps[0] = gaps[0].max(rel_gap(ra.e_n, rb.e_n));
            gaps[1] = gaps[1].max(rel_gap(ra.gamma, rb.gamma));
            gaps[2] = gaps[2].max(rel_gap(ra.h, rb.h));
        }
    }
    println!(
        "  max relative gap vs {base_engine}: E(N) {:.3e}, gamma {:.3e}, H {:.3e}",
        gaps[0], gaps[1], gaps[2]
    );
    println!();
}

struct Worst {
    gap: f64,
    sweep_value: Option<f64>,
    cell: usize,
    class: String,
    engines: (&'static str, &'static str),
    values: (f64, f64),
    ci: Option<f64>,
}

fn kpi_value(row: &ClassRow, kpi: usize) -> f64 {
    match kpi {
        0 => row.e_n,
        1 => row.gamma,
        _ => row.h,
    }
}

fn kpi_ci(row: &ClassRow, kpi: usize) -> Option<f64> {
    row.ci.map(|ci| match kpi {
        0 => ci.e_n,
        1 => ci.gamma,
        _ => ci.h,
    })
}

fn row_map(report: &EngineReport) -> HashMap<(usize, &str), &ClassRow> {
    let mut map = HashMap::new();
    for cell in &report.cells {
        for row in &cell.classes {
            map.insert((cell.cell, row.class.as_str()), row);
        }
    }
    map
}

/// Machine-readable comparison: for each KPI the maximum relative gap over
/// all points, engine pairs, cells, and classes, with the location and the
/// wider confidence half-width at that location when a simulator took
/// part. Failed points are listed, not fatal.
pub fn compare_json(engines: &[EngineChoice], results: &[PointResult]) -> serde_json::Value {
    let mut failures = Vec::new();
    let mut table: HashMap<(usize, EngineChoice), &EngineReport> = HashMap::new();
    let mut points = BTreeSet::new();
    for result in results {
        points.insert(result.point);
        match &result.outcome {
            Ok(report) => {
                table.insert((result.point, result.engine), report);
            }
            Err(status) => failures.push(json!({
                "sweep_value": result.sweep_value,
                "engine": result.engine.name(),
                "error": status,
            })),
        }
    }
    let sweep_of: HashMap<usize, Option<f64>> =
        results.iter().map(|r| (r.point, r.sweep_value)).collect();

    let mut worst: [Option<Worst>; 3] = [None, None, None];
    for &point in &points {
        for i in 0..engines.len() {
            for j in i + 1..engines.len() {
                let (Some(a), Some(b)) = (
                    table.get(&(point, engines[i])),
                    table.get(&(point, engines[j])),
                ) else {
                    continue;
                };
                let rows_b = row_map(b);
                for cell in &a.cells {
                    for row_a in &cell.classes {
                        let Some(row_b) = rows_b.get(&(cell.cell, row_a.class.as_str())) else {
                            continue;
                        };
                        for (kpi, slot) in worst.iter_mut().enumerate() {
                            let va = kpi_value(row_a, kpi);
                            let vb = kpi_value(row_b, kpi);
                            let gap = rel_gap(va, vb);
                            let better = slot.as_ref().is_none_or(|w| gap > w.gap);
                            if better {
                                let ci = match (kpi_ci(row_a, kpi), kpi_ci(row_b, kpi)) {
                                    (None, None) => None,
                                    (x, y) => Some(x.unwrap_or(0.0).max(y.unwrap_or(0.0))),
                                };
                                *slot = Some(Worst {
                                    gap,
                                    sweep_value: sweep_of[&point],
                                    cell: cell.cell,
                                    class: row_a.class.clone(),
                                    engines: (engines[i].name(), engines[j].name()),
                                    values: (va, vb),
                                    ci,
                                });
                            }
                        }
                    }
                }
            }
        }
    }

    let gap_json = |w: &Option<Worst>| match w {
        None => json!(null),
        Some(w) => json!({
            "max_relative_gap": w.gap,
            "sweep_value": w.sweep_value,
            "cell": w.cell,
            "class": w.class,
            "engines": [w.engines.0, w.engines.1],
            "values": [w.values.0, w.values.1],
            "ci_halfwidth": w.ci,
        }),
    };
    json!({
        "engines": engines.iter().map(|e| e.name()).collect::<Vec<_>>(),
        "points": points.len(),
        "failures": failures,
        "gaps": {
            "E_N": gap_json(&worst[0]),
            "gamma": gap_json(&worst[1]),
            "H": gap_json(&worst[2]),
        },
    })
}
