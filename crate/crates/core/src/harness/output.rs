//! CSV and SVG artifacts for sweep results.

use std::collections::BTreeMap;
use std::path::Path;

use plotters::prelude::*;

use super::TrialRecord;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "model,p,k,r,N,rescaled_N,trial,seed,lambda,frob_error,relative_error,nuclear_error,iterations,runtime_ms,bound_value,bound_ratio";

/// One row per record, in the given order. Floats use the shortest
/// round-trip representation; failed trials show `NaN` metrics.
pub fn emit_csv(records: &[TrialRecord], path: impl AsRef<Path>) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidParameter("no records to write".into()));
    }
    let mut w = csv::Writer::from_path(path)?;
    for rec in records {
        w.serialize(rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<TrialRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Format(format!(
            "unexpected CSV header: {}",
            header.join(",")
        )));
    }
    let mut out = Vec::new();
    for rec in r.deserialize() {
        let mut rec: TrialRecord = rec?;
        if rec.frob_error.is_nan() {
            rec.failure = Some("failed trial".into());
        }
        out.push(rec);
    }
    Ok(out)
}

/// `p -> [(x, mean frob_error)]` over successful records, with `x` taken
/// from the given field.
fn curves(
    records: &[TrialRecord],
    x_of: impl Fn(&TrialRecord) -> f64,
) -> BTreeMap<usize, Vec<(f64, f64)>> {
    let mut acc: BTreeMap<(usize, usize), (f64, f64, usize)> = BTreeMap::new();
    for rec in records.iter().filter(|r| r.is_ok()) {
        let e = acc.entry((rec.p, rec.n)).or_insert((x_of(rec), 0.0, 0));
        e.1 += rec.frob_error;
        e.2 += 1;
    }
    let mut out: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for ((p, _), (x, sum, count)) in acc {
        let mean = sum / count as f64;
        if x > 0.0 && mean > 0.0 {
            out.entry(p).or_default().push((x, mean));
        }
    }
    out
}

fn log_range(values: impl Iterator<Item = f64>) -> std::ops::Range<f64> {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() {
        return 1.0..10.0;
    }
    (lo / 1.25)..(hi * 1.25)
}

const SERIES_COLORS: [RGBColor; 6] = [RED, BLUE, GREEN, MAGENTA, CYAN, BLACK];

fn draw_panel<DB: DrawingBackend>(
    area: &DrawingArea<DB, plotters::coord::Shift>,
    title: &str,
    x_desc: &str,
    data: &BTreeMap<usize, Vec<(f64, f64)>>,
) -> std::result::Result<(), DrawingAreaErrorKind<DB::ErrorType>> {
    let xs = log_range(data.values().flatten().map(|q| q.0));
    let ys = log_range(data.values().flatten().map(|q| q.1));
    let mut chart = ChartBuilder::on(area)
        .caption(title, ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(xs.log_scale(), ys.log_scale())?;
    chart
        .configure_mesh()
        .x_desc(x_desc)
        .y_desc("Frobenius error")
        .draw()?;
    for (i, (p, pts)) in data.iter().enumerate() {
        let color = SERIES_COLORS[i % SERIES_COLORS.len()];
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))?
            .label(format!("p = {p}"))
            .legend(move |(x, y)| {
                PathElement::new(vec![(x, y), (x + 16, y)], color.stroke_width(2))
            });
        chart.draw_series(pts.iter().map(|&q| Circle::new(q, 3, color.filled())))?;
    }
    chart
        .configure_series_labels()
        .border_style(BLACK)
        .background_style(WHITE.mix(0.8))
        .draw()?;
    Ok(())
}

/// Two-panel SVG: mean Frobenius error against the raw sample size and
/// against the rescaled size `N/(r p)`, log-log, one curve per `p`.
pub fn emit_plot(records: &[TrialRecord], path: impl AsRef<Path>) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidParameter("no records to plot".into()));
    }
    let raw = curves(records, |r| r.n as f64);
    let rescaled = curves(records, |r| r.rescaled_n);
    let model = records[0].model.clone();
    let plot_err = |e: String| Error::Plot(e);
    let root = SVGBackend::new(path.as_ref(), (1100, 460)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(e.to_string()))?;
    let (left, right) = root.split_horizontally(550);
    draw_panel(&left, &format!("{model}: error vs N"), "N", &raw)
        .map_err(|e| plot_err(e.to_string()))?;
    draw_panel(
        &right,
        &format!("{model}: error vs N/(rp)"),
        "N/(rp)",
        &rescaled,
    )
    .map_err(|e| plot_err(e.to_string()))?;
    root.present().map_err(|e| plot_err(e.to_string()))?;
    Ok(())
}
