//! SVG figures drawn from the emitted CSVs only.

use std::path::Path;

use anyhow::{anyhow, Context, Result};
use plotters::prelude::*;

/// Numeric columns `cols` of a CSV written by this tool.
fn read_columns(path: &Path, cols: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let header = r.headers()?.clone();
    let idx: Vec<usize> = cols
        .iter()
        .map(|c| header.iter().position(|h| h == *c).ok_or_else(|| anyhow!("{} has no column {c}", path.display())))
        .collect::<Result<_>>()?;
    let mut out = vec![Vec::new(); cols.len()];
    for rec in r.records() {
        let rec = rec?;
        for (o, &i) in out.iter_mut().zip(&idx) {
            o.push(rec[i].parse::<f64>().unwrap_or(f64::NAN));
        }
    }
    Ok(out)
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.08).max(1e-12 * hi.abs().max(1.0));
    (lo - pad, hi + pad)
}

fn plot_err<E: std::fmt::Debug>(e: E) -> anyhow::Error {
    anyhow!("plotting failed: {e:?}")
}

/// Three panels (ℓ₂ error, coordinate mean, coordinate variance) against λ,
/// empirical points with ±2 stderr bars over the theory curve.
pub fn figure1(panels: [(&Path, &str); 3], dest: &Path) -> Result<()> {
    let root = SVGBackend::new(dest, (1500, 460)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let areas = root.split_evenly((1, 3));
    for (area, (csv_path, title)) in areas.iter().zip(panels) {
        let cols = read_columns(csv_path, &["lambda", "empirical", "stderr", "theory"])?;
        let (lam, emp, se, th) = (&cols[0], &cols[1], &cols[2], &cols[3]);
        let (lmin, lmax) = lam.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        let (ylo, yhi) = span(emp.iter().zip(se).flat_map(|(e, s)| [e - 2.0 * s, e + 2.0 * s]).chain(th.iter().copied()));
        let mut chart = ChartBuilder::on(area)
            .caption(title, ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(35)
            .y_label_area_size(70)
            .build_cartesian_2d((lmin * 0.8..lmax * 1.25).log_scale(), ylo..yhi)
            .map_err(plot_err)?;
        chart.configure_mesh().x_desc("lambda").draw().map_err(plot_err)?;
        chart
            .draw_series(LineSeries::new(lam.iter().copied().zip(th.iter().copied()), BLUE.stroke_width(2)))
            .map_err(plot_err)?
            .label("theory")
            .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], BLUE.stroke_width(2)));
        chart
            .draw_series(lam.iter().zip(emp).zip(se).map(|((&l, &e), &s)| PathElement::new(vec![(l, e - 2.0 * s), (l, e + 2.0 * s)], RED)))
            .map_err(plot_err)?;
        chart
            .draw_series(lam.iter().zip(emp).map(|(&l, &e)| Circle::new((l, e), 4, RED.filled())))
            .map_err(plot_err)?
            .label("empirical")
            .legend(|(x, y)| Circle::new((x + 9, y), 4, RED.filled()));
        chart.configure_series_labels().border_style(BLACK).background_style(WHITE).draw().map_err(plot_err)?;
    }
    root.present().map_err(plot_err)?;
    Ok(())
}

/// `‖μ^(t) − μ̂‖/√n` on a log axis, one line per seed.
pub fn ridge_amp(csv_path: &Path, dest: &Path) -> Result<()> {
    let cols = read_columns(csv_path, &["seed", "t", "error"])?;
    let floor = 1e-17f64;
    let tmax = cols[1].iter().fold(1.0f64, |a, &b| a.max(b));
    let emax = cols[2].iter().fold(floor, |a, &b| a.max(b));
    let root = SVGBackend::new(dest, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("AMP iterates vs closed-form ridge", ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(35)
        .y_label_area_size(70)
        .build_cartesian_2d(0.0..tmax, (floor..emax * 2.0).log_scale())
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("t").draw().map_err(plot_err)?;
    let mut seeds: Vec<f64> = cols[0].clone();
    seeds.dedup();
    for (i, &seed) in seeds.iter().enumerate() {
        let pts: Vec<(f64, f64)> =
            (0..cols[0].len()).filter(|&r| cols[0][r] == seed).map(|r| (cols[1][r], cols[2][r].max(floor))).collect();
        chart.draw_series(LineSeries::new(pts, Palette99::pick(i).stroke_width(2))).map_err(plot_err)?;
    }
    root.present().map_err(plot_err)?;
    Ok(())
}
