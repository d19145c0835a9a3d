use std::path::Path;

use plotters::prelude::*;

use crate::error::{Error, Result};

use super::runner::StepSummary;

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Argument(format!("plotting failed: {e}"))
}

/// Writes an SVG with mean OSPA (top) and mean cardinality (bottom) against
/// time for each named summary.
pub fn plot_summaries(path: &Path, title: &str, series: &[(&str, &[StepSummary])]) -> Result<()> {
    let steps = series.iter().flat_map(|(_, s)| s.iter().map(|r| r.step)).max().unwrap_or(1);
    let max_ospa = series
        .iter()
        .flat_map(|(_, s)| s.iter().map(|r| r.ospa_mean.max(r.ospa2_mean)))
        .fold(1.0_f64, f64::max);
    let max_card = series
        .iter()
        .flat_map(|(_, s)| s.iter().map(|r| r.card_est_mean.max(r.card_true_mean)))
        .fold(1.0_f64, f64::max);

    let root = SVGBackend::new(path, (900, 700)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let (top, bottom) = root.split_vertically(350);
    let palette = [&BLUE, &RED, &GREEN, &MAGENTA];

    let mut chart = ChartBuilder::on(&top)
        .caption(format!("{title}: OSPA"), ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(30)
        .y_label_area_size(50)
        .build_cartesian_2d(1..steps, 0.0..max_ospa * 1.05)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("step").y_desc("m").draw().map_err(plot_err)?;
    for (i, (name, s)) in series.iter().enumerate() {
        let color = palette[i % palette.len()];
        chart
            .draw_series(LineSeries::new(s.iter().map(|r| (r.step, r.ospa_mean)), color))
            .map_err(plot_err)?
            .label(format!("{name} OSPA"))
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
        chart
            .draw_series(LineSeries::new(
                s.iter().map(|r| (r.step, r.ospa2_mean)),
                color.mix(0.4).stroke_width(2),
            ))
            .map_err(plot_err)?
            .label(format!("{name} OSPA2"))
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.mix(0.4)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;

    let mut chart = ChartBuilder::on(&bottom)
        .caption(format!("{title}: cardinality"), ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(30)
        .y_label_area_size(50)
        .build_cartesian_2d(1..steps, 0.0..max_card + 1.0)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("step").draw().map_err(plot_err)?;
    if let Some((_, s)) = series.first() {
        chart
            .draw_series(LineSeries::new(s.iter().map(|r| (r.step, r.card_true_mean)), &BLACK))
            .map_err(plot_err)?
            .label("truth")
            .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], BLACK));
    }
    for (i, (name, s)) in series.iter().enumerate() {
        let color = palette[i % palette.len()];
        chart
            .draw_series(LineSeries::new(s.iter().map(|r| (r.step, r.card_est_mean)), color))
            .map_err(plot_err)?
            .label(name.to_string())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}
