use std::fmt::Write as _;
use std::str::FromStr;

use super::{ClassSplit, CodecReport, ReconCurve, HISTOGRAM_BINS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Svg,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "svg" => Ok(Self::Svg),
            other => Err(Error::InvalidInput(format!("unknown report format {other:?}"))),
        }
    }
}

pub fn emit_curve(curve: &ReconCurve, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Csv => curve_csv(curve).into_bytes(),
        ReportFormat::Svg => curve_svg(curve).into_bytes(),
    }
}

fn curve_csv(curve: &ReconCurve) -> String {
    let mut out = String::from("n,miou,err\n");
    for p in &curve.points {
        writeln!(out, "{},{:.8},{:.8}", p.components, p.miou, p.err).unwrap();
    }
    out
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;

fn curve_svg(curve: &ReconCurve) -> String {
    let pts = &curve.points;
    let n_min = pts.first().map_or(0, |p| p.components) as f64;
    let n_max = pts.last().map_or(1, |p| p.components) as f64;
    let n_span = if n_max > n_min { n_max - n_min } else { 1.0 };
    let err_max = pts.iter().map(|p| p.err).fold(0.0, f64::max);
    let y_top = nice_ceiling(err_max);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x_of = |n: usize| LEFT + (n as f64 - n_min) / n_span * plot_w;
    let y_of = |e: f64| TOP + plot_h - e / y_top * plot_h;

    let mut s = String::new();
    writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    )
    .unwrap();
    let (x0, x1, y0, y1) = (LEFT, LEFT + plot_w, TOP, TOP + plot_h);
    writeln!(s, r#"<line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}" stroke="black"/>"#).unwrap();
    writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#).unwrap();
    for p in pts {
        let x = x_of(p.components);
        writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{y1}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y1 + 5.0,
            y1 + 18.0,
            p.components
        )
        .unwrap();
    }
    for k in 0..=5 {
        let e = y_top * k as f64 / 5.0;
        let y = y_of(e);
        writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{:.1}%</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            y + 4.0,
            e * 100.0
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Number of components</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="15" y="{:.2}" text-anchor="middle" transform="rotate(-90 15 {:.2})">Reconstruction error (1 - mIoU)</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    )
    .unwrap();
    let line: Vec<String> = pts
        .iter()
        .map(|p| format!("{:.2},{:.2}", x_of(p.components), y_of(p.err)))
        .collect();
    writeln!(
        s,
        r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#,
        line.join(" ")
    )
    .unwrap();
    for p in pts {
        writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue" data-n="{}" data-err="{:.8}"><title>N={} err={:.8}</title></circle>"#,
            x_of(p.components),
            y_of(p.err),
            p.components,
            p.err,
            p.components,
            p.err
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Smallest value of the form `{1, 2, 5} * 10^k` not below `x`.
fn nice_ceiling(x: f64) -> f64 {
    if !(x > 0.0) {
        return 1.0;
    }
    let base = 10f64.powf(x.log10().floor());
    for f in [1.0, 2.0, 5.0, 10.0] {
        if f * base >= x {
            return f * base;
        }
    }
    10.0 * base
}

/// Statistics as rows, one column per codec (in name order).
pub fn emit_codec_report(report: &CodecReport) -> Vec<u8> {
    let names: Vec<&String> = report.codecs.keys().collect();
    let mut out = String::from("stat");
    for n in &names {
        write!(out, ",{n}").unwrap();
    }
    out.push('\n');
    let row = |out: &mut String, label: &str, f: &dyn Fn(&super::CodecStats) -> String| {
        out.push_str(label);
        for n in &names {
            write!(out, ",{}", f(&report.codecs[*n])).unwrap();
        }
        out.push('\n');
    };
    row(&mut out, "count", &|s| s.count.to_string());
    row(&mut out, "mean_iou", &|s| format!("{:.8}", s.mean));
    row(&mut out, "median_iou", &|s| format!("{:.8}", s.median));
    for b in 0..HISTOGRAM_BINS {
        let label = format!(
            "hist_{:.2}_{:.2}",
            b as f64 / HISTOGRAM_BINS as f64,
            (b + 1) as f64 / HISTOGRAM_BINS as f64
        );
        row(&mut out, &label, &|s| s.histogram[b].to_string());
    }
    let mut cats: Vec<i64> = report
        .per_category
        .values()
        .flat_map(|m| m.keys().copied())
        .collect();
    cats.sort_unstable();
    cats.dedup();
    for c in cats {
        write!(out, "mean_iou_cat_{c}").unwrap();
        for n in &names {
            match report.per_category.get(*n).and_then(|m| m.get(&c)) {
                Some((_, mean)) => write!(out, ",{mean:.8}").unwrap(),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out.into_bytes()
}

/// One row per category, then the corpus-wide row labeled `all`.
pub fn emit_class_split(split: &ClassSplit) -> Vec<u8> {
    let mut out = String::from("category,count,agnostic_miou,specific_miou\n");
    for row in &split.per_category {
        writeln!(out, "{},{},{:.8},{:.8}", row.category, row.count, row.agnostic, row.specific).unwrap();
    }
    let total: u64 = split.per_category.iter().map(|r| r.count).sum();
    writeln!(out, "all,{total},{:.8},{:.8}", split.agnostic, split.specific).unwrap();
    out.into_bytes()
}
