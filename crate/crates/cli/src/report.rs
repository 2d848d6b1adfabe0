//! Static SVG plots and an HTML page from `online-eval` output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use serde_json::json;

use openended_core::feature_io::write_atomic;

use crate::{Cli, ReportArgs};

#[derive(Debug, Deserialize)]
struct CurveRow {
    iteration: usize,
    n: usize,
    window_accuracy: f64,
    global_accuracy: f64,
    stored_instances: usize,
}

struct Series {
    name: String,
    rows: Vec<CurveRow>,
    table: Option<String>,
}

fn read_series(dir: &Path, name: String) -> Result<Series> {
    let path = dir.join("curves.csv");
    let mut reader = csv::Reader::from_path(&path).with_context(|| format!("reading {}", path.display()))?;
    let rows = reader
        .deserialize()
        .collect::<Result<Vec<CurveRow>, _>>()
        .with_context(|| format!("parsing {}", path.display()))?;
    let table = fs::read_to_string(dir.join("summary.txt")).ok();
    Ok(Series { name, rows, table })
}

/// A single run directory, or a sweep directory with one subdirectory per
/// run, in name order.
fn collect(input: &Path) -> Result<Vec<Series>> {
    if input.join("curves.csv").is_file() {
        let name = input.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        return Ok(vec![read_series(input, name)?]);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(input)
        .with_context(|| format!("reading {}", input.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("curves.csv").is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        bail!("{}: no curves.csv found", input.display());
    }
    dirs.iter()
        .map(|d| read_series(d, d.file_name().unwrap().to_string_lossy().into_owned()))
        .collect()
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const W: f64 = 640.0;
const H: f64 = 360.0;
const PAD_L: f64 = 60.0;
const PAD_R: f64 = 20.0;
const PAD_T: f64 = 30.0;
const PAD_B: f64 = 45.0;

fn nice_max(v: f64) -> f64 {
    if v <= 0.0 {
        return 1.0;
    }
    let mag = 10f64.powf(v.log10().floor());
    for m in [1.0, 2.0, 2.5, 5.0, 10.0] {
        if m * mag >= v {
            return m * mag;
        }
    }
    10.0 * mag
}

fn svg_plot(title: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)], y_max: Option<f64>) -> String {
    let x_max = nice_max(series.iter().flat_map(|s| s.1.iter().map(|p| p.0)).fold(1.0, f64::max));
    let y_max = y_max.unwrap_or_else(|| nice_max(series.iter().flat_map(|s| s.1.iter().map(|p| p.1)).fold(0.0, f64::max)));
    let pw = W - PAD_L - PAD_R;
    let ph = H - PAD_T - PAD_B;
    let sx = |x: f64| PAD_L + x / x_max * pw;
    let sy = |y: f64| PAD_T + ph - y / y_max * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{}</text>"#, W / 2.0, title);
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let (x, y) = (sx(f * x_max), sy(f * y_max));
        let _ = writeln!(s, r##"<line x1="{PAD_L}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/>"##, W - PAD_R);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, PAD_L - 5.0, y + 4.0, trim(f * y_max));
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, H - PAD_B + 15.0, trim(f * x_max));
    }
    let _ = writeln!(
        s,
        r#"<rect x="{PAD_L}" y="{PAD_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">iteration</text>"#, PAD_L + pw / 2.0, H - 8.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
        PAD_T + ph / 2.0,
        PAD_T + ph / 2.0,
        y_label
    );
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        );
        let ly = PAD_T + 14.0 + 14.0 * i as f64;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{ly:.1}" fill="{color}">{}</text>"#, PAD_L + 8.0, escape(name));
    }
    s.push_str("</svg>\n");
    s
}

fn trim(v: f64) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

type Extract = fn(&CurveRow) -> f64;

const PLOTS: [(&str, &str, &str, Extract, bool); 4] = [
    ("window_accuracy", "Protocol accuracy", "window accuracy", |r| r.window_accuracy, true),
    ("global_accuracy", "Global classification accuracy", "global accuracy", |r| r.global_accuracy, true),
    ("stored_instances", "Stored instances", "instances", |r| r.stored_instances as f64, false),
    ("categories", "Learned categories", "categories", |r| r.n as f64, false),
];

pub fn run(cli: &Cli, a: &ReportArgs) -> Result<()> {
    let series = collect(&a.input)?;
    let out = a.out.clone().unwrap_or_else(|| a.input.join("report"));
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    let mut html = String::from(
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Open-ended evaluation</title>\n\
         <style>body{font-family:sans-serif;margin:2em;max-width:60em}pre{background:#f6f6f6;padding:.5em}</style>\n\
         </head><body>\n<h1>Open-ended evaluation</h1>\n",
    );
    let mut files = Vec::new();
    for (stem, title, y_label, f, unit) in PLOTS {
        let data: Vec<(String, Vec<(f64, f64)>)> = series
            .iter()
            .map(|s| (s.name.clone(), s.rows.iter().map(|r| (r.iteration as f64, f(r))).collect()))
            .collect();
        let svg = svg_plot(title, y_label, &data, unit.then_some(1.0));
        let file = out.join(format!("{stem}.svg"));
        write_atomic(&file, &svg)?;
        files.push(file);
        let _ = writeln!(html, "<h2>{title}</h2>\n{svg}");
    }
    html.push_str("<h2>Runs</h2>\n");
    for s in &series {
        let last = s.rows.last();
        let _ = writeln!(
            html,
            "<h3>{}</h3>\n<p>{} asks, {} categories, {} stored instances, final global accuracy {:.4}</p>",
            escape(&s.name),
            s.rows.len(),
            last.map_or(0, |r| r.n),
            last.map_or(0, |r| r.stored_instances),
            last.map_or(0.0, |r| r.global_accuracy)
        );
        if let Some(t) = &s.table {
            let _ = writeln!(html, "<pre>{}</pre>", escape(t));
        }
    }
    html.push_str("</body></html>\n");
    let index = out.join("index.html");
    write_atomic(&index, &html)?;
    files.push(index);

    if cli.json {
        println!("{}", serde_json::to_string_pretty(&json!({ "files": files }))?);
    } else {
        for f in files {
            println!("{}", f.display());
        }
    }
    Ok(())
}
