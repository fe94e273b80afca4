//! Self-contained SVG 1.1 figures.

use std::fmt::Write as _;
use std::path::Path;

use crate::config::{PlotConfig, PlotStyle};
use crate::csvio::Table;
use crate::error::{io_err, Result};
use crate::tenfac_sweep::{read_rows, SweepRow};

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];
const PANEL_W: f64 = 480.0;
const PANEL_H: f64 = 360.0;
const MARGIN: f64 = 60.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
    reversed: bool,
}

impl Axis {
    /// Range covering `values`, padded; log axes use decades.
    fn fit(values: impl Iterator<Item = f64>, log: bool, reversed: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = if log { (-4.0, 0.0) } else { (0.0, 1.0) };
        }
        if log {
            (lo, hi) = (lo.floor(), hi.ceil());
        } else {
            let pad = 0.05 * (hi - lo).max(1e-12);
            (lo, hi) = ((lo - pad).min(if lo >= 0.0 { 0.0 } else { lo - pad }), hi + pad);
        }
        if hi <= lo {
            hi = lo + 1.0;
        }
        Self { lo, hi, log, reversed }
    }

    /// Fraction along the axis, `None` for values a log axis cannot show.
    fn frac(&self, v: f64) -> Option<f64> {
        let v = if self.log {
            if !(v > 0.0) {
                return None;
            }
            v.log10()
        } else {
            v
        };
        v.is_finite().then(|| {
            let f = (v - self.lo) / (self.hi - self.lo);
            if self.reversed {
                1.0 - f
            } else {
                f
            }
        })
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let step = ((self.hi - self.lo) / 8.0).ceil().max(1.0) as i64;
            return (self.lo as i64..=self.hi as i64)
                .step_by(step as usize)
                .map(|k| (10f64.powi(k as i32), format!("1e{k}")))
                .collect();
        }
        let raw = (self.hi - self.lo) / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
        let mut t = (self.lo / step).ceil() * step;
        let mut out = Vec::new();
        while t <= self.hi + 1e-9 * step {
            let label =
                if step >= 1.0 { format!("{t:.0}") } else { format!("{t:.*}", (-step.log10().floor()) as usize) };
            out.push((t, label));
            t += step;
        }
        out
    }
}

struct Panel {
    x0: f64,
    x: Axis,
    y: Axis,
}

impl Panel {
    fn px(&self, v: f64) -> Option<f64> {
        self.x.frac(v).map(|f| self.x0 + MARGIN + f * (PANEL_W - 1.5 * MARGIN))
    }

    fn py(&self, v: f64) -> Option<f64> {
        self.y.frac(v).map(|f| PANEL_H - MARGIN - f * (PANEL_H - 1.5 * MARGIN))
    }

    fn point(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        Some((self.px(x)?, self.py(y)?))
    }

    fn axes(&self, svg: &mut String, xlabel: &str, ylabel: &str) {
        let (left, right) = (self.x0 + MARGIN, self.x0 + PANEL_W - MARGIN / 2.0);
        let (top, bottom) = (MARGIN / 2.0, PANEL_H - MARGIN);
        let _ = writeln!(
            svg,
            r#"<rect x="{left:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            right - left,
            bottom - top
        );
        for (v, label) in self.x.ticks() {
            if let Some(x) = self.px(v) {
                let _ = writeln!(
                    svg,
                    r#"<line x1="{x:.2}" y1="{bottom:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#,
                    bottom + 5.0
                );
                let _ = writeln!(
                    svg,
                    r#"<text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">{label}</text>"#,
                    bottom + 18.0
                );
            }
        }
        for (v, label) in self.y.ticks() {
            if let Some(y) = self.py(v) {
                let _ = writeln!(
                    svg,
                    r#"<line x1="{:.2}" y1="{y:.2}" x2="{left:.2}" y2="{y:.2}" stroke="black"/>"#,
                    left - 5.0
                );
                let _ = writeln!(
                    svg,
                    r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{label}</text>"#,
                    left - 8.0,
                    y + 4.0
                );
            }
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">{}</text>"#,
            (left + right) / 2.0,
            PANEL_H - 15.0,
            escape(xlabel)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{0:.2}" y="{1:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 {0:.2} {1:.2})">{2}</text>"#,
            self.x0 + 16.0,
            (top + bottom) / 2.0,
            escape(ylabel)
        );
    }
}

fn polyline(svg: &mut String, pts: &[(f64, f64)], color: &str) {
    if pts.is_empty() {
        return;
    }
    let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let _ =
        writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, coords.join(" "));
}

fn legend(svg: &mut String, x0: f64, entries: &[(String, &str)]) {
    for (k, (label, color)) in entries.iter().enumerate() {
        let y = MARGIN / 2.0 + 16.0 + 16.0 * k as f64;
        let x = x0 + MARGIN + 10.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="3"/>"#,
            x + 18.0
        );
        let _ =
            writeln!(svg, r#"<text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#, x + 24.0, y + 4.0, escape(label));
    }
}

fn document(width: f64, body: &str) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width:.0}\" height=\"{PANEL_H:.0}\" viewBox=\"0 0 {width:.0} {PANEL_H:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

/// Blue at the first iteration to yellow at the last.
fn ramp(f: f64) -> String {
    let f = f.clamp(0.0, 1.0);
    let (r, g, b) = (68.0 + f * (253.0 - 68.0), 1.0 + f * (231.0 - 1.0), 84.0 + f * (37.0 - 84.0));
    format!("#{:02x}{:02x}{:02x}", r as u8, g as u8, b as u8)
}

/// Legend label for an input file: its stem (the run id for harness output).
pub fn run_label(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

/// |entry| against loss on a descending log axis, one curve per input, markers
/// coloured by iteration.
pub fn loss_vs_entry(inputs: &[&Path], column: &str) -> Result<String> {
    let mut runs = Vec::new();
    for &path in inputs {
        let t = Table::read(path)?;
        let loss = t.column("loss", path)?;
        let entry = t.column(column, path)?;
        let iter = t.column("iter", path)?;
        runs.push((run_label(path), loss, entry.into_iter().map(f64::abs).collect::<Vec<_>>(), iter));
    }
    let panel = Panel {
        x0: 0.0,
        x: Axis::fit(runs.iter().flat_map(|r| r.1.iter().copied()), true, true),
        y: Axis::fit(runs.iter().flat_map(|r| r.2.iter().copied()), false, false),
    };
    let mut svg = String::new();
    panel.axes(&mut svg, "loss", &format!("|{column}|"));
    let mut entries = Vec::new();
    for (k, (label, loss, entry, iter)) in runs.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<(f64, f64)> = loss.iter().zip(entry).filter_map(|(&l, &e)| panel.point(l, e)).collect();
        polyline(&mut svg, &pts, color);
        let last = iter.iter().copied().fold(0.0, f64::max).max(1.0);
        for ((&l, &e), &it) in loss.iter().zip(entry).zip(iter) {
            if let Some((x, y)) = panel.point(l, e) {
                let _ = writeln!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2" fill="{}"/>"#, ramp(it / last));
            }
        }
        entries.push((label.clone(), color));
    }
    legend(&mut svg, PANEL_W - 220.0, &entries);
    Ok(document(PANEL_W, &svg))
}

fn series_label(r: &SweepRow) -> String {
    match r.init_std {
        Some(s) => format!("{} init={s:e}", r.method),
        None => r.method.clone(),
    }
}

/// Median error and estimated rank against `n_obs`, with interquartile bars.
pub fn sweep(inputs: &[&Path]) -> Result<String> {
    let mut rows = Vec::new();
    for &path in inputs {
        rows.extend(read_rows(path)?);
    }
    let mut labels: Vec<String> = Vec::new();
    for r in rows.iter().filter(|r| r.row == "median") {
        let l = series_label(r);
        if !labels.contains(&l) {
            labels.push(l);
        }
    }
    let xs = || rows.iter().map(|r| r.n_obs as f64);
    let mut svg = String::new();
    let mut entries = Vec::new();
    for (p, (ylabel, value)) in [
        ("reconstruction error", (|r: &SweepRow| Some(r.recon_error)) as fn(&SweepRow) -> Option<f64>),
        ("estimated rank", |r: &SweepRow| r.est_rank),
    ]
    .into_iter()
    .enumerate()
    {
        let panel = Panel {
            x0: p as f64 * PANEL_W,
            x: Axis::fit(xs(), false, false),
            y: Axis::fit(rows.iter().filter_map(value), false, false),
        };
        panel.axes(&mut svg, "number of observations", ylabel);
        for (k, label) in labels.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let pick = |kind: &str| -> Vec<(usize, f64)> {
                let mut v: Vec<(usize, f64)> = rows
                    .iter()
                    .filter(|r| r.row == kind && &series_label(r) == label)
                    .filter_map(|r| value(r).map(|y| (r.n_obs, y)))
                    .collect();
                v.sort_by_key(|e| e.0);
                v
            };
            let med = pick("median");
            let pts: Vec<(f64, f64)> = med.iter().filter_map(|&(n, y)| panel.point(n as f64, y)).collect();
            polyline(&mut svg, &pts, color);
            for &(x, y) in &pts {
                let _ = writeln!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#);
            }
            for ((n, lo), (_, hi)) in pick("q25").into_iter().zip(pick("q75")) {
                if let (Some((x, y0)), Some((_, y1))) = (panel.point(n as f64, lo), panel.point(n as f64, hi)) {
                    let _ = writeln!(
                        svg,
                        r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{y1:.2}" stroke="{color}" stroke-width="1"/>"#
                    );
                }
            }
            if p == 0 {
                entries.push((label.clone(), color));
            }
        }
    }
    legend(&mut svg, PANEL_W - 220.0, &entries);
    Ok(document(2.0 * PANEL_W, &svg))
}

pub fn emit_plot(cfg: &PlotConfig) -> Result<()> {
    cfg.validate()?;
    let inputs: Vec<&Path> = cfg.inputs.iter().map(|p| p.as_path()).collect();
    let svg = match cfg.style {
        PlotStyle::LossVsEntry => loss_vs_entry(&inputs, cfg.column.as_deref().unwrap_or("w11"))?,
        PlotStyle::Sweep => sweep(&inputs)?,
    };
    if let Some(parent) = cfg.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    std::fs::write(&cfg.output, svg).map_err(io_err(&cfg.output))
}
