//! Dependency-free SVG charts of sweep results.
//!
//! A figure has up to two stacked panels sharing the x axis: mean quality
//! (dB) on top and success fraction below. Each series is one `<polyline>` per
//! panel, with a marker per point. Rows without successes break the
//! quality line, so a series may have more than one quality polyline.

use std::fmt::Write as _;

use thiserror::Error;

use crate::sweep::{SweepResult, SweepRow, SweptParam, CSV_HEADER};

#[derive(Debug, Error, PartialEq)]
pub enum PlotError {
    #[error("nothing to plot")]
    Empty,
    #[error("csv line {line}: {why}")]
    Csv { line: usize, why: String },
}

const W: f64 = 640.0;
const PANEL_H: f64 = 220.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const GAP: f64 = 50.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Which panels a figure draws.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Show {
    #[default]
    Both,
    Quality,
    Success,
}

/// One named line across the drawn panels.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub rows: Vec<SweepRow>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn nice_range(lo: f64, hi: f64) -> (f64, f64) {
    if (hi - lo).abs() < 1e-9 {
        (lo - 1.0, hi + 1.0)
    } else {
        let pad = (hi - lo) * 0.05;
        (lo - pad, hi + pad)
    }
}

struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    top: f64,
}

impl Axes {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        self.top + PANEL_H - (y - self.y0) / (self.y1 - self.y0) * PANEL_H
    }

    fn frame(&self, s: &mut String, y_label: &str, x_label: &str) {
        let right = W - RIGHT;
        let bottom = self.top + PANEL_H;
        writeln!(
            s,
            r##"<rect x="{LEFT}" y="{:.1}" width="{:.1}" height="{PANEL_H}" fill="none" stroke="#444"/>"##,
            self.top,
            right - LEFT
        )
        .unwrap();
        for i in 0..=4 {
            let f = f64::from(i) / 4.0;
            let yv = self.y0 + f * (self.y1 - self.y0);
            let xv = self.x0 + f * (self.x1 - self.x0);
            let (py, px) = (self.py(yv), self.px(xv));
            writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{py:.1}" x2="{right:.1}" y2="{py:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{}</text>"##,
                LEFT - 4.0,
                py + 3.0,
                fmt_tick(yv)
            )
            .unwrap();
            writeln!(
                s,
                r##"<text x="{px:.1}" y="{:.1}" font-size="10" text-anchor="middle">{}</text>"##,
                bottom + 14.0,
                fmt_tick(xv)
            )
            .unwrap();
        }
        writeln!(
            s,
            r##"<text x="14" y="{:.1}" font-size="11" transform="rotate(-90 14 {:.1})" text-anchor="middle">{}</text>"##,
            self.top + PANEL_H / 2.0,
            self.top + PANEL_H / 2.0,
            esc(y_label)
        )
        .unwrap();
        writeln!(
            s,
            r##"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"##,
            (LEFT + right) / 2.0,
            bottom + 30.0,
            esc(x_label)
        )
        .unwrap();
    }
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.round() {
        format!("{v:.0}")
    } else if v.abs() >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.2}")
    }
}

fn polyline(s: &mut String, pts: &[(f64, f64)], color: &str) {
    if pts.is_empty() {
        return;
    }
    let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    writeln!(
        s,
        r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
        coords.join(" ")
    )
    .unwrap();
    for (x, y) in pts {
        writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2" fill="{color}"/>"#).unwrap();
    }
}

/// Renders `series` as a chart with the panels selected by `show`.
pub fn plot_series(title: &str, swept: SweptParam, show: Show, series: &[Series]) -> Result<String, PlotError> {
    let rows = || series.iter().flat_map(|s| s.rows.iter());
    if rows().next().is_none() {
        return Err(PlotError::Empty);
    }
    let (xmin, xmax) = rows().fold((f64::MAX, f64::MIN), |(a, b), r| (a.min(r.value), b.max(r.value)));
    let qs: Vec<f64> = rows().filter_map(|r| r.mean_quality_db).collect();
    let (qmin, qmax) = if qs.is_empty() {
        (0.0, 1.0)
    } else {
        qs.iter().fold((f64::MAX, f64::MIN), |(a, b), &q| (a.min(q), b.max(q)))
    };
    let (x0, x1) = nice_range(xmin, xmax);
    let (q0, q1) = nice_range(qmin, qmax);
    let quality = Axes {
        x0,
        x1,
        y0: q0,
        y1: q1,
        top: TOP,
    };
    let show_q = show != Show::Success;
    let show_s = show != Show::Quality;
    let success = Axes {
        x0,
        x1,
        y0: -0.02,
        y1: 1.02,
        top: if show_q { TOP + PANEL_H + GAP } else { TOP },
    };
    let panels = if show_q && show_s { 2.0 } else { 1.0 };
    let height = TOP + panels * PANEL_H + (panels - 1.0) * GAP + 50.0;
    let x_label = match swept {
        SweptParam::Bits => "highest bit in error range [0,b]",
        SweptParam::Rate => "error rate",
    };

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{height}" viewBox="0 0 {W} {height}" font-family="sans-serif">"#
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="{:.1}" y="22" font-size="14" text-anchor="middle">{}</text>"#,
        W / 2.0,
        esc(title)
    )
    .unwrap();
    if show_q {
        quality.frame(&mut s, "mean quality (dB)", x_label);
    }
    if show_s {
        success.frame(&mut s, "success fraction", x_label);
    }

    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        writeln!(s, r#"<g data-series="{}">"#, esc(&ser.name)).unwrap();
        if show_q {
            let mut run = Vec::new();
            for r in &ser.rows {
                match r.mean_quality_db {
                    Some(q) => run.push((quality.px(r.value), quality.py(q))),
                    None => polyline(&mut s, &std::mem::take(&mut run), color),
                }
            }
            polyline(&mut s, &run, color);
        }
        if show_s {
            let pts: Vec<_> = ser.rows.iter().map(|r| (success.px(r.value), success.py(r.success_fraction))).collect();
            polyline(&mut s, &pts, color);
        }
        writeln!(s, "</g>").unwrap();
        let ly = TOP + 14.0 * i as f64;
        writeln!(
            s,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#,
            W - RIGHT + 10.0,
            W - RIGHT + 28.0,
            W - RIGHT + 32.0,
            ly + 4.0,
            esc(&ser.name)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Chart of one sweep result, titled with its kernel and target.
pub fn plot_svg(result: &SweepResult) -> Result<String, PlotError> {
    let title = format!("{} / {} : {} sweep", result.kernel, result.target, result.swept.name());
    plot_series(
        &title,
        result.swept,
        Show::Both,
        &[Series {
            name: result.target.to_string(),
            rows: result.rows.clone(),
        }],
    )
}

/// Reads rows back from a CSV written by
/// [`summarize_csv`](crate::sweep::summarize_csv).
pub fn read_csv(text: &str) -> Result<(SweptParam, Vec<SweepRow>), PlotError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => {
            return Err(PlotError::Csv {
                line: 1,
                why: "unexpected header".into(),
            })
        }
    }
    let mut swept = None;
    let mut rows = Vec::new();
    for (i, line) in lines {
        let err = |why: &str| PlotError::Csv {
            line: i + 1,
            why: why.to_string(),
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 11 {
            return Err(err("expected 11 fields"));
        }
        let p = match f[0] {
            "bits" => SweptParam::Bits,
            "rate" => SweptParam::Rate,
            _ => return Err(err("swept_param must be bits or rate")),
        };
        if *swept.get_or_insert(p) != p {
            return Err(err("mixed swept_param values"));
        }
        let value = match p {
            SweptParam::Rate => f[1].parse().map_err(|_| err("bad rate"))?,
            SweptParam::Bits => f[1]
                .rsplit('-')
                .next()
                .and_then(|h| h.parse().ok())
                .ok_or_else(|| err("bad bit range"))?,
        };
        let int = |s: &str| s.parse::<u32>().map_err(|_| err("bad count"));
        let float = |s: &str| s.parse::<f64>().map_err(|_| err("bad number"));
        let opt = |s: &str| if s.is_empty() { Ok(None) } else { float(s).map(Some) };
        rows.push(SweepRow {
            value,
            label: f[1].to_string(),
            trials: int(f[2])?,
            successes: int(f[3])?,
            success_fraction: float(f[4])?,
            mean_quality_db: opt(f[5])?,
            std_quality_db: opt(f[6])?,
            failures: crate::sweep::FailureCounts {
                invalid_code: int(f[7])?,
                index: int(f[8])?,
                stream: int(f[9])?,
                limit: int(f[10])?,
            },
        });
    }
    match swept {
        Some(p) => Ok((p, rows)),
        None => Err(PlotError::Empty),
    }
}
