//! Static SVG line plots. Output depends only on the input numbers.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy)]
struct Axis {
    log: bool,
    lo: f64,
    hi: f64,
}

impl Axis {
    fn fit(values: &[f64]) -> Axis {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(lo.is_finite() && hi.is_finite()) {
            return Axis { log: false, lo: 0.0, hi: 1.0 };
        }
        if lo > 0.0 && hi / lo > 30.0 {
            return Axis {
                log: true,
                lo: lo.log10().floor(),
                hi: hi.log10().ceil().max(lo.log10().floor() + 1.0),
            };
        }
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        let step = nice_step((hi - lo) / 5.0);
        Axis {
            log: false,
            lo: (lo / step).floor() * step,
            hi: (hi / step).ceil() * step,
        }
    }

    fn unit(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let span = (self.hi - self.lo) as i64;
            let stride = (span / 8 + 1).max(1);
            (0..=span)
                .step_by(stride as usize)
                .map(|k| {
                    let e = self.lo as i64 + k;
                    (k as f64 / span as f64, format!("1e{e}"))
                })
                .collect()
        } else {
            let step = nice_step((self.hi - self.lo) / 5.0);
            let n = ((self.hi - self.lo) / step).round() as i64;
            (0..=n)
                .map(|k| {
                    let v = self.lo + k as f64 * step;
                    (k as f64 / n as f64, tick_label(v, step))
                })
                .collect()
        }
    }
}

fn nice_step(raw: f64) -> f64 {
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let m = if f <= 1.0 {
        1.0
    } else if f <= 2.0 {
        2.0
    } else if f <= 5.0 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn tick_label(v: f64, step: f64) -> String {
    let digits = (-step.log10().floor()).max(0.0) as usize;
    let v = if v.abs() < step * 1e-9 { 0.0 } else { v };
    format!("{v:.digits$}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line plot of every series; an axis is logarithmic when all its values
/// are positive and span more than a factor 30.
pub fn line_plot(title: &str, x_label: &str, series: &[Series]) -> String {
    let usable = |x: f64, y: f64| x.is_finite() && y.is_finite();
    let xs: Vec<f64> = series.iter().flat_map(|s| s.points.iter().filter(|p| usable(p.0, p.1)).map(|p| p.0)).collect();
    let ys: Vec<f64> = series.iter().flat_map(|s| s.points.iter().filter(|p| usable(p.0, p.1)).map(|p| p.1)).collect();
    let (ax, ay) = (Axis::fit(&xs), Axis::fit(&ys));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + ax.unit(x) * pw;
    let py = |y: f64| TOP + (1.0 - ay.unit(y)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#
    );
    for (f, label) in ax.ticks() {
        let x = LEFT + f * pw;
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#dddddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{label}</text>"##,
            TOP + ph,
            TOP + ph + 16.0
        );
    }
    for (f, label) in ay.ticks() {
        let y = TOP + (1.0 - f) * ph;
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .filter(|p| usable(p.0, p.1) && (!ax.log || p.0 > 0.0) && (!ay.log || p.1 > 0.0))
            .map(|p| format!("{:.2},{:.2}", px(p.0), py(p.1)))
            .collect();
        if pts.len() > 1 {
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
        }
        if pts.len() <= 64 {
            for p in &pts {
                let (x, y) = p.split_once(',').unwrap();
                let _ = writeln!(s, r#"<circle cx="{x}" cy="{y}" r="2.5" fill="{color}"/>"#);
            }
        }
        let ly = TOP + 14.0 + 16.0 * k as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{ly:.2}">{}</text>"#,
            ly - 4.0,
            lx + 18.0,
            ly - 4.0,
            lx + 24.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Series for a CSV table: the first column against each other column, or,
/// when a `p` column is present, the last column split by `p`.
pub fn table_series(columns: &[String], rows: &[Vec<f64>]) -> Vec<Series> {
    if let Some(pj) = columns.iter().position(|c| c == "p") {
        let last = columns.len() - 1;
        let mut groups: Vec<(f64, Vec<(f64, f64)>)> = Vec::new();
        for r in rows {
            let key = r[pj];
            match groups.iter_mut().find(|g| g.0.to_bits() == key.to_bits()) {
                Some(g) => g.1.push((r[0], r[last])),
                None => groups.push((key, vec![(r[0], r[last])])),
            }
        }
        return groups
            .into_iter()
            .map(|(p, points)| Series {
                label: format!("{} (p = {p})", columns[last]),
                points,
            })
            .collect();
    }
    (1..columns.len())
        .map(|j| Series {
            label: columns[j].clone(),
            points: rows.iter().map(|r| (r[0], r[j])).collect(),
        })
        .filter(|s| s.points.iter().any(|p| p.1.is_finite()))
        .collect()
}

/// One series per saved time of a one-dimensional trajectory table.
pub fn trajectory_series(columns: &[String], rows: &[Vec<f64>]) -> Option<Vec<Series>> {
    if columns != ["t", "x", "u"] {
        return None;
    }
    let mut out: Vec<Series> = Vec::new();
    for r in rows {
        let label = format!("t = {}", r[0]);
        match out.last_mut() {
            Some(s) if s.label == label => s.points.push((r[1], r[2])),
            _ => out.push(Series {
                label,
                points: vec![(r[1], r[2])],
            }),
        }
    }
    Some(out)
}
