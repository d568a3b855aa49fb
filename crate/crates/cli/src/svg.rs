//! Static SVG plot of a trajectory: time series on the left, the
//! `(x1, x2)` phase plane on the right.

use std::fmt::Write as _;

use descr_switch::sim::Trajectory;

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const PANEL: f64 = 420.0;
const PAD: f64 = 40.0;

struct Frame {
    x0: f64,
    y0: f64,
    lo: (f64, f64),
    hi: (f64, f64),
}

impl Frame {
    fn new(x0: f64, lo: (f64, f64), hi: (f64, f64)) -> Self {
        let widen = |a: f64, b: f64| if b - a > 0.0 { (a, b) } else { (a - 1.0, b + 1.0) };
        let (xl, xh) = widen(lo.0, hi.0);
        let (yl, yh) = widen(lo.1, hi.1);
        Self {
            x0,
            y0: PAD,
            lo: (xl, yl),
            hi: (xh, yh),
        }
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let w = PANEL - 2.0 * PAD;
        (
            self.x0 + PAD + (x - self.lo.0) / (self.hi.0 - self.lo.0) * w,
            self.y0 + (self.hi.1 - y) / (self.hi.1 - self.lo.1) * w,
        )
    }

    fn axes(&self, out: &mut String, xlabel: &str, ylabel: &str) {
        let (l, t) = self.map(self.lo.0, self.hi.1);
        let (r, b) = self.map(self.hi.0, self.lo.1);
        let _ = writeln!(
            out,
            r##"<rect x="{l:.1}" y="{t:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#444"/>"##,
            r - l,
            b - t
        );
        let _ = writeln!(out, r#"<text x="{l:.1}" y="{:.1}">{:.3}</text>"#, b + 14.0, self.lo.0);
        let _ = writeln!(
            out,
            r#"<text x="{r:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#,
            b + 14.0,
            self.hi.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{b:.1}" text-anchor="end">{:.3}</text>"#,
            l - 4.0,
            self.lo.1
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#,
            l - 4.0,
            t + 10.0,
            self.hi.1
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{xlabel}</text>"#,
            (l + r) / 2.0,
            b + 28.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{ylabel}</text>"#,
            (l + r) / 2.0,
            t - 8.0
        );
    }

    fn polyline(&self, out: &mut String, pts: impl Iterator<Item = (f64, f64)>, color: &str) {
        let coords: Vec<String> = pts
            .map(|(x, y)| {
                let (px, py) = self.map(x, y);
                format!("{px:.2},{py:.2}")
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
            coords.join(" ")
        );
    }
}

fn bounds(values: impl Iterator<Item = (f64, f64)>) -> ((f64, f64), (f64, f64)) {
    values.fold(
        ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY)),
        |(lo, hi), (x, y)| ((lo.0.min(x), lo.1.min(y)), (hi.0.max(x), hi.1.max(y))),
    )
}

pub fn trajectory_svg(traj: &Trajectory) -> String {
    let n = traj.samples.first().map_or(0, |s| s.x.len());
    let panels = if n >= 2 { 2.0 } else { 1.0 };
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" font-family="sans-serif" font-size="11">"#,
        PANEL * panels,
        PANEL
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if n == 0 {
        out.push_str("</svg>\n");
        return out;
    }

    let (lo, hi) = bounds(traj.samples.iter().flat_map(|s| s.x.iter().map(move |v| (s.t, *v))));
    let series = Frame::new(0.0, lo, hi);
    for e in &traj.events {
        let (x, top) = series.map(e.t, series.hi.1);
        let (_, bottom) = series.map(e.t, series.lo.1);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{top:.2}" x2="{x:.2}" y2="{bottom:.2}" stroke="#bbb" stroke-dasharray="3,3"/>"##
        );
    }
    for k in 0..n {
        series.polyline(
            &mut out,
            traj.samples.iter().map(|s| (s.t, s.x[k])),
            COLORS[k % COLORS.len()],
        );
        let (lx, ly) = (PANEL - PAD - 30.0, PAD + 14.0 * (k as f64 + 1.0));
        let _ = writeln!(
            out,
            r#"<text x="{lx:.1}" y="{ly:.1}" fill="{}">x{}</text>"#,
            COLORS[k % COLORS.len()],
            k + 1
        );
    }
    series.axes(&mut out, "t", "state");

    if n >= 2 {
        let (lo, hi) = bounds(traj.samples.iter().map(|s| (s.x[0], s.x[1])));
        let phase = Frame::new(PANEL, lo, hi);
        phase.polyline(&mut out, traj.samples.iter().map(|s| (s.x[0], s.x[1])), COLORS[0]);
        for e in &traj.events {
            let (x, y) = phase.map(e.x_post[0], e.x_post[1]);
            let _ = writeln!(out, r##"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="#d62728"/>"##);
        }
        phase.axes(&mut out, "x1", "x2");
    }
    out.push_str("</svg>\n");
    out
}
