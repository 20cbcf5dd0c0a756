//! Deterministic CSV and self-contained SVG emitters.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::harness::sweep::SweepResult;

/// One row per `(SNR point, user)`, users numbered from 1:
/// `snr_db, user, mean_rate, stderr, degenerate_fraction`.
pub fn render_csv(result: &SweepResult) -> String {
    let mut out = String::from("snr_db,user,mean_rate,stderr,degenerate_fraction\n");
    for (pi, pt) in result.points.iter().enumerate() {
        for (u, rate) in pt.per_user_rate.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                pt.p_db,
                u + 1,
                rate,
                result.stderr[pi][u],
                result.degenerate_fraction[pi]
            );
        }
    }
    out
}

pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<()> {
    std::fs::write(path, render_csv(result))?;
    Ok(())
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 520.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 130.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 60.0;

fn fmt_coord(x: f64) -> String {
    format!("{:.2}", x)
}

/// Line chart of average rate per user versus SNR; no external assets.
pub fn render_svg(result: &SweepResult) -> String {
    let users = result
        .points
        .first()
        .map(|p| p.per_user_rate.len())
        .unwrap_or(0);
    let (x_min, x_max) = match (result.points.first(), result.points.last()) {
        (Some(a), Some(b)) if a.p_db < b.p_db => (a.p_db, b.p_db),
        (Some(a), _) => (a.p_db - 1.0, a.p_db + 1.0),
        _ => (0.0, 1.0),
    };
    let y_max = result
        .points
        .iter()
        .flat_map(|p| p.per_user_rate.iter())
        .fold(1.0f64, |m, &r| m.max(r))
        * 1.05;

    let px = |db: f64| MARGIN_L + (db - x_min) / (x_max - x_min) * (WIDTH - MARGIN_L - MARGIN_R);
    let py = |rate: f64| HEIGHT - MARGIN_B - rate / y_max * (HEIGHT - MARGIN_T - MARGIN_B);

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(s, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    // Axes.
    let _ = writeln!(
        s,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        fmt_coord(MARGIN_L),
        fmt_coord(HEIGHT - MARGIN_B),
        fmt_coord(WIDTH - MARGIN_R),
        fmt_coord(HEIGHT - MARGIN_B)
    );
    let _ = writeln!(
        s,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        fmt_coord(MARGIN_L),
        fmt_coord(MARGIN_T),
        fmt_coord(MARGIN_L),
        fmt_coord(HEIGHT - MARGIN_B)
    );
    // X ticks at the sweep points.
    for pt in &result.points {
        let x = px(pt.p_db);
        let _ = writeln!(
            s,
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>",
            fmt_coord(x),
            fmt_coord(HEIGHT - MARGIN_B),
            fmt_coord(HEIGHT - MARGIN_B + 5.0)
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
            fmt_coord(x),
            fmt_coord(HEIGHT - MARGIN_B + 20.0),
            pt.p_db
        );
    }
    // Y ticks: five evenly spaced.
    for t in 0..=5 {
        let rate = y_max * t as f64 / 5.0;
        let y = py(rate);
        let _ = writeln!(
            s,
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>",
            fmt_coord(MARGIN_L - 5.0),
            fmt_coord(y),
            fmt_coord(MARGIN_L)
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\">{:.1}</text>",
            fmt_coord(MARGIN_L - 9.0),
            fmt_coord(y + 4.0),
            rate
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\">SNR (dB)</text>",
        fmt_coord((MARGIN_L + WIDTH - MARGIN_R) / 2.0),
        fmt_coord(HEIGHT - 15.0)
    );
    let _ = writeln!(
        s,
        "<text x=\"18\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">average rate (bits/channel use)</text>",
        fmt_coord(HEIGHT / 2.0),
        fmt_coord(HEIGHT / 2.0)
    );
    // One polyline per user, plus legend entries.
    for u in 0..users {
        let color = PALETTE[u % PALETTE.len()];
        let pts: Vec<String> = result
            .points
            .iter()
            .map(|p| format!("{},{}", fmt_coord(px(p.p_db)), fmt_coord(py(p.per_user_rate[u]))))
            .collect();
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>",
            color,
            pts.join(" ")
        );
        let ly = MARGIN_T + 20.0 * u as f64 + 10.0;
        let _ = writeln!(
            s,
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{3}\" stroke-width=\"2\"/>",
            fmt_coord(WIDTH - MARGIN_R + 10.0),
            fmt_coord(ly),
            fmt_coord(WIDTH - MARGIN_R + 40.0),
            color
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" font-size=\"13\">user {}</text>",
            fmt_coord(WIDTH - MARGIN_R + 46.0),
            fmt_coord(ly + 4.0),
            u + 1
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn emit_svg(result: &SweepResult, path: &Path) -> Result<()> {
    std::fs::write(path, render_svg(result))?;
    Ok(())
}
