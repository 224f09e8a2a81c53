//! Gantt charts of decoded traces, as fixed-width text or standalone SVG.
//!
//! All charts of one file share a time axis so a heuristic/ideal pair can be
//! compared by eye.

use crate::framework::{ScheduleTrace, Segment, SegmentKind};
use crate::rational::{self, Rat};
use crate::tracefile::TraceFileV1;
use num_traits::{ToPrimitive, Zero};
use std::fmt::Write;

pub const DEFAULT_WIDTH: usize = 60;

const PAINT_ORDER: [SegmentKind; 6] = [
    SegmentKind::Idle,
    SegmentKind::Wait,
    SegmentKind::Queued,
    SegmentKind::Block,
    SegmentKind::Switch,
    SegmentKind::Run,
];

pub fn glyph(k: SegmentKind) -> char {
    match k {
        SegmentKind::Run => '#',
        SegmentKind::Switch => '%',
        SegmentKind::Wait => '.',
        SegmentKind::Block => '=',
        SegmentKind::Queued => '~',
        SegmentKind::Idle => '_',
    }
}

fn color(k: SegmentKind) -> &'static str {
    match k {
        SegmentKind::Run => "#4c78a8",
        SegmentKind::Switch => "#f58518",
        SegmentKind::Wait => "#d9d9d9",
        SegmentKind::Block => "#e45756",
        SegmentKind::Queued => "#eeca3b",
        SegmentKind::Idle => "#ffffff",
    }
}

fn kind_name(k: SegmentKind) -> &'static str {
    match k {
        SegmentKind::Run => "run",
        SegmentKind::Switch => "switch",
        SegmentKind::Wait => "wait",
        SegmentKind::Block => "block",
        SegmentKind::Queued => "queued",
        SegmentKind::Idle => "idle",
    }
}

/// `T10` after `T9`: compare the alphabetic prefix, then the number.
fn row_key(row: &str) -> (String, u64, String) {
    let cut = row.find(|c: char| c.is_ascii_digit()).unwrap_or(row.len());
    let digits: String = row[cut..].chars().take_while(|c| c.is_ascii_digit()).collect();
    let rest = row[cut + digits.len()..].to_string();
    (row[..cut].to_string(), digits.parse().unwrap_or(0), rest)
}

/// Rows of a chart in natural order.
pub fn rows(chart: &ScheduleTrace) -> Vec<String> {
    let mut rows: Vec<String> = Vec::new();
    for s in &chart.segments {
        if !rows.contains(&s.row) {
            rows.push(s.row.clone());
        }
    }
    rows.sort_by_key(|r| row_key(r));
    rows
}

fn chart_end(chart: &ScheduleTrace) -> Rat {
    let seg = chart.segments.iter().map(|s| s.end.clone()).max();
    let step = chart.final_time().cloned();
    seg.into_iter().chain(step).max().unwrap_or_else(Rat::zero)
}

fn horizon(charts: &[&ScheduleTrace]) -> Rat {
    let t = charts.iter().map(|c| chart_end(c)).max().unwrap_or_else(Rat::zero);
    if t > Rat::zero() {
        t
    } else {
        rational::int(1)
    }
}

fn charts_of(file: &TraceFileV1) -> Vec<ScheduleTrace> {
    if !file.charts.is_empty() {
        return file.charts.clone();
    }
    // A file holding only steps still gets a (blank) chart with axes.
    vec![ScheduleTrace {
        model: file.model.clone(),
        label: "trace".into(),
        verdict: file.verdict.clone(),
        params: file.params.clone(),
        steps: file.steps.clone(),
        segments: Vec::new(),
        workload: Default::default(),
        assignment: Default::default(),
    }]
}

fn short(r: &Rat) -> String {
    rational::to_decimal(r, 3)
}

fn header(file: &TraceFileV1) -> String {
    let mut h = format!("{} {}  verdict={}", file.model, file.query, file.verdict);
    if let Some(b) = &file.bound {
        let _ = write!(h, "  bound={} (~{})", rational::to_exact(b), short(b));
    }
    h
}

fn column(t: &Rat, width: usize, total: &Rat, ceil: bool) -> usize {
    let x = t * rational::int(width as i64) / total;
    let x = if ceil { x.ceil() } else { x.floor() };
    x.to_integer().to_usize().unwrap_or(0).min(width)
}

fn paint_row(segs: &[&Segment], width: usize, total: &Rat) -> String {
    let mut cells = vec![' '; width];
    for kind in PAINT_ORDER {
        for s in segs.iter().filter(|s| s.kind == kind) {
            let a = column(&s.start, width, total, false);
            let mut b = column(&s.end, width, total, true);
            if b <= a && s.end > s.start && a < width {
                b = a + 1;
            }
            for c in cells.iter_mut().take(b).skip(a) {
                *c = glyph(kind);
            }
        }
    }
    cells.into_iter().collect()
}

/// Fixed-width text chart: one line per row, `width` columns of time.
pub fn render_ascii(file: &TraceFileV1, width: usize) -> String {
    let width = width.max(10);
    let charts = charts_of(file);
    let refs: Vec<&ScheduleTrace> = charts.iter().collect();
    let total = horizon(&refs);
    let pad = charts
        .iter()
        .flat_map(rows)
        .map(|r| r.chars().count())
        .max()
        .unwrap_or(0)
        .max(4);
    let mut out = String::new();
    let _ = writeln!(out, "{}", header(file));
    for chart in &charts {
        let _ = writeln!(out);
        let _ = writeln!(out, "== {} (ends at {}) ==", chart.label, short(&chart_end(chart)));
        for row in rows(chart) {
            let segs: Vec<&Segment> = chart.segments.iter().filter(|s| s.row == row).collect();
            let _ = writeln!(out, "{row:>pad$} |{}|", paint_row(&segs, width, &total));
        }
        let _ = writeln!(out, "{:>pad$} +{}+", "", "-".repeat(width));
        let right = short(&total);
        let gap = (width + 1).saturating_sub(right.len());
        let _ = writeln!(out, "{:>pad$}  0{}{}", "", " ".repeat(gap.saturating_sub(1)), right);
    }
    let _ = writeln!(out);
    let legend: Vec<String> =
        [SegmentKind::Run, SegmentKind::Switch, SegmentKind::Wait, SegmentKind::Block, SegmentKind::Queued, SegmentKind::Idle]
            .iter()
            .map(|k| format!("{} {}", glyph(*k), kind_name(*k)))
            .collect();
    let _ = writeln!(out, "legend: {}", legend.join("  "));
    out
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const LEFT: f64 = 70.0;
const PLOT_W: f64 = 640.0;
const ROW_H: f64 = 22.0;
const TITLE_H: f64 = 26.0;
const AXIS_H: f64 = 30.0;
const TICKS: i64 = 5;

/// Standalone SVG document with one stacked chart per trace copy.
pub fn render_svg(file: &TraceFileV1) -> String {
    let charts = charts_of(file);
    let refs: Vec<&ScheduleTrace> = charts.iter().collect();
    let total = horizon(&refs);
    let x_of = |t: &Rat| LEFT + PLOT_W * rational::to_f64(&(t / &total));

    let mut body = String::new();
    let mut y = 30.0;
    for chart in &charts {
        let rows = rows(chart);
        let _ = writeln!(
            body,
            r#"<text x="{LEFT:.2}" y="{:.2}" class="title">{} (ends at {})</text>"#,
            y + 16.0,
            esc(&chart.label),
            esc(&short(&chart_end(chart)))
        );
        y += TITLE_H;
        let top = y;
        for (r, row) in rows.iter().enumerate() {
            let ry = top + r as f64 * ROW_H;
            let _ = writeln!(body, r#"<text x="{:.2}" y="{:.2}" class="row">{}</text>"#, LEFT - 6.0, ry + 15.0, esc(row));
            for kind in PAINT_ORDER {
                for s in chart.segments.iter().filter(|s| &s.row == row && s.kind == kind) {
                    let x0 = x_of(&s.start);
                    let w = (x_of(&s.end) - x0).max(0.5);
                    let _ = writeln!(
                        body,
                        r##"<rect x="{x0:.2}" y="{:.2}" width="{w:.2}" height="{:.2}" fill="{}" stroke="#333" stroke-width="0.5"><title>{} {} [{}, {}]</title></rect>"##,
                        ry + 2.0,
                        ROW_H - 4.0,
                        color(kind),
                        kind_name(kind),
                        esc(&s.label),
                        rational::to_exact(&s.start),
                        rational::to_exact(&s.end)
                    );
                    if kind == SegmentKind::Run && !s.label.is_empty() && w > 7.0 * s.label.len() as f64 {
                        let _ = writeln!(
                            body,
                            r#"<text x="{:.2}" y="{:.2}" class="bar">{}</text>"#,
                            x0 + w / 2.0,
                            ry + 15.0,
                            esc(&s.label)
                        );
                    }
                }
            }
        }
        let axis_y = top + rows.len() as f64 * ROW_H + 4.0;
        let _ = writeln!(
            body,
            r##"<line x1="{LEFT:.2}" y1="{axis_y:.2}" x2="{:.2}" y2="{axis_y:.2}" stroke="#000"/>"##,
            LEFT + PLOT_W
        );
        let _ = writeln!(
            body,
            r##"<line x1="{LEFT:.2}" y1="{top:.2}" x2="{LEFT:.2}" y2="{axis_y:.2}" stroke="#000"/>"##
        );
        for i in 0..=TICKS {
            let t = &total * rational::ratio(i, TICKS);
            let x = x_of(&t);
            let _ = writeln!(
                body,
                r##"<line x1="{x:.2}" y1="{axis_y:.2}" x2="{x:.2}" y2="{:.2}" stroke="#000"/><text x="{x:.2}" y="{:.2}" class="tick">{}</text>"##,
                axis_y + 4.0,
                axis_y + 16.0,
                esc(&short(&t))
            );
        }
        y = axis_y + AXIS_H;
    }
    let mut lx = LEFT;
    for kind in [SegmentKind::Run, SegmentKind::Switch, SegmentKind::Wait, SegmentKind::Block, SegmentKind::Queued] {
        let _ = writeln!(
            body,
            r##"<rect x="{lx:.2}" y="{:.2}" width="12" height="12" fill="{}" stroke="#333" stroke-width="0.5"/><text x="{:.2}" y="{:.2}" class="legend">{}</text>"##,
            y,
            color(kind),
            lx + 16.0,
            y + 10.0,
            kind_name(kind)
        );
        lx += 90.0;
    }
    let height = y + 24.0;
    let width = LEFT + PLOT_W + 30.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(
        out,
        "<style>text{{font-family:monospace;font-size:11px}}.title{{font-weight:bold;font-size:12px}}.row{{text-anchor:end}}.tick,.bar{{text-anchor:middle}}.bar{{fill:#fff}}</style>"
    );
    let _ = writeln!(out, r#"<text x="8" y="16" class="title">{}</text>"#, esc(&header(file)));
    out.push_str(&body);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn seg(row: &str, a: Rat, b: Rat, kind: SegmentKind) -> Segment {
        Segment { row: row.into(), start: a, end: b, kind, label: "x".into() }
    }

    fn chart(label: &str, segments: Vec<Segment>) -> ScheduleTrace {
        ScheduleTrace {
            model: "m".into(),
            label: label.into(),
            verdict: "sat".into(),
            params: serde_json::json!({}),
            steps: vec![],
            segments,
            workload: Default::default(),
            assignment: Default::default(),
        }
    }

    #[test]
    fn rows_sort_naturally() {
        let c = chart("h", vec![seg("T10", int(0), int(1), SegmentKind::Run), seg("T2", int(0), int(1), SegmentKind::Run)]);
        assert_eq!(rows(&c), vec!["T2", "T10"]);
    }

    #[test]
    fn columns_follow_time() {
        let f = TraceFileV1::new(
            "m",
            "q",
            serde_json::json!({}),
            "sat",
            None,
            vec![chart(
                "heuristic",
                vec![seg("P0", int(0), int(1), SegmentKind::Wait), seg("P0", int(1), int(2), SegmentKind::Run)],
            )],
        );
        let text = render_ascii(&f, 10);
        assert!(text.contains("P0 |.....#####|"), "{text}");
    }

    #[test]
    fn tiny_segments_stay_visible() {
        let row = paint_row(&[&seg("P0", ratio(1, 1000), ratio(2, 1000), SegmentKind::Block)], 10, &int(1));
        assert_eq!(row, "=         ");
    }

    #[test]
    fn empty_file_has_axes() {
        let f = TraceFileV1::new("m", "q", serde_json::json!({}), "unsat", None, vec![]);
        let text = render_ascii(&f, 20);
        assert!(text.contains(&format!("+{}+", "-".repeat(20))));
        let svg = render_svg(&f);
        assert!(svg.starts_with("<svg") && svg.contains("<line"));
    }
}
