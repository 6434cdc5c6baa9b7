use std::fmt::Write as _;

use ustat_core::StepProcess;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 40.0;

/// Step path as a bare polyline with axes on a fixed 800x400 canvas.
pub fn step_path_svg(path: &StepProcess) -> String {
    let (lo, hi) = path
        .values
        .iter()
        .fold((0.0f64, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let x = |t: f64| MARGIN + t * (WIDTH - 2.0 * MARGIN);
    let y = |v: f64| HEIGHT - MARGIN - (v - lo) / span * (HEIGHT - 2.0 * MARGIN);
    let n = path.n as f64;

    let mut points = String::new();
    for (k, &v) in path.values.iter().enumerate() {
        let t0 = k as f64 / n;
        let t1 = ((k + 1) as f64 / n).min(1.0);
        let _ = write!(points, "{:.2},{:.2} {:.2},{:.2} ", x(t0), y(v), x(t1), y(v));
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}">"#
    );
    let _ = writeln!(
        out,
        r#"<line x1="{MARGIN}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#,
        y(0.0),
        WIDTH - MARGIN,
        y(0.0)
    );
    let _ = writeln!(
        out,
        r#"<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{:.2}" stroke="black"/>"#,
        HEIGHT - MARGIN
    );
    let _ = writeln!(
        out,
        r#"<polyline fill="none" stroke="steelblue" points="{}"/>"#,
        points.trim_end()
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canvas_and_points() {
        let p = StepProcess {
            n: 2,
            m: 1,
            values: vec![0.0, 1.0, -1.0],
        };
        let svg = step_path_svg(&p);
        assert!(svg.contains(r#"viewBox="0 0 800 400""#));
        assert!(svg.contains("<polyline"));
        // Two points per grid value.
        let pts = svg
            .split("points=\"")
            .nth(1)
            .unwrap()
            .split('"')
            .next()
            .unwrap();
        assert_eq!(pts.split(' ').count(), 6);
    }
}
