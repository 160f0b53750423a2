//! Self-contained SVG scatter plots of 2-D embeddings, colored by a scalar
//! (conventionally the first intrinsic coordinate) through a fixed
//! viridis-like ramp.

use ndarray::ArrayView2;

// Anchor colors of the ramp, low to high.
const RAMP: [(u8, u8, u8); 5] = [
    (68, 1, 84),
    (59, 82, 139),
    (33, 145, 140),
    (94, 201, 98),
    (253, 231, 37),
];

fn ramp_color(t: f64) -> (u8, u8, u8) {
    let t = t.clamp(0.0, 1.0) * (RAMP.len() - 1) as f64;
    let i = (t.floor() as usize).min(RAMP.len() - 2);
    let frac = t - i as f64;
    let (r0, g0, b0) = RAMP[i];
    let (r1, g1, b1) = RAMP[i + 1];
    let lerp = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * frac).round() as u8;
    (lerp(r0, r1), lerp(g0, g1), lerp(b0, b1))
}

/// Render the first two columns of `points` as an SVG scatter plot.
///
/// `color_by` supplies one scalar per point (mapped onto the ramp); pass an
/// empty slice for uniform coloring. The output is a complete standalone
/// SVG document.
pub fn scatter_svg(points: ArrayView2<'_, f64>, color_by: &[f64], title: &str) -> String {
    let n = points.nrows();
    let (width, height) = (640.0, 560.0);
    let margin = 48.0;

    let mut min_x = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for i in 0..n {
        min_x = min_x.min(points[[i, 0]]);
        max_x = max_x.max(points[[i, 0]]);
        let y = if points.ncols() > 1 { points[[i, 1]] } else { 0.0 };
        min_y = min_y.min(y);
        max_y = max_y.max(y);
    }
    let span_x = (max_x - min_x).max(1e-12);
    let span_y = (max_y - min_y).max(1e-12);

    let (mut c_min, mut c_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &c in color_by {
        c_min = c_min.min(c);
        c_max = c_max.max(c);
    }
    let c_span = (c_max - c_min).max(1e-12);

    let mut svg = String::with_capacity(256 + 64 * n);
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"28\" font-family=\"sans-serif\" font-size=\"16\" \
         text-anchor=\"middle\">{}</text>\n",
        width / 2.0,
        escape_xml(title)
    ));
    svg.push_str(&format!(
        "<rect x=\"{margin}\" y=\"{margin}\" width=\"{}\" height=\"{}\" fill=\"none\" \
         stroke=\"#888\" stroke-width=\"1\"/>\n",
        width - 2.0 * margin,
        height - 2.0 * margin
    ));
    for i in 0..n {
        let px = margin + (points[[i, 0]] - min_x) / span_x * (width - 2.0 * margin);
        let py_val = if points.ncols() > 1 { points[[i, 1]] } else { 0.0 };
        // SVG y grows downward.
        let py = height - margin - (py_val - min_y) / span_y * (height - 2.0 * margin);
        let (r, g, b) = if color_by.is_empty() {
            RAMP[2]
        } else {
            ramp_color((color_by[i] - c_min) / c_span)
        };
        svg.push_str(&format!(
            "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"3\" fill=\"rgb({r},{g},{b})\" \
             fill-opacity=\"0.8\"/>\n"
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn produces_wellformed_standalone_svg() {
        let pts = array![[0.0, 0.0], [1.0, 2.0], [-1.0, 0.5]];
        let svg = scatter_svg(pts.view(), &[0.0, 0.5, 1.0], "test < plot");
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.contains("test &lt; plot"));
    }

    #[test]
    fn ramp_endpoints_match_anchors() {
        assert_eq!(ramp_color(0.0), RAMP[0]);
        assert_eq!(ramp_color(1.0), RAMP[4]);
    }

    #[test]
    fn deterministic_output() {
        let pts = array![[0.0, 1.0], [2.0, 3.0]];
        let a = scatter_svg(pts.view(), &[0.1, 0.9], "t");
        let b = scatter_svg(pts.view(), &[0.1, 0.9], "t");
        assert_eq!(a, b);
    }
}
