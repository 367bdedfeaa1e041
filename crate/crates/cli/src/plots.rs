//! Figures written next to solve, analyze and report artifacts.

use djwave::analysis::{find_inflection_points, AnalysisReport, DisplacementProfile};
use djwave::fields::{Streamline, VelocityField};

use crate::svg::{render, Panel, Series};

/// Rows shown in multi-streamline plots: quarter, half, three quarters and the surface.
pub fn selected_levels(np: usize) -> Vec<usize> {
    let mut v = vec![np / 4, np / 2, 3 * np / 4, np - 1];
    v.dedup();
    v.retain(|&j| j > 0);
    v
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let k = xs.partition_point(|&t| t < x).clamp(1, xs.len() - 1);
    let t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    ys[k - 1] + t * (ys[k] - ys[k - 1])
}

fn pairs(x: &[f64], y: &[f64]) -> Vec<(f64, f64)> {
    x.iter().copied().zip(y.iter().copied()).collect()
}

/// Free surface `eta(x)` with detected inflection points circled.
pub fn surface_profile(vf: &VelocityField, surface: &Streamline) -> String {
    let eta = vf.eta();
    let mut panel = Panel::new("free surface", "x", "eta")
        .with(Series::line("eta", pairs(&surface.x, &eta)))
        .zero_line();
    if let Ok(infl) = find_inflection_points(surface) {
        let marks = infl
            .positions
            .iter()
            .map(|&x| (x, interp(&surface.x, &eta, x)))
            .collect();
        panel = panel.with(Series::markers(format!("inflections ({})", infl.count), marks));
    }
    render(&[panel])
}

/// `v` along the selected streamlines.
pub fn v_along_streamlines(sls: &[Streamline]) -> String {
    let np = sls.len();
    let mut panel = Panel::new("vertical velocity along streamlines", "x", "v").zero_line();
    for j in selected_levels(np) {
        let s = &sls[j];
        panel = panel.with(Series::line(format!("p = {:.4}", s.p), pairs(&s.x, &s.v)));
    }
    render(&[panel])
}

/// Crest-to-trough height of each streamline against its mean elevation.
pub fn height_vs_depth(profile: &[DisplacementProfile]) -> String {
    let pts = profile.iter().map(|d| (d.mean_y, d.displacement)).collect();
    render(&[Panel::new("streamline height vs mean elevation", "mean y", "y(0) - y(pi)")
        .with(Series::line("H", pts))
        .zero_line()])
}

/// Stacked `y`, `v`, `y_xx` for one streamline, inflections marked on each.
pub fn triptych(sl: &Streamline) -> String {
    let infl = find_inflection_points(sl).map(|s| s.positions).unwrap_or_default();
    let marks = |ys: &[f64]| Series::markers("inflection", infl.iter().map(|&x| (x, interp(&sl.x, ys, x))).collect());
    let title = |what: &str| format!("{what} on p = {:.4}", sl.p);
    render(&[
        Panel::new(title("streamline"), "x", "y")
            .with(Series::line("y", pairs(&sl.x, &sl.y)))
            .with(marks(&sl.y)),
        Panel::new(title("vertical velocity"), "x", "v")
            .with(Series::line("v", pairs(&sl.x, &sl.v)))
            .with(marks(&sl.v))
            .zero_line(),
        Panel::new(title("curvature"), "x", "y_xx")
            .with(Series::line("y_xx", pairs(&sl.x, &sl.y_xx)))
            .with(marks(&sl.y_xx))
            .zero_line(),
    ])
}

/// Figures reproducible from a stored report alone.
pub fn report_figures(report: &AnalysisReport) -> Vec<(String, String)> {
    let mut out = vec![("height_vs_depth.svg".to_string(), height_vs_depth(&report.displacement))];
    let pts: Vec<(f64, f64)> = report
        .inflections
        .iter()
        .flat_map(|s| s.positions.iter().map(move |&x| (x, s.p)))
        .collect();
    out.push((
        "inflections.svg".to_string(),
        render(&[Panel::new("inflection points by streamline", "x", "p").with(Series::markers("x0(p)", pts))]),
    ));
    out
}
