//! Closed-form least squares and parabolic-geometry helpers shared by the
//! diagnostic modules. No iterative fitting anywhere: slopes come from the
//! normal equations of a straight line.

/// Result of a straight-line least squares fit `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub rms_residual: f64,
}

/// Least squares line through `(xs[i], ys[i])`.
///
/// Panics if fewer than two points are given or the abscissae are all equal.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    assert!(xs.len() == ys.len() && xs.len() >= 2, "need >= 2 points");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    assert!(sxx > 0.0, "degenerate abscissae");
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let r = y - (slope * x + intercept);
        ss += r * r;
    }
    LineFit { slope, intercept, rms_residual: (ss / n).sqrt() }
}

/// Log-log fit of `values ~ C * r^alpha`; both inputs must be positive.
pub fn fit_loglog(radii: &[f64], values: &[f64]) -> LineFit {
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    fit_line(&xs, &ys)
}

/// Parabolic distance `(|x - x0|^2 + |t - t0|)^{1/2}`.
pub fn parabolic_distance(x: &[f64], t: f64, x0: &[f64], t0: f64) -> f64 {
    let mut d2 = (t - t0).abs();
    for (a, b) in x.iter().zip(x0) {
        d2 += (a - b) * (a - b);
    }
    d2.sqrt()
}

/// Largest ratio `|f(i+1) - f(i)| / (|dx''|^2 + dt)^{1/2}` over consecutive
/// samples of a graph; used both for fitted graphs and prescribed paths so
/// the two are comparable.
pub fn parabolic_lipschitz_neighbors(values: &[f64], dt: f64) -> f64 {
    let mut worst = 0.0f64;
    for w in values.windows(2) {
        worst = worst.max((w[1] - w[0]).abs() / dt.sqrt());
    }
    worst
}
