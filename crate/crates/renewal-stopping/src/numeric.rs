//! Small numerical kernels shared across the crate.

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
///
/// Newton iteration on the Legendre polynomial; accurate to machine
/// precision for the rule sizes used here (n <= 128).
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "quadrature rule needs at least one node");
    let mut rule = Vec::with_capacity(n);
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess for the i-th positive root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n and P_n' by the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.push((-x, w));
    }
    // Mirror to the positive half; the middle node of odd rules is x = 0.
    for i in (0..m).rev() {
        let (x, w) = rule[i];
        if x < 0.0 {
            rule.push((-x, w));
        }
    }
    rule.truncate(n);
    rule
}

/// Offsets of the two-point Gauss-Legendre nodes inside a unit subinterval.
///
/// Used by the cumulative sweep integrators: each uniform subinterval is
/// integrated with the two interior nodes, which keeps endpoint-singular
/// integrands (hazards, one-sided slopes) out of the rule and integrates
/// cubics exactly per step.
pub const GAUSS2_OFFSETS: [f64; 2] = [
    0.5 - 0.288_675_134_594_812_87, // (1 - 1/sqrt(3)) / 2
    0.5 + 0.288_675_134_594_812_87,
];

/// Order-independent pairwise summation.
///
/// The reduction tree depends only on the slice length, so parallel and
/// serial producers of the same values reduce to bit-identical sums.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean and standard error via pairwise summation.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}
