//! Composite Gauss–Legendre quadrature with user-supplied breakpoints.
//!
//! Spectral integrands in this crate are smooth except at band edges, so the
//! integration range is split at every known discontinuity and each piece
//! receives a share of the panels proportional to its length.

use std::sync::OnceLock;

/// Number of nodes per Gauss–Legendre panel.
pub const PANEL_ORDER: usize = 16;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes an `order`-point rule by Newton iteration on `P_order`.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be positive");
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let n = order as f64;
        for i in 0..order.div_ceil(2) {
            // Tricomi initial guess for the i-th largest root.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(order, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(order, x);
            if d.is_finite() {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            weights[i] = w;
            nodes[order - 1 - i] = x;
            weights[order - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Integrates `f` over `[a, b]` with a single panel.
    pub fn panel<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, f: &mut F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

fn legendre_with_derivative(order: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=order {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if order == 0 {
        return (1.0, 0.0);
    }
    let n = order as f64;
    let d = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn default_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(PANEL_ORDER))
}

/// Integrates `f` over `[a, b]` using about `points` evaluation points,
/// splitting additionally at every breakpoint that falls strictly inside.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    points: usize,
) -> f64 {
    if b <= a {
        return 0.0;
    }
    let rule = default_rule();
    let mut cuts: Vec<f64> = Vec::with_capacity(breakpoints.len() + 2);
    cuts.push(a);
    cuts.extend(breakpoints.iter().copied().filter(|&x| x > a && x < b));
    cuts.push(b);
    cuts.sort_by(|x, y| x.total_cmp(y));
    cuts.dedup_by(|x, y| (*x - *y).abs() < 1e-15);

    let panels_total = (points / rule.order()).max(1);
    let span = b - a;
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let len = hi - lo;
        if len <= 0.0 {
            continue;
        }
        let panels = ((panels_total as f64) * len / span).ceil().max(1.0) as usize;
        let step = len / panels as f64;
        for p in 0..panels {
            let x0 = lo + step * p as f64;
            let x1 = if p + 1 == panels { hi } else { x0 + step };
            total += rule.panel(x0, x1, &mut f);
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weights_sum_to_two() {
        for order in [1, 2, 5, 16, 33] {
            let rule = GaussLegendre::new(order);
            let s: f64 = rule.weights.iter().sum();
            assert_relative_eq!(s, 2.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        let rule = GaussLegendre::new(8);
        // x^14 integrates to 2/15 on [-1, 1]
        let v = rule.panel(-1.0, 1.0, &mut |x: f64| x.powi(14));
        assert_relative_eq!(v, 2.0 / 15.0, epsilon = 1e-14);
    }

    #[test]
    fn breakpoints_make_step_functions_exact() {
        let step = |x: f64| if x.abs() <= 0.125 { 4.0 } else { 0.0 };
        let v = integrate(step, -0.5, 0.5, &[-0.125, 0.125], 64);
        assert_relative_eq!(v, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn oscillatory_integrand() {
        let v = integrate(|x| (40.0 * x).cos(), 0.0, 1.0, &[], 2048);
        assert_relative_eq!(v, 40f64.sin() / 40.0, epsilon = 1e-13);
    }

    #[test]
    fn empty_interval() {
        assert_eq!(integrate(|_| 1.0, 1.0, 1.0, &[], 32), 0.0);
    }
}
