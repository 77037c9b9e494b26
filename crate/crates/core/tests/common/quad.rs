//! Independent evaluation of `H̃ˢ` entries on Ω = (-1, 1) by nested
//! double-exponential quadrature.

use fracsparse::fracnorm::normalization_constant;

pub fn de(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    quadrature::integrate(f, a, b, 1e-13).integral
}

/// `∫∫_{Ω×Ω} (φ(x) - φ(y))² |x - y|^{-1-2s}` on Ω = (-1, 1) for a P1 hat
/// `phi`, split at the kinks `knots` and at `y = x` in the inner integral.
pub fn double_integral(phi: &dyn Fn(f64) -> f64, knots: &[f64], s: f64) -> f64 {
    let outer = |x: f64| {
        let mut pts: Vec<f64> = knots.to_vec();
        pts.push(x);
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        let fx = phi(x);
        pts.windows(2)
            .map(|w| de(|y| (fx - phi(y)).powi(2) * (x - y).abs().powf(-1.0 - 2.0 * s), w[0], w[1]))
            .sum::<f64>()
    };
    knots.windows(2).map(|w| de(outer, w[0], w[1])).sum()
}

/// Full H̃ˢ diagonal entry of the hat `phi` on Ω = (-1, 1).
pub fn oracle_entry(phi: &dyn Fn(f64) -> f64, knots: &[f64], s: f64) -> f64 {
    let c = normalization_constant(1, s);
    let l2 = knots.windows(2).map(|w| de(|x| phi(x).powi(2), w[0], w[1])).sum::<f64>();
    // ρ(x) = ∫_{ℝ∖Ω} |x - y|^{-1-2s} dy
    let rho = |x: f64| ((x + 1.0).powf(-2.0 * s) + (1.0 - x).powf(-2.0 * s)) / (2.0 * s);
    let comp = knots.windows(2).map(|w| de(|x| phi(x).powi(2) * rho(x), w[0], w[1])).sum::<f64>();
    l2 + 0.5 * c * (double_integral(phi, knots, s) + 2.0 * comp)
}
