//! Quadrature rules on the reference triangle and on segments.

/// Barycentric point with a weight normalized so that the weights sum to 1;
/// multiply by the triangle area to integrate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    pub bary: [f64; 3],
    pub weight: f64,
}

pub const N_TRI_POINTS: usize = 6;

const A1: f64 = 0.445_948_490_915_964_886_32;
const W1: f64 = 0.223_381_589_678_011_465_70;
const A2: f64 = 0.091_576_213_509_770_743_46;
const W2: f64 = 0.109_951_743_655_321_867_64;

/// Symmetric 6-point rule, exact for polynomials of total degree 4.
pub const TRIANGLE_RULE: [QuadPoint; N_TRI_POINTS] = [
    QuadPoint { bary: [A1, A1, 1.0 - 2.0 * A1], weight: W1 },
    QuadPoint { bary: [A1, 1.0 - 2.0 * A1, A1], weight: W1 },
    QuadPoint { bary: [1.0 - 2.0 * A1, A1, A1], weight: W1 },
    QuadPoint { bary: [A2, A2, 1.0 - 2.0 * A2], weight: W2 },
    QuadPoint { bary: [A2, 1.0 - 2.0 * A2, A2], weight: W2 },
    QuadPoint { bary: [1.0 - 2.0 * A2, A2, A2], weight: W2 },
];

pub fn triangle_rule() -> &'static [QuadPoint; N_TRI_POINTS] {
    &TRIANGLE_RULE
}

/// Three-point Gauss-Legendre rule on `[0, 1]`: `(t, weight)` pairs with
/// weights summing to 1.
pub fn segment_rule() -> [(f64, f64); 3] {
    let s = (0.6f64).sqrt();
    [(0.5 * (1.0 - s), 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 * (1.0 + s), 5.0 / 18.0)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Integrates `f(x, y)` over the unit right triangle (0,0), (1,0), (0,1).
    fn integrate_unit(f: impl Fn(f64, f64) -> f64) -> f64 {
        let area = 0.5;
        triangle_rule()
            .iter()
            .map(|q| {
                let (x, y) = (q.bary[1], q.bary[2]);
                q.weight * area * f(x, y)
            })
            .sum()
    }

    /// Exact integral of x^a y^b over the unit triangle: a! b! / (a + b + 2)!.
    fn monomial_exact(a: u32, b: u32) -> f64 {
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        fact(a) * fact(b) / fact(a + b + 2)
    }

    #[test]
    fn weights_sum_to_one() {
        let s: f64 = triangle_rule().iter().map(|q| q.weight).sum();
        assert_relative_eq!(s, 1.0, max_relative = 1e-15);
        for q in triangle_rule() {
            assert_relative_eq!(q.bary.iter().sum::<f64>(), 1.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn integrates_constant() {
        assert_relative_eq!(integrate_unit(|_, _| 1.0), 0.5, max_relative = 1e-15);
    }

    #[test]
    fn exact_through_degree_four() {
        assert_relative_eq!(integrate_unit(|x, y| x * x * y * y), 1.0 / 180.0, max_relative = 1e-13);
        for a in 0..=4 {
            for b in 0..=(4 - a) {
                let got = integrate_unit(|x, y| x.powi(a as i32) * y.powi(b as i32));
                assert_relative_eq!(got, monomial_exact(a, b), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn degree_five_only_approximate() {
        // Relative errors of the rule on x^5 and x y^4, from an independent
        // evaluation of the same points in extended precision.
        let got = integrate_unit(|x, _| x.powi(5));
        let rel = (got - monomial_exact(5, 0)).abs() / monomial_exact(5, 0);
        assert_relative_eq!(rel, 5.273_934_867_1e-3, max_relative = 1e-6);
        let got = integrate_unit(|x, y| x * y.powi(4));
        let rel = (got - monomial_exact(1, 4)).abs() / monomial_exact(1, 4);
        assert_relative_eq!(rel, 1.318_483_716_8e-2, max_relative = 1e-6);
    }

    #[test]
    fn segment_rule_exact_to_degree_five() {
        for k in 0..=5 {
            let got: f64 = segment_rule().iter().map(|(t, w)| w * t.powi(k)).sum();
            assert_relative_eq!(got, 1.0 / f64::from(k as u32 + 1), max_relative = 1e-14);
        }
    }
}
