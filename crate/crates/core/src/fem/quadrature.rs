use alloc::vec::Vec;

use crate::tensor::Dim;

/// Tensor-product Gauss–Legendre rule on `[−1, 1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

fn gauss_1d(order: usize) -> (&'static [f64], &'static [f64]) {
    const G1: ([f64; 1], [f64; 1]) = ([0.0], [2.0]);
    // ±1/√3
    const A: f64 = 0.577_350_269_189_625_8;
    const G2: ([f64; 2], [f64; 2]) = ([-A, A], [1.0, 1.0]);
    // ±√(3/5), weights 5/9, 8/9
    const B: f64 = 0.774_596_669_241_483_4;
    const G3: ([f64; 3], [f64; 3]) = ([-B, 0.0, B], [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0]);
    match order {
        1 => (&G1.0, &G1.1),
        2 => (&G2.0, &G2.1),
        3 => (&G3.0, &G3.1),
        _ => panic!("Gauss rules with 1..=3 points per direction are supported, got {order}"),
    }
}

impl QuadRule {
    /// `order` points per direction (1, 2 or 3) in `d` dimensions (1, 2 or 3).
    pub fn gauss_nd(d: usize, order: usize) -> Self {
        let (x, w) = gauss_1d(order);
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let n = x.len();
        let (nk, nj) = (if d > 2 { n } else { 1 }, if d > 1 { n } else { 1 });
        for k in 0..nk {
            for j in 0..nj {
                for i in 0..n {
                    let mut p = [0.0; 3];
                    let mut wt = w[i];
                    p[0] = x[i];
                    if d > 1 {
                        p[1] = x[j];
                        wt *= w[j];
                    }
                    if d > 2 {
                        p[2] = x[k];
                        wt *= w[k];
                    }
                    points.push(p);
                    weights.push(wt);
                }
            }
        }
        QuadRule { points, weights }
    }

    /// Volume rule for elements of the given dimension.
    pub fn gauss(dim: Dim, order: usize) -> Self {
        Self::gauss_nd(dim.d(), order)
    }

    /// Reference points.
    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    /// Weights (sum to `2^d`).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// `true` for an empty rule (never produced by the constructors).
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Rule on element faces (edges in 2-D, quadrilaterals in 3-D).
pub fn face_rule(dim: Dim, order: usize) -> QuadRule {
    QuadRule::gauss_nd(dim.d() - 1, order)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_reference_measure() {
        for order in 1..=3 {
            assert!((QuadRule::gauss(Dim::Two, order).weights().iter().sum::<f64>() - 4.0).abs() < 1e-14);
            assert!((QuadRule::gauss(Dim::Three, order).weights().iter().sum::<f64>() - 8.0).abs() < 1e-14);
            assert!((face_rule(Dim::Two, order).weights().iter().sum::<f64>() - 2.0).abs() < 1e-14);
        }
        assert_eq!(QuadRule::gauss(Dim::Two, 2).len(), 4);
        assert_eq!(QuadRule::gauss(Dim::Three, 2).len(), 8);
        assert_eq!(QuadRule::gauss(Dim::Three, 1).len(), 1);
    }

    #[test]
    fn exactness_on_reference_square() {
        // 2-point rule integrates x^3 y^2 etc. exactly (degree 3 per direction)
        let r = QuadRule::gauss(Dim::Two, 2);
        let f = |p: &[f64; 3]| p[0] * p[0] * p[1] * p[1] + p[0] * p[0] * p[0] + 1.0;
        let q: f64 = r.points().iter().zip(r.weights()).map(|(p, w)| w * f(p)).sum();
        assert!((q - (4.0 / 9.0 + 4.0)).abs() < 1e-14);
    }
}
