/// Quadrature on the reference triangle in barycentric coordinates, weights
/// summing to the reference area 1/2.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

/// Gauss rule on the unit interval, weights summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    /// Six-point symmetric rule, exact through degree 4.
    pub fn degree4() -> Self {
        const A1: f64 = 0.445_948_490_915_964_9;
        const W1: f64 = 0.223_381_589_678_011_47;
        const A2: f64 = 0.091_576_213_509_770_74;
        const W2: f64 = 0.109_951_743_655_321_87;
        let b1 = 1.0 - 2.0 * A1;
        let b2 = 1.0 - 2.0 * A2;
        let points = vec![
            [A1, A1, b1],
            [A1, b1, A1],
            [b1, A1, A1],
            [A2, A2, b2],
            [A2, b2, A2],
            [b2, A2, A2],
        ];
        let weights = vec![W1 / 2.0, W1 / 2.0, W1 / 2.0, W2 / 2.0, W2 / 2.0, W2 / 2.0];
        Self {
            points,
            weights,
            degree: 4,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl EdgeRule {
    pub fn gauss3() -> Self {
        let s = (0.6f64).sqrt() / 2.0;
        Self {
            points: vec![0.5 - s, 0.5, 0.5 + s],
            weights: vec![5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0],
            degree: 5,
        }
    }
}
