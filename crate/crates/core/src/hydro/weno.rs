//! Fifth-order WENO-Z reconstruction.

/// Division guard in the nonlinear weights.
pub const WENO_EPS: f64 = 1e-40;

const IDEAL: [f64; 3] = [0.1, 0.6, 0.3];

fn indicators(v: &[f64; 5]) -> [f64; 3] {
    let sq = |x: f64| x * x;
    [
        13.0 / 12.0 * sq(v[0] - 2.0 * v[1] + v[2]) + 0.25 * sq(v[0] - 4.0 * v[1] + 3.0 * v[2]),
        13.0 / 12.0 * sq(v[1] - 2.0 * v[2] + v[3]) + 0.25 * sq(v[1] - v[3]),
        13.0 / 12.0 * sq(v[2] - 2.0 * v[3] + v[4]) + 0.25 * sq(3.0 * v[2] - 4.0 * v[3] + v[4]),
    ]
}

/// Normalized nonlinear weights of the three sub-stencils.
pub fn weno5z_weights(v: &[f64; 5]) -> [f64; 3] {
    let beta = indicators(v);
    let tau = (beta[0] - beta[2]).abs();
    let alpha = [0, 1, 2].map(|k| IDEAL[k] * (1.0 + tau / (beta[k] + WENO_EPS)));
    let total = alpha[0] + alpha[1] + alpha[2];
    alpha.map(|a| a / total)
}

/// Value at the right face of the centre cell of `v = (v_{i-2}, .., v_{i+2})`,
/// reconstructed from cell averages.
pub fn weno5z(v: [f64; 5]) -> f64 {
    let w = weno5z_weights(&v);
    // Sub-stencil values written as corrections to v_i, so a constant
    // stencil reproduces its value exactly.
    let c = v[2];
    let (d0, d1, d3, d4) = (v[0] - c, v[1] - c, v[3] - c, v[4] - c);
    let q0 = (2.0 * d0 - 7.0 * d1) / 6.0;
    let q1 = (2.0 * d3 - d1) / 6.0;
    let q2 = (5.0 * d3 - d4) / 6.0;
    c + (w[0] * q0 + w[1] * q1 + w[2] * q2)
}

/// Value at the left face of the centre cell, by mirroring the stencil.
pub fn weno5z_left_face(v: [f64; 5]) -> f64 {
    weno5z([v[4], v[3], v[2], v[1], v[0]])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_and_linear() {
        for c in [0.1, -3.7, 1e5] {
            assert_eq!(weno5z([c; 5]), c);
        }
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert!((weno5z(v) - 2.5).abs() < 1e-14);
        assert!((weno5z_left_face(v) - 1.5).abs() < 1e-14);
        let w = weno5z_weights(&v);
        for (a, b) in w.iter().zip(IDEAL) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn discontinuous_substencil_is_switched_off() {
        let w = weno5z_weights(&[0.0, 0.0, 0.0, 0.0, 1.0]);
        let largest = w.iter().copied().fold(0.0, f64::max);
        assert!(w[2] < 1e-4 * largest, "{w:?}");
    }
}
