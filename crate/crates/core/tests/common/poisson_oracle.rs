//! Dense five-point system with the mirrored Dirichlet closure.

use nalgebra::{DMatrix, DVector};
use taskgrid::poisson::Poisson;
use taskgrid::reduce::Partial;
use taskgrid::runtime::{Runtime, TaskSpec};

/// Dense matrix and right-hand side of the five-point system with the
/// mirrored Dirichlet closure, unknowns ordered x fastest.
pub fn dense_system(n: [usize; 2], dx: f64, dy: f64, f: &[f64], g: f64) -> (DMatrix<f64>, DVector<f64>) {
    let m = n[0] * n[1];
    let mut a = DMatrix::zeros(m, m);
    let mut b = DVector::from_column_slice(f);
    let (cx, cy) = (1.0 / (dx * dx), 1.0 / (dy * dy));
    for j in 0..n[1] {
        for i in 0..n[0] {
            let k = j * n[0] + i;
            let mut diag = 0.0;
            for (ni, nj, c) in [
                (i as isize - 1, j as isize, cx),
                (i as isize + 1, j as isize, cx),
                (i as isize, j as isize - 1, cy),
                (i as isize, j as isize + 1, cy),
            ] {
                diag -= c;
                if ni < 0 || nj < 0 || ni >= n[0] as isize || nj >= n[1] as isize {
                    // p_ghost = 2g - p_k
                    diag -= c;
                    b[k] -= 2.0 * g * c;
                } else {
                    a[(k, nj as usize * n[0] + ni as usize)] = c;
                }
            }
            a[(k, k)] = diag;
        }
    }
    (a, b)
}

pub fn dense_red_black(a: &DMatrix<f64>, b: &DVector<f64>, x: &mut DVector<f64>, n: [usize; 2]) {
    for parity in [0, 1] {
        for k in 0..x.len() {
            let (i, j) = (k % n[0], k / n[0]);
            if (i + j) % 2 != parity {
                continue;
            }
            let mut s = b[k];
            for c in 0..x.len() {
                if c != k {
                    s -= a[(k, c)] * x[c];
                }
            }
            x[k] = s / a[(k, k)];
        }
    }
}

pub fn initial_guess(k: usize) -> f64 {
    ((k * 37 + 11) % 23) as f64 / 23.0 - 0.4
}

pub fn set_pressure(rt: &mut Runtime, solver: &Poisson, values: Vec<f64>) {
    let p = solver.state.p.clone();
    let nx = solver.problem.config.extents[0];
    let h = p.clone();
    rt.submit(
        TaskSpec::new("set", move |ctx| {
            let mut v = ctx.view_mut(&h)?;
            ctx.for_each_cell(&mut v, |c, out| out[0] = values[c.global[1] * nx + c.global[0]]);
            Ok(Partial::None)
        })
        .read_write(&p),
    )
    .unwrap();
}
