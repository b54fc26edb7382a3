//! Exact solution of the 1D Riemann problem for an ideal gas.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiemannState {
    pub rho: f64,
    pub u: f64,
    pub p: f64,
}

impl RiemannState {
    pub fn new(rho: f64, u: f64, p: f64) -> Self {
        Self { rho, u, p }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ExactRiemann {
    pub left: RiemannState,
    pub right: RiemannState,
    pub gamma: f64,
    /// Star-region pressure and velocity.
    pub p_star: f64,
    pub u_star: f64,
}

impl ExactRiemann {
    /// Solves for the star region. Fails if the data generate vacuum.
    pub fn new(left: RiemannState, right: RiemannState, gamma: f64) -> Result<Self, String> {
        let a_l = (gamma * left.p / left.rho).sqrt();
        let a_r = (gamma * right.p / right.rho).sqrt();
        if 2.0 * (a_l + a_r) / (gamma - 1.0) <= right.u - left.u {
            return Err("initial data generate vacuum".into());
        }
        // primitive-variable guess, then Newton on f_L + f_R + Δu = 0
        let guess = 0.5 * (left.p + right.p) - 0.125 * (right.u - left.u) * (left.rho + right.rho) * (a_l + a_r);
        let mut p = guess.max(1e-8);
        let mut converged = false;
        for _ in 0..100 {
            let (fl, dl) = branch(p, left, gamma);
            let (fr, dr) = branch(p, right, gamma);
            let next = (p - (fl + fr + right.u - left.u) / (dl + dr)).max(1e-12);
            let change = 2.0 * (next - p).abs() / (next + p);
            p = next;
            if change < 1e-15 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err("star pressure iteration did not converge".into());
        }
        let (fl, _) = branch(p, left, gamma);
        let (fr, _) = branch(p, right, gamma);
        Ok(Self {
            left,
            right,
            gamma,
            p_star: p,
            u_star: 0.5 * (left.u + right.u) + 0.5 * (fr - fl),
        })
    }

    /// State at similarity coordinate `s = (x − x0)/t`.
    pub fn sample(&self, s: f64) -> RiemannState {
        let g = self.gamma;
        let (ps, us) = (self.p_star, self.u_star);
        let g6 = (g - 1.0) / (g + 1.0);
        let shock_ratio = |pk: f64| ps / pk;
        if s <= us {
            let w = self.left;
            let a = (g * w.p / w.rho).sqrt();
            if ps > w.p {
                let speed = w.u - a * ((g + 1.0) / (2.0 * g) * ps / w.p + (g - 1.0) / (2.0 * g)).sqrt();
                if s <= speed {
                    w
                } else {
                    let r = shock_ratio(w.p);
                    RiemannState::new(w.rho * (r + g6) / (g6 * r + 1.0), us, ps)
                }
            } else if s <= w.u - a {
                w
            } else {
                let a_star = a * (ps / w.p).powf((g - 1.0) / (2.0 * g));
                if s > us - a_star {
                    RiemannState::new(w.rho * (ps / w.p).powf(1.0 / g), us, ps)
                } else {
                    let u = 2.0 / (g + 1.0) * (a + 0.5 * (g - 1.0) * w.u + s);
                    let c = 2.0 / (g + 1.0) * (a + 0.5 * (g - 1.0) * (w.u - s));
                    RiemannState::new(
                        w.rho * (c / a).powf(2.0 / (g - 1.0)),
                        u,
                        w.p * (c / a).powf(2.0 * g / (g - 1.0)),
                    )
                }
            }
        } else {
            let w = self.right;
            let a = (g * w.p / w.rho).sqrt();
            if ps > w.p {
                let speed = w.u + a * ((g + 1.0) / (2.0 * g) * ps / w.p + (g - 1.0) / (2.0 * g)).sqrt();
                if s >= speed {
                    w
                } else {
                    let r = shock_ratio(w.p);
                    RiemannState::new(w.rho * (r + g6) / (g6 * r + 1.0), us, ps)
                }
            } else if s >= w.u + a {
                w
            } else {
                let a_star = a * (ps / w.p).powf((g - 1.0) / (2.0 * g));
                if s <= us + a_star {
                    RiemannState::new(w.rho * (ps / w.p).powf(1.0 / g), us, ps)
                } else {
                    let u = 2.0 / (g + 1.0) * (-a + 0.5 * (g - 1.0) * w.u + s);
                    let c = 2.0 / (g + 1.0) * (a - 0.5 * (g - 1.0) * (w.u - s));
                    RiemannState::new(
                        w.rho * (c / a).powf(2.0 / (g - 1.0)),
                        u,
                        w.p * (c / a).powf(2.0 * g / (g - 1.0)),
                    )
                }
            }
        }
    }

    /// Solution at position `x` and time `t` for a discontinuity at `x0`.
    pub fn at(&self, x: f64, x0: f64, t: f64) -> RiemannState {
        if t <= 0.0 {
            return if x < x0 { self.left } else { self.right };
        }
        self.sample((x - x0) / t)
    }
}

/// Pressure function of one side and its derivative.
fn branch(p: f64, w: RiemannState, g: f64) -> (f64, f64) {
    let a = (g * w.p / w.rho).sqrt();
    if p > w.p {
        let ak = 2.0 / ((g + 1.0) * w.rho);
        let bk = (g - 1.0) / (g + 1.0) * w.p;
        let root = (ak / (p + bk)).sqrt();
        ((p - w.p) * root, root * (1.0 - 0.5 * (p - w.p) / (bk + p)))
    } else {
        let ratio = p / w.p;
        (
            2.0 * a / (g - 1.0) * (ratio.powf((g - 1.0) / (2.0 * g)) - 1.0),
            ratio.powf(-(g + 1.0) / (2.0 * g)) / (w.rho * a),
        )
    }
}

/// Post-shock state behind a shock of Mach number `mach` running in the
/// +x direction into `pre` at rest, and the shock speed.
pub fn shock_jump(pre: RiemannState, mach: f64, gamma: f64) -> (RiemannState, f64) {
    let a = (gamma * pre.p / pre.rho).sqrt();
    let m2 = mach * mach;
    let rho = pre.rho * (gamma + 1.0) * m2 / ((gamma - 1.0) * m2 + 2.0);
    let p = pre.p * (2.0 * gamma * m2 - (gamma - 1.0)) / (gamma + 1.0);
    let speed = pre.u + mach * a;
    let u = pre.u + (speed - pre.u) * (1.0 - pre.rho / rho);
    (RiemannState::new(rho, u, p), speed)
}
