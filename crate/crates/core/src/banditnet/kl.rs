use serde::{Deserialize, Serialize};

pub const DEFAULT_U_TOLERANCE: f64 = 1e-9;

/// KL divergence between Bernoulli(p) and Bernoulli(u), with 0 log 0 = 0
/// and +inf when u sits on a boundary p does not.
pub fn kl_bernoulli(p: f64, u: f64) -> f64 {
    let term = |a: f64, b: f64| {
        if a == 0.0 {
            0.0
        } else if b == 0.0 {
            f64::INFINITY
        } else {
            a * (a / b).ln()
        }
    };
    term(p, u) + term(1.0 - p, 1.0 - u)
}

/// Per-link transmission counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkStats {
    /// Packets delivered over the link.
    pub s: u64,
    /// Attempts spent on the link.
    pub t: u64,
}

impl LinkStats {
    pub fn theta_hat(&self) -> f64 {
        if self.t == 0 {
            0.0
        } else {
            self.s as f64 / self.t as f64
        }
    }
}

/// Largest u in [theta_hat, 1] with t KL(theta_hat, u) <= budget, by
/// bisection until the bracket is within `tol` relative.
pub fn u_star(stats: LinkStats, budget: f64, tol: f64) -> f64 {
    let p = stats.theta_hat();
    if stats.t == 0 || p >= 1.0 {
        return 1.0;
    }
    if budget <= 0.0 {
        return p;
    }
    let t = stats.t as f64;
    let feasible = |u: f64| t * kl_bernoulli(p, u) <= budget;
    // The bracket always has a feasible low end and an infeasible top
    // (KL(p, 1) is infinite for p < 1).
    let (mut lo, mut hi) = (p, 1.0);
    while hi - lo > tol * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Optimistic attempts per delivery, 1 / u*, with budget C log tau.
pub fn omega(stats: LinkStats, tau: u64, c: f64, tol: f64) -> f64 {
    let budget = c * (tau.max(1) as f64).ln();
    let u = u_star(stats, budget, tol);
    if u <= 0.0 {
        f64::INFINITY
    } else {
        1.0 / u
    }
}
