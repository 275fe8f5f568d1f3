//! Stationary transmission through a square barrier (hbar = m = 1).

/// Transmission probability at energy `e` through a barrier of height `v0`
/// and width `d`.
pub fn square_barrier(e: f64, v0: f64, d: f64) -> f64 {
    if e <= 0.0 {
        return 0.0;
    }
    if d <= 0.0 || v0 == 0.0 {
        return 1.0;
    }
    let delta = e - v0;
    let s = if delta < 0.0 {
        let kappa = (-2.0 * delta).sqrt();
        (kappa * d).sinh().powi(2) / (-delta)
    } else if delta > 0.0 {
        let q = (2.0 * delta).sqrt();
        (q * d).sin().powi(2) / delta
    } else {
        2.0 * d * d
    };
    1.0 / (1.0 + v0 * v0 * s / (4.0 * e))
}
