//! Reference oracles for checking `traversal-core` against closed-form and
//! independently computed results.

use num_complex::Complex64;
use traversal_core::observables::{norm_from, MomentumDistribution};
use traversal_core::{make_grid, prepare_gaussian, Barrier, GaussianPrep, PotentialSpec, Propagator, PropagatorConfig};

/// Transmission probability through piecewise-constant `levels`, where
/// `levels[j]` holds on `[edges[j-1], edges[j])` and both outer levels are 0.
/// Plane-wave transfer matrices, matched right to left.
pub fn transfer_matrix(e: f64, edges: &[f64], levels: &[f64]) -> f64 {
    assert_eq!(levels.len(), edges.len() + 1);
    assert!(levels[0] == 0.0 && *levels.last().unwrap() == 0.0);
    let k: Vec<Complex64> = levels
        .iter()
        .map(|&v| Complex64::new(2.0 * (e - v), 0.0).sqrt())
        .collect();
    let i = Complex64::i();
    // (A, B) in the last region: outgoing wave only.
    let mut amp = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    for j in (0..edges.len()).rev() {
        let x = edges[j];
        let (kl, kr) = (k[j], k[j + 1]);
        let psi = amp[0] * (i * kr * x).exp() + amp[1] * (-i * kr * x).exp();
        let dpsi = i * kr * (amp[0] * (i * kr * x).exp() - amp[1] * (-i * kr * x).exp());
        // Solve A e^{ikx} + B e^{-ikx} = psi, ik(A e^{ikx} - B e^{-ikx}) = dpsi.
        let plus = 0.5 * (psi + dpsi / (i * kl));
        let minus = 0.5 * (psi - dpsi / (i * kl));
        amp = [plus * (-i * kl * x).exp(), minus * (i * kl * x).exp()];
    }
    1.0 / amp[0].norm_sqr()
}

pub fn square_t(e: f64, v0: f64, d: f64) -> f64 {
    transfer_matrix(e, &[0.0, d], &[0.0, v0, 0.0])
}

/// Wavenumber whose three-point lattice energy equals `e`.
pub fn lattice_k(e: f64, dx: f64) -> f64 {
    (1.0 - e * dx * dx).acos() / dx
}

pub fn lattice_energy(k: f64, dx: f64) -> f64 {
    (1.0 - (k * dx).cos()) / (dx * dx)
}

pub struct PacketTransmission {
    pub measured: f64,
    pub oracle: f64,
}

/// Quasi-monochromatic packet (position variance 64) at lattice energy `e`
/// against a barrier of height `v0` and width `d`. The oracle averages the
/// analytic T over the packet's own momentum distribution.
pub fn packet_transmission(e: f64, v0: f64, d: f64) -> PacketTransmission {
    let grid = make_grid(0.0, 320.0, 16001).unwrap();
    let dx = grid.dx();
    let k0 = lattice_k(e, dx);
    let left = 140.0;
    let prep = GaussianPrep {
        x0: 70.0,
        p0: k0,
        var_x: 64.0,
    };
    let psi = prepare_gaussian(&grid, &prep).unwrap();
    let dist = MomentumDistribution::of(&psi);
    let oracle = dist.expect(|k| {
        if k > 0.0 {
            square_t(lattice_energy(k, dx), v0, d)
        } else {
            0.0
        }
    });

    let barrier = Barrier {
        left,
        width: d,
        height: v0,
    };
    let prop = Propagator::new(
        &grid,
        &PotentialSpec::barrier_only(barrier),
        &PropagatorConfig::default(),
    )
    .unwrap();
    // packet centre ends 60 beyond the barrier, eight widths clear of it
    let group = (k0 * dx).sin() / dx;
    let t_end = (left + d + 60.0 - prep.x0) / group;
    let (end, _) = prop.run(&psi, t_end, &[], false).unwrap();
    let measured = norm_from(&end, grid.nearest_index(left + d) + 1);
    PacketTransmission { measured, oracle }
}

#[cfg(test)]
mod tests {
    use super::*;
    use traversal_core::transmission::square_barrier;

    #[test]
    fn transfer_matrix_matches_closed_form() {
        for &d in &[0.25, 1.0, 2.0, 6.0] {
            for &e in &[5.0, 32.0, 49.0, 50.5, 60.0, 120.0] {
                let tm = square_t(e, 50.0, d);
                let cf = square_barrier(e, 50.0, d);
                assert!((tm / cf - 1.0).abs() < 1e-9, "e={e} d={d}: {tm} vs {cf}");
            }
        }
        // two touching halves equal the whole barrier
        let split = transfer_matrix(40.0, &[0.0, 0.5, 1.0], &[0.0, 50.0, 50.0, 0.0]);
        assert!((split / square_t(40.0, 50.0, 1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lattice_dispersion_round_trip() {
        let dx = 0.02;
        for e in [1.0, 32.0, 60.0] {
            assert!((lattice_energy(lattice_k(e, dx), dx) - e).abs() < 1e-9);
        }
    }

    #[test]
    fn packet_reproduces_tunnelling_and_overbarrier_transmission() {
        for &(e, d) in &[(40.0, 1.0), (60.0, 2.0)] {
            let r = packet_transmission(e, 50.0, d);
            let rel = (r.measured / r.oracle - 1.0).abs();
            assert!(
                rel < 0.02,
                "E={e} d={d}: measured {:.6e} oracle {:.6e}",
                r.measured,
                r.oracle
            );
        }
    }
}
