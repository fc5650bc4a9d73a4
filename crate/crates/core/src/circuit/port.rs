//! Symmetrical-component relations used by the coupling port.

use crate::netmodel::{Phase, C64};

/// Real 2x2 block acting on `(re, im)` pairs as multiplication by `z`.
pub fn rotation_block(z: C64) -> [[f64; 2]; 2] {
    [[z.re, -z.im], [z.im, z.re]]
}

/// Feeder-head phase voltages imposed by a positive-sequence voltage:
/// `V^a = V^p`, `V^b = α² V^p`, `V^c = α V^p`.
pub fn port_phase_voltages(vp: C64) -> [C64; 3] {
    Phase::ABC.map(|p| p.rotation() * vp)
}

/// Positive-sequence component `(I^a + α I^b + α² I^c) / 3`.
pub fn positive_sequence_current(i: [C64; 3]) -> C64 {
    Phase::ABC
        .iter()
        .zip(i)
        .map(|(p, x)| p.rotation().conj() * x)
        .sum::<C64>()
        / 3.0
}

/// Zero, positive and negative sequence components of a phase triple.
pub fn sequence_components(x: [C64; 3]) -> [C64; 3] {
    let zero = (x[0] + x[1] + x[2]) / 3.0;
    let negative = Phase::ABC.iter().zip(x).map(|(p, v)| p.rotation() * v).sum::<C64>() / 3.0;
    [zero, positive_sequence_current(x), negative]
}

/// Real 6x6 form of the phase-to-sequence transform on
/// `(a re, a im, b re, b im, c re, c im)`, output rows (zero, positive, negative).
pub fn port_current_matrix() -> [[f64; 6]; 6] {
    let mut m = [[0.0; 6]; 6];
    for (k, p) in Phase::ABC.iter().enumerate() {
        let coeffs = [C64::new(1.0, 0.0), p.rotation().conj(), p.rotation()];
        for (s, coeff) in coeffs.iter().enumerate() {
            let b = rotation_block(coeff / 3.0);
            for r in 0..2 {
                for c in 0..2 {
                    m[2 * s + r][2 * k + c] = b[r][c];
                }
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_positive_sequence_voltage() {
        let v = port_phase_voltages(C64::new(1.0, 0.0));
        assert!((v[0] - C64::from_polar(1.0, 0.0)).norm() < 1e-15);
        assert!((v[1] - C64::from_polar(1.0, (-120f64).to_radians())).norm() < 1e-15);
        assert!((v[2] - C64::from_polar(1.0, 120f64.to_radians())).norm() < 1e-15);
    }

    #[test]
    fn zero_sequence_currents_draw_nothing() {
        let one = C64::new(1.0, 0.0);
        assert!(positive_sequence_current([one; 3]).norm() < 1e-15);
    }
}
