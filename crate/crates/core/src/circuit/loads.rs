//! Load current models and their analytic Jacobians.
//!
//! All currents are drawn from the node (positive out of the network node).

use crate::netmodel::{Connection, Load, Phase, Zip, C64};

/// Voltage magnitude below which load models refuse to evaluate.
pub const V_EPSILON: f64 = 1e-6;

/// Voltage magnitude that tripped the collapse guard.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Collapse {
    pub magnitude: f64,
}

/// Constant-power current and its partials with respect to `(V_R, V_I)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PqEval {
    pub i_r: f64,
    pub i_i: f64,
    pub d_ir_dvr: f64,
    pub d_ir_dvi: f64,
    pub d_ii_dvr: f64,
    pub d_ii_dvi: f64,
}

impl PqEval {
    pub fn current(&self) -> C64 {
        C64::new(self.i_r, self.i_i)
    }

    pub fn jacobian(&self) -> [[f64; 2]; 2] {
        [[self.d_ir_dvr, self.d_ir_dvi], [self.d_ii_dvr, self.d_ii_dvi]]
    }
}

/// `I = conj(S / V)` for `S = P + jQ`, in rectangular form.
pub fn eval_pq_positive_sequence(p: f64, q: f64, vr: f64, vi: f64) -> Result<PqEval, Collapse> {
    let d = vr * vr + vi * vi;
    if d <= V_EPSILON * V_EPSILON || !d.is_finite() {
        return Err(Collapse { magnitude: d.sqrt() });
    }
    let d2 = d * d;
    let d_ir_dvr = (p * (vi * vi - vr * vr) - 2.0 * q * vr * vi) / d2;
    let d_ir_dvi = (q * (vr * vr - vi * vi) - 2.0 * p * vr * vi) / d2;
    Ok(PqEval {
        i_r: (p * vr + q * vi) / d,
        i_i: (p * vi - q * vr) / d,
        d_ir_dvr,
        d_ir_dvi,
        d_ii_dvr: d_ir_dvi,
        d_ii_dvi: -d_ir_dvr,
    })
}

/// ZIP load current for nominal power `s` at nominal voltage magnitude `vn`.
///
/// Constant power follows `conj(S/V)`; constant current has magnitude
/// `|S_i| / vn` at the load power-factor angle relative to `V`; constant
/// impedance is the admittance `conj(S_z) / vn^2`.
pub fn eval_zip(s: C64, zip: Zip, vn: f64, v: C64) -> Result<(C64, [[f64; 2]; 2]), Collapse> {
    let m2 = v.norm_sqr();
    if m2 <= V_EPSILON * V_EPSILON || !m2.is_finite() {
        return Err(Collapse { magnitude: m2.sqrt() });
    }
    let mut current = C64::new(0.0, 0.0);
    let mut jac = [[0.0; 2]; 2];

    if zip.p != 0.0 {
        let sp = s * zip.p;
        let e = eval_pq_positive_sequence(sp.re, sp.im, v.re, v.im)?;
        current += e.current();
        let j = e.jacobian();
        for r in 0..2 {
            for c in 0..2 {
                jac[r][c] += j[r][c];
            }
        }
    }
    if zip.i != 0.0 {
        let k = (s * zip.i).conj() / vn;
        let m = m2.sqrt();
        let m3 = m2 * m;
        current += k * v / m;
        let w = C64::new(v.im, -v.re);
        let du_dvr = k * w * (v.im / m3);
        let du_dvi = k * w * (-v.re / m3);
        jac[0][0] += du_dvr.re;
        jac[1][0] += du_dvr.im;
        jac[0][1] += du_dvi.re;
        jac[1][1] += du_dvi.im;
    }
    if zip.z != 0.0 {
        let y = (s * zip.z).conj() / (vn * vn);
        current += y * v;
        jac[0][0] += y.re;
        jac[0][1] -= y.im;
        jac[1][0] += y.im;
        jac[1][1] += y.re;
    }
    Ok((current, jac))
}

/// Per-phase currents drawn by a three-phase load and their 6x6 Jacobian,
/// ordered (a re, a im, b re, b im, c re, c im).
#[derive(Clone, Debug, PartialEq)]
pub struct ThreePhaseEval {
    pub currents: [C64; 3],
    pub jacobian: [[f64; 6]; 6],
}

/// Evaluate a wye or delta load on phase voltages `v` (slot-indexed).
///
/// Wye phases use the phase-to-neutral voltage; delta legs ab, bc, ca use the
/// phase-to-phase voltage with a nominal magnitude of sqrt(3), and each leg
/// current leaves the first terminal and returns through the second.
pub fn eval_pq_three_phase(load: &Load, v: [C64; 3]) -> Result<ThreePhaseEval, (Phase, Collapse)> {
    let mut out = ThreePhaseEval {
        currents: [C64::new(0.0, 0.0); 3],
        jacobian: [[0.0; 6]; 6],
    };
    match load.connection {
        Connection::Wye => {
            for (k, phase) in Phase::ABC.into_iter().enumerate() {
                let s = load.power[k];
                if s.norm() == 0.0 {
                    continue;
                }
                let (i, j) = eval_zip(s, load.zip, 1.0, v[k]).map_err(|e| (phase, e))?;
                out.currents[k] += i;
                for r in 0..2 {
                    for c in 0..2 {
                        out.jacobian[2 * k + r][2 * k + c] += j[r][c];
                    }
                }
            }
        }
        Connection::Delta => {
            let vn = 3f64.sqrt();
            for (k, phase) in Phase::ABC.into_iter().enumerate() {
                let s = load.power[k];
                if s.norm() == 0.0 {
                    continue;
                }
                let x = k;
                let y = (k + 1) % 3;
                let (i, j) = eval_zip(s, load.zip, vn, v[x] - v[y]).map_err(|e| (phase, e))?;
                out.currents[x] += i;
                out.currents[y] -= i;
                for (node, sign_row) in [(x, 1.0), (y, -1.0)] {
                    for (col, sign_col) in [(x, 1.0), (y, -1.0)] {
                        for r in 0..2 {
                            for c in 0..2 {
                                out.jacobian[2 * node + r][2 * col + c] += sign_row * sign_col * j[r][c];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}
