//! Physical truth model of the DFIG wind turbine in the per-unit system:
//! fourth-order electrical flux dynamics in the synchronously rotating
//! dq-frame, first-order mechanical dynamics, power outputs and the
//! aerodynamic performance-coefficient model.

use crate::numerics::Mat4;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlantError {
    #[error("invalid machine parameters: {0}")]
    InvalidParams(String),
    #[error("wind speed must be positive (got {0})")]
    NonPositiveWind(f64),
    #[error("rotor speed {0} below the torque singularity guard {1}")]
    RotorSpeedTooSmall(f64, f64),
    #[error("performance coefficient undefined: {0}")]
    CpDomain(String),
}

/// T_m evaluation errors below this rotor speed instead of blowing up on
/// the 1/omega_r singularity.
pub const OMEGA_R_GUARD: f64 = 1e-6;

/// Electrical constants of the machine plus the fixed stator voltage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MachineParams {
    pub r_s: f64,
    pub r_r: f64,
    pub l_s: f64,
    pub l_r: f64,
    pub l_m: f64,
    pub omega_s: f64,
    pub v_ds: f64,
    pub v_qs: f64,
}

impl Default for MachineParams {
    fn default() -> Self {
        MachineParams {
            r_s: 0.00706,
            r_r: 0.005,
            l_s: 3.071,
            l_r: 3.056,
            l_m: 2.9,
            omega_s: 1.0,
            v_ds: 1.0,
            v_qs: 0.0,
        }
    }
}

impl MachineParams {
    /// Leak coefficient sigma = 1 - L_m^2 / (L_s L_r), in (0, 1).
    pub fn sigma(&self) -> f64 {
        1.0 - self.l_m * self.l_m / (self.l_s * self.l_r)
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        let p = self;
        let all_finite = [p.r_s, p.r_r, p.l_s, p.l_r, p.l_m, p.omega_s, p.v_ds, p.v_qs]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(PlantError::InvalidParams("non-finite entry".into()));
        }
        if p.r_s <= 0.0 || p.r_r <= 0.0 || p.omega_s <= 0.0 {
            return Err(PlantError::InvalidParams(
                "resistances and omega_s must be positive".into(),
            ));
        }
        if !(p.l_s > p.l_m && p.l_r > p.l_m && p.l_m > 0.0) {
            return Err(PlantError::InvalidParams(
                "inductances must satisfy L_s > L_m > 0 and L_r > L_m > 0".into(),
            ));
        }
        let sigma = self.sigma();
        if !(0.0 < sigma && sigma < 1.0) {
            return Err(PlantError::InvalidParams(format!(
                "leak coefficient sigma = {sigma} outside (0, 1)"
            )));
        }
        Ok(())
    }
}

/// Performance-coefficient model coefficients c1..c6.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpCoeffs(pub [f64; 6]);

impl CpCoeffs {
    /// MATLAB/Simulink R2007a wind-turbine-block coefficients.
    pub fn nominal() -> Self {
        CpCoeffs([0.5176, 116.0, 0.4, 5.0, 21.0, 0.0068])
    }

    /// Perturbed coefficients used as plant truth in the robustness scenario.
    pub fn perturbed() -> Self {
        CpCoeffs([0.45, 115.0, 0.5, 4.5, 22.0, 0.003])
    }
}

/// Aerodynamic constants and the per-unit power bases.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AeroParams {
    pub cp_coeffs: CpCoeffs,
    /// Blade pitch limits in degrees.
    pub beta_min: f64,
    pub beta_max: f64,
    pub lambda_nom: f64,
    pub cp_nom: f64,
    /// Base of the wind-power side, watts.
    pub p_wind_base: f64,
    /// Base of the electrical side, volt-amperes.
    pub p_elec_base: f64,
    pub p_nom: f64,
    /// Base wind speed, m/s.
    pub v_w_base: f64,
}

impl Default for AeroParams {
    fn default() -> Self {
        AeroParams {
            cp_coeffs: CpCoeffs::nominal(),
            beta_min: 0.0,
            beta_max: 27.0,
            lambda_nom: 8.1,
            cp_nom: 0.48,
            p_wind_base: 1.5e6,
            p_elec_base: 1.5e6 / 0.9,
            p_nom: 0.73,
            v_w_base: 12.0,
        }
    }
}

impl AeroParams {
    /// Leading constant of the per-unit mechanical power expression,
    /// P_wind_base * P_nom / P_elec_base (0.657 for the default bases).
    pub fn pm_const(&self) -> f64 {
        self.p_wind_base * self.p_nom / self.p_elec_base
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        if !(self.beta_min < self.beta_max) {
            return Err(PlantError::InvalidParams("beta_min must be < beta_max".into()));
        }
        if self.cp_nom <= 0.0 || self.lambda_nom <= 0.0 {
            return Err(PlantError::InvalidParams(
                "cp_nom and lambda_nom must be positive".into(),
            ));
        }
        if self.p_wind_base <= 0.0 || self.p_elec_base <= 0.0 || self.v_w_base <= 0.0 {
            return Err(PlantError::InvalidParams("base values must be positive".into()));
        }
        Ok(())
    }
}

/// Inertia and friction of the single-mass drive train.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveTrainParams {
    pub j: f64,
    pub c_f: f64,
}

impl Default for DriveTrainParams {
    fn default() -> Self {
        DriveTrainParams { j: 10.08, c_f: 0.01 }
    }
}

impl DriveTrainParams {
    pub fn validate(&self) -> Result<(), PlantError> {
        if self.j <= 0.0 || self.c_f < 0.0 {
            return Err(PlantError::InvalidParams(
                "inertia must be positive and friction nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// The five plant states: four fluxes and the rotor speed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlantState {
    pub phi_ds: f64,
    pub phi_qs: f64,
    pub phi_dr: f64,
    pub phi_qr: f64,
    pub omega_r: f64,
}

impl PlantState {
    pub fn fluxes(&self) -> [f64; 4] {
        [self.phi_ds, self.phi_qs, self.phi_dr, self.phi_qr]
    }

    pub fn from_fluxes(x: [f64; 4], omega_r: f64) -> Self {
        PlantState {
            phi_ds: x[0],
            phi_qs: x[1],
            phi_dr: x[2],
            phi_qr: x[3],
            omega_r,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Currents {
    pub i_ds: f64,
    pub i_qs: f64,
    pub i_dr: f64,
    pub i_qr: f64,
}

/// The two rotor-side control voltages.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RotorVoltages {
    pub v_dr: f64,
    pub v_qr: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Powers {
    pub p_s: f64,
    pub q_s: f64,
    pub p_r: f64,
    pub q_r: f64,
    pub p: f64,
    pub q: f64,
}

impl Powers {
    /// PF = P / sqrt(P^2 + Q^2); zero when both powers vanish.
    pub fn power_factor(&self) -> f64 {
        let mag = self.p.hypot(self.q);
        if mag > 0.0 {
            self.p / mag
        } else {
            0.0
        }
    }
}

/// State matrix A of the electrical dynamics in flux coordinates.
pub fn a_matrix(mp: &MachineParams) -> Mat4 {
    let sigma = mp.sigma();
    let c_s = mp.r_s / (sigma * mp.l_s);
    let c_r = mp.r_r / (sigma * mp.l_r);
    let m_s = mp.r_s * mp.l_m / (sigma * mp.l_s * mp.l_r);
    let m_r = mp.r_r * mp.l_m / (sigma * mp.l_s * mp.l_r);
    let w = mp.omega_s;
    Mat4([
        [-c_s, w, m_s, 0.0],
        [-w, -c_s, 0.0, m_s],
        [m_r, 0.0, -c_r, w],
        [0.0, m_r, -w, -c_r],
    ])
}

/// Output matrix mapping fluxes to currents.
pub fn current_matrix(mp: &MachineParams) -> Mat4 {
    let sigma = mp.sigma();
    let s = 1.0 / (sigma * mp.l_s);
    let r = 1.0 / (sigma * mp.l_r);
    let m = mp.l_m / (sigma * mp.l_s * mp.l_r);
    Mat4([
        [s, 0.0, -m, 0.0],
        [0.0, s, 0.0, -m],
        [-m, 0.0, r, 0.0],
        [0.0, -m, 0.0, r],
    ])
}

pub fn currents_from_fluxes(x: [f64; 4], mp: &MachineParams) -> Currents {
    let sigma = mp.sigma();
    let s = 1.0 / (sigma * mp.l_s);
    let r = 1.0 / (sigma * mp.l_r);
    let m = mp.l_m / (sigma * mp.l_s * mp.l_r);
    Currents {
        i_ds: s * x[0] - m * x[2],
        i_qs: s * x[1] - m * x[3],
        i_dr: -m * x[0] + r * x[2],
        i_qr: -m * x[1] + r * x[3],
    }
}

pub fn fluxes_from_currents(i: &Currents, mp: &MachineParams) -> [f64; 4] {
    [
        mp.l_s * i.i_ds + mp.l_m * i.i_dr,
        mp.l_s * i.i_qs + mp.l_m * i.i_qr,
        mp.l_m * i.i_ds + mp.l_r * i.i_dr,
        mp.l_m * i.i_qs + mp.l_r * i.i_qr,
    ]
}

/// Flux time-derivatives: A x plus the input vector, with the rotor-speed
/// bilinear terms entering through the rotor rows.
pub fn electrical_derivatives(
    x: [f64; 4],
    omega_r: f64,
    v: &RotorVoltages,
    mp: &MachineParams,
) -> [f64; 4] {
    let sigma = mp.sigma();
    let c_s = mp.r_s / (sigma * mp.l_s);
    let c_r = mp.r_r / (sigma * mp.l_r);
    let m_s = mp.r_s * mp.l_m / (sigma * mp.l_s * mp.l_r);
    let m_r = mp.r_r * mp.l_m / (sigma * mp.l_s * mp.l_r);
    let w = mp.omega_s;
    [
        -c_s * x[0] + w * x[1] + m_s * x[2] + mp.v_ds,
        -w * x[0] - c_s * x[1] + m_s * x[3] + mp.v_qs,
        m_r * x[0] - c_r * x[2] + (w - omega_r) * x[3] + v.v_dr,
        m_r * x[1] - (w - omega_r) * x[2] - c_r * x[3] + v.v_qr,
    ]
}

/// Active and reactive powers on both windings and their totals. Positive
/// P and Q mean injection into the grid.
pub fn powers(v: &RotorVoltages, i: &Currents, mp: &MachineParams) -> Powers {
    let p_s = -mp.v_ds * i.i_ds - mp.v_qs * i.i_qs;
    let q_s = -mp.v_qs * i.i_ds + mp.v_ds * i.i_qs;
    let p_r = -v.v_dr * i.i_dr - v.v_qr * i.i_qr;
    let q_r = -v.v_qr * i.i_dr + v.v_dr * i.i_qr;
    Powers {
        p_s,
        q_s,
        p_r,
        q_r,
        p: p_s + p_r,
        q: q_s + q_r,
    }
}

/// Electromagnetic torque phi_qs i_ds - phi_ds i_qs; positive when the
/// machine acts as a generator.
pub fn electromagnetic_torque(x: [f64; 4], mp: &MachineParams) -> f64 {
    let i = currents_from_fluxes(x, mp);
    x[1] * i.i_ds - x[0] * i.i_qs
}

/// The same torque as the quadratic form in the fluxes; collapses to
/// L_m / (sigma L_s L_r) * (x1 x4 - x2 x3).
pub fn torque_quadratic_form(x: [f64; 4], mp: &MachineParams) -> f64 {
    let sigma = mp.sigma();
    let c = mp.l_m / (sigma * mp.l_s * mp.l_r);
    c * (x[0] * x[3] - x[1] * x[2])
}

/// Performance coefficient Cp(lambda, beta) with beta in degrees. May be
/// negative at large tip-speed ratios; the plant equations stay valid there.
pub fn performance_coefficient(
    lambda: f64,
    beta: f64,
    c: &CpCoeffs,
) -> Result<f64, PlantError> {
    if !(lambda > 0.0) {
        return Err(PlantError::CpDomain(format!("lambda = {lambda} must be positive")));
    }
    let denom = lambda + 0.08 * beta;
    if denom == 0.0 {
        return Err(PlantError::CpDomain("lambda + 0.08 beta = 0".into()));
    }
    let [c1, c2, c3, c4, c5, c6] = c.0;
    let inv_li = 1.0 / denom - 0.035 / (beta * beta * beta + 1.0);
    Ok(c1 * (c2 * inv_li - c3 * beta - c4) * (-c5 * inv_li).exp() + c6 * lambda)
}

/// Per-unit tip-speed ratio: lambda = lambda_nom * omega_r(pu) / V_w(pu),
/// which reaches lambda_nom at rated conditions.
pub fn tip_speed_ratio(omega_r_pu: f64, v_w_pu: f64, ap: &AeroParams) -> Result<f64, PlantError> {
    if !(v_w_pu > 0.0) {
        return Err(PlantError::NonPositiveWind(v_w_pu));
    }
    Ok(ap.lambda_nom * omega_r_pu / v_w_pu)
}

/// Per-unit mechanical power captured: pm_const * (Cp / Cp_nom) * V_w^3.
pub fn mechanical_power_pu(cp: f64, v_w_pu: f64, ap: &AeroParams) -> f64 {
    ap.pm_const() * (cp / ap.cp_nom) * v_w_pu.powi(3)
}

/// Per-unit mechanical torque T_m = P_m / omega_r, guarded against the
/// singularity at standstill.
pub fn mechanical_torque(
    omega_r: f64,
    beta: f64,
    v_w_pu: f64,
    ap: &AeroParams,
) -> Result<f64, PlantError> {
    if omega_r < OMEGA_R_GUARD {
        return Err(PlantError::RotorSpeedTooSmall(omega_r, OMEGA_R_GUARD));
    }
    let lambda = tip_speed_ratio(omega_r, v_w_pu, ap)?;
    let cp = performance_coefficient(lambda, beta, &ap.cp_coeffs)?;
    Ok(mechanical_power_pu(cp, v_w_pu, ap) / omega_r)
}

/// Full fifth-order state derivative under the given rotor voltages, pitch
/// angle and wind speed.
pub fn plant_derivatives(
    s: &PlantState,
    v: &RotorVoltages,
    beta: f64,
    v_w_pu: f64,
    mp: &MachineParams,
    ap: &AeroParams,
    dt: &DriveTrainParams,
) -> Result<[f64; 5], PlantError> {
    let dx = electrical_derivatives(s.fluxes(), s.omega_r, v, mp);
    let t_m = mechanical_torque(s.omega_r, beta, v_w_pu, ap)?;
    let t_e = electromagnetic_torque(s.fluxes(), mp);
    let domega = (t_m - t_e - dt.c_f * s.omega_r) / dt.j;
    Ok([dx[0], dx[1], dx[2], dx[3], domega])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{inv4, Mat4};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mp() -> MachineParams {
        MachineParams::default()
    }

    #[test]
    fn default_params_are_valid() {
        mp().validate().unwrap();
        AeroParams::default().validate().unwrap();
        DriveTrainParams::default().validate().unwrap();
        let sigma = mp().sigma();
        assert!((sigma - 0.10388689326429812).abs() < 1e-15);
    }

    #[test]
    fn rejects_inductance_ordering_violation() {
        let bad = MachineParams {
            l_m: 3.2,
            ..mp()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_fluxes_zero_currents() {
        let i = currents_from_fluxes([0.0; 4], &mp());
        assert_eq!(i, Currents::default());
        assert_eq!(fluxes_from_currents(&i, &mp()), [0.0; 4]);
    }

    #[test]
    fn currents_match_inductance_matrix_inversion_oracle() {
        // Invert the 4x4 inductance matrix numerically and compare against
        // the closed-form current expressions.
        let p = mp();
        let l = Mat4([
            [p.l_s, 0.0, p.l_m, 0.0],
            [0.0, p.l_s, 0.0, p.l_m],
            [p.l_m, 0.0, p.l_r, 0.0],
            [0.0, p.l_m, 0.0, p.l_r],
        ]);
        let l_inv = inv4(&l).unwrap();
        let x = [1.0, 0.0, 0.0, 0.0];
        let oracle = l_inv.mul_vec(x);
        let i = currents_from_fluxes(x, &p);
        assert!((i.i_ds - oracle[0]).abs() < 1e-12);
        assert!((i.i_qs - oracle[1]).abs() < 1e-12);
        assert!((i.i_dr - oracle[2]).abs() < 1e-12);
        assert!((i.i_qr - oracle[3]).abs() < 1e-12);
        // Closed forms at phi = (1,0,0,0).
        let sigma = p.sigma();
        assert!((i.i_ds - 1.0 / (sigma * 3.071)).abs() < 1e-12);
        assert!((i.i_dr + 2.9 / (sigma * 3.071 * 3.056)).abs() < 1e-12);
        assert_eq!(i.i_qs, 0.0);
        assert_eq!(i.i_qr, 0.0);
    }

    #[test]
    fn flux_example_direct_evaluation() {
        let i = Currents {
            i_ds: 1.0,
            i_qs: 0.0,
            i_dr: 1.0,
            i_qr: 0.0,
        };
        let x = fluxes_from_currents(&i, &mp());
        assert!((x[0] - 5.971).abs() < 1e-12);
        assert!((x[2] - 5.956).abs() < 1e-12);
    }

    #[test]
    fn flux_current_round_trip() {
        let p = mp();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let x: [f64; 4] = std::array::from_fn(|_| rng.random_range(-3.0..3.0));
            let back = fluxes_from_currents(&currents_from_fluxes(x, &p), &p);
            for k in 0..4 {
                assert!((back[k] - x[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matrix_and_scalar_derivative_paths_agree() {
        let p = mp();
        let a = a_matrix(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let x: [f64; 4] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
            let omega_r = rng.random_range(0.1..1.5);
            let v = RotorVoltages {
                v_dr: rng.random_range(-1.0..1.0),
                v_qr: rng.random_range(-1.0..1.0),
            };
            let scalar = electrical_derivatives(x, omega_r, &v, &p);
            let ax = a.mul_vec(x);
            let matrix = [
                ax[0] + p.v_ds,
                ax[1] + p.v_qs,
                ax[2] + v.v_dr - omega_r * x[3],
                ax[3] + v.v_qr + omega_r * x[2],
            ];
            for k in 0..4 {
                assert!((scalar[k] - matrix[k]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_state_derivative_is_input_only() {
        let p = MachineParams {
            v_ds: 0.0,
            v_qs: 0.0,
            ..mp()
        };
        let d = electrical_derivatives([0.0; 4], 0.7, &RotorVoltages::default(), &p);
        assert_eq!(d, [0.0; 4]);
    }

    #[test]
    fn power_sign_convention_generating() {
        // Pure-resistive generating test vector: stator current opposing
        // stator voltage means injection into the grid.
        let p = mp();
        let i = Currents {
            i_ds: -1.0,
            ..Default::default()
        };
        let out = powers(&RotorVoltages::default(), &i, &p);
        assert_eq!(out.p, 1.0);
        assert_eq!(out.q, 0.0);
        assert!(out.p > 0.0);
    }

    #[test]
    fn powers_match_complex_arithmetic_oracle() {
        // S = -(v_d + j v_q)(i_d + j i_q)* summed over both windings.
        let p = mp();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..300 {
            let v = RotorVoltages {
                v_dr: rng.random_range(-2.0..2.0),
                v_qr: rng.random_range(-2.0..2.0),
            };
            let i = Currents {
                i_ds: rng.random_range(-2.0..2.0),
                i_qs: rng.random_range(-2.0..2.0),
                i_dr: rng.random_range(-2.0..2.0),
                i_qr: rng.random_range(-2.0..2.0),
            };
            let out = powers(&v, &i, &p);
            let s_stator = (
                -(p.v_ds * i.i_ds + p.v_qs * i.i_qs),
                -(p.v_qs * i.i_ds - p.v_ds * i.i_qs),
            );
            let s_rotor = (
                -(v.v_dr * i.i_dr + v.v_qr * i.i_qr),
                -(v.v_qr * i.i_dr - v.v_dr * i.i_qr),
            );
            assert!((out.p - (s_stator.0 + s_rotor.0)).abs() < 1e-13);
            assert!((out.q - (s_stator.1 + s_rotor.1)).abs() < 1e-13);
        }
    }

    #[test]
    fn torque_paths_agree() {
        let p = mp();
        assert_eq!(electromagnetic_torque([0.0; 4], &p), 0.0);
        // x = (0,1,0,0): i_ds vanishes with phi_ds and phi_dr, so T_e = 0.
        let te = electromagnetic_torque([0.0, 1.0, 0.0, 0.0], &p);
        assert_eq!(te, 0.0);
        // x = (1,0,0,1): T_e = L_m / (sigma L_s L_r).
        let te = electromagnetic_torque([1.0, 0.0, 0.0, 1.0], &p);
        let c = p.l_m / (p.sigma() * p.l_s * p.l_r);
        assert!((te - c).abs() < 1e-13);
        // symmetric state: both torque paths vanish identically
        assert_eq!(
            electromagnetic_torque([1.0, 1.0, 1.0, 1.0], &p),
            torque_quadratic_form([1.0, 1.0, 1.0, 1.0], &p)
        );
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..500 {
            let x: [f64; 4] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
            let a = electromagnetic_torque(x, &p);
            let b = torque_quadratic_form(x, &p);
            assert!((a - b).abs() < 1e-13, "paths diverge at {x:?}");
        }
    }

    #[test]
    fn cp_nominal_peak() {
        let cp = performance_coefficient(8.1, 0.0, &CpCoeffs::nominal()).unwrap();
        assert!((cp - 0.48).abs() < 0.0005, "Cp(8.1, 0) = {cp}");
    }

    #[test]
    fn cp_perturbed_peak() {
        let cp = performance_coefficient(8.45, 0.0, &CpCoeffs::perturbed()).unwrap();
        assert!((cp - 0.39).abs() < 0.005, "actual Cp(8.45, 0) = {cp}");
    }

    #[test]
    fn cp_bounded_by_linear_growth() {
        // Cp(lambda, 0) <= c * lambda over the scanned range. The grid oracle
        // puts the worst ratio at the Cp peak (lambda ~ 6.75, ratio ~ 0.0647),
        // so the certified constant is 0.07.
        let c = CpCoeffs::nominal();
        let mut lambda = 0.1;
        let mut worst: f64 = 0.0;
        while lambda <= 100.0 {
            let cp = performance_coefficient(lambda, 0.0, &c).unwrap();
            worst = worst.max(cp / lambda);
            assert!(cp <= 0.07 * lambda + 1e-12, "Cp({lambda}) = {cp}");
            lambda += 0.05;
        }
        assert!((worst - 0.0647).abs() < 0.001, "grid oracle: worst ratio {worst}");
    }

    #[test]
    fn cp_gradient_bounded_on_plot_grid() {
        // Finite-difference gradient stays bounded over the contour range.
        let c = CpCoeffs::nominal();
        let h = 1e-5;
        let mut max_grad = 0.0f64;
        for i in 0..=130 {
            let lambda = 2.0 + 0.1 * i as f64;
            for j in 0..=150 {
                let beta = 0.1 * j as f64;
                let dl = (performance_coefficient(lambda + h, beta, &c).unwrap()
                    - performance_coefficient(lambda - h, beta, &c).unwrap())
                    / (2.0 * h);
                let db = (performance_coefficient(lambda, beta + h, &c).unwrap()
                    - performance_coefficient(lambda, beta - h, &c).unwrap())
                    / (2.0 * h);
                max_grad = max_grad.max(dl.abs()).max(db.abs());
            }
        }
        assert!(max_grad < 10.0, "gradient magnitude {max_grad}");
    }

    #[test]
    fn cp_positive_near_zero_lambda() {
        // For each beta there is an interval (0, lambda_1) of positive Cp.
        let c = CpCoeffs::nominal();
        for j in 0..=15 {
            let beta = j as f64;
            let found = (1..200)
                .map(|k| 0.05 * k as f64)
                .any(|l| performance_coefficient(l, beta, &c).unwrap() > 0.0);
            assert!(found, "no positive Cp interval at beta = {beta}");
        }
    }

    #[test]
    fn cp_rejects_bad_domain() {
        assert!(performance_coefficient(0.0, 0.0, &CpCoeffs::nominal()).is_err());
        assert!(performance_coefficient(-1.0, 0.0, &CpCoeffs::nominal()).is_err());
    }

    #[test]
    fn tip_speed_ratio_examples() {
        let ap = AeroParams::default();
        assert!((tip_speed_ratio(1.0, 1.0, &ap).unwrap() - 8.1).abs() < 1e-15);
        assert!((tip_speed_ratio(0.5, 1.0, &ap).unwrap() - 4.05).abs() < 1e-15);
        let l1 = tip_speed_ratio(0.7, 0.9, &ap).unwrap();
        let l2 = tip_speed_ratio(1.4, 1.8, &ap).unwrap();
        assert!((l1 - l2).abs() < 1e-15, "lambda must be scale invariant");
        assert!(tip_speed_ratio(1.0, 0.0, &ap).is_err());
    }

    #[test]
    fn mechanical_power_examples() {
        let ap = AeroParams::default();
        assert!((ap.pm_const() - 0.657).abs() < 1e-12);
        assert!((mechanical_power_pu(0.48, 1.0, &ap) - 0.657).abs() < 1e-12);
        assert_eq!(mechanical_power_pu(0.0, 1.0, &ap), 0.0);
        assert!((mechanical_power_pu(0.48, 0.6, &ap) - 0.657 * 0.216).abs() < 1e-12);
    }

    #[test]
    fn mechanical_torque_examples() {
        let ap = AeroParams::default();
        // At rated conditions lambda = 8.1 so Cp is essentially 0.48.
        let tm = mechanical_torque(1.0, 0.0, 1.0, &ap).unwrap();
        assert!((tm - 0.657).abs() < 2e-4, "T_m = {tm}");
        // T_m * omega_r = P_m exactly.
        let omega = 0.73;
        let tm = mechanical_torque(omega, 0.0, 1.0, &ap).unwrap();
        let lambda = tip_speed_ratio(omega, 1.0, &ap).unwrap();
        let cp = performance_coefficient(lambda, 0.0, &ap.cp_coeffs).unwrap();
        assert!((tm * omega - mechanical_power_pu(cp, 1.0, &ap)).abs() < 1e-15);
        assert!(mechanical_torque(1e-9, 0.0, 1.0, &ap).is_err());
    }

    #[test]
    fn halving_rotor_speed_doubles_torque_at_fixed_cp() {
        // Compare through P_m directly: T_m = P_m / omega.
        let ap = AeroParams::default();
        let pm = mechanical_power_pu(0.4, 1.0, &ap);
        assert!((pm / 0.5 - 2.0 * (pm / 1.0)).abs() < 1e-12);
    }

    #[test]
    fn plant_derivatives_stack_components() {
        let p = mp();
        let ap = AeroParams::default();
        let dt = DriveTrainParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let s = PlantState::from_fluxes(
                std::array::from_fn(|_| rng.random_range(-2.0..2.0)),
                rng.random_range(0.2..1.5),
            );
            let v = RotorVoltages {
                v_dr: rng.random_range(-1.0..1.0),
                v_qr: rng.random_range(-1.0..1.0),
            };
            let beta = rng.random_range(0.0..10.0);
            let v_w = rng.random_range(0.5..1.2);
            let d = plant_derivatives(&s, &v, beta, v_w, &p, &ap, &dt).unwrap();
            let dx = electrical_derivatives(s.fluxes(), s.omega_r, &v, &p);
            for k in 0..4 {
                assert_eq!(d[k], dx[k]);
            }
            let expect = (mechanical_torque(s.omega_r, beta, v_w, &ap).unwrap()
                - electromagnetic_torque(s.fluxes(), &p)
                - dt.c_f * s.omega_r)
                / dt.j;
            assert_eq!(d[4], expect);
        }
    }

    #[test]
    fn friction_only_decay() {
        let p = MachineParams {
            v_ds: 0.0,
            v_qs: 0.0,
            ..mp()
        };
        let ap = AeroParams {
            cp_coeffs: CpCoeffs([0.0; 6]),
            ..AeroParams::default()
        };
        let dt = DriveTrainParams::default();
        let s = PlantState::from_fluxes([0.0; 4], 0.9);
        let d = plant_derivatives(&s, &RotorVoltages::default(), 0.0, 1.0, &p, &ap, &dt).unwrap();
        assert!((d[4] + dt.c_f * 0.9 / dt.j).abs() < 1e-15);
    }
}
