//! The three-stage nonlinear controller: feedback linearization with pole
//! placement on the electrical subsystem, a clamped speed loop on the
//! reduced mechanical model, and a slow gradient flow steering the
//! setpoints (omega_rd, theta, beta) down a quadratic power-tracking
//! objective.

use crate::numerics::{
    eig4, eig_sym2, inv4, Mat2, Mat4, NumericsError, INPUT_MAP_B,
};
use crate::plant::{
    self, a_matrix, currents_from_fluxes, fluxes_from_currents, mechanical_torque, powers,
    AeroParams, Currents, DriveTrainParams, MachineParams, PlantError, RotorVoltages,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("closed loop A - BK is not asymptotically stable (max Re = {0:.6})")]
    UnstableClosedLoop(f64),
    #[error("torque Hessian is not positive definite (q1 = {q1:.3e}, minor = {minor:.3e})")]
    SingularHessian { q1: f64, minor: f64 },
    #[error("a' composite path {composite:.9} disagrees with closed form {closed:.9}")]
    APrimeMismatch { composite: f64, closed: f64 },
    #[error("no sign change of g(omega_r) found up to {0:.3e} pu")]
    NoCriticalRoot(f64),
    #[error("non-finite measurement: {0}")]
    NonFiniteMeasurement(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error("invalid controller parameter: {0}")]
    InvalidParameter(String),
}

/// Weights of the quadratic power-tracking objective; the weight matrix
/// must be positive definite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectiveWeights {
    pub w_p: f64,
    pub w_q: f64,
    pub w_pq: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        ObjectiveWeights {
            w_p: 10.0,
            w_q: 1.0,
            w_pq: 0.0,
        }
    }
}

impl ObjectiveWeights {
    pub fn validate(&self) -> Result<(), ControllerError> {
        if !(self.w_p > 0.0 && self.w_p * self.w_q - self.w_pq * self.w_pq > 0.0) {
            return Err(ControllerError::InvalidParameter(
                "objective weight matrix must be positive definite".into(),
            ));
        }
        Ok(())
    }
}

/// Speed-loop gain and the three gradient-flow rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradientGains {
    pub alpha: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
}

impl Default for GradientGains {
    fn default() -> Self {
        GradientGains {
            alpha: 10.0,
            eps1: 4e-3,
            eps2: 1e-4,
            eps3: 2.0,
        }
    }
}

impl GradientGains {
    pub fn validate(&self) -> Result<(), ControllerError> {
        if self.alpha > 0.0 && self.eps1 > 0.0 && self.eps2 > 0.0 && self.eps3 > 0.0 {
            Ok(())
        } else {
            Err(ControllerError::InvalidParameter(
                "alpha and eps1..eps3 must be positive".into(),
            ))
        }
    }
}

/// The slow controller states driven by the gradient flow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControllerState {
    /// Desired rotor speed, pu.
    pub omega_rd: f64,
    /// Redundancy angle, radians in [0, 2pi).
    pub theta: f64,
    /// Blade pitch angle, degrees in [beta_min, beta_max].
    pub beta: f64,
}

/// Everything derived from the machine parameters and the feedback gain:
/// the closed-loop inverse, the torque-quadratic constants, its
/// eigenstructure and the polar-coordinate machinery.
#[derive(Clone, Copy, Debug)]
pub struct SynthesizedGains {
    pub k: [[f64; 4]; 2],
    /// (A - BK)^-1.
    pub d: Mat4,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub b1: f64,
    pub b2: f64,
    pub a: f64,
    /// Minimum achievable electromagnetic torque, always negative.
    pub a_prime: f64,
    /// Orthogonal eigenvector matrix of the torque Hessian.
    pub m: Mat2,
    /// Diagonal eigenvalue matrix, descending.
    pub dd: Mat2,
    /// Cached M D^{-1/2} for the polar-to-u map.
    m_d_isqrt: Mat2,
    /// Cached unconstrained minimizer -Q^{-1} b / 2 of the torque quadratic.
    u_vertex: [f64; 2],
}

/// Closed form of Eq.-style minimum torque: -(v_ds^2 + v_qs^2)/(4 w_s R_s).
pub fn a_prime_closed_form(mp: &MachineParams) -> f64 {
    -(mp.v_ds * mp.v_ds + mp.v_qs * mp.v_qs) / (4.0 * mp.omega_s * mp.r_s)
}

/// Derive all controller constants from the machine parameters and a
/// stabilizing feedback gain.
pub fn synthesize(mp: &MachineParams, k: [[f64; 4]; 2]) -> Result<SynthesizedGains, ControllerError> {
    mp.validate()?;
    let a_mat = a_matrix(mp);
    let mut acl = a_mat;
    for i in 0..4 {
        for j in 0..4 {
            acl.0[i][j] -= INPUT_MAP_B[i][0] * k[0][j] + INPUT_MAP_B[i][1] * k[1][j];
        }
    }
    let spectrum = eig4(&acl)?;
    let max_re = spectrum.max_real_part();
    if max_re >= 0.0 {
        return Err(ControllerError::UnstableClosedLoop(max_re));
    }
    let d = inv4(&acl)?;
    let sigma = mp.sigma();
    let c = mp.l_m / (sigma * mp.l_s * mp.l_r);
    let e = |i: usize| d[(i, 0)] * mp.v_ds + d[(i, 1)] * mp.v_qs;
    let q1 = c * (d[(0, 2)] * d[(3, 2)] - d[(1, 2)] * d[(2, 2)]);
    let q2 = 0.5
        * c
        * (d[(0, 2)] * d[(3, 3)] + d[(0, 3)] * d[(3, 2)]
            - d[(1, 2)] * d[(2, 3)]
            - d[(1, 3)] * d[(2, 2)]);
    let q3 = c * (d[(0, 3)] * d[(3, 3)] - d[(1, 3)] * d[(2, 3)]);
    let b1 = c * (e(0) * d[(3, 2)] + d[(0, 2)] * e(3) - e(1) * d[(2, 2)] - d[(1, 2)] * e(2));
    let b2 = c * (e(0) * d[(3, 3)] + d[(0, 3)] * e(3) - e(1) * d[(2, 3)] - d[(1, 3)] * e(2));
    let a = c * (e(0) * e(3) - e(1) * e(2));

    let minor = q1 * q3 - q2 * q2;
    if !(q1 > 0.0 && minor > 0.0) {
        return Err(ControllerError::SingularHessian { q1, minor });
    }
    let (m, dd) = eig_sym2(q1, q2, q3);
    let q = Mat2([[q1, q2], [q2, q3]]);
    let qinv_b = q.solve([b1, b2]).ok_or(ControllerError::SingularHessian {
        q1,
        minor,
    })?;
    let a_prime = a - 0.25 * (b1 * qinv_b[0] + b2 * qinv_b[1]);
    let closed = a_prime_closed_form(mp);
    if (a_prime - closed).abs() > 1e-6 * closed.abs() {
        return Err(ControllerError::APrimeMismatch {
            composite: a_prime,
            closed,
        });
    }
    let m_d_isqrt = m.mul(&Mat2::diag(
        1.0 / dd.0[0][0].sqrt(),
        1.0 / dd.0[1][1].sqrt(),
    ));
    Ok(SynthesizedGains {
        k,
        d,
        q1,
        q2,
        q3,
        b1,
        b2,
        a,
        a_prime,
        m,
        dd,
        m_d_isqrt,
        u_vertex: [-0.5 * qinv_b[0], -0.5 * qinv_b[1]],
    })
}

/// Rotor voltages cancelling the speed bilinearity and applying the state
/// feedback: v_dr = w_r x4 - K1 x + u1, v_qr = -w_r x3 - K2 x + u2.
pub fn feedback_linearize(
    x: [f64; 4],
    omega_r: f64,
    u: [f64; 2],
    g: &SynthesizedGains,
) -> RotorVoltages {
    let k1x: f64 = (0..4).map(|j| g.k[0][j] * x[j]).sum();
    let k2x: f64 = (0..4).map(|j| g.k[1][j] * x[j]).sum();
    RotorVoltages {
        v_dr: omega_r * x[3] - k1x + u[0],
        v_qr: -omega_r * x[2] - k2x + u[1],
    }
}

/// Equilibrium fluxes of the fast electrical loop for slowly varying u:
/// x = -(A - BK)^{-1} [v_ds v_qs u1 u2]^T.
pub fn equilibrium_fluxes(u: [f64; 2], g: &SynthesizedGains, mp: &MachineParams) -> [f64; 4] {
    let v = [mp.v_ds, mp.v_qs, u[0], u[1]];
    let x = g.d.mul_vec(v);
    [-x[0], -x[1], -x[2], -x[3]]
}

/// Invert the polar coordinate change: u = M D^{-1/2} z - Q^{-1} b / 2
/// with z = r (cos theta, sin theta).
pub fn u_from_polar(r: f64, theta: f64, g: &SynthesizedGains) -> [f64; 2] {
    let z = [r * theta.cos(), r * theta.sin()];
    let w = g.m_d_isqrt.mul_vec(z);
    [w[0] + g.u_vertex[0], w[1] + g.u_vertex[1]]
}

/// Electromagnetic torque as the quadratic in (u1, u2).
pub fn torque_from_u(u: [f64; 2], g: &SynthesizedGains) -> f64 {
    g.q1 * u[0] * u[0]
        + 2.0 * g.q2 * u[0] * u[1]
        + g.q3 * u[1] * u[1]
        + g.b1 * u[0]
        + g.b2 * u[1]
        + g.a
}

/// Scalar objective (1/2) [dP dQ] W [dP; dQ].
pub fn objective_value(p: f64, q: f64, p_d: f64, q_d: f64, w: &ObjectiveWeights) -> f64 {
    let dp = p - p_d;
    let dq = q - q_d;
    0.5 * (w.w_p * dp * dp + 2.0 * w.w_pq * dp * dq + w.w_q * dq * dq)
}

/// The controller's belief of the plant plus all derived machinery.
#[derive(Clone, Debug)]
pub struct Controller {
    pub gains: SynthesizedGains,
    pub weights: ObjectiveWeights,
    pub flow: GradientGains,
    pub machine: MachineParams,
    pub aero: AeroParams,
    pub drive: DriveTrainParams,
}

/// What the controller reads each update tick.
#[derive(Clone, Copy, Debug)]
pub struct Measurements {
    pub currents: Currents,
    pub omega_r: f64,
    pub v_w_meas: f64,
}

/// One controller evaluation: held algebraic outputs plus the setpoint
/// derivatives to integrate until the next tick.
#[derive(Clone, Copy, Debug)]
pub struct ControllerOutput {
    pub rotor: RotorVoltages,
    pub beta: f64,
    /// d/dt of (omega_rd, theta, beta).
    pub setpoint_dot: [f64; 3],
    pub r_squared: f64,
    pub u: [f64; 2],
}

impl Controller {
    pub fn new(
        gains: SynthesizedGains,
        weights: ObjectiveWeights,
        flow: GradientGains,
        machine: MachineParams,
        aero: AeroParams,
        drive: DriveTrainParams,
    ) -> Result<Self, ControllerError> {
        weights.validate()?;
        flow.validate()?;
        machine.validate()?;
        aero.validate()?;
        drive.validate()?;
        Ok(Controller {
            gains,
            weights,
            flow,
            machine,
            aero,
            drive,
        })
    }

    /// g(omega_r, beta, V_w) = T_m - a' - C_f omega_r, evaluated with the
    /// belief model.
    pub fn g_function(&self, omega_r: f64, beta: f64, v_w: f64) -> Result<f64, ControllerError> {
        let t_m = mechanical_torque(omega_r, beta, v_w, &self.aero)?;
        Ok(t_m - self.gains.a_prime - self.drive.c_f * omega_r)
    }

    /// Clamped speed-loop control: r^2 = max{g + alpha (omega_r - omega_rd), 0}.
    pub fn r_squared(
        &self,
        omega_r: f64,
        omega_rd: f64,
        beta: f64,
        v_w: f64,
    ) -> Result<f64, ControllerError> {
        let g = self.g_function(omega_r, beta, v_w)?;
        Ok((g + self.flow.alpha * (omega_r - omega_rd)).max(0.0))
    }

    /// First positive root of g(., beta, V_w): geometric scan for a sign
    /// change, then bisection to 1e-10 relative width.
    pub fn critical_root(&self, beta: f64, v_w: f64) -> Result<f64, ControllerError> {
        const SCAN_START: f64 = 1e-3;
        const SCAN_BOUND: f64 = 16_777_216.0; // 2^24 pu
        let mut lo = SCAN_START;
        let mut g_lo = self.g_function(lo, beta, v_w)?;
        if g_lo <= 0.0 {
            return Err(ControllerError::NoCriticalRoot(lo));
        }
        let mut hi = lo;
        loop {
            hi *= 2.0;
            if hi > SCAN_BOUND {
                return Err(ControllerError::NoCriticalRoot(SCAN_BOUND));
            }
            let g_hi = self.g_function(hi, beta, v_w)?;
            if g_hi <= 0.0 {
                break;
            }
            lo = hi;
            g_lo = g_hi;
        }
        let _ = g_lo;
        while (hi - lo) / hi > 1e-10 {
            let mid = 0.5 * (lo + hi);
            if self.g_function(mid, beta, v_w)? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Predicted total powers along the reduced model: assumes the speed
    /// loop has converged (omega_r = omega_rd) and the electrical dynamics
    /// sit at their equilibrium for the commanded u.
    pub fn predicted_powers(
        &self,
        cs: &ControllerState,
        v_w: f64,
    ) -> Result<crate::plant::Powers, ControllerError> {
        let r2 = self.r_squared(cs.omega_rd, cs.omega_rd, cs.beta, v_w)?;
        let u = u_from_polar(r2.sqrt(), cs.theta, &self.gains);
        let x = equilibrium_fluxes(u, &self.gains, &self.machine);
        let i = currents_from_fluxes(x, &self.machine);
        let v = feedback_linearize(x, cs.omega_rd, u, &self.gains);
        Ok(powers(&v, &i, &self.machine))
    }

    /// The composite objective f(omega_rd, theta, beta; V_w, P_d, Q_d).
    pub fn composite_objective(
        &self,
        cs: &ControllerState,
        v_w: f64,
        p_d: f64,
        q_d: f64,
    ) -> Result<f64, ControllerError> {
        let pw = self.predicted_powers(cs, v_w)?;
        Ok(objective_value(pw.p, pw.q, p_d, q_d, &self.weights))
    }

    /// Central finite-difference gradient of f in (omega_rd, theta, beta)
    /// with per-coordinate relative steps; one-sided at the beta bounds.
    pub fn gradient(
        &self,
        cs: &ControllerState,
        v_w: f64,
        p_d: f64,
        q_d: f64,
    ) -> Result<[f64; 3], ControllerError> {
        let f = |omega_rd: f64, theta: f64, beta: f64| -> Result<f64, ControllerError> {
            self.composite_objective(
                &ControllerState {
                    omega_rd,
                    theta,
                    beta,
                },
                v_w,
                p_d,
                q_d,
            )
        };
        let step = |x: f64| (1e-6f64).max(1e-6 * x.abs());
        let h0 = step(cs.omega_rd);
        let g0 = (f(cs.omega_rd + h0, cs.theta, cs.beta)?
            - f(cs.omega_rd - h0, cs.theta, cs.beta)?)
            / (2.0 * h0);
        let h1 = step(cs.theta);
        let g1 = (f(cs.omega_rd, cs.theta + h1, cs.beta)?
            - f(cs.omega_rd, cs.theta - h1, cs.beta)?)
            / (2.0 * h1);
        let h2 = step(cs.beta);
        let lo = (cs.beta - h2).max(self.aero.beta_min);
        let hi = (cs.beta + h2).min(self.aero.beta_max);
        let g2 = if hi > lo {
            (f(cs.omega_rd, cs.theta, hi)? - f(cs.omega_rd, cs.theta, lo)?) / (hi - lo)
        } else {
            0.0
        };
        Ok([g0, g1, g2])
    }

    /// Gradient-flow setpoint derivatives with projection at the beta
    /// bounds (outward components are zeroed).
    pub fn setpoint_derivatives(&self, cs: &ControllerState, grad: [f64; 3]) -> [f64; 3] {
        let mut dot = [
            -self.flow.eps1 * grad[0],
            -self.flow.eps2 * grad[1],
            -self.flow.eps3 * grad[2],
        ];
        let at_min = cs.beta <= self.aero.beta_min && dot[2] < 0.0;
        let at_max = cs.beta >= self.aero.beta_max && dot[2] > 0.0;
        if at_min || at_max {
            dot[2] = 0.0;
        }
        dot
    }

    /// One full controller evaluation from measurements: the speed loop uses
    /// the measured rotor speed, the voltage law the measured fluxes; the
    /// gradient flow differentiates the composite model.
    pub fn output(
        &self,
        cs: &ControllerState,
        meas: &Measurements,
        p_d: f64,
        q_d: f64,
    ) -> Result<ControllerOutput, ControllerError> {
        let finite = [
            meas.currents.i_ds,
            meas.currents.i_qs,
            meas.currents.i_dr,
            meas.currents.i_qr,
            meas.omega_r,
            meas.v_w_meas,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(ControllerError::NonFiniteMeasurement(format!("{meas:?}")));
        }
        let x = fluxes_from_currents(&meas.currents, &self.machine);
        let r2 = self.r_squared(meas.omega_r, cs.omega_rd, cs.beta, meas.v_w_meas)?;
        let u = u_from_polar(r2.sqrt(), cs.theta, &self.gains);
        let rotor = feedback_linearize(x, meas.omega_r, u, &self.gains);
        let grad = self.gradient(cs, meas.v_w_meas, p_d, q_d)?;
        let setpoint_dot = self.setpoint_derivatives(cs, grad);
        Ok(ControllerOutput {
            rotor,
            beta: cs.beta,
            setpoint_dot,
            r_squared: r2,
            u,
        })
    }

    /// Deterministic scan of the redundancy angle minimizing f at a fixed
    /// operating point; used to initialize theta.
    pub fn theta_scan(
        &self,
        omega_rd: f64,
        beta: f64,
        v_w: f64,
        p_d: f64,
        q_d: f64,
        samples: usize,
    ) -> Result<f64, ControllerError> {
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..samples {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / samples as f64;
            let f = self.composite_objective(
                &ControllerState {
                    omega_rd,
                    theta,
                    beta,
                },
                v_w,
                p_d,
                q_d,
            )?;
            if f < best.0 {
                best = (f, theta);
            }
        }
        Ok(best.1)
    }
}

/// Brute-force minimizer of the composite objective over
/// (omega_rd, theta, beta): full grid pass, then coordinate golden-section
/// refinement. Serves as the independent oracle for the gradient flow.
pub fn grid_minimize(
    ctrl: &Controller,
    v_w: f64,
    p_d: f64,
    q_d: f64,
    omega_range: (f64, f64),
    n_omega: usize,
    n_theta: usize,
    n_beta: usize,
) -> Result<(ControllerState, f64), ControllerError> {
    let (w_lo, w_hi) = omega_range;
    let (b_lo, b_hi) = (ctrl.aero.beta_min, ctrl.aero.beta_max);
    let mut best = (
        ControllerState {
            omega_rd: w_lo,
            theta: 0.0,
            beta: b_lo,
        },
        f64::INFINITY,
    );
    for iw in 0..n_omega {
        let omega_rd = w_lo + (w_hi - w_lo) * iw as f64 / (n_omega - 1) as f64;
        for it in 0..n_theta {
            let theta = 2.0 * std::f64::consts::PI * it as f64 / n_theta as f64;
            for ib in 0..n_beta {
                let beta = b_lo + (b_hi - b_lo) * ib as f64 / (n_beta - 1) as f64;
                let cs = ControllerState {
                    omega_rd,
                    theta,
                    beta,
                };
                let f = ctrl.composite_objective(&cs, v_w, p_d, q_d)?;
                if f < best.1 {
                    best = (cs, f);
                }
            }
        }
    }
    // Coordinate golden-section refinement around the best cell.
    let golden = |mut lo: f64, mut hi: f64, eval: &dyn Fn(f64) -> f64| -> f64 {
        let phi = (5.0f64.sqrt() - 1.0) / 2.0;
        let mut x1 = hi - phi * (hi - lo);
        let mut x2 = lo + phi * (hi - lo);
        let mut f1 = eval(x1);
        let mut f2 = eval(x2);
        for _ in 0..60 {
            if f1 < f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - phi * (hi - lo);
                f1 = eval(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + phi * (hi - lo);
                f2 = eval(x2);
            }
        }
        0.5 * (lo + hi)
    };
    let d_omega = (w_hi - w_lo) / (n_omega - 1) as f64;
    let d_theta = 2.0 * std::f64::consts::PI / n_theta as f64;
    let d_beta = if n_beta > 1 {
        (b_hi - b_lo) / (n_beta - 1) as f64
    } else {
        0.0
    };
    let mut cs = best.0;
    for _ in 0..3 {
        let c = cs;
        cs.omega_rd = golden(
            (c.omega_rd - d_omega).max(w_lo),
            (c.omega_rd + d_omega).min(w_hi),
            &|w| {
                ctrl.composite_objective(&ControllerState { omega_rd: w, ..c }, v_w, p_d, q_d)
                    .unwrap_or(f64::INFINITY)
            },
        );
        let c = cs;
        cs.theta = golden(c.theta - d_theta, c.theta + d_theta, &|t| {
            ctrl.composite_objective(&ControllerState { theta: t, ..c }, v_w, p_d, q_d)
                .unwrap_or(f64::INFINITY)
        });
        if d_beta > 0.0 {
            let c = cs;
            cs.beta = golden(
                (c.beta - d_beta).max(b_lo),
                (c.beta + d_beta).min(b_hi),
                &|b| {
                    ctrl.composite_objective(&ControllerState { beta: b, ..c }, v_w, p_d, q_d)
                        .unwrap_or(f64::INFINITY)
                },
            );
        }
    }
    cs.theta = cs.theta.rem_euclid(2.0 * std::f64::consts::PI);
    let f = ctrl.composite_objective(&cs, v_w, p_d, q_d)?;
    Ok((cs, f))
}

/// Reduced first-order speed-loop dynamics J w' = min{alpha (w_rd - w), g}.
/// Exposed for the convergence analysis and its tests.
pub fn reduced_speed_derivative(
    ctrl: &Controller,
    omega_r: f64,
    omega_rd: f64,
    beta: f64,
    v_w: f64,
) -> Result<f64, ControllerError> {
    let g = ctrl.g_function(omega_r, beta, v_w)?;
    Ok((ctrl.flow.alpha * (omega_rd - omega_r)).min(g) / ctrl.drive.j)
}
