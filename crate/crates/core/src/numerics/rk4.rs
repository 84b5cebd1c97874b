use super::NumericsError;

/// One classical 4th-order Runge-Kutta step of size `h` from `(t, y)`.
///
/// Returns an error when the update produces a non-finite component, so a
/// diverging simulation aborts with the offending time instead of spreading
/// NaNs through downstream records.
pub fn rk4_step<const N: usize>(
    f: &mut dyn FnMut(f64, &[f64; N]) -> [f64; N],
    t: f64,
    y: &[f64; N],
    h: f64,
) -> Result<[f64; N], NumericsError> {
    debug_assert!(h > 0.0);
    let k1 = f(t, y);
    let mut y2 = *y;
    for i in 0..N {
        y2[i] += 0.5 * h * k1[i];
    }
    let k2 = f(t + 0.5 * h, &y2);
    let mut y3 = *y;
    for i in 0..N {
        y3[i] += 0.5 * h * k2[i];
    }
    let k3 = f(t + 0.5 * h, &y3);
    let mut y4 = *y;
    for i in 0..N {
        y4[i] += h * k3[i];
    }
    let k4 = f(t + h, &y4);
    let mut out = *y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        if !out[i].is_finite() {
            return Err(NumericsError::NonFinite {
                t: t + h,
                context: format!("state component {i} after RK4 step from {y:?}"),
            });
        }
    }
    Ok(out)
}
