use super::mat::{Complex, ComplexSpectrum, Mat2, Mat4};
use super::NumericsError;

const MAX_SWEEPS: usize = 400; // 100 * n

/// Diagonal similarity scaling by powers of two so row and column norms
/// balance; leaves eigenvalues exact while much improving their computed
/// accuracy on badly scaled inputs (e.g. closed loops with large gains).
fn balance(a: &mut [[f64; 4]; 4]) {
    const RADIX: f64 = 2.0;
    let n = 4;
    loop {
        let mut done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let mut g = r / RADIX;
            let mut f = 1.0;
            let s = c + r;
            let mut c2 = c;
            while c2 < g {
                f *= RADIX;
                c2 *= RADIX * RADIX;
            }
            g = r * RADIX;
            while c2 > g {
                f /= RADIX;
                c2 /= RADIX * RADIX;
            }
            if (c2 + r) / f < 0.95 * s {
                done = false;
                let g = 1.0 / f;
                for j in 0..n {
                    a[i][j] *= g;
                }
                for j in 0..n {
                    a[j][i] *= f;
                }
            }
        }
        if done {
            break;
        }
    }
}

/// Householder reduction of a (balanced) 4x4 matrix to upper Hessenberg form.
fn hessenberg(m: &Mat4) -> [[f64; 4]; 4] {
    let mut a = m.0;
    let n = 4;
    for k in 0..n - 2 {
        let mut scale = 0.0;
        for i in k + 1..n {
            scale += a[i][k].abs();
        }
        if scale == 0.0 {
            continue;
        }
        let mut v = [0.0; 4];
        let mut sigma = 0.0;
        for i in k + 1..n {
            v[i] = a[i][k] / scale;
            sigma += v[i] * v[i];
        }
        let mut alpha = sigma.sqrt();
        if v[k + 1] > 0.0 {
            alpha = -alpha;
        }
        let beta = sigma - v[k + 1] * alpha;
        if beta == 0.0 {
            continue;
        }
        v[k + 1] -= alpha;
        // A <- H A H with H = I - v v^T / beta
        for j in 0..n {
            let mut s = 0.0;
            for i in k + 1..n {
                s += v[i] * a[i][j];
            }
            s /= beta;
            for i in k + 1..n {
                a[i][j] -= s * v[i];
            }
        }
        for i in 0..n {
            let mut s = 0.0;
            for j in k + 1..n {
                s += a[i][j] * v[j];
            }
            s /= beta;
            for j in k + 1..n {
                a[i][j] -= s * v[j];
            }
        }
        a[k + 1][k] = scale * alpha;
        for i in k + 2..n {
            a[i][k] = 0.0;
        }
    }
    a
}

/// Eigenvalues of a real 4x4 matrix: Hessenberg reduction followed by
/// shifted QR iteration with Francis double shifts and deflation.
pub fn eig4(m: &Mat4) -> Result<ComplexSpectrum, NumericsError> {
    if !m.is_finite() {
        return Err(NumericsError::NonFinite {
            t: 0.0,
            context: "eig4 input".into(),
        });
    }
    let mut balanced = m.0;
    balance(&mut balanced);
    let mut h = hessenberg(&Mat4(balanced));
    let n = 4usize;
    let eps = f64::EPSILON;
    let anorm: f64 = {
        let mut s = 0.0;
        for i in 0..n {
            for j in i.saturating_sub(1)..n {
                s += h[i][j].abs();
            }
        }
        s.max(f64::MIN_POSITIVE)
    };

    let mut vals: Vec<Complex> = Vec::with_capacity(4);
    let mut t_shift = 0.0;
    let mut total_sweeps = 0usize;
    let mut nn = n as isize - 1;

    while nn >= 0 {
        let mut its = 0usize;
        'seek: loop {
            // Look for a single small subdiagonal element.
            let mut l = nn;
            while l >= 1 {
                let s = h[(l - 1) as usize][(l - 1) as usize].abs()
                    + h[l as usize][l as usize].abs();
                let s = if s == 0.0 { anorm } else { s };
                if h[l as usize][(l - 1) as usize].abs() <= eps * s {
                    h[l as usize][(l - 1) as usize] = 0.0;
                    break;
                }
                l -= 1;
            }
            let x = h[nn as usize][nn as usize];
            if l == nn {
                vals.push(Complex::real(x + t_shift));
                nn -= 1;
                break 'seek;
            }
            let y = h[(nn - 1) as usize][(nn - 1) as usize];
            let w = h[nn as usize][(nn - 1) as usize] * h[(nn - 1) as usize][nn as usize];
            if l == nn - 1 {
                // 2x2 trailing block: closed-form pair.
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                let xs = x + t_shift;
                if q >= 0.0 {
                    let z = p + z.copysign(if p == 0.0 { 1.0 } else { p });
                    let lam1 = xs + z;
                    let lam2 = if z != 0.0 { xs - w / z } else { lam1 };
                    vals.push(Complex::real(lam1));
                    vals.push(Complex::real(lam2));
                } else {
                    vals.push(Complex::new(xs + p, z));
                    vals.push(Complex::new(xs + p, -z));
                }
                nn -= 2;
                break 'seek;
            }

            if total_sweeps >= MAX_SWEEPS {
                return Err(NumericsError::NoConvergence(MAX_SWEEPS));
            }
            total_sweeps += 1;
            its += 1;

            let (mut x, mut y, mut w) = (x, y, w);
            if its == 10 || its == 20 {
                // Exceptional shift.
                t_shift += x;
                for i in 0..=nn as usize {
                    h[i][i] -= x;
                }
                let s = h[nn as usize][(nn - 1) as usize].abs()
                    + h[(nn - 1) as usize][(nn - 2) as usize].abs();
                y = 0.75 * s;
                x = y;
                w = -0.4375 * s * s;
            }

            // Form the first column of (H - a I)(H - b I) and look for two
            // consecutive small subdiagonals to start the bulge from.
            let mut mstart = nn - 2;
            let (mut p, mut q, mut r) = (0.0, 0.0, 0.0);
            while mstart >= l {
                let mu = mstart as usize;
                let z = h[mu][mu];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / h[mu + 1][mu] + h[mu][mu + 1];
                q = h[mu + 1][mu + 1] - z - rr - ss;
                r = h[mu + 2][mu + 1];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if mstart == l {
                    break;
                }
                let u = h[mu][mu - 1].abs() * (q.abs() + r.abs());
                let v = p.abs()
                    * (h[mu - 1][mu - 1].abs() + z.abs() + h[mu + 1][mu + 1].abs());
                if u <= eps * v {
                    break;
                }
                mstart -= 1;
            }
            let m0 = mstart as usize;
            for i in m0 + 2..=nn as usize {
                h[i][i - 2] = 0.0;
            }
            for i in m0 + 3..=nn as usize {
                h[i][i - 3] = 0.0;
            }

            // Double QR step (bulge chase) on rows l..=nn.
            for k in m0..nn as usize {
                if k != m0 {
                    p = h[k][k - 1];
                    q = h[k + 1][k - 1];
                    r = if k as isize != nn - 1 { h[k + 2][k - 1] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(if p == 0.0 { 1.0 } else { p });
                if s == 0.0 {
                    continue;
                }
                if k == m0 {
                    if l != mstart {
                        h[k][k - 1] = -h[k][k - 1];
                    }
                } else {
                    h[k][k - 1] = -s * x;
                }
                p += s;
                x = p / s;
                y = q / s;
                let z = r / s;
                q /= p;
                r /= p;
                for j in k..=nn as usize {
                    let mut pp = h[k][j] + q * h[k + 1][j];
                    if k as isize != nn - 1 {
                        pp += r * h[k + 2][j];
                        h[k + 2][j] -= pp * z;
                    }
                    h[k + 1][j] -= pp * y;
                    h[k][j] -= pp * x;
                }
                let mmin = (nn as usize).min(k + 3);
                for i in l as usize..=mmin {
                    let mut pp = x * h[i][k] + y * h[i][k + 1];
                    if k as isize != nn - 1 {
                        pp += z * h[i][k + 2];
                        h[i][k + 2] -= pp * r;
                    }
                    h[i][k + 1] -= pp * q;
                    h[i][k] -= pp;
                }
            }
        }
    }

    Ok(ComplexSpectrum([vals[0], vals[1], vals[2], vals[3]]))
}

/// Closed-form eigendecomposition of the symmetric matrix [[q1, q2], [q2, q3]]:
/// returns orthogonal `M` and diagonal `D` with `M^T Q M = D`, D ordered
/// descending. When q2 vanishes, the closed form for M degenerates, so the
/// identity (or the descending-order permutation) is returned instead.
pub fn eig_sym2(q1: f64, q2: f64, q3: f64) -> (Mat2, Mat2) {
    if q2.abs() < 1e-14 * q1.abs().max(q3.abs()).max(f64::MIN_POSITIVE) {
        if q1 >= q3 {
            return (Mat2::identity(), Mat2::diag(q1, q3));
        }
        return (Mat2([[0.0, 1.0], [1.0, 0.0]]), Mat2::diag(q3, q1));
    }
    // (q1+q3)^2 - 4(q1 q3 - q2^2) = (q1-q3)^2 + 4 q2^2, the stable form.
    let disc = ((q1 - q3) * (q1 - q3) + 4.0 * q2 * q2).sqrt();
    let lam1 = 0.5 * (q1 + q3 + disc);
    let lam2 = 0.5 * (q1 + q3 - disc);
    let n1 = q2.hypot(lam1 - q1);
    let n2 = (lam2 - q3).hypot(q2);
    let m = Mat2([
        [q2 / n1, (lam2 - q3) / n2],
        [(lam1 - q1) / n1, q2 / n2],
    ]);
    (m, Mat2::diag(lam1, lam2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::inv4;

    fn assert_spectrum(m: &Mat4, expect: [Complex; 4], tol: f64) {
        let got = eig4(m).unwrap();
        let d = got.max_pairing_distance(&ComplexSpectrum(expect));
        assert!(d <= tol, "distance {d:.3e} > {tol:.1e}; got {got:?}");
    }

    #[test]
    fn eig4_identity() {
        assert_spectrum(
            &Mat4::identity(),
            [Complex::real(1.0); 4],
            1e-12,
        );
    }

    #[test]
    fn eig4_diagonal() {
        assert_spectrum(
            &Mat4::diag([-15.0, -5.0, -10.0, -10.0]),
            [
                Complex::real(-15.0),
                Complex::real(-5.0),
                Complex::real(-10.0),
                Complex::real(-10.0),
            ],
            1e-12,
        );
    }

    #[test]
    fn eig4_rotation_block_has_conjugate_pair() {
        let m = Mat4([
            [0.0, 1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, -3.0, 0.0],
            [0.0, 0.0, 0.0, -7.0],
        ]);
        assert_spectrum(
            &m,
            [
                Complex::new(0.0, 1.0),
                Complex::new(0.0, -1.0),
                Complex::real(-3.0),
                Complex::real(-7.0),
            ],
            1e-12,
        );
        assert!(eig4(&m).unwrap().is_conjugate_closed(1e-12));
    }

    #[test]
    fn eig4_trace_and_det_consistency() {
        let mut state = 0x2545f4914f6cdd1du64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 6.0 - 3.0
        };
        for _ in 0..300 {
            let mut m = Mat4::zeros();
            for i in 0..4 {
                for j in 0..4 {
                    m.0[i][j] = next();
                }
            }
            let spec = eig4(&m).unwrap();
            let trace: f64 = (0..4).map(|i| m.0[i][i]).sum();
            let s = spec.sum();
            assert!((s.re - trace).abs() < 1e-10, "trace mismatch {s:?} vs {trace}");
            assert!(s.im.abs() < 1e-10);
            let p = spec.product();
            let det = m.det();
            let scale = det.abs().max(1.0);
            assert!((p.re - det).abs() <= 1e-8 * scale, "det mismatch {p:?} vs {det}");
            assert!(p.im.abs() <= 1e-8 * scale);
            assert!(spec.is_conjugate_closed(1e-8));
        }
    }

    #[test]
    fn eig4_similarity_invariance() {
        let mut state = 0x853c49e6748fea9bu64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        let base = Mat4([
            [-2.0, 1.0, 0.5, 0.0],
            [-1.0, -2.0, 0.0, 0.5],
            [0.3, 0.0, -4.0, 2.0],
            [0.0, 0.3, -2.0, -4.0],
        ]);
        let reference = eig4(&base).unwrap();
        let mut done = 0;
        while done < 50 {
            let mut p = Mat4::identity();
            for i in 0..4 {
                for j in 0..4 {
                    p.0[i][j] += 0.4 * next();
                }
            }
            let pinv = match inv4(&p) {
                Ok(x) => x,
                Err(_) => continue,
            };
            let sim = pinv.mul(&base).mul(&p);
            let got = eig4(&sim).unwrap();
            assert!(
                got.max_pairing_distance(&reference) < 1e-6,
                "similarity transform changed spectrum"
            );
            done += 1;
        }
    }

    #[test]
    fn eig_sym2_already_diagonal() {
        let (m, d) = eig_sym2(1.0, 0.0, 1.0);
        assert_eq!(m, Mat2::identity());
        assert_eq!(d, Mat2::diag(1.0, 1.0));
        // degenerate branch must still order descending
        let (m2, d2) = eig_sym2(1.0, 0.0, 5.0);
        assert_eq!(d2, Mat2::diag(5.0, 1.0));
        let q = Mat2([[1.0, 0.0], [0.0, 5.0]]);
        let rec = m2.mul(&d2).mul(&m2.transpose());
        for i in 0..2 {
            for j in 0..2 {
                assert!((rec.0[i][j] - q.0[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn eig_sym2_hand_case() {
        // [[2,1],[1,2]] has eigenvalues 3, 1 with eigenvectors (1,1), (-1,1).
        let (m, d) = eig_sym2(2.0, 1.0, 2.0);
        assert!((d.0[0][0] - 3.0).abs() < 1e-14);
        assert!((d.0[1][1] - 1.0).abs() < 1e-14);
        let s = 0.5f64.sqrt();
        let c0 = [m.0[0][0], m.0[1][0]];
        let c1 = [m.0[0][1], m.0[1][1]];
        assert!((c0[0].abs() - s).abs() < 1e-14 && (c0[1].abs() - s).abs() < 1e-14);
        assert!(c0[0] * c0[1] > 0.0, "first column should be along (1,1)");
        assert!(c1[0] * c1[1] < 0.0, "second column should be along (-1,1)");
    }

    #[test]
    fn eig_sym2_reconstruction_random() {
        let mut state = 0xda3e39cb94b95bdbu64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 8.0 - 4.0
        };
        for _ in 0..1000 {
            let (q1, q2, q3) = (next(), next(), next());
            let (m, d) = eig_sym2(q1, q2, q3);
            // orthogonality
            let mtm = m.transpose().mul(&m);
            assert!((mtm.0[0][0] - 1.0).abs() < 1e-12);
            assert!((mtm.0[1][1] - 1.0).abs() < 1e-12);
            assert!(mtm.0[0][1].abs() < 1e-12 && mtm.0[1][0].abs() < 1e-12);
            // ordering
            assert!(d.0[0][0] >= d.0[1][1]);
            assert!(d.0[0][1] == 0.0 && d.0[1][0] == 0.0);
            // reconstruction M D M^T = Q
            let rec = m.mul(&d).mul(&m.transpose());
            let q = Mat2([[q1, q2], [q2, q3]]);
            let scale = q1.abs().max(q2.abs()).max(q3.abs()).max(1.0);
            for i in 0..2 {
                for j in 0..2 {
                    assert!(
                        (rec.0[i][j] - q.0[i][j]).abs() < 1e-10 * scale,
                        "reconstruction failed for ({q1},{q2},{q3})"
                    );
                }
            }
        }
    }
}
