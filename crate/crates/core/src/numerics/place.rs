use super::mat::{Complex, ComplexSpectrum, Mat2, Mat4};
use super::{eig4, NumericsError};

/// The input map of the electrical subsystem: B = [0 I]^T.
pub const INPUT_MAP_B: [[f64; 2]; 4] = [[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// Tolerance used when verifying the achieved spectrum.
const PLACEMENT_TOL: f64 = 1e-6;

fn closed_loop(a: &Mat4, b: &[[f64; 2]; 4], k: &[[f64; 4]; 2]) -> Mat4 {
    let mut m = *a;
    for i in 0..4 {
        for j in 0..4 {
            m.0[i][j] -= b[i][0] * k[0][j] + b[i][1] * k[1][j];
        }
    }
    m
}

/// Rank of the controllability matrix [B AB A^2B A^3B], by Gaussian
/// elimination with full column pivoting and a scaled tolerance.
pub fn controllability_rank(a: &Mat4, b: &[[f64; 2]; 4]) -> usize {
    let mut cols = [[0.0f64; 4]; 8];
    for input in 0..2 {
        let mut v = [b[0][input], b[1][input], b[2][input], b[3][input]];
        for power in 0..4 {
            cols[2 * power + input] = v;
            v = a.mul_vec(v);
        }
    }
    // Row-echelon on the 4x8 (work on the transpose layout: rows of C).
    let mut m = [[0.0f64; 8]; 4];
    for r in 0..4 {
        for c in 0..8 {
            m[r][c] = cols[c][r];
        }
    }
    let scale = m
        .iter()
        .flatten()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let tol = 1e-10 * scale;
    let mut rank = 0;
    for col in 0..8 {
        if rank == 4 {
            break;
        }
        let mut pivot = rank;
        for r in rank..4 {
            if m[r][col].abs() > m[pivot][col].abs() {
                pivot = r;
            }
        }
        if m[pivot][col].abs() <= tol {
            continue;
        }
        m.swap(pivot, rank);
        for r in rank + 1..4 {
            let f = m[r][col] / m[rank][col];
            for c in col..8 {
                m[r][c] -= f * m[rank][c];
            }
        }
        rank += 1;
    }
    rank
}

/// Split a conjugate-closed 4-element spectrum into two real quadratic
/// factors s^2 + p s + q.
fn quadratic_factors(desired: &ComplexSpectrum) -> Result<[(f64, f64); 2], NumericsError> {
    let scale = desired.0.iter().map(|z| z.abs()).fold(1.0, f64::max);
    if !desired.is_conjugate_closed(1e-9 * scale) {
        return Err(NumericsError::SpectrumNotConjugateClosed);
    }
    let tol_im = 1e-9 * scale;
    let mut complex: Vec<Complex> = Vec::new();
    let mut real: Vec<f64> = Vec::new();
    for z in desired.0 {
        if z.im.abs() > tol_im {
            complex.push(z);
        } else {
            real.push(z.re);
        }
    }
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut used = vec![false; complex.len()];
    for i in 0..complex.len() {
        if used[i] {
            continue;
        }
        let mut mate = None;
        let mut best = f64::INFINITY;
        for j in i + 1..complex.len() {
            if used[j] {
                continue;
            }
            let d = complex[i].conj().dist(&complex[j]);
            if d < best {
                best = d;
                mate = Some(j);
            }
        }
        let j = mate.ok_or(NumericsError::SpectrumNotConjugateClosed)?;
        used[i] = true;
        used[j] = true;
        let re = 0.5 * (complex[i].re + complex[j].re);
        let im = 0.5 * (complex[i].im - complex[j].im);
        out.push((-2.0 * re, re * re + im * im));
    }
    real.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for pair in real.chunks(2) {
        if pair.len() == 2 {
            out.push((-(pair[0] + pair[1]), pair[0] * pair[1]));
        }
    }
    if out.len() != 2 {
        return Err(NumericsError::SpectrumNotConjugateClosed);
    }
    Ok([out[0], out[1]])
}

fn block(a: &Mat4, row: usize, col: usize) -> Mat2 {
    Mat2([
        [a.0[row][col], a.0[row][col + 1]],
        [a.0[row + 1][col], a.0[row + 1][col + 1]],
    ])
}

fn inv2(m: &Mat2) -> Option<Mat2> {
    let d = m.det();
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    Some(Mat2([
        [m.0[1][1] / d, -m.0[0][1] / d],
        [-m.0[1][0] / d, m.0[0][0] / d],
    ]))
}

fn add2(a: &Mat2, b: &Mat2) -> Mat2 {
    Mat2([
        [a.0[0][0] + b.0[0][0], a.0[0][1] + b.0[0][1]],
        [a.0[1][0] + b.0[1][0], a.0[1][1] + b.0[1][1]],
    ])
}

fn sub2(a: &Mat2, b: &Mat2) -> Mat2 {
    Mat2([
        [a.0[0][0] - b.0[0][0], a.0[0][1] - b.0[0][1]],
        [a.0[1][0] - b.0[1][0], a.0[1][1] - b.0[1][1]],
    ])
}

/// Desired monic quartic coefficients from the two quadratic factors.
fn target_coeffs(f: &[(f64, f64); 2]) -> [f64; 4] {
    let (p1, q1) = f[0];
    let (p2, q2) = f[1];
    [
        p1 + p2,
        q1 + q2 + p1 * p2,
        p1 * q2 + p2 * q1,
        q1 * q2,
    ]
}

/// Place the eigenvalues of `A - B K` at `desired`.
///
/// `B` must have a zero top 2x2 block and an invertible bottom 2x2 block
/// (the electrical subsystem's input map). The construction transforms
/// (A, B) to block-controllable canonical form, where the bottom blocks of
/// the closed loop are freely assignable; diagonal companion blocks then
/// factor the characteristic polynomial into the two desired quadratics.
/// A final Newton polish on the coefficient residual removes roundoff.
pub fn place_poles(
    a: &Mat4,
    b: &[[f64; 2]; 4],
    desired: &ComplexSpectrum,
) -> Result<[[f64; 4]; 2], NumericsError> {
    let bscale = b
        .iter()
        .flatten()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    if b[0][0].abs() > 1e-12 * bscale
        || b[0][1].abs() > 1e-12 * bscale
        || b[1][0].abs() > 1e-12 * bscale
        || b[1][1].abs() > 1e-12 * bscale
    {
        return Err(NumericsError::UnsupportedInputMap);
    }
    let w = Mat2([[b[2][0], b[2][1]], [b[3][0], b[3][1]]]);
    let w_inv = inv2(&w).ok_or(NumericsError::UnsupportedInputMap)?;

    let factors = quadratic_factors(desired)?;
    let a11 = block(a, 0, 0);
    let a12 = block(a, 0, 2);
    let a21 = block(a, 2, 0);
    let a22 = block(a, 2, 2);

    let ascale = a.max_row_norm().max(1.0);
    let a12_zero = a12.0.iter().flatten().all(|v| v.abs() <= 1e-12 * ascale);

    let kbar2 = if a12_zero {
        // Upper block is decoupled: its eigenvalues cannot move. The desired
        // spectrum must contain them; the rest is assigned to the lower block.
        place_decoupled(&a11, &a22, desired)?
    } else {
        let rank = controllability_rank(a, b);
        if rank < 4 {
            return Err(NumericsError::Uncontrollable(rank));
        }
        let a12i = inv2(&a12).ok_or(NumericsError::UnsupportedInputMap)?;
        // x_bar = T^-1 x with T = [[A12, 0], [T3, I]] brings (A, [0 I]^T) to
        // [[0, I], [E, F]] with the bottom blocks freely assignable.
        let t3 = Mat2([
            [-(a12i.mul(&a11).mul(&a12)).0[0][0], -(a12i.mul(&a11).mul(&a12)).0[0][1]],
            [-(a12i.mul(&a11).mul(&a12)).0[1][0], -(a12i.mul(&a11).mul(&a12)).0[1][1]],
        ]);
        let e = add2(&a21.mul(&a12), &a22.mul(&t3));
        let f = sub2(&a22, &t3);
        let (p1, q1) = factors[0];
        let (p2, q2) = factors[1];
        let c0 = Mat2::diag(q1, q2);
        let c1 = Mat2::diag(p1, p2);
        let ka_bar = add2(&e, &c0);
        let kb_bar = add2(&f, &c1);
        // K' = Kbar T^-1 with T^-1 = [[A12^-1, 0], [-T3 A12^-1, I]].
        let t1i = a12i;
        let left = sub2(
            &ka_bar.mul(&t1i),
            &kb_bar.mul(&t3.mul(&t1i)),
        );
        let right = kb_bar;
        [left, right]
    };

    // Undo the bottom block of B and polish.
    let left = w_inv.mul(&kbar2[0]);
    let right = w_inv.mul(&kbar2[1]);
    let mut k = [
        [left.0[0][0], left.0[0][1], right.0[0][0], right.0[0][1]],
        [left.0[1][0], left.0[1][1], right.0[1][0], right.0[1][1]],
    ];
    let cstar = target_coeffs(&factors);
    newton_polish(a, b, &mut k, &cstar);

    let achieved = eig4(&closed_loop(a, b, &k))?;
    let miss = achieved.max_pairing_distance(desired);
    let scale = desired.0.iter().map(|z| z.abs()).fold(1.0, f64::max);
    if miss > PLACEMENT_TOL * scale.max(1.0) {
        return Err(NumericsError::SpectrumUnreachable(miss));
    }
    Ok(k)
}

/// A12 = 0: spectrum splits as eig(A11) plus eig(A22 - W Kb). The desired
/// set must contain eig(A11); the remaining pair goes into a companion block.
fn place_decoupled(
    a11: &Mat2,
    a22: &Mat2,
    desired: &ComplexSpectrum,
) -> Result<[Mat2; 2], NumericsError> {
    let tr = a11.0[0][0] + a11.0[1][1];
    let det = a11.det();
    let disc = tr * tr - 4.0 * det;
    let upper: [Complex; 2] = if disc >= 0.0 {
        let s = disc.sqrt();
        [
            Complex::real(0.5 * (tr + s)),
            Complex::real(0.5 * (tr - s)),
        ]
    } else {
        let s = (-disc).sqrt();
        [Complex::new(0.5 * tr, 0.5 * s), Complex::new(0.5 * tr, -0.5 * s)]
    };
    let scale = desired.0.iter().map(|z| z.abs()).fold(1.0, f64::max);
    let tol = 1e-6 * scale;
    let mut rest: Vec<Complex> = desired.0.to_vec();
    for u in upper {
        let mut best = f64::INFINITY;
        let mut idx = 0;
        for (i, z) in rest.iter().enumerate() {
            let d = u.dist(z);
            if d < best {
                best = d;
                idx = i;
            }
        }
        if best > tol {
            return Err(NumericsError::SpectrumUnreachable(best));
        }
        rest.remove(idx);
    }
    let z1 = rest[0];
    let z2 = rest[1];
    let p = -(z1.re + z2.re);
    let q = z1.re * z2.re - z1.im * z2.im;
    let companion = Mat2([[0.0, 1.0], [-q, -p]]);
    Ok([Mat2([[0.0; 2]; 2]), sub2(a22, &companion)])
}

/// One to three min-norm Newton steps on the characteristic-polynomial
/// coefficient residual; steps are kept only when the residual improves.
fn newton_polish(a: &Mat4, b: &[[f64; 2]; 4], k: &mut [[f64; 4]; 2], cstar: &[f64; 4]) {
    let coeffs = |k: &[[f64; 4]; 2]| closed_loop(a, b, k).charpoly();
    let res_norm = |c: &[f64; 4]| -> f64 {
        (0..4)
            .map(|i| (cstar[i] - c[i]) * (cstar[i] - c[i]))
            .sum::<f64>()
            .sqrt()
    };
    for _ in 0..3 {
        let c = coeffs(k);
        let r = [cstar[0] - c[0], cstar[1] - c[1], cstar[2] - c[2], cstar[3] - c[3]];
        let rn = res_norm(&c);
        let cscale = cstar.iter().map(|v| v.abs()).fold(1.0, f64::max);
        if rn <= 1e-14 * cscale {
            return;
        }
        // 4x8 Jacobian by central differences.
        let mut jac = [[0.0f64; 8]; 4];
        for col in 0..8 {
            let (i, j) = (col / 4, col % 4);
            let h = 1e-6 * (1.0 + k[i][j].abs());
            let mut kp = *k;
            kp[i][j] += h;
            let mut km = *k;
            km[i][j] -= h;
            let cp = coeffs(&kp);
            let cm = coeffs(&km);
            for row in 0..4 {
                jac[row][col] = (cp[row] - cm[row]) / (2.0 * h);
            }
        }
        // Min-norm step: J^T (J J^T)^-1 r.
        let mut jjt = Mat4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                jjt.0[i][j] = (0..8).map(|c| jac[i][c] * jac[j][c]).sum();
            }
        }
        let y = match super::mat::solve4(&jjt, r) {
            Ok(y) => y,
            Err(_) => return,
        };
        let mut knew = *k;
        for col in 0..8 {
            let (i, j) = (col / 4, col % 4);
            let step: f64 = (0..4).map(|row| jac[row][col] * y[row]).sum();
            knew[i][j] += step;
        }
        if res_norm(&coeffs(&knew)) < rn {
            *k = knew;
        } else {
            return;
        }
    }
}
