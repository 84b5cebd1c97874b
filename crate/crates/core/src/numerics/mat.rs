use super::NumericsError;

/// Row-major 4x4 real matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat4(pub [[f64; 4]; 4]);

/// Row-major 2x2 real matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl std::ops::Index<(usize, usize)> for Mat4 {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.0[i][j]
    }
}

impl Mat4 {
    pub fn zeros() -> Self {
        Mat4([[0.0; 4]; 4])
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for i in 0..4 {
            m.0[i][i] = 1.0;
        }
        m
    }

    pub fn diag(d: [f64; 4]) -> Self {
        let mut m = Self::zeros();
        for i in 0..4 {
            m.0[i][i] = d[i];
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }

    /// Max over rows of the 1-norm of the row.
    pub fn max_row_norm(&self) -> f64 {
        self.0
            .iter()
            .map(|r| r.iter().map(|v| v.abs()).sum())
            .fold(0.0, f64::max)
    }

    pub fn transpose(&self) -> Mat4 {
        let mut t = Self::zeros();
        for i in 0..4 {
            for j in 0..4 {
                t.0[i][j] = self.0[j][i];
            }
        }
        t
    }

    pub fn mul(&self, rhs: &Mat4) -> Mat4 {
        let mut out = Self::zeros();
        for i in 0..4 {
            for j in 0..4 {
                let mut s = 0.0;
                for k in 0..4 {
                    s += self.0[i][k] * rhs.0[k][j];
                }
                out.0[i][j] = s;
            }
        }
        out
    }

    pub fn mul_vec(&self, v: [f64; 4]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for i in 0..4 {
            out[i] = (0..4).map(|k| self.0[i][k] * v[k]).sum();
        }
        out
    }

    pub fn sub(&self, rhs: &Mat4) -> Mat4 {
        let mut out = *self;
        for i in 0..4 {
            for j in 0..4 {
                out.0[i][j] -= rhs.0[i][j];
            }
        }
        out
    }

    pub fn det(&self) -> f64 {
        match lu_decompose(self) {
            Some((_, _, det)) => det,
            None => 0.0,
        }
    }

    /// Monic characteristic polynomial coefficients `[c3, c2, c1, c0]` of
    /// `s^4 + c3 s^3 + c2 s^2 + c1 s + c0`, by the Faddeev-LeVerrier recursion.
    pub fn charpoly(&self) -> [f64; 4] {
        let mut c = [0.0; 4];
        let mut mk = Mat4::identity();
        for k in 0..4 {
            mk = self.mul(&mk);
            let tr: f64 = (0..4).map(|i| mk.0[i][i]).sum();
            c[k] = -tr / (k as f64 + 1.0);
            for i in 0..4 {
                mk.0[i][i] += c[k];
            }
        }
        c
    }
}

impl Mat2 {
    pub fn identity() -> Self {
        Mat2([[1.0, 0.0], [0.0, 1.0]])
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Mat2([[a, 0.0], [0.0, b]])
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2([
            [self.0[0][0], self.0[1][0]],
            [self.0[0][1], self.0[1][1]],
        ])
    }

    pub fn mul(&self, rhs: &Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }

    pub fn mul_vec(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1],
            self.0[1][0] * v[0] + self.0[1][1] * v[1],
        ]
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    /// Solve the 2x2 system `self * x = rhs` by Cramer's rule.
    pub fn solve(&self, rhs: [f64; 2]) -> Option<[f64; 2]> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        Some([
            (rhs[0] * self.0[1][1] - self.0[0][1] * rhs[1]) / d,
            (self.0[0][0] * rhs[1] - rhs[0] * self.0[1][0]) / d,
        ])
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub fn new(re: f64, im: f64) -> Self {
        Complex { re, im }
    }

    pub fn real(re: f64) -> Self {
        Complex { re, im: 0.0 }
    }

    pub fn conj(&self) -> Self {
        Complex::new(self.re, -self.im)
    }

    pub fn abs(&self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn dist(&self, other: &Complex) -> f64 {
        (self.re - other.re).hypot(self.im - other.im)
    }
}

/// Four eigenvalues with unordered multiset semantics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexSpectrum(pub [Complex; 4]);

impl ComplexSpectrum {
    pub fn from_reals(r: [f64; 4]) -> Self {
        ComplexSpectrum([
            Complex::real(r[0]),
            Complex::real(r[1]),
            Complex::real(r[2]),
            Complex::real(r[3]),
        ])
    }

    pub fn sum(&self) -> Complex {
        let mut s = Complex::default();
        for v in self.0 {
            s.re += v.re;
            s.im += v.im;
        }
        s
    }

    pub fn product(&self) -> Complex {
        let mut p = Complex::new(1.0, 0.0);
        for v in self.0 {
            p = Complex::new(p.re * v.re - p.im * v.im, p.re * v.im + p.im * v.re);
        }
        p
    }

    pub fn max_real_part(&self) -> f64 {
        self.0.iter().map(|v| v.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy minimal-distance pairing against `other`; returns the largest
    /// paired distance. Eigenvalue order is not canonical, so comparisons go
    /// through this instead of the raw arrays.
    pub fn max_pairing_distance(&self, other: &ComplexSpectrum) -> f64 {
        let mut used_a = [false; 4];
        let mut used_b = [false; 4];
        let mut worst = 0.0f64;
        for _ in 0..4 {
            let mut best = f64::INFINITY;
            let mut pick = (0, 0);
            for i in 0..4 {
                if used_a[i] {
                    continue;
                }
                for j in 0..4 {
                    if used_b[j] {
                        continue;
                    }
                    let d = self.0[i].dist(&other.0[j]);
                    if d < best {
                        best = d;
                        pick = (i, j);
                    }
                }
            }
            used_a[pick.0] = true;
            used_b[pick.1] = true;
            worst = worst.max(best);
        }
        worst
    }

    /// True when the multiset equals its own conjugate multiset within `tol`.
    pub fn is_conjugate_closed(&self, tol: f64) -> bool {
        let conj = ComplexSpectrum([
            self.0[0].conj(),
            self.0[1].conj(),
            self.0[2].conj(),
            self.0[3].conj(),
        ]);
        self.max_pairing_distance(&conj) <= tol
    }
}

/// LU factorization with partial pivoting. Returns (LU, permutation, det),
/// or None when a pivot vanishes exactly.
fn lu_decompose(m: &Mat4) -> Option<([[f64; 4]; 4], [usize; 4], f64)> {
    let mut a = m.0;
    let mut perm = [0usize, 1, 2, 3];
    let mut det = 1.0;
    for col in 0..4 {
        let mut pivot = col;
        for r in col + 1..4 {
            if a[r][col].abs() > a[pivot][col].abs() {
                pivot = r;
            }
        }
        if a[pivot][col] == 0.0 {
            return None;
        }
        if pivot != col {
            a.swap(pivot, col);
            perm.swap(pivot, col);
            det = -det;
        }
        det *= a[col][col];
        for r in col + 1..4 {
            let f = a[r][col] / a[col][col];
            a[r][col] = f;
            for c in col + 1..4 {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    Some((a, perm, det))
}

fn lu_solve(lu: &[[f64; 4]; 4], perm: &[usize; 4], rhs: [f64; 4]) -> [f64; 4] {
    let mut y = [0.0; 4];
    for i in 0..4 {
        let mut s = rhs[perm[i]];
        for j in 0..i {
            s -= lu[i][j] * y[j];
        }
        y[i] = s;
    }
    let mut x = [0.0; 4];
    for i in (0..4).rev() {
        let mut s = y[i];
        for j in i + 1..4 {
            s -= lu[i][j] * x[j];
        }
        x[i] = s / lu[i][i];
    }
    x
}

fn singularity_threshold(m: &Mat4) -> f64 {
    1e-12 * m.max_row_norm().powi(4)
}

/// Solve `m x = rhs` by Gaussian elimination with partial pivoting.
pub fn solve4(m: &Mat4, rhs: [f64; 4]) -> Result<[f64; 4], NumericsError> {
    let threshold = singularity_threshold(m);
    match lu_decompose(m) {
        Some((lu, perm, det)) if det.abs() > threshold => Ok(lu_solve(&lu, &perm, rhs)),
        Some((_, _, det)) => Err(NumericsError::NearSingular { det, threshold }),
        None => Err(NumericsError::NearSingular {
            det: 0.0,
            threshold,
        }),
    }
}

/// Invert `m`, rejecting matrices with |det| below `1e-12 * max_row_norm^4`.
pub fn inv4(m: &Mat4) -> Result<Mat4, NumericsError> {
    let threshold = singularity_threshold(m);
    let (lu, perm, det) = lu_decompose(m).ok_or(NumericsError::NearSingular {
        det: 0.0,
        threshold,
    })?;
    if det.abs() <= threshold {
        return Err(NumericsError::NearSingular { det, threshold });
    }
    let mut out = Mat4::zeros();
    for col in 0..4 {
        let mut e = [0.0; 4];
        e[col] = 1.0;
        let x = lu_solve(&lu, &perm, e);
        for row in 0..4 {
            out.0[row][col] = x[row];
        }
    }
    Ok(out)
}
