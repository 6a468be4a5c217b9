//! Dependency-free 3x3 real linear algebra: cyclic Jacobi eigensolver for
//! symmetric matrices and a singular value decomposition built on it.
//!
//! The matrices in the direction optimization are always 3x3, so a short
//! Jacobi iteration converges to machine precision in a handful of sweeps
//! and there is no reason to pull in a LAPACK binding.

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub fn mat3_vec(a: &Mat3, v: &Vec3) -> Vec3 {
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = a[i][0] * v[0] + a[i][1] * v[1] + a[i][2] * v[2];
    }
    out
}

pub fn mat3_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

pub fn mat3_transpose(a: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

pub fn dot3(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross3(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm3(a: &Vec3) -> f64 {
    dot3(a, a).sqrt()
}

pub fn scale3(a: &Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn sub3(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn frobenius3(a: &Mat3) -> f64 {
    a.iter()
        .flat_map(|r| r.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
}

/// Eigendecomposition of a symmetric 3x3 matrix.
///
/// `values` are sorted ascending; `vectors[i]` is the unit eigenvector for
/// `values[i]`.  The vectors are orthonormal by construction (accumulated
/// Givens rotations).
#[derive(Debug, Clone)]
pub struct SymEigen3 {
    pub values: [f64; 3],
    pub vectors: [Vec3; 3],
}

/// Cyclic Jacobi iteration, run until the off-diagonal norm drops below
/// `1e-14` of the matrix scale.
pub fn sym_eigen3(a: &Mat3) -> SymEigen3 {
    let mut m = *a;
    // Callers hold matrices symmetric to ~1e-12; fold any residue in.
    for i in 0..3 {
        for j in (i + 1)..3 {
            let s = 0.5 * (m[i][j] + m[j][i]);
            m[i][j] = s;
            m[j][i] = s;
        }
    }
    let mut v: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let scale = frobenius3(&m).max(f64::MIN_POSITIVE);
    let tol = 1e-14 * scale;

    for _sweep in 0..64 {
        let off = (m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2]).sqrt();
        if off <= tol {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = m[p][q];
            if apq.abs() <= tol * 1e-2 {
                continue;
            }
            let app = m[p][p];
            let aqq = m[q][q];
            let theta = (aqq - app) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;

            m[p][p] = app - t * apq;
            m[q][q] = aqq + t * apq;
            m[p][q] = 0.0;
            m[q][p] = 0.0;
            for i in 0..3 {
                if i != p && i != q {
                    let aip = m[i][p];
                    let aiq = m[i][q];
                    m[i][p] = c * aip - s * aiq;
                    m[p][i] = m[i][p];
                    m[i][q] = s * aip + c * aiq;
                    m[q][i] = m[i][q];
                }
            }
            for i in 0..3 {
                let vip = v[i][p];
                let viq = v[i][q];
                v[i][p] = c * vip - s * viq;
                v[i][q] = s * vip + c * viq;
            }
        }
    }

    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| m[i][i].partial_cmp(&m[j][j]).unwrap());
    let values = [
        m[order[0]][order[0]],
        m[order[1]][order[1]],
        m[order[2]][order[2]],
    ];
    let column = |k: usize| [v[0][k], v[1][k], v[2][k]];
    let vectors = [column(order[0]), column(order[1]), column(order[2])];
    SymEigen3 { values, vectors }
}

/// Singular value decomposition of a 3x3 matrix.
///
/// `s` is sorted descending; `u[i]` and `v[i]` are the corresponding left and
/// right singular vectors, so `B v[i] = s[i] u[i]`.
#[derive(Debug, Clone)]
pub struct Svd3 {
    pub u: [Vec3; 3],
    pub s: [f64; 3],
    pub v: [Vec3; 3],
}

/// SVD via the eigendecomposition of `B^T B`.  Left vectors come from
/// `B v / sigma`, which pairs signs consistently; null directions are filled
/// in by completing the orthonormal frame.
pub fn svd3(b: &Mat3) -> Svd3 {
    let bt = mat3_transpose(b);
    let btb = mat3_mul(&bt, b);
    let eig = sym_eigen3(&btb);

    // Descending singular values.
    let mut s = [0.0; 3];
    let mut v = [[0.0; 3]; 3];
    for i in 0..3 {
        s[i] = eig.values[2 - i].max(0.0).sqrt();
        v[i] = eig.vectors[2 - i];
    }

    let cutoff = s[0] * 1e-14;
    let mut u = [[0.0; 3]; 3];
    let mut filled = 0usize;
    for i in 0..3 {
        if s[i] > cutoff && s[i] > 0.0 {
            let mut ui = scale3(&mat3_vec(b, &v[i]), 1.0 / s[i]);
            // Re-orthogonalize against previous columns; only matters for
            // nearly degenerate singular values.
            for j in 0..filled {
                let d = dot3(&ui, &u[j]);
                ui = sub3(&ui, &scale3(&u[j], d));
            }
            let n = norm3(&ui);
            if n > 1e-8 {
                u[i] = scale3(&ui, 1.0 / n);
                filled += 1;
                continue;
            }
        }
        // Null direction: complete the frame.
        u[i] = complete_frame(&u, filled);
        filled += 1;
    }

    Svd3 { u, s, v }
}

fn complete_frame(u: &[Vec3; 3], filled: usize) -> Vec3 {
    match filled {
        0 => [0.0, 0.0, 1.0],
        1 => {
            // Any unit vector orthogonal to u[0].
            let axis = if u[0][0].abs() < 0.9 {
                [1.0, 0.0, 0.0]
            } else {
                [0.0, 1.0, 0.0]
            };
            let c = cross3(&u[0], &axis);
            scale3(&c, 1.0 / norm3(&c))
        }
        _ => {
            let c = cross3(&u[0], &u[1]);
            scale3(&c, 1.0 / norm3(&c))
        }
    }
}
