use super::StructureError;

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn det(m: &Mat3) -> f64 {
    dot(m[0], cross(m[1], m[2]))
}

/// Periodic cell. Rows of the matrix are the lattice vectors a1, a2, a3 in Å.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    matrix: Mat3,
}

impl Lattice {
    pub fn new(matrix: Mat3) -> Result<Self, StructureError> {
        if matrix.iter().flatten().any(|v| !v.is_finite()) {
            return Err(StructureError::InvalidLattice { det: f64::NAN });
        }
        let d = det(&matrix);
        if !(d > 0.0) {
            return Err(StructureError::InvalidLattice { det: d });
        }
        Ok(Self { matrix })
    }

    pub fn cubic(a: f64) -> Result<Self, StructureError> {
        Self::new([[a, 0.0, 0.0], [0.0, a, 0.0], [0.0, 0.0, a]])
    }

    /// Hexagonal cell with a1 along x and the 120° angle between a1 and a2.
    pub fn hexagonal(a: f64, c: f64) -> Result<Self, StructureError> {
        Self::new([
            [a, 0.0, 0.0],
            [-0.5 * a, 0.5 * 3f64.sqrt() * a, 0.0],
            [0.0, 0.0, c],
        ])
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.matrix
    }

    pub fn vector(&self, i: usize) -> Vec3 {
        self.matrix[i]
    }

    pub fn volume(&self) -> f64 {
        det(&self.matrix)
    }

    /// Reciprocal rows b_i with a_i · b_j = δ_ij (no 2π factor).
    pub fn reciprocal(&self) -> Mat3 {
        let [a1, a2, a3] = self.matrix;
        let v = self.volume();
        [
            scale(cross(a2, a3), 1.0 / v),
            scale(cross(a3, a1), 1.0 / v),
            scale(cross(a1, a2), 1.0 / v),
        ]
    }

    pub fn to_cartesian(&self, frac: Vec3) -> Vec3 {
        let m = &self.matrix;
        [
            frac[0] * m[0][0] + frac[1] * m[1][0] + frac[2] * m[2][0],
            frac[0] * m[0][1] + frac[1] * m[1][1] + frac[2] * m[2][1],
            frac[0] * m[0][2] + frac[1] * m[1][2] + frac[2] * m[2][2],
        ]
    }

    pub fn to_fractional(&self, cart: Vec3) -> Vec3 {
        let b = self.reciprocal();
        [dot(cart, b[0]), dot(cart, b[1]), dot(cart, b[2])]
    }

    /// |a1|, |a2|, |a3| in Å.
    pub fn lengths(&self) -> Vec3 {
        [norm(self.matrix[0]), norm(self.matrix[1]), norm(self.matrix[2])]
    }

    /// α (a2∠a3), β (a1∠a3), γ (a1∠a2) in degrees.
    pub fn angles(&self) -> Vec3 {
        let [a1, a2, a3] = self.matrix;
        let ang = |u: Vec3, v: Vec3| (dot(u, v) / (norm(u) * norm(v))).clamp(-1.0, 1.0).acos().to_degrees();
        [ang(a2, a3), ang(a1, a3), ang(a1, a2)]
    }

    pub(crate) fn scaled_rows(&self, factors: [f64; 3]) -> Self {
        let mut m = self.matrix;
        for (row, f) in m.iter_mut().zip(factors) {
            *row = scale(*row, f);
        }
        Self { matrix: m }
    }

    /// Length of the shortest non-zero translation among the 26 neighbouring
    /// lattice points.
    pub fn shortest_translation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in -1..=1 {
            for j in -1..=1 {
                for k in -1..=1 {
                    if i == 0 && j == 0 && k == 0 {
                        continue;
                    }
                    best = best.min(norm(self.to_cartesian([i as f64, j as f64, k as f64])));
                }
            }
        }
        best
    }

    /// Shortest Cartesian vector between two fractional positions over the
    /// 27 neighbouring images.
    pub fn min_image_vector(&self, from: Vec3, to: Vec3) -> Vec3 {
        let mut d = sub(to, from);
        for x in d.iter_mut() {
            *x -= x.round();
        }
        let mut best = self.to_cartesian(d);
        let mut best_len = dot(best, best);
        for i in -1..=1 {
            for j in -1..=1 {
                for k in -1..=1 {
                    if i == 0 && j == 0 && k == 0 {
                        continue;
                    }
                    let c = self.to_cartesian([d[0] + i as f64, d[1] + j as f64, d[2] + k as f64]);
                    let l = dot(c, c);
                    if l < best_len {
                        best = c;
                        best_len = l;
                    }
                }
            }
        }
        best
    }
}
