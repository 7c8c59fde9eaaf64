use crate::linalg::{Matrix, Vector};
use crate::scalar::Real;

/// Coordinate subset of `{0..d-1}` acting as a projection operator.
///
/// Projection keeps the member coordinates and zeroes the rest; the mask and
/// its complement partition the index set, so `project(x) + complement's
/// project(x) == x` exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoordMask {
    member: Vec<bool>,
}

impl CoordMask {
    pub fn new(member: Vec<bool>) -> Self {
        Self { member }
    }

    /// Mask over dimension `dim` containing exactly `indices`.
    pub fn from_indices(dim: usize, indices: &[usize]) -> Self {
        let mut member = vec![false; dim];
        for &i in indices {
            assert!(i < dim, "mask index {i} out of range for dimension {dim}");
            member[i] = true;
        }
        Self { member }
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            member: vec![false; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.member.len()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.member[i]
    }

    pub fn count(&self) -> usize {
        self.member.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn is_full(&self) -> bool {
        self.count() == self.dim()
    }

    pub fn complement(&self) -> Self {
        Self {
            member: self.member.iter().map(|&m| !m).collect(),
        }
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.member[i]).collect()
    }

    /// Zero out every coordinate not in the mask.
    pub fn project<T: Real>(&self, x: &Vector<T>) -> Vector<T> {
        assert_eq!(x.dim(), self.dim(), "project: dimension mismatch");
        Vector::from_fn(self.dim(), |i| {
            if self.member[i] {
                x[i]
            } else {
                T::zero()
            }
        })
    }

    /// The projection as a 0/1 diagonal matrix.
    pub fn projection_matrix<T: Real>(&self) -> Matrix<T> {
        let d = self.dim();
        let mut m = Matrix::zeros(d, d);
        for i in 0..d {
            if self.member[i] {
                m[(i, i)] = T::one();
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn projects_member_coordinates() {
        let mask = CoordMask::from_indices(2, &[0]);
        let x = Vector::new(vec![3.0, 7.0]);
        assert_eq!(mask.project(&x).as_slice(), &[3.0, 0.0]);
    }

    #[test]
    fn empty_mask_projects_to_zero() {
        let mask = CoordMask::empty(4);
        let x = Vector::new(vec![1.0, -2.0, 3.5, 0.25]);
        assert_eq!(mask.project(&x), Vector::zeros(4));
    }

    #[test]
    fn projection_is_idempotent_and_partitions() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let d = rng.gen_range(1..12);
            let member: Vec<bool> = (0..d).map(|_| rng.gen_bool(0.5)).collect();
            let mask = CoordMask::new(member);
            let x = Vector::from_fn(d, |_| rng.gen_range(-5.0..5.0));
            let px = mask.project(&x);
            assert_eq!(mask.project(&px), px);
            let sum = &px + &mask.complement().project(&x);
            assert_eq!(sum, x);
        }
    }
}
