//! Polynomial trajectories and the certificate failure times derived from
//! them.

mod poly;
mod roots;

pub use poly::Polynomial;
pub use roots::{real_roots, Parity, Root, RootList, TIME_TOLERANCE};
pub(crate) use roots::sign_after;

use crate::error::{Error, Result};
use crate::PointId;

/// A moving point: one polynomial in `t` per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub id: PointId,
    coords: Vec<Polynomial>,
}

impl Trajectory {
    pub fn new(id: PointId, coeffs: Vec<Vec<f64>>) -> Self {
        Self {
            id,
            coords: coeffs.into_iter().map(Polynomial::new).collect(),
        }
    }

    pub fn stationary(id: PointId, pos: &[f64]) -> Self {
        Self::new(id, pos.iter().map(|&x| vec![x]).collect())
    }

    pub fn dimension(&self) -> usize {
        self.coords.len()
    }

    /// Largest coordinate degree.
    pub fn degree(&self) -> usize {
        self.coords.iter().map(Polynomial::degree).max().unwrap_or(0)
    }

    pub fn coords(&self) -> &[Polynomial] {
        &self.coords
    }

    pub fn position(&self, t: f64) -> Vec<f64> {
        self.coords.iter().map(|c| c.eval(t)).collect()
    }

    /// `⟨position(t), dir⟩` as a polynomial in `t`.
    pub fn projection(&self, dir: &[f64]) -> Polynomial {
        self.coords
            .iter()
            .zip(dir)
            .fold(Polynomial::zero(), |acc, (c, &w)| &acc + &c.scaled(w))
    }

    /// `|position(t) − other(t)|²` as a polynomial in `t`.
    pub fn squared_distance(&self, other: &Trajectory) -> Polynomial {
        self.coords
            .iter()
            .zip(&other.coords)
            .fold(Polynomial::zero(), |acc, (a, b)| {
                let diff = a - b;
                &acc + &(&diff * &diff)
            })
    }
}

/// Times in `(t0, t1]` at which `a` and `b` exchange their order along
/// `projection`.
///
/// Returns [`Error::Degenerate`] when the projected difference is
/// identically zero; such pairs never swap and are ordered by the tie rule.
pub fn swap_times(a: &Trajectory, b: &Trajectory, projection: &[f64], interval: (f64, f64)) -> Result<RootList> {
    if a.id == b.id {
        return Err(Error::InvalidInput(format!("swap_times called on point {} with itself", a.id)));
    }
    if interval.0 >= interval.1 {
        return Err(Error::InvalidParameter(format!(
            "empty interval [{}, {}]",
            interval.0, interval.1
        )));
    }
    let g = &a.projection(projection) - &b.projection(projection);
    if g.is_zero() {
        return Err(Error::Degenerate(format!(
            "points {} and {} have identical projections",
            a.id, b.id
        )));
    }
    Ok(real_roots(&g, interval.0, interval.1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(id: u32, coeffs: Vec<Vec<f64>>) -> Trajectory {
        Trajectory::new(PointId(id), coeffs)
    }

    #[test]
    fn positions() {
        assert_eq!(traj(0, vec![vec![0.0, 1.0], vec![0.0, 0.0]]).position(2.0), vec![2.0, 0.0]);
        assert_eq!(traj(0, vec![vec![1.5], vec![-2.0]]).position(17.0), vec![1.5, -2.0]);
        assert_eq!(traj(0, vec![vec![1.0, -2.0, 1.0], vec![0.0]]).position(1.0), vec![0.0, 0.0]);
    }

    #[test]
    fn linear_crossing() {
        let a = traj(0, vec![vec![0.0, 1.0], vec![0.0]]);
        let b = traj(1, vec![vec![1.0, -1.0], vec![0.0]]);
        let r = swap_times(&a, &b, &[1.0, 0.0], (0.0, 1.0)).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r.roots[0].parity, Parity::Odd);
        assert!((r.roots[0].time - 0.5).abs() < 1e-12);
    }

    #[test]
    fn quadratic_crossing() {
        let a = traj(0, vec![vec![0.0, 0.0, 1.0], vec![0.0]]);
        let b = traj(1, vec![vec![1.0], vec![0.0]]);
        let r = swap_times(&a, &b, &[1.0, 0.0], (-2.0, 2.0)).unwrap();
        let t = r.times();
        assert_eq!(t.len(), 2);
        assert!((t[0] + 1.0).abs() < 1e-12 && (t[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constructed_cubic_roots() {
        let g = Polynomial::from_roots(&[0.2, 0.5, 0.9]);
        // a carries g plus an arbitrary motion shared with b.
        let shared = [0.3, -0.7, 0.1, 0.25];
        let a_x: Vec<f64> = shared.iter().zip(g.coeffs()).map(|(s, c)| s + c).collect();
        let a = traj(0, vec![a_x, vec![1.0, 2.0]]);
        let b = traj(1, vec![shared.to_vec(), vec![-1.0]]);
        let r = swap_times(&a, &b, &[1.0, 0.0], (0.0, 1.0)).unwrap();
        let t = r.times();
        assert_eq!(t.len(), 3);
        for (x, y) in t.iter().zip([0.2, 0.5, 0.9]) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn identical_projection_is_degenerate() {
        let a = traj(0, vec![vec![0.0, 1.0], vec![3.0]]);
        let b = traj(1, vec![vec![0.0, 1.0], vec![-3.0]]);
        assert!(matches!(
            swap_times(&a, &b, &[1.0, 0.0], (0.0, 1.0)),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn squared_distance_polynomial() {
        let a = traj(0, vec![vec![0.0, 1.0], vec![0.0]]);
        let b = traj(1, vec![vec![1.0], vec![1.0]]);
        let d = a.squared_distance(&b);
        for t in [0.0, 0.5, 2.0] {
            let pa = a.position(t);
            let pb = b.position(t);
            assert!((d.eval(t) - crate::squared_distance(&pa, &pb)).abs() < 1e-12);
        }
    }
}
