//! Quadrature rules on the reference simplex, in barycentric coordinates.
//!
//! Two constructions are provided:
//!
//! * [`QuadratureRule::conical`] — collapsed Gauss–Jacobi product rules of
//!   arbitrary exactness degree (Golub–Welsch nodes), cheap per point.
//! * [`QuadratureRule::symmetric`] — rules whose point set is invariant under
//!   permutations of the barycentric coordinates, so the evaluated point set
//!   of a simplex does not depend on its vertex ordering. Hard-coded orbit
//!   rules up to degree 2, symmetrized conical rules beyond.
//!
//! Weights always sum to the reference simplex volume `1/dim!`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    dim: usize,
    degree: usize,
    /// Barycentric coordinates, stride `dim + 1`.
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        let s = self.dim + 1;
        &self.points[k * s..(k + 1) * s]
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        let s = self.dim + 1;
        self.points.chunks_exact(s).zip(self.weights.iter().copied())
    }

    /// Collapsed Gauss–Jacobi product rule, exact for total degree `degree`.
    pub fn conical(dim: usize, degree: usize) -> Result<Self> {
        check_dim(dim)?;
        let n = degree / 2 + 1; // 2n-1 >= degree
        let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..dim)
            .map(|k| gauss_jacobi_unit(n, (dim - 1 - k) as f64))
            .collect();

        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut idx = vec![0usize; dim];
        loop {
            // map (t_1..t_d) to simplex coordinates
            let mut x = vec![0.0f64; dim];
            let mut rem = 1.0;
            let mut w = 1.0;
            for k in 0..dim {
                let (ts, ws) = &axes[k];
                x[k] = ts[idx[k]] * rem;
                rem -= x[k];
                w *= ws[idx[k]];
            }
            let mut bary = Vec::with_capacity(dim + 1);
            bary.push(1.0 - x.iter().sum::<f64>());
            bary.extend_from_slice(&x);
            points.extend_from_slice(&bary);
            weights.push(w);

            // advance the multi-index
            let mut k = 0;
            loop {
                idx[k] += 1;
                if idx[k] < n {
                    break;
                }
                idx[k] = 0;
                k += 1;
                if k == dim {
                    return Ok(Self {
                        dim,
                        degree: 2 * n - 1,
                        points,
                        weights,
                    });
                }
            }
        }
    }

    /// Permutation-symmetric rule of the requested exactness degree.
    pub fn symmetric(dim: usize, degree: usize) -> Result<Self> {
        check_dim(dim)?;
        match degree {
            0 | 1 => Ok(Self::centroid(dim)),
            2 => Ok(Self::degree2_orbit(dim)),
            _ => Self::conical(dim, degree).map(|r| r.symmetrized()),
        }
    }

    /// One-point centroid rule, exact for linears.
    pub fn centroid(dim: usize) -> Self {
        let s = dim + 1;
        Self {
            dim,
            degree: 1,
            points: vec![1.0 / s as f64; s],
            weights: vec![ref_volume(dim)],
        }
    }

    fn degree2_orbit(dim: usize) -> Self {
        let vol = ref_volume(dim);
        match dim {
            2 => {
                // orbit of (2/3, 1/6, 1/6)
                let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
                let mut points = Vec::new();
                for i in 0..3 {
                    let mut bary = [b, b, b];
                    bary[i] = a;
                    points.extend_from_slice(&bary);
                }
                Self {
                    dim,
                    degree: 2,
                    points,
                    weights: vec![vol / 3.0; 3],
                }
            }
            3 => {
                // orbit of ((5+3√5)/20, b, b, b) with b = (5-√5)/20
                let b = (5.0 - 5.0f64.sqrt()) / 20.0;
                let a = 1.0 - 3.0 * b;
                let mut points = Vec::new();
                for i in 0..4 {
                    let mut bary = [b, b, b, b];
                    bary[i] = a;
                    points.extend_from_slice(&bary);
                }
                Self {
                    dim,
                    degree: 2,
                    points,
                    weights: vec![vol / 4.0; 4],
                }
            }
            _ => unreachable!(),
        }
    }

    /// Replicate every point over all barycentric permutations, weight / (d+1)!.
    fn symmetrized(&self) -> Self {
        let s = self.dim + 1;
        let perms = permutations(s);
        let scale = 1.0 / perms.len() as f64;
        let mut points = Vec::with_capacity(self.points.len() * perms.len());
        let mut weights = Vec::with_capacity(self.weights.len() * perms.len());
        for (bary, w) in self.iter() {
            for perm in &perms {
                for &i in perm {
                    points.push(bary[i]);
                }
                weights.push(w * scale);
            }
        }
        Self {
            dim: self.dim,
            degree: self.degree,
            points,
            weights,
        }
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 3 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "quadrature dimension must be 2 or 3, got {dim}"
        )))
    }
}

pub fn ref_volume(dim: usize) -> f64 {
    1.0 / factorial(dim) as f64
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product::<u64>().max(1)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..n).collect();
    heap_permute(&mut idx, n, &mut out);
    out
}

fn heap_permute(arr: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == 1 {
        out.push(arr.clone());
        return;
    }
    for i in 0..k {
        heap_permute(arr, k - 1, out);
        if k % 2 == 0 {
            arr.swap(i, k - 1);
        } else {
            arr.swap(0, k - 1);
        }
    }
}

/// Gauss–Jacobi nodes/weights on [0,1] for the weight (1-t)^alpha, via
/// Golub–Welsch on the Jacobi(alpha, 0) recurrence.
fn gauss_jacobi_unit(n: usize, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    let beta = 0.0f64;
    let mut diag = vec![0.0f64; n];
    let mut off = vec![0.0f64; n.saturating_sub(1)];
    diag[0] = (beta - alpha) / (alpha + beta + 2.0);
    for k in 1..n {
        let kf = k as f64;
        let den = (2.0 * kf + alpha + beta) * (2.0 * kf + alpha + beta + 2.0);
        diag[k] = (beta * beta - alpha * alpha) / den;
        let b2 = if k == 1 {
            4.0 * (1.0 + alpha) * (1.0 + beta)
                / ((2.0 + alpha + beta).powi(2) * (3.0 + alpha + beta))
        } else {
            4.0 * kf * (kf + alpha) * (kf + beta) * (kf + alpha + beta)
                / ((2.0 * kf + alpha + beta).powi(2)
                    * (2.0 * kf + alpha + beta + 1.0)
                    * (2.0 * kf + alpha + beta - 1.0))
        };
        off[k - 1] = b2.sqrt();
    }

    let mut jac = DMatrix::zeros(n, n);
    for k in 0..n {
        jac[(k, k)] = diag[k];
        if k + 1 < n {
            jac[(k, k + 1)] = off[k];
            jac[(k + 1, k)] = off[k];
        }
    }
    let eig = jac.symmetric_eigen();
    // total mass of (1-x)^alpha on [-1,1]
    let mu0 = 2.0f64.powf(alpha + 1.0) / (alpha + 1.0);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let x = eig.eigenvalues[k];
            let q0 = eig.eigenvectors[(0, k)];
            (x, mu0 * q0 * q0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // map to [0,1] with unit-interval weight (1-t)^alpha
    let scale = 2.0f64.powf(-alpha - 1.0);
    let ts = pairs.iter().map(|(x, _)| 0.5 * (1.0 + x)).collect();
    let ws = pairs.iter().map(|(_, w)| scale * w).collect();
    (ts, ws)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed form: ∫_{T_ref} x^a y^b z^c dx = a! b! c! / (a+b+c+dim)!.
    fn monomial_integral(dim: usize, pows: &[usize]) -> f64 {
        let num: f64 = pows.iter().map(|&p| factorial(p) as f64).product();
        let tot: usize = pows.iter().sum::<usize>() + dim;
        num / factorial(tot) as f64
    }

    fn check_exactness(rule: &QuadratureRule) {
        let dim = rule.dim();
        let deg = rule.degree();
        let mut pows = vec![0usize; dim];
        loop {
            let total: usize = pows.iter().sum();
            if total <= deg {
                let exact = monomial_integral(dim, &pows);
                let mut approx = 0.0;
                for (bary, w) in rule.iter() {
                    // cartesian coordinates of the reference simplex are bary[1..]
                    let mut v = 1.0;
                    for (k, &p) in pows.iter().enumerate() {
                        v *= bary[k + 1].powi(p as i32);
                    }
                    approx += w * v;
                }
                assert!(
                    (approx - exact).abs() <= 1e-13 * exact.abs().max(1e-3),
                    "dim {dim} deg {deg} pows {pows:?}: {approx} vs {exact}"
                );
            }
            // next multi-index with total degree cap deg
            let mut k = 0;
            loop {
                pows[k] += 1;
                if pows.iter().sum::<usize>() <= deg {
                    break;
                }
                pows[k] = 0;
                k += 1;
                if k == dim {
                    return;
                }
            }
        }
    }

    #[test]
    fn weights_sum_to_reference_volume() {
        for dim in [2, 3] {
            for deg in [1, 2, 5, 7, 12] {
                for rule in [
                    QuadratureRule::conical(dim, deg).unwrap(),
                    QuadratureRule::symmetric(dim, deg).unwrap(),
                ] {
                    let sum: f64 = rule.weights.iter().sum();
                    assert!((sum - ref_volume(dim)).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn conical_rules_are_exact() {
        for dim in [2, 3] {
            for deg in [1, 3, 5, 7, 9, 12] {
                check_exactness(&QuadratureRule::conical(dim, deg).unwrap());
            }
        }
    }

    #[test]
    fn symmetric_rules_are_exact() {
        for dim in [2, 3] {
            for deg in [1, 2, 5, 7] {
                check_exactness(&QuadratureRule::symmetric(dim, deg).unwrap());
            }
        }
    }

    #[test]
    fn symmetric_point_sets_are_permutation_invariant() {
        for dim in [2usize, 3] {
            let rule = QuadratureRule::symmetric(dim, 5).unwrap();
            let s = dim + 1;
            // swapping the first two barycentric coordinates must map the
            // weighted point multiset to itself exactly
            let mut original: Vec<(Vec<u64>, u64)> = rule
                .iter()
                .map(|(b, w)| (b.iter().map(|x| x.to_bits()).collect(), w.to_bits()))
                .collect();
            let mut swapped: Vec<(Vec<u64>, u64)> = rule
                .iter()
                .map(|(b, w)| {
                    let mut bb = b.to_vec();
                    bb.swap(0, 1);
                    (bb.iter().map(|x| x.to_bits()).collect(), w.to_bits())
                })
                .collect();
            original.sort();
            swapped.sort();
            assert_eq!(original, swapped, "dim {dim} stride {s}");
        }
    }

    #[test]
    fn rejects_bad_dimension() {
        assert!(QuadratureRule::symmetric(1, 2).is_err());
        assert!(QuadratureRule::conical(4, 2).is_err());
    }
}
