//! Piecewise affine functions and the zig-zag construction.
//!
//! Given gradients `xi1 != xi2`, a weight `t in (0,1)` and `h >= 1`, the
//! zig-zag function `u_h` has gradient `xi1` on slabs
//! `{ (k-1)/h <= <xi0, y> < (k-1+t)/h }` and `xi2` on the complementary slabs
//! `{ (k-1+t)/h <= <xi0, y> < k/h }`, where `xi0 = (xi2 - xi1)/|xi2 - xi1|`.
//! The additive constants
//!
//! ```text
//! c1_k = (1-t) (k-1)/h |xi2 - xi1|      c2_k = -t k/h |xi2 - xi1|
//! ```
//!
//! glue the pieces continuously and keep `|u_h - phi_xi| <= t(1-t)|xi2-xi1|/h`
//! with `phi_xi(y) = <t xi1 + (1-t) xi2, y>`.

use serde::Serialize;

use crate::domain::BoxDomain;
use crate::error::{ensure_dim, Error, Result};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Where a piece applies.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Region {
    /// `lo <= <normal, y> < hi`.
    Slab { normal: Vec<f64>, lo: f64, hi: f64 },
    /// The whole domain.
    Everywhere,
}

impl Region {
    pub fn contains(&self, y: &[f64]) -> bool {
        match self {
            Region::Slab { normal, lo, hi } => {
                let s = dot(normal, y);
                *lo <= s && s < *hi
            }
            Region::Everywhere => true,
        }
    }
}

/// `y -> <gradient, y> + offset` on `region`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffinePiece {
    pub region: Region,
    pub gradient: Vec<f64>,
    pub offset: f64,
}

impl AffinePiece {
    pub fn eval(&self, y: &[f64]) -> f64 {
        dot(&self.gradient, y) + self.offset
    }
}

/// Function that is affine on each of finitely many regions covering a box.
/// The first matching piece wins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseAffineFn {
    pub domain: BoxDomain,
    pub pieces: Vec<AffinePiece>,
}

impl PiecewiseAffineFn {
    /// A single affine function on the whole box.
    pub fn affine(domain: BoxDomain, gradient: Vec<f64>, offset: f64) -> Result<Self> {
        ensure_dim(domain.dim(), gradient.len(), "affine gradient")?;
        Ok(PiecewiseAffineFn {
            domain,
            pieces: vec![AffinePiece {
                region: Region::Everywhere,
                gradient,
                offset,
            }],
        })
    }

    pub fn piece_at(&self, y: &[f64]) -> Result<&AffinePiece> {
        ensure_dim(self.domain.dim(), y.len(), "evaluation point")?;
        if !self.domain.contains(y) {
            return Err(Error::OutsideDomain(y.to_vec()));
        }
        // Slab pieces are stored in increasing order of `lo`.
        if let Some(Region::Slab { normal, .. }) = self.pieces.first().map(|p| &p.region) {
            let s = dot(normal, y);
            let idx = self.pieces.partition_point(|p| match &p.region {
                Region::Slab { lo, .. } => *lo <= s,
                Region::Everywhere => true,
            });
            if idx > 0 && self.pieces[idx - 1].region.contains(y) {
                return Ok(&self.pieces[idx - 1]);
            }
        }
        self.pieces
            .iter()
            .find(|p| p.region.contains(y))
            .ok_or_else(|| Error::InvalidParam(format!("no piece covers {y:?}")))
    }

    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        Ok(self.piece_at(y)?.eval(y))
    }

    pub fn gradient(&self, y: &[f64]) -> Result<&[f64]> {
        Ok(&self.piece_at(y)?.gradient)
    }

    /// Fraction of the box (midpoint rule on `resolution^n` cells) where the
    /// gradient equals `g` exactly.
    pub fn gradient_fraction(&self, g: &[f64], resolution: usize) -> Result<f64> {
        ensure_dim(self.domain.dim(), g.len(), "gradient")?;
        if resolution == 0 {
            return Err(Error::InvalidParam("resolution must be positive".into()));
        }
        let n = self.domain.dim();
        let total = resolution.pow(n as u32);
        let mut hits = 0usize;
        let mut y = vec![0.0; n];
        for cell in 0..total {
            let mut rest = cell;
            for (axis, yi) in y.iter_mut().enumerate().rev() {
                let i = rest % resolution;
                rest /= resolution;
                let (lo, hi) = (self.domain.lo(axis), self.domain.hi(axis));
                *yi = lo + (hi - lo) * (i as f64 + 0.5) / resolution as f64;
            }
            if self.gradient(&y)? == g {
                hits += 1;
            }
        }
        Ok(hits as f64 / total as f64)
    }
}

/// Parameters and derived quantities of a zig-zag construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZigZag {
    pub xi1: Vec<f64>,
    pub xi2: Vec<f64>,
    pub t: f64,
    pub h: u32,
    /// `t xi1 + (1-t) xi2`.
    pub mean_gradient: Vec<f64>,
    /// `t (1-t) |xi2 - xi1| / h`.
    pub sup_bound: f64,
    pub function: PiecewiseAffineFn,
}

impl ZigZag {
    /// `phi_xi(y)`, the affine limit.
    pub fn limit(&self, y: &[f64]) -> f64 {
        dot(&self.mean_gradient, y)
    }
}

pub fn zigzag_sequence(xi1: &[f64], xi2: &[f64], t: f64, h: u32, domain: &BoxDomain) -> Result<ZigZag> {
    let n = domain.dim();
    ensure_dim(n, xi1.len(), "xi1")?;
    ensure_dim(n, xi2.len(), "xi2")?;
    if xi1 == xi2 {
        return Err(Error::InvalidParam("zig-zag needs xi1 != xi2".into()));
    }
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidParam(format!("t must lie in (0, 1), got {t}")));
    }
    if h == 0 {
        return Err(Error::InvalidParam("h must be at least 1".into()));
    }
    if xi1.iter().chain(xi2).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("zig-zag gradients".into()));
    }
    let diff: Vec<f64> = xi2.iter().zip(xi1).map(|(b, a)| b - a).collect();
    let len = dot(&diff, &diff).sqrt();
    let xi0: Vec<f64> = diff.iter().map(|v| v / len).collect();
    let hf = h as f64;

    // Range of <xi0, y> over the box, from its corners.
    let (mut smin, mut smax) = (f64::INFINITY, f64::NEG_INFINITY);
    for c in domain.corners() {
        let s = dot(&xi0, &c);
        smin = smin.min(s);
        smax = smax.max(s);
    }
    let k_first = (smin * hf).floor() as i64;
    let k_last = (smax * hf).floor() as i64 + 1;

    let mut pieces = Vec::new();
    for k in k_first..=k_last {
        let kf = k as f64;
        let start = (kf - 1.0) / hf;
        let split = (kf - 1.0 + t) / hf;
        let end = kf / hf;
        pieces.push(AffinePiece {
            region: Region::Slab {
                normal: xi0.clone(),
                lo: start,
                hi: split,
            },
            gradient: xi1.to_vec(),
            offset: (1.0 - t) * (kf - 1.0) / hf * len,
        });
        pieces.push(AffinePiece {
            region: Region::Slab {
                normal: xi0.clone(),
                lo: split,
                hi: end,
            },
            gradient: xi2.to_vec(),
            offset: -t * kf / hf * len,
        });
    }
    let mean_gradient = xi1.iter().zip(xi2).map(|(a, b)| t * a + (1.0 - t) * b).collect();
    Ok(ZigZag {
        xi1: xi1.to_vec(),
        xi2: xi2.to_vec(),
        t,
        h,
        mean_gradient,
        sup_bound: t * (1.0 - t) * len / hf,
        function: PiecewiseAffineFn {
            domain: domain.clone(),
            pieces,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_bad_parameters() {
        let b = BoxDomain::unit(2);
        assert!(zigzag_sequence(&[1.0, 0.0], &[1.0, 0.0], 0.5, 3, &b).is_err());
        assert!(zigzag_sequence(&[1.0, 0.0], &[0.0, 0.0], 0.0, 3, &b).is_err());
        assert!(zigzag_sequence(&[1.0, 0.0], &[0.0, 0.0], 1.0, 3, &b).is_err());
        assert!(zigzag_sequence(&[1.0, 0.0], &[0.0, 0.0], 0.5, 0, &b).is_err());
        assert!(zigzag_sequence(&[1.0], &[0.0, 0.0], 0.5, 1, &b).is_err());
    }

    #[test]
    fn symmetric_example_bound() {
        let b = BoxDomain::unit(2);
        let z = zigzag_sequence(&[1.0, 0.0], &[-1.0, 0.0], 0.5, 10, &b).unwrap();
        assert!((z.sup_bound - 0.05).abs() < 1e-15);
        assert_eq!(z.mean_gradient, vec![0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let y = b.sample(&mut rng);
            let u = z.function.eval(&y).unwrap();
            assert!(u.abs() <= 0.05 + 1e-12);
            let g = z.function.gradient(&y).unwrap();
            assert!(g == [1.0, 0.0] || g == [-1.0, 0.0]);
        }
    }

    #[test]
    fn slab_lookup_matches_linear_scan() {
        let b = BoxDomain::cube(3, -1.0, 2.0);
        let z = zigzag_sequence(&[0.3, -2.0, 1.0], &[1.0, 0.5, -0.7], 0.3, 7, &b).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..2000 {
            let y = b.sample(&mut rng);
            let fast = z.function.piece_at(&y).unwrap();
            let slow = z.function.pieces.iter().find(|p| p.region.contains(&y)).unwrap();
            assert_eq!(fast, slow);
        }
    }

    #[test]
    fn continuity_across_slab_boundaries() {
        let b = BoxDomain::unit(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = zigzag_sequence(&[2.0, 1.0], &[-1.0, 0.5], 0.35, 13, &b).unwrap();
        let pieces = &z.function.pieces;
        for w in pieces.windows(2) {
            let (Region::Slab { normal, hi, .. }, Region::Slab { lo, .. }) = (&w[0].region, &w[1].region) else {
                unreachable!()
            };
            assert_eq!(hi, lo);
            // A point on the shared face: any y with <normal, y> = hi.
            for _ in 0..8 {
                let mut y: Vec<f64> = (0..2).map(|_| rng.gen_range(-3.0..3.0)).collect();
                let s = dot(normal, &y);
                for (yi, ni) in y.iter_mut().zip(normal) {
                    *yi += (hi - s) * ni;
                }
                assert!((w[0].eval(&y) - w[1].eval(&y)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn gradient_fraction_axis_aligned() {
        let b = BoxDomain::unit(2);
        let z = zigzag_sequence(&[0.0, 0.0], &[1.0, 0.0], 0.25, 4, &b).unwrap();
        // Slabs along x1 with period 1/4: exactly a quarter of each period.
        let frac = z.function.gradient_fraction(&[0.0, 0.0], 64).unwrap();
        assert!((frac - 0.25).abs() < 1e-12);
    }

    #[test]
    fn affine_piece() {
        let f = PiecewiseAffineFn::affine(BoxDomain::unit(2), vec![1.0, 2.0], 3.0).unwrap();
        assert_eq!(f.eval(&[1.0, 1.0]).unwrap(), 6.0);
        assert!(f.eval(&[2.0, 1.0]).is_err());
    }
}
