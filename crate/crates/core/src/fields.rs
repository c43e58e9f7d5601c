//! Coefficient containers for skeleton and volume quantities.
//!
//! Skeleton fields are one flat vector with a block layout: block 0 is the
//! outer boundary Γ, block `j + 1` is the boundary of subdomain `j`. Primal
//! (trace) and dual (Neumann-type) fields are distinct types, so adding a
//! primal field to a dual one does not compile. Pairings are bilinear.

use std::ops::{Add, Mul, Neg, Range, Sub};

use ndarray::{Array1, ArrayView1, ArrayViewMut1};
use rand::Rng;

use crate::linalg::{dotu, norm2, C64};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkeletonLayout {
    offsets: Vec<usize>,
}

impl SkeletonLayout {
    pub fn new(sizes: impl IntoIterator<Item = usize>) -> Self {
        let mut offsets = vec![0];
        for s in sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        SkeletonLayout { offsets }
    }

    pub fn n_blocks(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn len(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self, b: usize) -> Range<usize> {
        self.offsets[b]..self.offsets[b + 1]
    }

    pub fn block_len(&self, b: usize) -> usize {
        self.offsets[b + 1] - self.offsets[b]
    }
}

macro_rules! skeleton_field {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(pub Array1<C64>);

        impl $name {
            pub fn zeros(layout: &SkeletonLayout) -> Self {
                $name(Array1::zeros(layout.len()))
            }

            pub fn random<R: Rng>(layout: &SkeletonLayout, rng: &mut R) -> Self {
                $name(random_vector(rng, layout.len()))
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn block(&self, layout: &SkeletonLayout, b: usize) -> ArrayView1<'_, C64> {
                self.0.slice(ndarray::s![layout.range(b)])
            }

            pub fn block_mut(&mut self, layout: &SkeletonLayout, b: usize) -> ArrayViewMut1<'_, C64> {
                self.0.slice_mut(ndarray::s![layout.range(b)])
            }

            /// Euclidean norm of the coefficients.
            pub fn coef_norm(&self) -> f64 {
                norm2(self.0.view())
            }

            pub fn scale(&self, a: C64) -> Self {
                $name(&self.0 * a)
            }
        }

        impl Add for &$name {
            type Output = $name;
            fn add(self, o: &$name) -> $name {
                $name(&self.0 + &o.0)
            }
        }

        impl Sub for &$name {
            type Output = $name;
            fn sub(self, o: &$name) -> $name {
                $name(&self.0 - &o.0)
            }
        }

        impl Add for $name {
            type Output = $name;
            fn add(self, o: $name) -> $name {
                $name(self.0 + o.0)
            }
        }

        impl Sub for $name {
            type Output = $name;
            fn sub(self, o: $name) -> $name {
                $name(self.0 - o.0)
            }
        }

        impl Neg for &$name {
            type Output = $name;
            fn neg(self) -> $name {
                $name(-&self.0)
            }
        }

        impl Mul<C64> for &$name {
            type Output = $name;
            fn mul(self, a: C64) -> $name {
                self.scale(a)
            }
        }
    };
}

skeleton_field!(Primal);
skeleton_field!(Dual);

/// Bilinear duality pairing `⟨p, v⟩` between a dual and a primal field.
pub fn duality_pair(p: &Dual, v: &Primal) -> C64 {
    dotu(p.0.view(), v.0.view())
}

/// Skew pairing `[(u, p), (v, q)] = ⟨u, q⟩ − ⟨v, p⟩`.
pub fn skew_pair(m: (&Primal, &Dual), n: (&Primal, &Dual)) -> C64 {
    duality_pair(n.1, m.0) - duality_pair(m.1, n.0)
}

/// A tuple in the multi-domain volume space: the Γ pair `(α, p)` followed by
/// one coefficient vector per subdomain in local (interior, boundary) order.
/// The same container holds dual tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeTuple {
    pub gamma_alpha: Array1<C64>,
    pub gamma_p: Array1<C64>,
    pub omega: Vec<Array1<C64>>,
}

impl VolumeTuple {
    pub fn zeros(n_gamma: usize, local_sizes: &[usize]) -> Self {
        VolumeTuple {
            gamma_alpha: Array1::zeros(n_gamma),
            gamma_p: Array1::zeros(n_gamma),
            omega: local_sizes.iter().map(|&n| Array1::zeros(n)).collect(),
        }
    }

    pub fn random<R: Rng>(n_gamma: usize, local_sizes: &[usize], rng: &mut R) -> Self {
        VolumeTuple {
            gamma_alpha: random_vector(rng, n_gamma),
            gamma_p: random_vector(rng, n_gamma),
            omega: local_sizes.iter().map(|&n| random_vector(rng, n)).collect(),
        }
    }

    pub fn map2(&self, o: &VolumeTuple, f: impl Fn(&Array1<C64>, &Array1<C64>) -> Array1<C64>) -> VolumeTuple {
        VolumeTuple {
            gamma_alpha: f(&self.gamma_alpha, &o.gamma_alpha),
            gamma_p: f(&self.gamma_p, &o.gamma_p),
            omega: self.omega.iter().zip(&o.omega).map(|(a, b)| f(a, b)).collect(),
        }
    }

    pub fn sub(&self, o: &VolumeTuple) -> VolumeTuple {
        self.map2(o, |a, b| a - b)
    }

    pub fn add(&self, o: &VolumeTuple) -> VolumeTuple {
        self.map2(o, |a, b| a + b)
    }

    pub fn conj(&self) -> VolumeTuple {
        VolumeTuple {
            gamma_alpha: self.gamma_alpha.mapv(|z| z.conj()),
            gamma_p: self.gamma_p.mapv(|z| z.conj()),
            omega: self.omega.iter().map(|v| v.mapv(|z| z.conj())).collect(),
        }
    }

    /// Bilinear pairing of a dual tuple with a primal tuple, block by block.
    pub fn pair(&self, o: &VolumeTuple) -> C64 {
        dotu(self.gamma_alpha.view(), o.gamma_alpha.view())
            + dotu(self.gamma_p.view(), o.gamma_p.view())
            + self
                .omega
                .iter()
                .zip(&o.omega)
                .map(|(a, b)| dotu(a.view(), b.view()))
                .sum::<C64>()
    }

    pub fn coef_norm(&self) -> f64 {
        let mut s = norm2(self.gamma_alpha.view()).powi(2) + norm2(self.gamma_p.view()).powi(2);
        for v in &self.omega {
            s += norm2(v.view()).powi(2);
        }
        s.sqrt()
    }
}

/// Vector with independent entries uniform in the unit square of ℂ centred at 0.
pub fn random_vector<R: Rng>(rng: &mut R, n: usize) -> Array1<C64> {
    (0..n)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}
