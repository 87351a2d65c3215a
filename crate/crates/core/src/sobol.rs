//! Owen-scrambled Sobol points on the unit hypercube.
//!
//! Direction numbers come from the Joe & Kuo table. Scrambling is the
//! hash-based nested uniform scramble (Laine–Karras style) applied to the
//! bit-reversed integer, which keeps the (t, m, s)-net structure of every
//! power-of-two prefix while making the sequence depend on the seed.

use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::sobol_table::{MAX_DIMS, POLY, VINIT};

const BITS: usize = 32;

#[derive(Debug, Clone)]
pub struct Sobol {
    directions: Vec<[u32; BITS]>,
    scramble: Vec<u32>,
}

pub const MAX_DIMENSIONS: usize = MAX_DIMS;

impl Sobol {
    /// Scrambled generator over `dims` dimensions.
    pub fn new(dims: usize, seed: u64) -> Result<Self> {
        let mut sobol = Self::unscrambled(dims)?;
        sobol.scramble = (0..dims)
            .map(|d| (derive_seed(seed, "sobol", d as u64) >> 32) as u32)
            .collect();
        Ok(sobol)
    }

    pub(crate) fn unscrambled(dims: usize) -> Result<Self> {
        if dims == 0 || dims > MAX_DIMS {
            return Err(Error::InvalidArgument(format!(
                "sobol dimension must be in [1, {MAX_DIMS}], got {dims}"
            )));
        }
        let directions = (0..dims).map(direction_numbers).collect();
        Ok(Self {
            directions,
            scramble: Vec::new(),
        })
    }

    pub fn dims(&self) -> usize {
        self.directions.len()
    }

    fn raw(&self, index: u32, dim: usize) -> u32 {
        let v = &self.directions[dim];
        let mut x = 0u32;
        let mut i = index;
        let mut k = 0;
        while i != 0 {
            if i & 1 == 1 {
                x ^= v[k];
            }
            i >>= 1;
            k += 1;
        }
        x
    }

    /// Coordinate `dim` of point `index`, strictly inside (0, 1).
    pub fn coordinate(&self, index: u32, dim: usize) -> f64 {
        let mut x = self.raw(index, dim);
        if let Some(&s) = self.scramble.get(dim) {
            x = owen_scramble(x, s);
        }
        (f64::from(x) + 0.5) / 4_294_967_296.0
    }

    pub fn point(&self, index: u32) -> Vec<f64> {
        (0..self.dims()).map(|d| self.coordinate(index, d)).collect()
    }

    pub fn points(&self, n: usize) -> Vec<Vec<f64>> {
        (0..n as u32).map(|i| self.point(i)).collect()
    }
}

fn direction_numbers(dim: usize) -> [u32; BITS] {
    let mut m = [0u32; BITS];
    if dim == 0 {
        for (k, mk) in m.iter_mut().enumerate() {
            *mk = 1 << (BITS - 1 - k);
        }
        return m;
    }
    let poly = POLY[dim];
    let degree = (32 - poly.leading_zeros() - 1) as usize;
    let inner = (poly >> 1) & ((1 << (degree - 1)) - 1);
    let mut mm = [0u32; BITS];
    mm[..degree].copy_from_slice(&VINIT[dim][..degree]);
    for k in degree..BITS {
        let mut value = mm[k - degree] ^ (mm[k - degree] << degree);
        for i in 1..degree {
            if (inner >> (degree - 1 - i)) & 1 == 1 {
                value ^= mm[k - i] << i;
            }
        }
        mm[k] = value;
    }
    for k in 0..BITS {
        m[k] = mm[k] << (BITS - 1 - k);
    }
    m
}

fn hash(mut n: u32) -> u32 {
    n ^= 0x79c6_8e4a;
    n ^= n >> 16;
    n = n.wrapping_mul(0x7feb_352d);
    n ^= n >> 15;
    n = n.wrapping_mul(0x846c_a68b);
    n ^ (n >> 16)
}

fn owen_scramble(x: u32, seed: u32) -> u32 {
    let seed = hash(seed);
    let mut n = x.reverse_bits();
    n ^= n.wrapping_mul(0x3d20_adea);
    n = n.wrapping_add(seed);
    n = n.wrapping_mul((seed >> 16) | 1);
    n ^= n.wrapping_mul(0x0552_6c56);
    n ^= n.wrapping_mul(0x53a2_2864);
    n.reverse_bits()
}
