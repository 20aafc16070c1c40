//! Gray-labeled square QAM with unit average symbol energy.

use num_complex::Complex64;

use crate::error::{AfdmError, Result};

/// Square QAM alphabet. Symbol index = the bit group read MSB-first
/// (in-phase bits then quadrature bits); each axis is Gray-labeled so
/// neighboring amplitudes differ in one bit.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    order: usize,
    bits_per_symbol: usize,
    points: Vec<Complex64>,
}

fn gray_decode(mut g: usize) -> usize {
    let mut b = g;
    while g > 0 {
        g >>= 1;
        b ^= g;
    }
    b
}

impl Constellation {
    pub fn qam(order: usize) -> Result<Self> {
        if !matches!(order, 4 | 16 | 64) {
            return Err(AfdmError::InvalidParameter(format!(
                "QAM order must be 4, 16, or 64, got {order}"
            )));
        }
        let bits_per_symbol = order.trailing_zeros() as usize;
        let side = 1usize << (bits_per_symbol / 2);
        let scale = (3.0 / (2.0 * (order as f64 - 1.0))).sqrt();
        let axis: Vec<f64> = (0..side)
            .map(|g| {
                let level = gray_decode(g);
                (2.0 * level as f64 - (side as f64 - 1.0)) * scale
            })
            .collect();
        let half = bits_per_symbol / 2;
        let points = (0..order)
            .map(|idx| Complex64::new(axis[idx >> half], axis[idx & (side - 1)]))
            .collect();
        Ok(Self { order, bits_per_symbol, points })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// Bits (one per u8, MSB of each group first) → symbols.
    pub fn map_bits(&self, bits: &[u8]) -> Result<Vec<Complex64>> {
        if bits.len() % self.bits_per_symbol != 0 {
            return Err(AfdmError::InvalidParameter(format!(
                "bit count {} not divisible by {} bits/symbol",
                bits.len(),
                self.bits_per_symbol
            )));
        }
        Ok(bits
            .chunks(self.bits_per_symbol)
            .map(|chunk| {
                let idx = chunk.iter().fold(0usize, |acc, &b| (acc << 1) | (b as usize & 1));
                self.points[idx]
            })
            .collect())
    }

    /// Nearest constellation index; ties break to the lowest index.
    pub fn nearest_index(&self, z: Complex64) -> usize {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    pub fn index_bits(&self, idx: usize, out: &mut Vec<u8>) {
        for shift in (0..self.bits_per_symbol).rev() {
            out.push(((idx >> shift) & 1) as u8);
        }
    }

    /// Nearest-neighbor hard demapping back to bits.
    pub fn demap(&self, symbols: &[Complex64]) -> Vec<u8> {
        let mut bits = Vec::with_capacity(symbols.len() * self.bits_per_symbol);
        for &z in symbols {
            let idx = self.nearest_index(z);
            self.index_bits(idx, &mut bits);
        }
        bits
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn qpsk_points_exact() {
        let c = Constellation::qam(4).unwrap();
        let inv_sqrt2 = 1.0 / 2f64.sqrt();
        for p in c.points() {
            assert!((p.re.abs() - inv_sqrt2).abs() < 1e-15);
            assert!((p.im.abs() - inv_sqrt2).abs() < 1e-15);
            assert!((p.norm_sqr() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn mean_energy_is_unity() {
        for order in [4usize, 16, 64] {
            let c = Constellation::qam(order).unwrap();
            let e: f64 = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / order as f64;
            assert!((e - 1.0).abs() < 1e-14, "order {order}: energy {e}");
        }
        // 16-QAM amplitude levels are {±1, ±3}/√10
        let c = Constellation::qam(16).unwrap();
        let scale = 1.0 / 10f64.sqrt();
        for p in c.points() {
            let lvl = p.re / scale;
            assert!((lvl.abs() - 1.0).abs() < 1e-12 || (lvl.abs() - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn map_demap_round_trip() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        for order in [4usize, 16, 64] {
            let c = Constellation::qam(order).unwrap();
            let bits: Vec<u8> = (0..c.bits_per_symbol() * 100)
                .map(|_| rng.random::<bool>() as u8)
                .collect();
            let symbols = c.map_bits(&bits).unwrap();
            assert_eq!(c.demap(&symbols), bits);
        }
        let c = Constellation::qam(4).unwrap();
        assert!(c.map_bits(&[1, 0, 1]).is_err());
        assert!(Constellation::qam(8).is_err());
    }

    #[test]
    fn gray_neighbors_differ_in_one_bit() {
        let c = Constellation::qam(16).unwrap();
        let pts = c.points();
        for i in 0..16 {
            for j in 0..16 {
                let dist = (pts[i] - pts[j]).norm();
                // nearest horizontal/vertical neighbors: distance 2/√10
                if (dist - 2.0 / 10f64.sqrt()).abs() < 1e-9 {
                    assert_eq!((i ^ j).count_ones(), 1, "indices {i},{j}");
                }
            }
        }
    }

    #[test]
    fn demap_tie_breaks_to_lowest_index() {
        let c = Constellation::qam(4).unwrap();
        // origin is equidistant from all four points
        assert_eq!(c.nearest_index(Complex64::ZERO), 0);
    }
}
