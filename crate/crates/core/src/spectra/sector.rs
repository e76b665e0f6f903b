use std::collections::BTreeMap;
use std::fmt;

use crate::lattice::Spin;

/// Label of an operator or density-matrix block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sector {
    /// Unblocked: the whole Hilbert space.
    Full,
    /// Fixed total magnetization, stored as `2 S^z`.
    Magnetization(i32),
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sector::Full => f.write_str("full"),
            Sector::Magnetization(m2) if m2 % 2 == 0 => write!(f, "Sz={}", m2 / 2),
            Sector::Magnetization(m2) => write!(f, "Sz={m2}/2"),
        }
    }
}

/// Mixed-radix encoding of product states; site 0 is the most significant digit
/// and digit `k` stands for `m = s - k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfigSpace {
    pub spin: Spin,
    pub n_sites: usize,
}

impl ConfigSpace {
    pub fn new(spin: Spin, n_sites: usize) -> Self {
        ConfigSpace { spin, n_sites }
    }

    pub fn local_dim(&self) -> u64 {
        self.spin.dim() as u64
    }

    pub fn dim(&self) -> u64 {
        self.local_dim().pow(self.n_sites as u32)
    }

    /// Place value of a site's digit.
    pub fn stride(&self, site: usize) -> u64 {
        self.local_dim().pow((self.n_sites - 1 - site) as u32)
    }

    pub fn digit(&self, config: u64, site: usize) -> u64 {
        (config / self.stride(site)) % self.local_dim()
    }

    /// `2 S^z` of a configuration.
    pub fn magnetization(&self, config: u64) -> i32 {
        let d = self.local_dim();
        let twice = self.spin.twice();
        let mut c = config;
        let mut m2 = 0;
        for _ in 0..self.n_sites {
            m2 += twice - 2 * (c % d) as i32;
            c /= d;
        }
        m2
    }

    /// All configurations, in increasing order, bucketed by magnetization.
    pub fn sectors(&self) -> Vec<SectorBasis> {
        let mut buckets: BTreeMap<i32, Vec<u64>> = BTreeMap::new();
        for c in 0..self.dim() {
            buckets.entry(self.magnetization(c)).or_default().push(c);
        }
        buckets
            .into_iter()
            .map(|(m2, configs)| SectorBasis {
                sector: Sector::Magnetization(m2),
                configs,
            })
            .collect()
    }

    pub fn sector(&self, m2: i32) -> SectorBasis {
        let configs = (0..self.dim()).filter(|&c| self.magnetization(c) == m2).collect();
        SectorBasis {
            sector: Sector::Magnetization(m2),
            configs,
        }
    }

    pub fn full(&self) -> SectorBasis {
        SectorBasis {
            sector: Sector::Full,
            configs: (0..self.dim()).collect(),
        }
    }
}

/// Sorted product-state configurations spanning one block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectorBasis {
    pub sector: Sector,
    pub configs: Vec<u64>,
}

impl SectorBasis {
    pub fn dim(&self) -> usize {
        self.configs.len()
    }

    pub fn index_of(&self, config: u64) -> Option<usize> {
        self.configs.binary_search(&config).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sector_dimensions_sum_to_total() {
        for (spin, n) in [(Spin::Half, 6), (Spin::Half, 9), (Spin::One, 5)] {
            let space = ConfigSpace::new(spin, n);
            let sectors = space.sectors();
            let total: usize = sectors.iter().map(SectorBasis::dim).sum();
            assert_eq!(total as u64, space.dim());
            for s in &sectors {
                let Sector::Magnetization(m2) = s.sector else { panic!() };
                assert!(s.configs.windows(2).all(|w| w[0] < w[1]));
                assert!(s.configs.iter().all(|&c| space.magnetization(c) == m2));
            }
        }
    }

    #[test]
    fn spin_half_sector_count_and_binomials() {
        let space = ConfigSpace::new(Spin::Half, 12);
        let sectors = space.sectors();
        assert_eq!(sectors.len(), 13);
        let zero = sectors
            .iter()
            .find(|s| s.sector == Sector::Magnetization(0))
            .unwrap();
        assert_eq!(zero.dim(), 924);
        assert_eq!(space.sector(0), *zero);
    }

    #[test]
    fn digits_round_trip() {
        let space = ConfigSpace::new(Spin::One, 4);
        let c = 2 * 27 + 0 * 9 + 1 * 3 + 2;
        assert_eq!(
            (0..4).map(|s| space.digit(c, s)).collect::<Vec<_>>(),
            vec![2, 0, 1, 2]
        );
        // m = -1, +1, 0, -1
        assert_eq!(space.magnetization(c), -2);
    }
}
