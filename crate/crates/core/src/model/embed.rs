use super::config::{Capacity, Configuration};
use crate::{Error, Result};

/// Two-sided exclusion configuration: the bulk Λ_N padded with zeros on the
/// left and ones on the right.
///
/// Only the window `lo..=hi` is stored; sites outside it take the constant
/// fill of their side.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LineConfiguration {
    n: usize,
    lo: i64,
    window: Vec<u8>,
    left_fill: u8,
    right_fill: u8,
}

impl LineConfiguration {
    pub fn get(&self, x: i64) -> u8 {
        if x < self.lo {
            self.left_fill
        } else if x > self.hi() {
            self.right_fill
        } else {
            self.window[(x - self.lo) as usize]
        }
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.window.len() as i64 - 1
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn left_fill(&self) -> u8 {
        self.left_fill
    }

    pub fn right_fill(&self) -> u8 {
        self.right_fill
    }

    /// Σ η(x) over `a..=b`.
    pub fn mass(&self, a: i64, b: i64) -> u64 {
        (a..=b).map(|x| u64::from(self.get(x))).sum()
    }
}

/// Embeds a k = 1 configuration into ℤ: 0 on sites ≤ 0, η on Λ_N, 1 on
/// sites ≥ N. The stored window is `lo..=hi`, which must cover Λ_N and hold
/// at most `max_window` sites.
pub fn embed_to_line(eta: &Configuration, lo: i64, hi: i64, max_window: usize) -> Result<LineConfiguration> {
    if eta.capacity() != Capacity::EXCLUSION {
        return Err(Error::InvalidSpec("embedding is defined for k = 1 only".into()));
    }
    let n = eta.n() as i64;
    if lo > 1 || hi < n - 1 {
        return Err(Error::InvalidArgument(format!(
            "window {lo}..={hi} must cover the bulk 1..={}",
            n - 1
        )));
    }
    let requested = (hi - lo + 1) as usize;
    if requested > max_window {
        return Err(Error::WindowTooLarge { requested, max: max_window });
    }
    let window = (lo..=hi)
        .map(|x| {
            if x <= 0 {
                0
            } else if x >= n {
                1
            } else {
                eta.get(x as usize) as u8
            }
        })
        .collect();
    Ok(LineConfiguration { n: eta.n(), lo, window, left_fill: 0, right_fill: 1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pads_with_zeros_and_ones() {
        let eta = Configuration::exclusion(&[0, 1]).unwrap();
        let line = embed_to_line(&eta, -2, 5, 64).unwrap();
        let got: Vec<u8> = (-4..=7).map(|x| line.get(x)).collect();
        assert_eq!(got, vec![0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1]);
    }

    #[test]
    fn empty_configuration_is_a_step_at_n() {
        let eta = Configuration::empty(6, Capacity::EXCLUSION).unwrap();
        let line = embed_to_line(&eta, 1, 5, 64).unwrap();
        assert!((-10..6).all(|x| line.get(x) == 0));
        assert!((6..20).all(|x| line.get(x) == 1));
    }

    #[test]
    fn bulk_mass_is_preserved() {
        let eta = Configuration::exclusion(&[1, 0, 1, 1, 0, 1]).unwrap();
        let line = embed_to_line(&eta, -3, 10, 64).unwrap();
        assert_eq!(line.mass(1, 6), eta.total_mass());
    }

    #[test]
    fn oversized_window_is_rejected() {
        let eta = Configuration::exclusion(&[1, 0]).unwrap();
        assert!(matches!(embed_to_line(&eta, -100, 100, 50), Err(Error::WindowTooLarge { .. })));
        assert!(embed_to_line(&eta, 2, 2, 50).is_err());
    }
}
