//! CU ↔ D2D spectrum-sharing assignments.

use crate::channel::{ChannelRealization, SystemConfig};
use crate::error::{Error, Result};

/// Largest number of pairings [`enumerate_pairings`] will materialize.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

/// An injective assignment of every D2D link to a distinct CU whose uplink
/// band it reuses. CUs without a D2D partner transmit interference-free.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pairing {
    cu_of_d2d: Vec<usize>,
    d2d_of_cu: Vec<Option<usize>>,
}

impl Pairing {
    /// `cu_of_d2d[n]` is the CU sharing its band with D2D link `n`.
    pub fn new(cu_of_d2d: Vec<usize>, cu_count: usize) -> Result<Self> {
        let mut d2d_of_cu = vec![None; cu_count];
        for (n, &k) in cu_of_d2d.iter().enumerate() {
            if k >= cu_count {
                return Err(Error::Range(format!("CU index {k} >= {cu_count}")));
            }
            if d2d_of_cu[k].replace(n).is_some() {
                return Err(Error::Domain(format!("CU {k} assigned to two D2D links")));
            }
        }
        Ok(Self {
            cu_of_d2d,
            d2d_of_cu,
        })
    }

    pub fn d2d_count(&self) -> usize {
        self.cu_of_d2d.len()
    }

    pub fn cu_count(&self) -> usize {
        self.d2d_of_cu.len()
    }

    pub fn cu_of(&self, d2d: usize) -> usize {
        self.cu_of_d2d[d2d]
    }

    pub fn d2d_of(&self, cu: usize) -> Option<usize> {
        self.d2d_of_cu[cu]
    }

    /// `cu_of_d2d` as a slice.
    pub fn as_slice(&self) -> &[usize] {
        &self.cu_of_d2d
    }

    /// Resource-reuse indicator `ρ_{k,n}`.
    pub fn rho(&self, cu: usize, d2d: usize) -> bool {
        self.d2d_of_cu[cu] == Some(d2d)
    }
}

impl std::fmt::Display for Pairing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .cu_of_d2d
            .iter()
            .enumerate()
            .map(|(n, k)| format!("D{}-C{}", n + 1, k + 1))
            .collect();
        f.write_str(&parts.join(" "))
    }
}

/// `K! / (K − N)!`, saturating.
pub fn pairing_count(n: usize, k: usize) -> u128 {
    if n > k {
        return 0;
    }
    (k - n + 1..=k).fold(1u128, |acc, x| acc.saturating_mul(x as u128))
}

pub fn enumerate_pairings(n: usize, k: usize) -> Result<Vec<Pairing>> {
    enumerate_pairings_capped(n, k, DEFAULT_ENUMERATION_CAP)
}

/// All injective D2D → CU maps in lexicographic order of `cu_of_d2d`.
pub fn enumerate_pairings_capped(n: usize, k: usize, cap: u128) -> Result<Vec<Pairing>> {
    if n == 0 || n > k {
        return Err(Error::Range(format!("need 1 <= N <= K, got N = {n}, K = {k}")));
    }
    let count = pairing_count(n, k);
    if count > cap {
        return Err(Error::Size { count, cap });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut current = Vec::with_capacity(n);
    let mut used = vec![false; k];
    fn rec(n: usize, used: &mut [bool], current: &mut Vec<usize>, out: &mut Vec<Pairing>) {
        if current.len() == n {
            out.push(Pairing::new(current.clone(), used.len()).expect("injective by construction"));
            return;
        }
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                current.push(c);
                rec(n, used, current, out);
                current.pop();
                used[c] = false;
            }
        }
    }
    rec(n, &mut used, &mut current, &mut out);
    Ok(out)
}

/// Per-pair score `|h̃_k|²/|v_{n,k}|² + |h_{n,n}|²/|u_n|²`, indexed `[n][k]`.
pub fn rcs_scores(ch: &ChannelRealization) -> Result<Vec<Vec<f64>>> {
    let (n, k) = (ch.d2d_count(), ch.cu_count());
    let mut s = vec![vec![0.0; k]; n];
    for d in 0..n {
        let u = ch.u[d].norm_sqr();
        if u == 0.0 {
            return Err(Error::DegenerateChannel(format!("|u_{d}| = 0")));
        }
        for c in 0..k {
            let v = ch.v[d][c].norm_sqr();
            if v == 0.0 {
                return Err(Error::DegenerateChannel(format!("|v_{d},{c}| = 0")));
            }
            s[d][c] = ch.h_tilde[c].norm_sqr() / v + ch.h[d][d].norm_sqr() / u;
        }
    }
    Ok(s)
}

pub fn rcs_score(scores: &[Vec<f64>], pairing: &Pairing) -> f64 {
    pairing
        .as_slice()
        .iter()
        .enumerate()
        .map(|(n, &k)| scores[n][k])
        .sum()
}

/// Pairing maximizing the summed channel-strength ratios; the first pairing
/// in lexicographic order wins ties.
pub fn rcs_pairing(ch: &ChannelRealization, cfg: &SystemConfig) -> Result<Pairing> {
    if ch.d2d_count() != cfg.d2d_count || ch.cu_count() != cfg.cu_count {
        return Err(Error::Dimension(format!(
            "realization has N = {}, K = {}; config has N = {}, K = {}",
            ch.d2d_count(),
            ch.cu_count(),
            cfg.d2d_count,
            cfg.cu_count
        )));
    }
    let scores = rcs_scores(ch)?;
    let mut best: Option<(f64, Pairing)> = None;
    for p in enumerate_pairings(cfg.d2d_count, cfg.cu_count)? {
        let s = rcs_score(&scores, &p);
        if best.as_ref().map_or(true, |(b, _)| s > *b) {
            best = Some((s, p));
        }
    }
    Ok(best.expect("at least one pairing").1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(enumerate_pairings(1, 3).unwrap().len(), 3);
        assert_eq!(enumerate_pairings(2, 4).unwrap().len(), 12);
        assert_eq!(enumerate_pairings(2, 2).unwrap().len(), 2);
        assert_eq!(pairing_count(3, 10), 720);
        assert!(enumerate_pairings(3, 2).is_err());
    }

    #[test]
    fn cap_is_enforced() {
        let r = enumerate_pairings_capped(2, 4, 11);
        assert!(matches!(r, Err(Error::Size { count: 12, cap: 11 })));
    }

    #[test]
    fn lexicographic_and_unique() {
        let ps = enumerate_pairings(2, 3).unwrap();
        let tuples: Vec<_> = ps.iter().map(|p| p.as_slice().to_vec()).collect();
        assert_eq!(
            tuples,
            vec![vec![0, 1], vec![0, 2], vec![1, 0], vec![1, 2], vec![2, 0], vec![2, 1]]
        );
    }

    #[test]
    fn rejects_non_injective() {
        assert!(Pairing::new(vec![1, 1], 3).is_err());
        assert!(Pairing::new(vec![3], 3).is_err());
        let p = Pairing::new(vec![2, 0], 3).unwrap();
        assert!(p.rho(2, 0) && p.rho(0, 1) && !p.rho(1, 0));
        assert_eq!(p.d2d_of(1), None);
        assert_eq!(p.to_string(), "D1-C3 D2-C1");
    }
}
