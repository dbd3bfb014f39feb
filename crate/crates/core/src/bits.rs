//! Bit helpers for computational-basis indices (qubit `q` is bit `q`).

/// Deposits the low bits of `value` into the set positions of `mask`, lowest first.
#[inline]
pub fn deposit(mut value: usize, mut mask: usize) -> usize {
    let mut out = 0;
    while mask != 0 {
        let low = mask & mask.wrapping_neg();
        if value & 1 == 1 {
            out |= low;
        }
        value >>= 1;
        mask &= mask - 1;
    }
    out
}

/// Reverses the qubit order of a basis index: qubit `q` ↔ qubit `n − 1 − q`.
#[inline]
pub fn mirror(index: usize, n: usize) -> usize {
    (0..n).fold(0, |acc, q| acc | ((index >> q & 1) << (n - 1 - q)))
}

/// Qubits (0-based) contained in `mask`.
pub fn qubits(mask: u32) -> Vec<usize> {
    (0..32).filter(|q| mask >> q & 1 == 1).collect()
}

/// Spins in chain numbering (1-based) contained in `mask`.
pub fn spins(mask: u32) -> Vec<usize> {
    qubits(mask).into_iter().map(|q| q + 1).collect()
}

/// Builds a mask from 1-based spin numbers.
pub fn mask_from_spins(spins: &[usize]) -> u32 {
    spins.iter().fold(0, |m, s| m | 1 << (s - 1))
}

/// Formats a mask as `{1,4}`.
pub fn format_subset(mask: u32) -> String {
    let inner: Vec<String> = spins(mask).iter().map(|s| s.to_string()).collect();
    format!("{{{}}}", inner.join(","))
}

/// Canonical bipartition masks on `n` qubits: every proper subset containing qubit 0.
pub fn canonical_bipartitions(n: usize) -> impl Iterator<Item = u32> {
    let full = (1u32 << n) - 1;
    (1..full).step_by(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deposit_scatters_bits() {
        assert_eq!(deposit(0b11, 0b1010), 0b1010);
        assert_eq!(deposit(0b01, 0b1010), 0b0010);
        assert_eq!(deposit(0b10, 0b1010), 0b1000);
        assert_eq!(deposit(0b101, 0b1_0110), 0b1_0010);
    }

    #[test]
    fn mirror_reverses() {
        assert_eq!(mirror(0b0001, 4), 0b1000);
        assert_eq!(mirror(0b0011, 4), 0b1100);
        assert_eq!(mirror(0b1001, 4), 0b1001);
    }

    #[test]
    fn canonical_masks() {
        let m: Vec<u32> = canonical_bipartitions(3).collect();
        assert_eq!(m, vec![0b001, 0b011, 0b101]);
        assert_eq!(canonical_bipartitions(10).count(), 511);
    }

    #[test]
    fn subset_formatting() {
        assert_eq!(format_subset(mask_from_spins(&[1, 4])), "{1,4}");
        assert_eq!(spins(0b1001), vec![1, 4]);
    }
}
