//! Itineraries, the phased itinerary with quadratic zero-blocks, and
//! kneading words of the critical value.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::dynamics::Parameter;
use crate::error::{Error, Result};
use crate::precision::Interval;

/// Finite word over `{0, 1}`; `0` is the trap `Y`, `1` the trap `Y~`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct ItineraryWord(pub Vec<u8>);

impl ItineraryWord {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn prefix(&self, k: usize) -> ItineraryWord {
        ItineraryWord(self.0[..k.min(self.0.len())].to_vec())
    }

    pub fn is_prefix_of(&self, other: &ItineraryWord) -> bool {
        other.0.starts_with(&self.0)
    }
}

impl fmt::Display for ItineraryWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl FromStr for ItineraryWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|ch| match ch {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::Precondition(format!("itinerary symbol {other:?} is not 0 or 1"))),
            })
            .collect::<Result<Vec<u8>>>()
            .map(ItineraryWord)
    }
}

impl Serialize for ItineraryWord {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// `a_k = 0` iff `k` lies in a block `[l^2, l^2 + N - 1]` with `l >= l0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PhasedSpec {
    pub n_zeros_block: u64,
    pub l0: u64,
}

impl PhasedSpec {
    pub fn new(n_zeros_block: u64, l0: u64) -> Result<Self> {
        if n_zeros_block < 1 || l0 < 1 || 2 * l0 < n_zeros_block {
            return Err(Error::Precondition(format!(
                "phased spec needs N >= 1, l0 >= 1 and 2 l0 >= N (got N = {n_zeros_block}, l0 = {l0})"
            )));
        }
        Ok(PhasedSpec { n_zeros_block, l0 })
    }

    pub fn symbol(&self, k: u64) -> u8 {
        let l = isqrt(k);
        if l >= self.l0 && k - l * l < self.n_zeros_block {
            0
        } else {
            1
        }
    }

    /// Number of zeros among `a_0 .. a_{k-1}`, in `O(sqrt k)`.
    pub fn count_zeros(&self, k: u64) -> u64 {
        let mut total = 0;
        let mut l = self.l0;
        while l * l < k {
            total += self.n_zeros_block.min(k - l * l);
            l += 1;
        }
        total
    }

    /// Number of maximal constant blocks in `a_0 .. a_{k-1}`.
    pub fn count_blocks(&self, k: u64) -> u64 {
        if k == 0 {
            return 0;
        }
        let mut blocks = 1;
        let mut l = self.l0;
        while l * l < k {
            // 1 -> 0 switch at l^2 (never at index 0, since l0 >= 1).
            blocks += 1;
            if l * l + self.n_zeros_block < k {
                blocks += 1;
            }
            l += 1;
        }
        blocks
    }
}

fn isqrt(k: u64) -> u64 {
    let mut l = (k as f64).sqrt() as u64;
    while l * l > k {
        l -= 1;
    }
    while (l + 1) * (l + 1) <= k {
        l += 1;
    }
    l
}

/// The first `k_len` symbols of the phased itinerary.
pub fn phased_itinerary(spec: &PhasedSpec, k_len: usize) -> ItineraryWord {
    ItineraryWord((0..k_len as u64).map(|k| spec.symbol(k)).collect())
}

/// Zero-density and block-count statistics of a prefix of length `k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DensityStats {
    pub k: u64,
    pub zeros: u64,
    pub blocks: u64,
    pub zero_density: f64,
    /// Should stay bounded by a multiple of `sqrt k`.
    pub blocks_over_sqrt_k: f64,
}

/// The bounds `B(k) <= 2(sqrt k - l0) + 3` and
/// `N (sqrt k - l0) <= N(k) <= N sqrt k`, asserted for `k >= l0^2 + 1`.
pub fn density_bounds_hold(spec: &PhasedSpec, k: u64) -> bool {
    if k <= spec.l0 * spec.l0 {
        return spec.count_zeros(k) == 0 && spec.count_blocks(k) == 1.min(k);
    }
    let sk = (k as f64).sqrt();
    let l0 = spec.l0 as f64;
    let n = spec.n_zeros_block as f64;
    let zeros = spec.count_zeros(k) as f64;
    let eps = 1e-9;
    spec.count_blocks(k) as f64 <= 2.0 * (sk - l0) + 3.0 + eps && n * (sk - l0) <= zeros + eps && zeros <= n * sk + eps
}

pub fn density_stats(spec: &PhasedSpec, k: u64) -> DensityStats {
    let zeros = spec.count_zeros(k);
    let blocks = spec.count_blocks(k);
    DensityStats {
        k,
        zeros,
        blocks,
        zero_density: if k == 0 { 0.0 } else { zeros as f64 / k as f64 },
        blocks_over_sqrt_k: if k == 0 { 0.0 } else { blocks as f64 / (k as f64).sqrt() },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Sign {
    Minus,
    Zero,
    Plus,
}

impl Sign {
    fn rank(self) -> i8 {
        match self {
            Sign::Minus => -1,
            Sign::Zero => 0,
            Sign::Plus => 1,
        }
    }

    fn as_char(self) -> char {
        match self {
            Sign::Minus => '-',
            Sign::Zero => '0',
            Sign::Plus => '+',
        }
    }
}

/// Signs of `f^j(c)`; ends at the first value that cannot be separated
/// from `0`, whose index is `critical_flag`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SignWord {
    pub signs: Vec<Sign>,
    pub critical_flag: Option<usize>,
}

impl SignWord {
    pub fn from_signs(signs: Vec<Sign>) -> Self {
        let critical_flag = signs.iter().position(|s| *s == Sign::Zero);
        let signs = match critical_flag {
            Some(j) => signs[..=j].to_vec(),
            None => signs,
        };
        SignWord { signs, critical_flag }
    }
}

impl fmt::Display for SignWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.signs {
            write!(f, "{}", s.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for SignWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let signs = s
            .chars()
            .map(|ch| match ch {
                '-' => Ok(Sign::Minus),
                '+' => Ok(Sign::Plus),
                '0' => Ok(Sign::Zero),
                other => Err(Error::Precondition(format!("sign symbol {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SignWord::from_signs(signs))
    }
}

impl Serialize for SignWord {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Signs of the critical orbit `c, f(c), ..., f^m(c)`, evaluated with
/// outward-rounded intervals so an uncertain sign is flagged, never guessed.
pub fn kneading_word(c: &Parameter, m: usize) -> SignWord {
    let ci = Interval::point(&c.c);
    let mut z = ci.clone();
    let mut signs = Vec::with_capacity(m + 1);
    for j in 0..=m {
        if j > 0 {
            z = z.quad(&ci);
        }
        let s = if z.is_positive() {
            Sign::Plus
        } else if z.is_negative() {
            Sign::Minus
        } else {
            Sign::Zero
        };
        signs.push(s);
        if s == Sign::Zero {
            break;
        }
    }
    SignWord::from_signs(signs)
}

/// Parity-adjusted lexicographic order: `- < +` at the first difference,
/// reversed when an odd number of `-` precede it.
pub fn kneading_compare(a: &SignWord, b: &SignWord) -> Result<Ordering> {
    if a.critical_flag.is_some() || b.critical_flag.is_some() {
        return Err(Error::Undecided("kneading words with critical flags are incomparable; refine precision".into()));
    }
    if a.signs.len() != b.signs.len() {
        return Err(Error::Precondition("kneading words must have equal length".into()));
    }
    let mut odd = false;
    for (x, y) in a.signs.iter().zip(&b.signs) {
        if x != y {
            let o = x.rank().cmp(&y.rank());
            return Ok(if odd { o.reverse() } else { o });
        }
        if *x == Sign::Minus {
            odd = !odd;
        }
    }
    Ok(Ordering::Equal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn phased_prefix_matches_definition() {
        let spec = PhasedSpec::new(2, 2).unwrap();
        assert_eq!(phased_itinerary(&spec, 11).to_string(), "11110011100");
        assert_eq!(spec.count_zeros(6), 2);
        assert_eq!(spec.count_blocks(6), 2);
        assert_eq!(phased_itinerary(&PhasedSpec::new(3, 5).unwrap(), 1).0, vec![1]);
    }

    #[test]
    fn rejects_overlapping_blocks() {
        assert!(PhasedSpec::new(5, 2).is_err());
        assert!(PhasedSpec::new(0, 2).is_err());
    }

    #[test]
    fn word_round_trip() {
        let w: ItineraryWord = "0110".parse().unwrap();
        assert_eq!(w.to_string(), "0110");
        assert!("012".parse::<ItineraryWord>().is_err());
        let s: SignWord = "-+0".parse().unwrap();
        assert_eq!(s.critical_flag, Some(2));
    }

    #[test]
    fn kneading_at_minus_two_and_minus_one() {
        let c = Parameter::from_f64(-2.0, 106).unwrap();
        assert_eq!(kneading_word(&c, 5).to_string(), "-+++++");
        let c = Parameter::from_f64(-1.0, 106).unwrap();
        let w = kneading_word(&c, 4);
        assert_eq!(w.to_string(), "-0");
        assert_eq!(w.critical_flag, Some(1));
        let c = Parameter::from_f64(-0.5, 106).unwrap();
        assert_eq!(kneading_word(&c, 3).to_string(), "----");
    }

    #[test]
    fn flagged_words_are_incomparable() {
        let a: SignWord = "-0".parse().unwrap();
        let b: SignWord = "-+".parse().unwrap();
        assert!(kneading_compare(&a, &b).is_err());
        let x: SignWord = "-++".parse().unwrap();
        let y: SignWord = "-+-".parse().unwrap();
        assert_eq!(kneading_compare(&x, &y).unwrap(), Ordering::Less);
        assert_eq!(kneading_compare(&"+".parse().unwrap(), &"-".parse().unwrap()).unwrap(), Ordering::Greater);
    }

    #[test]
    fn phased_prefixes_are_nested() {
        let spec = PhasedSpec::new(3, 2).unwrap();
        for k in 1..200 {
            assert!(phased_itinerary(&spec, k).is_prefix_of(&phased_itinerary(&spec, k + 1)));
        }
        let sq = phased_itinerary(&PhasedSpec::new(1, 1).unwrap(), 5);
        assert_eq!(sq.to_string(), "10110");
        assert!(density_bounds_hold(&PhasedSpec::new(2, 2).unwrap(), 6));
    }

    #[test]
    fn order_is_total_on_short_words() {
        let words: Vec<SignWord> = (0..256u32)
            .map(|bits| {
                SignWord::from_signs((0..8).map(|i| if bits >> i & 1 == 1 { Sign::Plus } else { Sign::Minus }).collect())
            })
            .collect();
        for a in &words {
            for b in &words {
                let ab = kneading_compare(a, b).unwrap();
                assert_eq!(ab, kneading_compare(b, a).unwrap().reverse());
                assert_eq!(ab == Ordering::Equal, a == b);
            }
        }
        let short = &words[..64];
        for a in short {
            for b in short {
                for c in short {
                    let le = |x, y| kneading_compare(x, y).unwrap() != Ordering::Greater;
                    if le(a, b) && le(b, c) {
                        assert!(le(a, c));
                    }
                }
            }
        }
    }

    #[test]
    fn kneading_is_monotone_in_c() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut cs: Vec<f64> = (0..400).map(|_| rng.gen_range(-2.0..-0.8)).collect();
        cs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let words: Vec<SignWord> = cs.iter().map(|&c| kneading_word(&Parameter::from_f64(c, 106).unwrap(), 10)).collect();
        for w in words.windows(2) {
            // Larger c never gives a smaller kneading word.
            assert_ne!(kneading_compare(&w[0], &w[1]).unwrap(), Ordering::Greater, "{} vs {}", w[0], w[1]);
        }
    }

    proptest! {
        #[test]
        fn closed_form_counts_match_scan(n in 1u64..6, extra in 0u64..4, k in 0u64..3000) {
            let l0 = (n + 1) / 2 + extra;
            let spec = PhasedSpec::new(n, l0.max(1)).unwrap();
            let w = phased_itinerary(&spec, k as usize);
            let zeros = w.0.iter().filter(|s| **s == 0).count() as u64;
            let blocks = if w.is_empty() { 0 } else { 1 + w.0.windows(2).filter(|p| p[0] != p[1]).count() as u64 };
            prop_assert_eq!(spec.count_zeros(k), zeros);
            prop_assert_eq!(spec.count_blocks(k), blocks);
        }

        #[test]
        fn zero_density_vanishes(n in 1u64..8) {
            let spec = PhasedSpec::new(n, n).unwrap();
            let d1 = density_stats(&spec, 10_000);
            let d2 = density_stats(&spec, 1_000_000);
            prop_assert!(d2.zero_density < d1.zero_density);
            prop_assert!(d2.blocks_over_sqrt_k <= 2.0 + 1e-9);
        }
    }
}
