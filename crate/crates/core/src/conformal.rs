//! Seeded randomized runs of the exact ultrametric and conformal identities.
//!
//! Degenerate draws (coincident points, points sent to ∞, images whose
//! separation falls below the carried precision) are redrawn and counted as
//! skipped; every identity is checked on exactly `trials` valid draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::mobius_covariance_check;
use crate::mobius::{check_inversion_identity, check_mmd, cross_ratio, random_word, MobiusWord};
use crate::padic::{random_point, PAdicPoint, ProjPoint};
use crate::tree::Window;

/// `(p, d)` pairs cycled through by the trials.
pub const SHAPES: [(u32, usize); 6] = [(2, 1), (2, 2), (3, 1), (3, 2), (5, 1), (5, 2)];
const WINDOW_TOP: i32 = 3;
const DIGITS: usize = 12;
const WORD_LEN: usize = 6;
const MAX_REDRAWS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityTally {
    pub identity: String,
    pub passed: usize,
    pub trials: usize,
    pub skipped: usize,
}

impl IdentityTally {
    pub fn all_pass(&self) -> bool {
        self.passed == self.trials
    }
}

fn run(
    name: &str,
    trials: usize,
    rng: &mut ChaCha8Rng,
    mut draw: impl FnMut(usize, &mut ChaCha8Rng) -> Result<Option<bool>>,
) -> Result<IdentityTally> {
    let (mut passed, mut skipped) = (0, 0);
    for t in 0..trials {
        let mut tries = 0;
        loop {
            match draw(t, rng)? {
                Some(ok) => {
                    passed += ok as usize;
                    break;
                }
                None => {
                    skipped += 1;
                    tries += 1;
                    if tries > MAX_REDRAWS {
                        return Err(Error::domain(format!("{name}: no valid draw after {MAX_REDRAWS} tries")));
                    }
                }
            }
        }
    }
    Ok(IdentityTally {
        identity: name.into(),
        passed,
        trials,
        skipped,
    })
}

/// Degenerate-draw errors become `None`; anything else propagates.
fn valid<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Domain(_) | Error::Pole(_) | Error::Precision(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn quadruple<R: Rng>(p: u32, d: usize, rng: &mut R) -> Vec<ProjPoint> {
    (0..4)
        .map(|_| ProjPoint::Finite(random_point(p, d, WINDOW_TOP, DIGITS, rng)))
        .collect()
}

/// `CR = p^{-δ}` on random quadruples of the window `B(0, p^3)`.
pub fn mmd_trials(trials: usize, rng: &mut ChaCha8Rng) -> Result<IdentityTally> {
    run("mmd", trials, rng, |t, rng| {
        let (p, d) = SHAPES[t % SHAPES.len()];
        let w = Window::new(p, d, WINDOW_TOP)?;
        let q = quadruple(p, d, rng);
        valid(check_mmd(&q[0], &q[1], &q[2], &q[3], &w))
    })
}

pub fn inversion_trials(trials: usize, rng: &mut ChaCha8Rng) -> Result<IdentityTally> {
    run("inversion", trials, rng, |t, rng| {
        let (p, d) = SHAPES[t % SHAPES.len()];
        let x = random_point(p, d, WINDOW_TOP, DIGITS, rng);
        let y = random_point(p, d, WINDOW_TOP, DIGITS, rng);
        if x.is_zero() || y.is_zero() || x == y {
            return Ok(None);
        }
        valid(check_inversion_identity(&x, &y))
    })
}

fn word_for<R: Rng>(fixed: Option<&MobiusWord>, t: usize, rng: &mut R) -> MobiusWord {
    match fixed {
        Some(w) => w.clone(),
        None => {
            let (p, d) = SHAPES[t % SHAPES.len()];
            random_word(p, d, WORD_LEN, 1, rng)
        }
    }
}

/// Cross-ratio invariance under random words (or one fixed word).
pub fn cross_ratio_trials(trials: usize, word: Option<&MobiusWord>, rng: &mut ChaCha8Rng) -> Result<IdentityTally> {
    run("cross-ratio", trials, rng, |t, rng| {
        let f = word_for(word, t, rng);
        let q = quadruple(f.p, f.d, rng);
        let Some(before) = valid(cross_ratio(&q[0], &q[1], &q[2], &q[3]))? else {
            return Ok(None);
        };
        let images: Vec<ProjPoint> = q.iter().map(|x| f.apply(x)).collect::<Result<_>>()?;
        Ok(valid(cross_ratio(&images[0], &images[1], &images[2], &images[3]))?.map(|after| after == before))
    })
}

/// Gaussian two-point covariance under Möbius maps, as exponents of `p`.
pub fn covariance_trials(trials: usize, word: Option<&MobiusWord>, rng: &mut ChaCha8Rng) -> Result<IdentityTally> {
    run("gaussian-mobius-covariance", trials, rng, |t, rng| {
        let f = word_for(word, t, rng);
        let x: PAdicPoint = random_point(f.p, f.d, 2, 24, rng);
        let y = random_point(f.p, f.d, 2, 24, rng);
        valid(mobius_covariance_check(&f, &x, &y))
    })
}

/// All four identities with independent streams of one seed.
pub fn conformal_checks(trials: usize, seed: u64, word: Option<&MobiusWord>) -> Result<Vec<IdentityTally>> {
    let stream = |s: u64| {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        r.set_stream(s);
        r
    };
    Ok(vec![
        cross_ratio_trials(trials, word, &mut stream(0))?,
        mmd_trials(trials, &mut stream(1))?,
        inversion_trials(trials, &mut stream(2))?,
        covariance_trials(trials, word, &mut stream(3))?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_identities_hold() {
        let tallies = conformal_checks(300, 7, None).unwrap();
        for t in &tallies {
            assert!(t.all_pass(), "{t:?}");
            assert_eq!(t.trials, 300);
        }
        assert_eq!(tallies, conformal_checks(300, 7, None).unwrap());
    }

    #[test]
    fn fixed_word() {
        let w = MobiusWord::parse("T(1,2);J;S(1);N", 3, 2).unwrap();
        let t = cross_ratio_trials(200, Some(&w), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(t.all_pass(), "{t:?}");
        let t = covariance_trials(200, Some(&w), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert!(t.all_pass(), "{t:?}");
    }
}
